#include "cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <ostream>

#include "dsm/checkpoint.hpp"
#include "dsm/config.hpp"
#include "dsm/dataset.hpp"
#include "dsm/image_io.hpp"
#include "dsm/metrics.hpp"
#include "dsm/nonlocal_filter.hpp"
#include "dsm/selftest.hpp"
#include "dsm/training.hpp"

namespace dsm {

namespace {

/// Error raised for bad argument values after CLI11 parsing succeeded.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// "brightness=0.1,gains=1,0.9,1.1,noise=0.02": items without '=' extend the
/// previous value.
DomainShift parse_shift(const std::string& text, DomainShift shift = {}) {
  std::vector<std::pair<std::string, std::string>> items;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const std::string item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    const auto eq = item.find('=');
    if (eq != std::string::npos) items.emplace_back(item.substr(0, eq), item.substr(eq + 1));
    else if (!items.empty()) items.back().second += "," + item;
    else if (!item.empty()) throw UsageError("--shift: expected key=value, got '" + item + "'");
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  for (const auto& [k, v] : items) {
    try {
      if (!shift.set(k, v)) throw UsageError("--shift: unknown key '" + k + "'");
    } catch (const std::invalid_argument& e) {
      throw UsageError(std::string("--shift: ") + e.what());
    }
  }
  shift.validate();
  return shift;
}

struct DataFile {
  DatasetSpec spec;
  DomainShift shift;
  std::uint64_t shift_seed = 7;
};

/// Dataset spec file: DatasetSpec keys, plus shift.<field> and shift.seed.
DataFile load_data_file(const std::string& path) {
  DataFile d;
  for (const KeyValue& kv : read_key_value_file(path)) {
    const std::string where = path + ":" + std::to_string(kv.line) + ": ";
    bool known = false;
    try {
      if (kv.key == "shift.seed") {
        d.shift_seed = parse_u64(kv.key, kv.value);
        known = true;
      } else if (kv.key.rfind("shift.", 0) == 0) {
        known = d.shift.set(kv.key.substr(6), kv.value);
      } else {
        known = d.spec.set(kv.key, kv.value);
      }
    } catch (const std::invalid_argument& e) {
      throw ConfigError(where + e.what());
    }
    if (!known) throw ConfigError(where + "unknown key '" + kv.key + "'");
  }
  try {
    d.spec.validate();
    d.shift.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return d;
}

void print_metrics_header(std::ostream& out) { out << "set\t1px\t2px\t3px\tepe\tvalid\n"; }

void print_metrics(std::ostream& out, const std::string& label, const Metrics& m) {
  out << label << '\t' << std::setprecision(10) << m.rate1 << '\t' << m.rate2 << '\t' << m.rate3
      << '\t' << m.epe << '\t' << m.valid << '\n';
}

std::vector<std::uint8_t> mask_from_image(const Tensor4& img) {
  std::vector<std::uint8_t> mask(img.h() * img.w());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = img.data()[i] > 0.5 ? 1 : 0;
  return mask;
}

Tensor4 mask_to_image(const std::vector<std::uint8_t>& mask, std::size_t h, std::size_t w) {
  Tensor4 img(1, 1, h, w);
  for (std::size_t i = 0; i < mask.size(); ++i) img.data()[i] = mask[i] ? 1 : 0;
  return img;
}

int run_selftest_cmd(std::ostream& out, std::uint64_t seed) {
  SelftestOptions o;
  o.seed = seed;
  bool ok = true;
  for (const CheckResult& r : run_selftest(o)) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
    ok = ok && r.passed;
  }
  out << (ok ? "selftest passed\n" : "selftest FAILED\n");
  return ok ? 0 : 1;
}

int run_train(std::ostream& out, const std::string& config_path, const std::string& ckpt,
              std::size_t log_every_override) {
  TrainConfig cfg = load_train_config(config_path);
  if (log_every_override) cfg.train.log_every = log_every_override;
  const auto train = generate_rds(cfg.data);
  StereoModel model(cfg.model);
  out << "training " << cfg.train.steps << " steps on " << train.size() << " samples\n";
  train_model(model, train, cfg.train, [&](std::size_t step, Real loss) {
    if (cfg.train.log_every && (step + 1) % cfg.train.log_every == 0)
      out << "step " << step + 1 << "\tloss " << loss << std::endl;
  });
  save_checkpoint(ckpt, model);
  const auto eval = generate_rds(cfg.eval);
  print_metrics_header(out);
  print_metrics(out, "clean", evaluate(model, eval));
  print_metrics(out, "shifted", evaluate(model, apply_shift(eval, cfg.shift, cfg.shift_seed)));
  out << "wrote " << ckpt << '\n';
  return 0;
}

int run_make_data(std::ostream& out, const std::string& spec_path, const std::string& dir,
                  const std::string& shift_text) {
  DataFile d = load_data_file(spec_path);
  if (!shift_text.empty()) d.shift = parse_shift(shift_text, d.shift);
  auto samples = generate_rds(d.spec);
  if (!d.shift.is_identity()) samples = apply_shift(samples, d.shift, d.shift_seed);
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "%04zu", i);
    const std::string base = (std::filesystem::path(dir) / stem).string();
    const Sample& s = samples[i];
    const char* ext = s.left.c() == 3 ? ".ppm" : ".pgm";
    write_pnm(base + "_left" + ext, s.left);
    write_pnm(base + "_right" + ext, s.right);
    write_pfm(base + "_gt.pfm", s.gt);
    write_pnm(base + "_mask.pgm", mask_to_image(s.mask, s.gt.h(), s.gt.w()));
  }
  out << "wrote " << samples.size() << " samples to " << dir << '\n';
  return 0;
}

int run_eval_model(std::ostream& out, const std::string& ckpt, const std::string& data_path,
                   const std::string& shift_text) {
  StereoModel model = load_checkpoint(ckpt);
  DataFile d = load_data_file(data_path);
  if (!shift_text.empty()) d.shift = parse_shift(shift_text, d.shift);
  auto samples = generate_rds(d.spec);
  const bool shifted = !d.shift.is_identity();
  if (shifted) samples = apply_shift(samples, d.shift, d.shift_seed);
  print_metrics_header(out);
  print_metrics(out, shifted ? "shifted" : "clean", evaluate(model, samples));
  return 0;
}

int run_eval_files(std::ostream& out, const std::string& pred, const std::string& gt,
                   const std::string& mask_path) {
  const Tensor4 p = read_pfm(pred);
  const Tensor4 g = read_pfm(gt);
  std::vector<std::uint8_t> mask(g.size(), 1);
  if (!mask_path.empty()) mask = mask_from_image(read_pnm(mask_path));
  print_metrics_header(out);
  print_metrics(out, "file", compute_metrics(p, g, mask));
  return 0;
}

int run_infer(std::ostream& out, const std::string& ckpt, const std::string& left,
              const std::string& right, const std::string& dst) {
  StereoModel model = load_checkpoint(ckpt);
  const Tensor4 l = read_pnm(left), r = read_pnm(right);
  const Tensor4 disp = model.forward(l, r, {false, false});
  write_pfm(dst, disp);
  out << "wrote " << dst << " (" << disp.w() << "x" << disp.h() << ")\n";
  return 0;
}

/// Each intensity v becomes (cos(pi v), sin(pi v)), so the cosine between two
/// pixels is cos(pi * difference): 1 for equal values, clamped to the weight
/// floor once they differ by more than half the range.
Tensor4 intensity_embedding(const Tensor4& img) {
  Tensor4 g(img.n(), 2 * img.c(), img.h(), img.w());
  for (std::size_t n = 0; n < img.n(); ++n)
    for (std::size_t c = 0; c < img.c(); ++c) {
      auto src = img.plane(n, c);
      auto gc = g.plane(n, 2 * c);
      auto gs = g.plane(n, 2 * c + 1);
      for (std::size_t i = 0; i < src.size(); ++i) {
        gc[i] = std::cos(std::numbers::pi * src[i]);
        gs[i] = std::sin(std::numbers::pi * src[i]);
      }
    }
  return g;
}

int run_filter_demo(std::ostream& out, const std::string& in, const std::string& dst, std::size_t passes) {
  Tensor4 img = read_pnm(in);
  const Tensor4 guide = intensity_embedding(img);
  for (std::size_t i = 0; i < passes; ++i) img = filter_2d(img, guide);
  write_pnm(dst, img);
  out << "filtered " << img.w() << "x" << img.h() << " image with " << passes << " pass(es) -> " << dst << '\n';
  return 0;
}

int run_ablate(std::ostream& out, const std::string& grid_path, const std::string& table_path) {
  const AblationGrid grid = load_ablation_grid(grid_path);
  std::ofstream table;
  if (!table_path.empty()) {
    table.open(table_path);
    if (!table) throw std::runtime_error(table_path + ": cannot open for writing");
    write_ablation_header(table);
  }
  write_ablation_header(out);
  run_ablation(grid, [&](const AblationRow& row) {
    write_ablation_row(out, row);
    out.flush();
    if (table.is_open()) {
      write_ablation_row(table, row);
      table.flush();
    }
  });
  return 0;
}

int run_norm_hist(std::ostream& out, const std::string& ckpt, const std::string& mode,
                  const std::string& data_path, const std::string& shift_text, std::size_t site,
                  std::size_t bins) {
  ModelConfig mc;
  if (!mode.empty()) mc.norm_mode = parse_norm_mode(mode);
  StereoModel model = ckpt.empty() ? StereoModel(mc) : load_checkpoint(ckpt);
  DataFile d;
  d.spec.count = 4;
  if (!data_path.empty()) d = load_data_file(data_path);
  if (!shift_text.empty()) d.shift = parse_shift(shift_text, d.shift);
  auto samples = generate_rds(d.spec);
  if (!d.shift.is_identity()) samples = apply_shift(samples, d.shift, d.shift_seed);
  std::vector<std::size_t> idx(samples.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const StereoBatch b = make_batch(samples, idx);
  ForwardState state;
  model.extract_features(b.left, state, {false, false});
  if (site >= state.norm_saved.size())
    throw UsageError("--site " + std::to_string(site) + " out of range; model has " +
                     std::to_string(state.norm_saved.size()) + " normalization sites");
  write_histogram(out, norm_histogram(state.norm_saved[site].x_prime, bins));
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Domain-normalized stereo matching with non-local cost filtering", "dsmkit"};
  app.require_subcommand(1);

  std::uint64_t seed = SelftestOptions{}.seed;
  auto* selftest = app.add_subcommand("selftest", "Run oracle and invariant checks; exit 0 iff all pass");
  selftest->add_option("--seed", seed, "Seed for random instances");

  std::string config, ckpt, data, shift, pred, gt, mask, left, right, in, dst, grid, mode;
  std::size_t log_every = 0, passes = 1, site = 0, bins = 21;

  auto* train = app.add_subcommand("train", "Train a model from a config file and save a checkpoint");
  train->add_option("--config", config, "key = value config file")->required()->check(CLI::ExistingFile);
  train->add_option("--out", dst, "Checkpoint path")->required();
  train->add_option("--log-every", log_every, "Print the loss every N steps");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset spec, or a PFM prediction");
  auto* eval_ckpt = eval->add_option("--ckpt", ckpt, "Checkpoint")->check(CLI::ExistingFile);
  auto* eval_data = eval->add_option("--data", data, "Dataset spec file")->check(CLI::ExistingFile);
  eval->add_option("--shift", shift, "Domain shift, e.g. brightness=0.15,contrast=1.4,gamma=1.3,noise=0.03");
  auto* eval_pred = eval->add_option("--pred", pred, "Predicted disparity PFM")->check(CLI::ExistingFile);
  auto* eval_gt = eval->add_option("--gt", gt, "Ground-truth disparity PFM")->check(CLI::ExistingFile);
  eval->add_option("--mask", mask, "Validity mask PGM (non-zero = valid)")->check(CLI::ExistingFile);
  eval_ckpt->needs(eval_data);
  eval_data->needs(eval_ckpt);
  eval_pred->needs(eval_gt);
  eval_gt->needs(eval_pred);
  eval_pred->excludes(eval_ckpt);

  auto* infer = app.add_subcommand("infer", "Predict a disparity map for one stereo pair");
  infer->add_option("--ckpt", ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  infer->add_option("--left", left, "Left image (PGM/PPM)")->required()->check(CLI::ExistingFile);
  infer->add_option("--right", right, "Right image (PGM/PPM)")->required()->check(CLI::ExistingFile);
  infer->add_option("--out", dst, "Output PFM")->required();

  auto* demo = app.add_subcommand("filter-demo", "Edge-aware smoothing of an image guided by itself");
  demo->add_option("--in", in, "Input PGM/PPM")->required()->check(CLI::ExistingFile);
  demo->add_option("--out", dst, "Output PGM/PPM")->required();
  demo->add_option("--passes", passes, "Number of filter passes")->check(CLI::Range(1, 64));

  auto* ablate = app.add_subcommand("ablate", "Train and evaluate a norm x filter-count grid");
  ablate->add_option("--grid", grid, "Grid file")->required()->check(CLI::ExistingFile);
  ablate->add_option("--out", dst, "Also write the table to this file");

  auto* make_data = app.add_subcommand("make-data", "Write a synthetic dataset as PNM/PFM files");
  make_data->add_option("--spec", data, "Dataset spec file")->required()->check(CLI::ExistingFile);
  make_data->add_option("--out", dst, "Output directory")->required();
  make_data->add_option("--shift", shift, "Domain shift applied to both views");

  auto* hist = app.add_subcommand("norm-hist", "Histogram of per-pixel feature norms after a normalization site");
  hist->add_option("--ckpt", ckpt, "Checkpoint (default: untrained model)")->check(CLI::ExistingFile);
  hist->add_option("--norm", mode, "Norm mode for the untrained model: BN, IN or DN");
  hist->add_option("--data", data, "Dataset spec file")->check(CLI::ExistingFile);
  hist->add_option("--shift", shift, "Domain shift");
  hist->add_option("--site", site, "Normalization site index");
  hist->add_option("--bins", bins, "Histogram bins over [0, 2]")->check(CLI::Range(2, 10000));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*selftest) return run_selftest_cmd(out, seed);
    if (*train) return run_train(out, config, dst, log_every);
    if (*eval) {
      if (!pred.empty()) return run_eval_files(out, pred, gt, mask);
      if (ckpt.empty()) throw UsageError("eval needs --ckpt and --data, or --pred and --gt");
      return run_eval_model(out, ckpt, data, shift);
    }
    if (*infer) return run_infer(out, ckpt, left, right, dst);
    if (*demo) return run_filter_demo(out, in, dst, passes);
    if (*ablate) return run_ablate(out, grid, dst);
    if (*make_data) return run_make_data(out, data, dst, shift);
    if (*hist) return run_norm_hist(out, ckpt, mode, data, shift, site, bins);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace dsm
