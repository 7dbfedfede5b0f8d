#include "dsm/training.hpp"

#include <algorithm>
#include <ostream>
#include <set>
#include <stdexcept>

#include "dsm/rng.hpp"

namespace dsm {

TrainConfig::TrainConfig() {
  eval.count = 16;
  eval.seed = 1000003;
  shift.brightness = 0.15;
  shift.contrast = 1.4;
  shift.gamma = 1.3;
  shift.noise_std = 0.03;
}

bool TrainConfig::set(const std::string& key, const std::string& value) {
  auto prefixed = [&](const char* prefix, auto& target) {
    const std::string p(prefix);
    return key.rfind(p, 0) == 0 && target.set(key.substr(p.size()), value);
  };
  if (key == "steps") train.steps = parse_size(key, value);
  else if (key == "batch_size") train.batch_size = parse_size(key, value);
  else if (key == "learning_rate") train.learning_rate = parse_real(key, value);
  else if (key == "train_seed") train.seed = parse_u64(key, value);
  else if (key == "log_every") train.log_every = parse_size(key, value);
  else if (key == "shift.seed") shift_seed = parse_u64(key, value);
  else if (prefixed("data.", data) || prefixed("eval.", eval) || prefixed("shift.", shift)) return true;
  else return model.set(key, value);
  return true;
}

void TrainConfig::apply(const std::vector<KeyValue>& entries, const std::string& source) {
  std::set<std::string> eval_keys;
  for (const KeyValue& kv : entries) {
    if (kv.key.rfind("eval.", 0) == 0) eval_keys.insert(kv.key.substr(5));
    const std::string where = source + ":" + std::to_string(kv.line) + ": ";
    bool known = false;
    try {
      known = set(kv.key, kv.value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(where + e.what());
    }
    if (!known) throw ConfigError(where + "unknown key '" + kv.key + "'");
  }
  auto inherit = [&](const char* field, auto DatasetSpec::*member) {
    if (!eval_keys.count(field)) eval.*member = data.*member;
  };
  inherit("height", &DatasetSpec::height);
  inherit("width", &DatasetSpec::width);
  inherit("channels", &DatasetSpec::channels);
  inherit("max_disparity", &DatasetSpec::max_disparity);
  inherit("shape_density", &DatasetSpec::shape_density);
  inherit("background_disparity", &DatasetSpec::background_disparity);
  try {
    model.validate();
    data.validate();
    eval.validate();
    shift.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(source + ": " + e.what());
  }
}

TrainConfig load_train_config(const std::string& path) {
  TrainConfig c;
  c.apply(read_key_value_file(path), path);
  return c;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, Pcg32& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.bounded(static_cast<std::uint32_t>(i));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

std::vector<Real> train_model(StereoModel& model, const std::vector<Sample>& data,
                              const TrainOptions& options, const StepCallback& on_step) {
  if (data.empty()) throw std::invalid_argument("train_model: empty training set");
  if (options.batch_size == 0) throw std::invalid_argument("train_model: batch_size must be >= 1");
  const std::size_t bs = std::min(options.batch_size, data.size());
  Pcg32 rng(options.seed, 0x5eed);
  std::vector<std::size_t> order;
  std::size_t cursor = 0;
  std::vector<Real> losses;
  losses.reserve(options.steps);
  const AdamOptions adam{options.learning_rate};
  for (std::size_t step = 0; step < options.steps; ++step) {
    if (cursor + bs > order.size()) {
      order = shuffled_indices(data.size(), rng);
      cursor = 0;
    }
    const StereoBatch batch = make_batch(data, std::span(order).subspan(cursor, bs));
    cursor += bs;
    losses.push_back(model.train_step(batch, adam));
    if (on_step) on_step(step, losses.back());
  }
  return losses;
}

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    std::string item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

AblationGrid load_ablation_grid(const std::string& path) {
  AblationGrid grid;
  std::vector<KeyValue> rest;
  for (const KeyValue& kv : read_key_value_file(path)) {
    const std::string where = path + ":" + std::to_string(kv.line) + ": ";
    try {
      if (kv.key == "norms") {
        grid.norms.clear();
        for (const auto& s : split_list(kv.value)) grid.norms.push_back(parse_norm_mode(s));
      } else if (kv.key == "nlf") {
        grid.nlf.clear();
        for (const auto& s : split_list(kv.value)) {
          const auto colon = s.find(':');
          if (colon == std::string::npos) throw std::invalid_argument("nlf entries are feature:cost pairs");
          grid.nlf.emplace_back(parse_size("nlf", s.substr(0, colon)), parse_size("nlf", s.substr(colon + 1)));
        }
      } else if (kv.key == "seeds") {
        grid.seeds.clear();
        for (const auto& s : split_list(kv.value)) grid.seeds.push_back(parse_u64("seeds", s));
      } else {
        rest.push_back(kv);
      }
    } catch (const std::invalid_argument& e) {
      throw ConfigError(where + e.what());
    }
  }
  grid.base.apply(rest, path);
  if (grid.norms.empty() || grid.nlf.empty() || grid.seeds.empty())
    throw ConfigError(path + ": norms, nlf and seeds must be non-empty");
  return grid;
}

AblationRow run_arm(const TrainConfig& base, const AblationArm& arm, std::uint64_t seed,
                    const std::vector<Sample>& train, const std::vector<Sample>& eval_clean,
                    const std::vector<Sample>& eval_shifted) {
  ModelConfig mc = base.model;
  mc.norm_mode = arm.norm;
  mc.nlf_feature_layers = arm.nlf_feature;
  mc.nlf_cost_layers = arm.nlf_cost;
  mc.init_seed = seed;
  StereoModel model(mc);
  TrainOptions opts = base.train;
  opts.seed = derive_seed(seed, 17);
  const auto losses = train_model(model, train, opts);
  AblationRow row{arm, seed, evaluate(model, eval_clean), evaluate(model, eval_shifted),
                  losses.empty() ? 0 : losses.back()};
  return row;
}

std::vector<AblationRow> run_ablation(const AblationGrid& grid,
                                      const std::function<void(const AblationRow&)>& on_row) {
  const auto train = generate_rds(grid.base.data);
  const auto eval_clean = generate_rds(grid.base.eval);
  const auto eval_shifted = apply_shift(eval_clean, grid.base.shift, grid.base.shift_seed);
  std::vector<AblationRow> rows;
  for (NormMode norm : grid.norms)
    for (const auto& [f, c] : grid.nlf)
      for (std::uint64_t seed : grid.seeds) {
        rows.push_back(run_arm(grid.base, {norm, f, c}, seed, train, eval_clean, eval_shifted));
        if (on_row) on_row(rows.back());
      }
  return rows;
}

void write_ablation_header(std::ostream& os) {
  os << "norm\tnlf_feature\tnlf_cost\tseed\tclean_1px\tclean_2px\tclean_3px\tclean_epe"
        "\tshift_1px\tshift_2px\tshift_3px\tshift_epe\tfinal_loss\n";
}

void write_ablation_row(std::ostream& os, const AblationRow& r) {
  os << to_string(r.arm.norm) << '\t' << r.arm.nlf_feature << '\t' << r.arm.nlf_cost << '\t' << r.seed;
  for (const Metrics* m : {&r.clean, &r.shifted})
    os << '\t' << m->rate1 << '\t' << m->rate2 << '\t' << m->rate3 << '\t' << m->epe;
  os << '\t' << r.final_loss << '\n';
}

void write_ablation_table(std::ostream& os, const std::vector<AblationRow>& rows) {
  write_ablation_header(os);
  for (const AblationRow& r : rows) write_ablation_row(os, r);
}

}  // namespace dsm
