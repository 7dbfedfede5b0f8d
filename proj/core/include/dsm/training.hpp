#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "dsm/config.hpp"
#include "dsm/dataset.hpp"
#include "dsm/metrics.hpp"
#include "dsm/optim.hpp"
#include "dsm/rng.hpp"
#include "dsm/stereo_model.hpp"

namespace dsm {

struct TrainOptions {
  std::size_t steps = 2000;
  std::size_t batch_size = 2;
  Real learning_rate = 1e-3;
  std::uint64_t seed = 1;  // batch order
  std::size_t log_every = 0;
};

/// Everything `dsmkit train` reads from its config file. Keys:
///   model fields as-is (norm_mode, feature_channels, ...),
///   steps, batch_size, learning_rate, train_seed, log_every,
///   data.<field> for the training set, eval.<field> for the held-out set,
///   shift.<field> for the shifted evaluation.
/// Image geometry and disparity range of the held-out set follow data.* unless
/// set explicitly.
struct TrainConfig {
  ModelConfig model;
  TrainOptions train;
  DatasetSpec data;
  DatasetSpec eval;
  DomainShift shift;
  std::uint64_t shift_seed = 7;

  TrainConfig();
  /// Applies entries in order; unknown keys raise ConfigError with position.
  void apply(const std::vector<KeyValue>& entries, const std::string& source);
  /// Applies one entry. Returns false for unknown keys.
  bool set(const std::string& key, const std::string& value);
};

TrainConfig load_train_config(const std::string& path);

using StepCallback = std::function<void(std::size_t step, Real loss)>;

/// Adam on seeded shuffled mini-batches (epoch-wise reshuffle). Returns the
/// pre-update loss of every step.
std::vector<Real> train_model(StereoModel& model, const std::vector<Sample>& data,
                              const TrainOptions& options, const StepCallback& on_step = {});

/// Deterministic Fisher-Yates permutation of 0..n-1.
std::vector<std::size_t> shuffled_indices(std::size_t n, Pcg32& rng);

/// One ablation arm: normalization mode and filter counts.
struct AblationArm {
  NormMode norm = NormMode::Domain;
  std::size_t nlf_feature = 0;
  std::size_t nlf_cost = 0;
};

struct AblationRow {
  AblationArm arm;
  std::uint64_t seed = 0;
  Metrics clean;
  Metrics shifted;
  Real final_loss = 0;
};

/// Grid file keys: every TrainConfig key, plus
///   norms = BN,IN,DN
///   nlf = 0:0,2:1      (feature:cost filter counts per arm)
///   seeds = 1,2,3
struct AblationGrid {
  TrainConfig base;
  std::vector<NormMode> norms{NormMode::Batch, NormMode::Instance, NormMode::Domain};
  std::vector<std::pair<std::size_t, std::size_t>> nlf{{0, 0}, {2, 1}};
  std::vector<std::uint64_t> seeds{1};
};

AblationGrid load_ablation_grid(const std::string& path);

/// Trains one model for `arm` with `seed` driving initialization and batch
/// order, then evaluates on the clean and shifted held-out sets.
AblationRow run_arm(const TrainConfig& base, const AblationArm& arm, std::uint64_t seed,
                    const std::vector<Sample>& train, const std::vector<Sample>& eval_clean,
                    const std::vector<Sample>& eval_shifted);

std::vector<AblationRow> run_ablation(const AblationGrid& grid,
                                      const std::function<void(const AblationRow&)>& on_row = {});

/// Tab-separated table with a header row.
void write_ablation_table(std::ostream& os, const std::vector<AblationRow>& rows);
void write_ablation_header(std::ostream& os);
void write_ablation_row(std::ostream& os, const AblationRow& row);

}  // namespace dsm
