#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dsm/tensor.hpp"

namespace dsm {

/// Loss value plus a signature of every non-smooth branch taken (ReLU masks,
/// clamp gates). Two evaluations with different signatures straddle a kink.
struct Evaluation {
  Real loss = 0;
  std::uint64_t branch_signature = 0;
};

/// A block of coordinates to probe, with the analytic gradient computed at the
/// current point.
struct GradTarget {
  std::string name;
  std::span<Real> values;
  std::span<const Real> analytic;
};

struct GradCheckOptions {
  Real step = 1e-5;
  /// Coordinates probed per target; all of them when the target is smaller.
  std::size_t max_coords_per_target = 24;
  std::uint64_t seed = 1;
  /// Relative error is |a - n| / max(|a|, |n|, abs_floor).
  Real abs_floor = 1e-8;
  /// Probes use a Richardson-extrapolated central difference (steps h and
  /// h/2). When a probe changes the branch signature, a third-order one-sided
  /// difference on the unchanged side is used; when neither works, the probe
  /// is retried with step/10 this many times before the coordinate is skipped.
  int kink_retries = 2;
};

struct CoordinateError {
  std::string target;
  std::size_t index = 0;
  Real analytic = 0;
  Real numeric = 0;
  Real rel_error = 0;
};

struct GradCheckReport {
  Real max_rel_error = 0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
  CoordinateError worst;
};

/// Central-difference check of `analytic` gradients on a seeded random
/// subsample of coordinates. Throws std::domain_error if the loss is not
/// finite. Coordinate values are restored afterwards.
GradCheckReport grad_check(const std::function<Evaluation()>& f,
                           std::span<const GradTarget> targets,
                           const GradCheckOptions& options = {});

/// Convenience overload for smooth scalar functions.
GradCheckReport grad_check(const std::function<Real()>& f, std::span<const GradTarget> targets,
                           const GradCheckOptions& options = {});

}  // namespace dsm
