#include "dsm/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>

#include "dsm/rng.hpp"

namespace dsm {

namespace {

Evaluation checked(const std::function<Evaluation()>& f) {
  Evaluation e = f();
  if (!std::isfinite(e.loss)) throw std::domain_error("grad_check: loss is not finite");
  return e;
}

std::vector<std::size_t> pick_coordinates(std::size_t size, std::size_t limit, Pcg32& rng) {
  std::vector<std::size_t> idx(size);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (size <= limit) return idx;
  // Partial Fisher-Yates: the first `limit` entries become the sample.
  for (std::size_t i = 0; i < limit; ++i) {
    const auto j = i + rng.bounded(static_cast<std::uint32_t>(size - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(limit);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

GradCheckReport grad_check(const std::function<Evaluation()>& f,
                           std::span<const GradTarget> targets, const GradCheckOptions& o) {
  GradCheckReport report;
  const Evaluation base = checked(f);
  Pcg32 rng(o.seed, 0x6772616463686bull);

  for (const GradTarget& t : targets) {
    if (t.analytic.size() != t.values.size())
      throw ShapeError("grad_check: target '" + t.name + "' has " +
                       std::to_string(t.values.size()) + " values but " +
                       std::to_string(t.analytic.size()) + " gradient entries");
    for (std::size_t i : pick_coordinates(t.values.size(), o.max_coords_per_target, rng)) {
      const Real original = t.values[i];
      Real step = o.step;
      bool smooth = false;
      Real numeric = 0;
      auto at = [&](Real offset) {
        t.values[i] = original + offset;
        const Evaluation e = checked(f);
        t.values[i] = original;
        return e;
      };
      // Loss at original + k*h, or nothing when the branch signature changes.
      auto loss_at = [&](int k, Real h) -> std::optional<Real> {
        const Evaluation e = at(k * h);
        if (e.branch_signature != base.branch_signature) return std::nullopt;
        return e.loss;
      };
      for (int attempt = 0; attempt <= o.kink_retries && !smooth; ++attempt, step /= 10) {
        // Richardson-extrapolated central difference, O(step^4).
        const auto p1 = loss_at(1, step), m1 = loss_at(-1, step);
        const auto p2 = loss_at(1, step / 2), m2 = loss_at(-1, step / 2);
        if (p1 && m1 && p2 && m2) {
          const Real wide = (*p1 - *m1) / (2 * step);
          const Real narrow = (*p2 - *m2) / step;
          numeric = (4 * narrow - wide) / 3;
          smooth = true;
          break;
        }
        // Third-order one-sided difference on a side without a kink.
        for (int sign : {1, -1}) {
          const auto f1 = loss_at(sign, step), f2 = loss_at(2 * sign, step), f3 = loss_at(3 * sign, step);
          if (!f1 || !f2 || !f3) continue;
          numeric = sign * (-11 * base.loss + 18 * *f1 - 9 * *f2 + 2 * *f3) / (6 * step);
          smooth = true;
          break;
        }
      }
      if (!smooth) {
        ++report.skipped_kinks;
        continue;
      }
      const Real a = t.analytic[i];
      const Real denom = std::max({std::abs(a), std::abs(numeric), o.abs_floor});
      const Real rel = std::abs(a - numeric) / denom;
      ++report.checked;
      if (rel >= report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst = CoordinateError{t.name, i, a, numeric, rel};
      }
    }
  }
  return report;
}

GradCheckReport grad_check(const std::function<Real()>& f, std::span<const GradTarget> targets,
                           const GradCheckOptions& options) {
  return grad_check(std::function<Evaluation()>([&f] { return Evaluation{f(), 0}; }), targets,
                    options);
}

}  // namespace dsm
