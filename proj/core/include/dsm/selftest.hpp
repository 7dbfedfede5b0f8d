#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dsm {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct SelftestOptions {
  std::uint64_t seed = 20240611;
  /// Random instances per gradient check family.
  std::size_t grad_seeds = 20;
};

CheckResult check_unit_mass(const SelftestOptions& o = {});
CheckResult check_path_oracle(const SelftestOptions& o = {});
CheckResult check_gradients(const SelftestOptions& o = {});
CheckResult check_domain_norm(const SelftestOptions& o = {});
CheckResult check_special_cases(const SelftestOptions& o = {});
CheckResult check_linear_complexity(const SelftestOptions& o = {});

/// All of the above, in order.
std::vector<CheckResult> run_selftest(const SelftestOptions& o = {});

}  // namespace dsm
