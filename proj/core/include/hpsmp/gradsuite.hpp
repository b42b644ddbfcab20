#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hpsmp/gradcheck.hpp"

namespace hpsmp {

struct GradSuiteResult {
  std::string name;
  GradCheckReport report;
};

/// Finite-difference checks over every differentiable op plus both model
/// paths and the fused forward, on tiny configurations. Deterministic for a
/// fixed seed; inputs are drawn away from kinks (relu, max-pool ties, clamp
/// edges) so the central differences are valid.
std::vector<GradSuiteResult> run_gradient_suite(std::uint64_t seed, double tol = 1e-4);

bool all_passed(const std::vector<GradSuiteResult>& results);

}  // namespace hpsmp
