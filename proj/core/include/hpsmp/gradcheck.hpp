#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hpsmp/params.hpp"
#include "hpsmp/tensor.hpp"

namespace hpsmp {

struct GradCheckReport {
  bool pass = false;
  /// False when a non-finite value showed up anywhere (reported, not thrown).
  bool finite = true;
  double max_rel_err = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  std::size_t coords_checked = 0;
};

/// Builds a scalar loss on the graph from the given parameters. Must be
/// deterministic: stochastic layers (dropout) have to run disabled.
using LossFn = std::function<Tensor(Graph&, ParamSet&)>;

/// Compares reverse-mode gradients of f against central finite differences
/// for every coordinate of every trainable tensor in params.
///
/// Relative error uses a guarded denominator max(|a|, |n|, guard) so that
/// finite-difference noise on near-zero gradients does not dominate.
GradCheckReport grad_check(const LossFn& f, ParamSet& params, double tol,
                           double fd_step = 1e-5, double guard = 1e-3);

/// Single-tensor convenience wrapper.
GradCheckReport grad_check(const std::function<Tensor(Graph&, const Tensor&)>& f,
                           const Tensor& point, double tol, double fd_step = 1e-5);

/// Low-level comparison of two flat gradient vectors (used directly by
/// negative-control tests that feed deliberately corrupted adjoints).
GradCheckReport compare_gradients(const std::vector<double>& analytic,
                                  const std::vector<double>& numeric, double tol,
                                  double guard = 1e-3);

}  // namespace hpsmp
