#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "hpsmp/params.hpp"

namespace hpsmp {

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam. Moment accumulators are keyed by parameter name and
/// created lazily at zero, so a fresh state with zero gradients is a no-op.
class AdamState {
 public:
  /// Applies one update step using each trainable tensor's current gradient
  /// (a missing gradient counts as zero). Increments the step counter.
  void step(ParamSet& params, const AdamConfig& config);

  std::int64_t steps_taken() const { return step_; }

 private:
  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
  };
  std::unordered_map<std::string, Moments> moments_;
  std::int64_t step_ = 0;
};

}  // namespace hpsmp
