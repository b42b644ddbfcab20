#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace hpsmp {

/// Deterministic 64-bit generator (splitmix64). The standard <random>
/// distributions are not bit-identical across library implementations, so
/// everything that must reproduce across platforms draws from this class.
///
/// All randomness in a run flows from one master seed through named
/// sub-streams (`Rng::substream`), so components can be re-run in isolation
/// without disturbing each other's draws.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  /// Derives an independent stream from (master seed, stream name).
  static Rng substream(std::uint64_t master_seed, std::string_view name) {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a over the name
    for (unsigned char c : name) {
      h ^= c;
      h *= 1099511628211ull;
    }
    Rng r(master_seed ^ h);
    r.next();  // decorrelate nearby seeds
    return r;
  }

  std::uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1).
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_int(std::uint64_t n) { return next() % n; }

  bool bernoulli(double p) { return uniform01() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// k distinct indices drawn uniformly from [0, n), in draw order.
  std::vector<int> sample_without_replacement(int n, int k) {
    std::vector<int> pool(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(pool.size()));
      out.push_back(pool[j]);
      pool[j] = pool.back();
      pool.pop_back();
    }
    return out;
  }

 private:
  std::uint64_t state_;
};

}  // namespace hpsmp
