#pragma once

#include <optional>
#include <span>
#include <vector>

#include "hpsmp/action.hpp"

namespace hpsmp {

/// Rolling mean over a trailing window. The first window-1 positions are
/// undefined (nullopt) and excluded from signal generation.
std::vector<std::optional<double>> sma(std::span<const double> prices, int window = 5);

/// Exponential moving average with alpha = 2 / (period + 1), seeded with the
/// first price.
std::vector<double> ema(std::span<const double> prices, int period);

/// MACD series triple plus crossover actions. The defaults (12, 26, 9) are
/// the conventional fast/slow/signal periods.
struct MacdState {
  int fast_period = 12;
  int slow_period = 26;
  int signal_period = 9;
  std::vector<double> value;       // EMA_fast - EMA_slow
  std::vector<double> signal;      // EMA_signal of value
  std::vector<double> divergence;  // value - signal
  /// BUY where divergence crosses from <= 0 to > 0, SELL on the opposite
  /// crossing, HOLD elsewhere. BUY/SELL strictly alternate.
  std::vector<Action> actions;
};

MacdState macd(std::span<const double> prices, int fast = 12, int slow = 26, int signal = 9);

/// Price/SMA crossover rule: BUY when the price crosses above its SMA, SELL
/// when it crosses below, HOLD otherwise.
std::vector<Action> sma_signal(std::span<const double> prices, int window = 5);

}  // namespace hpsmp
