#include "hpsmp/indicators.hpp"

#include "hpsmp/errors.hpp"
#include "hpsmp/log.hpp"

namespace hpsmp {

std::vector<std::optional<double>> sma(std::span<const double> prices, int window) {
  if (window < 1) throw ContractError("sma: window must be >= 1");
  std::vector<std::optional<double>> out(prices.size());
  if (static_cast<std::size_t>(window) > prices.size()) {
    log_warning("sma: window " + std::to_string(window) + " exceeds series length " +
                std::to_string(prices.size()) + ", every position is undefined");
    return out;
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < prices.size(); ++i) {
    acc += prices[i];
    if (i >= static_cast<std::size_t>(window)) acc -= prices[i - static_cast<std::size_t>(window)];
    if (i + 1 >= static_cast<std::size_t>(window)) out[i] = acc / window;
  }
  return out;
}

std::vector<double> ema(std::span<const double> prices, int period) {
  if (period < 1) throw ContractError("ema: period must be >= 1");
  std::vector<double> out;
  out.reserve(prices.size());
  if (prices.empty()) return out;
  const double alpha = 2.0 / (period + 1.0);
  double e = prices[0];
  out.push_back(e);
  for (std::size_t i = 1; i < prices.size(); ++i) {
    e = alpha * prices[i] + (1.0 - alpha) * e;
    out.push_back(e);
  }
  return out;
}

MacdState macd(std::span<const double> prices, int fast, int slow, int signal) {
  if (fast < 1 || slow < 1 || signal < 1) throw ContractError("macd: periods must be >= 1");
  if (fast >= slow) throw ContractError("macd: fast period must be shorter than slow period");
  if (prices.size() <= static_cast<std::size_t>(slow)) {
    throw ContractError("macd: series length " + std::to_string(prices.size()) +
                        " must exceed the slow period " + std::to_string(slow));
  }
  MacdState state;
  state.fast_period = fast;
  state.slow_period = slow;
  state.signal_period = signal;
  const std::vector<double> ema_fast = ema(prices, fast);
  const std::vector<double> ema_slow = ema(prices, slow);
  state.value.resize(prices.size());
  for (std::size_t i = 0; i < prices.size(); ++i) state.value[i] = ema_fast[i] - ema_slow[i];
  state.signal = ema(state.value, signal);
  state.divergence.resize(prices.size());
  for (std::size_t i = 0; i < prices.size(); ++i) {
    state.divergence[i] = state.value[i] - state.signal[i];
  }
  state.actions.assign(prices.size(), Action::Hold);
  for (std::size_t i = 1; i < prices.size(); ++i) {
    const double prev = state.divergence[i - 1];
    const double cur = state.divergence[i];
    if (prev <= 0.0 && cur > 0.0) {
      state.actions[i] = Action::Buy;
    } else if (prev > 0.0 && cur <= 0.0) {
      state.actions[i] = Action::Sell;
    }
  }
  return state;
}

std::vector<Action> sma_signal(std::span<const double> prices, int window) {
  const auto avg = sma(prices, window);
  std::vector<Action> out(prices.size(), Action::Hold);
  // A price exactly on its mean keeps the previous side, so convergence onto
  // the SMA does not fire a signal.
  int side = 0;  // +1 above, -1 at/below, 0 before the first defined mean
  for (std::size_t i = 0; i < prices.size(); ++i) {
    if (!avg[i]) continue;
    int now;
    if (prices[i] > *avg[i]) {
      now = 1;
    } else if (prices[i] < *avg[i]) {
      now = -1;
    } else {
      now = side == 0 ? -1 : side;
    }
    if (side == -1 && now == 1) {
      out[i] = Action::Buy;
    } else if (side == 1 && now == -1) {
      out[i] = Action::Sell;
    }
    side = now;
  }
  return out;
}

}  // namespace hpsmp
