#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hpsmp/action.hpp"
#include "hpsmp/data.hpp"

namespace hpsmp {

enum class StrategyKind { FiftyFifty, SixtyForty, HoldSignal, HoldPeriod };

StrategyKind strategy_kind_from_string(const std::string& s);
const char* to_string(StrategyKind kind);

/// Signal thresholds plus execution costs. 50-50 trades every day (tie at
/// exactly 0.5 is a BUY); 60-40 holds inside the (0.4, 0.6) band. The hold
/// strategies use the 50-50 thresholds to locate their entry/exit signals.
struct StrategyConfig {
  StrategyKind kind = StrategyKind::FiftyFifty;
  double buy_threshold = 0.5;
  double sell_threshold = 0.5;
  double transaction_cost_rate = 0.003;
  int shares = 100;
  std::optional<Date> start_date;
  std::optional<Date> end_date;

  static StrategyConfig fifty_fifty();
  static StrategyConfig sixty_forty();
  static StrategyConfig hold_signal();
  static StrategyConfig hold_period();
  static StrategyConfig for_kind(StrategyKind kind);

  void validate() const;
};

/// score < sell_threshold -> SELL; score >= buy_threshold -> BUY; else HOLD.
Action signal(double score, const StrategyConfig& config);

/// r_t = p_t / p_prev - 1.
double daily_return(double p_t, double p_prev);
/// R_t = w_prev * r_t with w in [0, 1].
double weighted_return(double w_prev, double r_t);

struct TradeEvent {
  Date date;
  Action action;  // the executed action for the day
  double price = 0.0;
  double cost = 0.0;
  int position_after = 0;  // shares held after this day
  double cash_delta = 0.0;
  bool forced_close = false;
};

/// Complete daily record of one backtest: every day appears once; fills
/// carry their cost and cash movement. Cash starts at zero and the run ends
/// flat, so profit equals final cash.
struct TradeLedger {
  std::vector<TradeEvent> events;
  std::vector<Date> return_dates;        // days 1..n-1
  std::vector<double> daily_returns;     // r_t
  std::vector<double> weighted_returns;  // R_t = w_{t-1} * r_t
  double profit = 0.0;
  double total_cost = 0.0;
  int n_trades = 0;  // executed fills (BUY + SELL)
  bool forced_close = false;
  /// Net return of each completed round trip (costs included).
  std::vector<double> trade_returns;
  /// profit divided by the first BUY notional; 0 when nothing traded.
  double period_return = 0.0;
};

/// Walks the days in order, filling BUY when flat and SELL when long at the
/// day's adjusted close, charging cost_rate x notional per fill. An open
/// position at the end is closed at the final adjusted close and flagged;
/// the final day never opens a new position. The day weight w_t for R_t is
/// the day's score.
TradeLedger simulate(std::span<const DayRecord> days, std::span<const double> scores,
                     const StrategyConfig& config);

/// Same engine driven by precomputed actions (indicator baselines). The day
/// weight for R_t is 1 while a position is held, 0 otherwise.
TradeLedger simulate_actions(std::span<const DayRecord> days, std::span<const Action> actions,
                             const StrategyConfig& config);

struct SharpeResult {
  double value = 0.0;
  bool defined = true;  // false when the deviation is zero
};

/// mean(returns - risk_free) / sample std(returns); flagged undefined on a
/// degenerate series instead of dividing by zero.
SharpeResult sharpe(std::span<const double> returns, double risk_free = 0.0);

/// w_i = p_i / sum(p); prices must be positive.
std::vector<double> market_weights(std::span<const double> prices);

struct PortfolioStats {
  double expected_return = 0.0;  // sum_i w_i mean(R_i)
  double std_return = 0.0;       // sample std of the combined weighted series
  double total_profit = 0.0;
};

/// Ledgers must cover identical date ranges.
PortfolioStats portfolio_stats(const std::vector<TradeLedger>& ledgers,
                               std::span<const double> weights);

struct McInput {
  std::string ticker;
  std::vector<DayRecord> days;
  std::vector<double> scores;
};

struct McRun {
  std::vector<int> picked;  // indices into the universe
  double profit = 0.0;
};

/// Each run draws `pick` tickers without replacement from its own
/// "mc-run-<i>" sub-stream of `seed`, simulates every pick, and records the
/// summed profit.
std::vector<McRun> monte_carlo(const std::vector<McInput>& universe, int runs, int pick,
                               const StrategyConfig& config, std::uint64_t seed);

/// `Date,Score` rows aligned against the trading days; a trading day without
/// a score is an alignment error.
std::vector<double> load_scores_csv(const std::string& path, std::span<const DayRecord> days);
void write_scores_csv(const std::string& path, std::span<const DayRecord> days,
                      std::span<const double> scores);

/// `Date,Action,Price,Cost,Position,CashDelta` plus a JSON summary.
void write_ledger_csv(const std::string& path, const TradeLedger& ledger);
void write_ledger_summary_json(const std::string& path, const TradeLedger& ledger,
                               const StrategyConfig& config);
void write_mc_csv(const std::string& path, const std::vector<McRun>& runs,
                  const std::vector<McInput>& universe);

}  // namespace hpsmp
