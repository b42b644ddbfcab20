#include "hpsmp/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "hpsmp/errors.hpp"
#include "hpsmp/rng.hpp"
#include "hpsmp/stats.hpp"

namespace hpsmp {

StrategyKind strategy_kind_from_string(const std::string& s) {
  if (s == "5050" || s == "fifty_fifty") return StrategyKind::FiftyFifty;
  if (s == "6040" || s == "sixty_forty") return StrategyKind::SixtyForty;
  if (s == "hold1" || s == "hold_signal") return StrategyKind::HoldSignal;
  if (s == "hold2" || s == "hold_period") return StrategyKind::HoldPeriod;
  throw ContractError("unknown strategy: " + s);
}

const char* to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::FiftyFifty: return "5050";
    case StrategyKind::SixtyForty: return "6040";
    case StrategyKind::HoldSignal: return "hold1";
    case StrategyKind::HoldPeriod: return "hold2";
  }
  return "5050";
}

StrategyConfig StrategyConfig::fifty_fifty() {
  StrategyConfig c;
  c.kind = StrategyKind::FiftyFifty;
  c.buy_threshold = 0.5;
  c.sell_threshold = 0.5;
  return c;
}

StrategyConfig StrategyConfig::sixty_forty() {
  StrategyConfig c;
  c.kind = StrategyKind::SixtyForty;
  c.buy_threshold = 0.6;
  c.sell_threshold = 0.4;
  return c;
}

StrategyConfig StrategyConfig::hold_signal() {
  StrategyConfig c = fifty_fifty();
  c.kind = StrategyKind::HoldSignal;
  return c;
}

StrategyConfig StrategyConfig::hold_period() {
  StrategyConfig c = fifty_fifty();
  c.kind = StrategyKind::HoldPeriod;
  return c;
}

StrategyConfig StrategyConfig::for_kind(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::FiftyFifty: return fifty_fifty();
    case StrategyKind::SixtyForty: return sixty_forty();
    case StrategyKind::HoldSignal: return hold_signal();
    case StrategyKind::HoldPeriod: return hold_period();
  }
  return fifty_fifty();
}

void StrategyConfig::validate() const {
  if (!(sell_threshold >= 0.0 && sell_threshold <= buy_threshold && buy_threshold <= 1.0)) {
    throw ContractError("strategy thresholds must satisfy 0 <= sell <= buy <= 1");
  }
  if (transaction_cost_rate < 0.0) throw ContractError("transaction cost rate must be >= 0");
  if (shares < 1) throw ContractError("share count must be >= 1");
}

Action signal(double score, const StrategyConfig& config) {
  if (score < config.sell_threshold) return Action::Sell;
  if (score >= config.buy_threshold) return Action::Buy;
  return Action::Hold;
}

double daily_return(double p_t, double p_prev) {
  if (p_t <= 0.0 || p_prev <= 0.0) {
    throw DataError("daily_return: prices must be positive");
  }
  return p_t / p_prev - 1.0;
}

double weighted_return(double w_prev, double r_t) {
  if (w_prev < 0.0 || w_prev > 1.0) {
    throw ContractError("weighted_return: weight must be in [0, 1]");
  }
  return w_prev * r_t;
}

namespace {

std::span<const DayRecord> clip_period(std::span<const DayRecord> days,
                                       const StrategyConfig& config) {
  std::size_t first = 0, last = days.size();
  if (config.start_date) {
    while (first < days.size() && days[first].date < *config.start_date) ++first;
  }
  if (config.end_date) {
    while (last > first && days[last - 1].date > *config.end_date) --last;
  }
  return days.subspan(first, last - first);
}

TradeLedger run_simulation(std::span<const DayRecord> days, std::span<const Action> actions,
                           std::span<const double> weights, const StrategyConfig& config) {
  TradeLedger ledger;
  double cash = 0.0;
  int position = 0;
  double entry_price = 0.0;
  double entry_cost = 0.0;
  for (std::size_t i = 0; i < days.size(); ++i) {
    const double price = days[i].adj_close;
    if (i > 0) {
      const double r = daily_return(price, days[i - 1].adj_close);
      ledger.return_dates.push_back(days[i].date);
      ledger.daily_returns.push_back(r);
      ledger.weighted_returns.push_back(weighted_return(weights[i - 1], r));
    }
    TradeEvent ev;
    ev.date = days[i].date;
    ev.price = price;
    ev.action = Action::Hold;
    const bool last_day = i + 1 == days.size();
    Action wanted = actions[i];
    bool forced = false;
    if (last_day && position > 0 && wanted != Action::Sell) {
      wanted = Action::Sell;  // marked closed so period profit is well-defined
      forced = true;
    }
    if (wanted == Action::Buy && position == 0 && !last_day) {
      // A fill on the final close could never be unwound inside the period,
      // so the last day never opens a position.
      const double notional = price * config.shares;
      const double cost = config.transaction_cost_rate * notional;
      cash -= notional + cost;
      position = config.shares;
      entry_price = price;
      entry_cost = cost;
      ledger.total_cost += cost;
      ++ledger.n_trades;
      ev.action = Action::Buy;
      ev.cost = cost;
      ev.cash_delta = -(notional + cost);
    } else if (wanted == Action::Sell && position > 0) {
      const double notional = price * position;
      const double cost = config.transaction_cost_rate * notional;
      cash += notional - cost;
      ledger.total_cost += cost;
      ++ledger.n_trades;
      ev.action = Action::Sell;
      ev.cost = cost;
      ev.cash_delta = notional - cost;
      ev.forced_close = forced;
      ledger.forced_close = ledger.forced_close || forced;
      const double outlay = entry_price * position + entry_cost;
      ledger.trade_returns.push_back((notional - cost - outlay) / (entry_price * position));
      position = 0;
    }
    ev.position_after = position;
    ledger.events.push_back(ev);
  }
  ledger.profit = cash;
  if (!ledger.events.empty()) {
    for (const auto& ev : ledger.events) {
      if (ev.action == Action::Buy) {
        ledger.period_return = ledger.profit / (ev.price * config.shares);
        break;
      }
    }
  }
  return ledger;
}

}  // namespace

TradeLedger simulate(std::span<const DayRecord> days, std::span<const double> scores,
                     const StrategyConfig& config) {
  config.validate();
  if (days.size() != scores.size()) {
    throw DataError("simulate: " + std::to_string(days.size()) + " trading days but " +
                    std::to_string(scores.size()) + " scores (misaligned inputs)");
  }
  std::span<const DayRecord> period = clip_period(days, config);
  std::span<const double> period_scores =
      scores.subspan(static_cast<std::size_t>(period.data() - days.data()), period.size());
  if (period.empty()) throw ContractError("simulate: empty trading period");
  for (double s : period_scores) {
    if (s < 0.0 || s > 1.0) throw DataError("simulate: score outside [0, 1]");
  }

  std::vector<Action> actions(period.size(), Action::Hold);
  switch (config.kind) {
    case StrategyKind::FiftyFifty:
    case StrategyKind::SixtyForty:
      for (std::size_t i = 0; i < period.size(); ++i) {
        actions[i] = signal(period_scores[i], config);
      }
      break;
    case StrategyKind::HoldSignal: {
      // Enter on the first BUY signal, exit on the last SELL signal after it.
      std::size_t entry = period.size();
      for (std::size_t i = 0; i < period.size(); ++i) {
        if (signal(period_scores[i], config) == Action::Buy) {
          entry = i;
          break;
        }
      }
      if (entry < period.size()) {
        actions[entry] = Action::Buy;
        for (std::size_t i = period.size(); i > entry + 1; --i) {
          if (signal(period_scores[i - 1], config) == Action::Sell) {
            actions[i - 1] = Action::Sell;
            break;
          }
        }
      }
      break;
    }
    case StrategyKind::HoldPeriod:
      actions.front() = Action::Buy;
      actions.back() = Action::Sell;
      break;
  }
  return run_simulation(period, actions, period_scores, config);
}

TradeLedger simulate_actions(std::span<const DayRecord> days, std::span<const Action> actions,
                             const StrategyConfig& config) {
  config.validate();
  if (days.size() != actions.size()) {
    throw DataError("simulate_actions: " + std::to_string(days.size()) + " trading days but " +
                    std::to_string(actions.size()) + " actions (misaligned inputs)");
  }
  std::span<const DayRecord> period = clip_period(days, config);
  std::span<const Action> period_actions =
      actions.subspan(static_cast<std::size_t>(period.data() - days.data()), period.size());
  if (period.empty()) throw ContractError("simulate_actions: empty trading period");

  // Position-indicator weights: w_t = 1 while long after day t's action.
  std::vector<double> weights(period.size(), 0.0);
  bool long_now = false;
  for (std::size_t i = 0; i < period.size(); ++i) {
    if (period_actions[i] == Action::Buy) {
      long_now = true;
    } else if (period_actions[i] == Action::Sell) {
      long_now = false;
    }
    weights[i] = long_now ? 1.0 : 0.0;
  }
  return run_simulation(period, period_actions, weights, config);
}

SharpeResult sharpe(std::span<const double> returns, double risk_free) {
  if (returns.size() < 2) throw ContractError("sharpe: need at least 2 returns");
  SharpeResult out;
  const double sd = sample_std(returns);
  if (sd == 0.0) {
    out.defined = false;
    out.value = 0.0;
    return out;
  }
  out.value = (mean(returns) - risk_free) / sd;
  return out;
}

std::vector<double> market_weights(std::span<const double> prices) {
  if (prices.empty()) throw ContractError("market_weights: empty price list");
  double total = 0.0;
  for (double p : prices) {
    if (p <= 0.0) throw DataError("market_weights: prices must be positive");
    total += p;
  }
  std::vector<double> out;
  out.reserve(prices.size());
  for (double p : prices) out.push_back(p / total);
  return out;
}

PortfolioStats portfolio_stats(const std::vector<TradeLedger>& ledgers,
                               std::span<const double> weights) {
  if (ledgers.empty()) throw ContractError("portfolio_stats: no ledgers");
  if (ledgers.size() != weights.size()) {
    throw ContractError("portfolio_stats: weight count mismatch");
  }
  const std::size_t n = ledgers[0].weighted_returns.size();
  for (const auto& l : ledgers) {
    if (l.weighted_returns.size() != n || l.return_dates != ledgers[0].return_dates) {
      throw DataError("portfolio_stats: ledgers cover different date ranges");
    }
  }
  PortfolioStats stats;
  for (std::size_t i = 0; i < ledgers.size(); ++i) {
    stats.expected_return += weights[i] * mean(ledgers[i].weighted_returns);
    stats.total_profit += ledgers[i].profit;
  }
  std::vector<double> combined(n, 0.0);
  for (std::size_t i = 0; i < ledgers.size(); ++i) {
    for (std::size_t t = 0; t < n; ++t) {
      combined[t] += weights[i] * ledgers[i].weighted_returns[t];
    }
  }
  stats.std_return = n >= 2 ? sample_std(combined) : 0.0;
  return stats;
}

std::vector<McRun> monte_carlo(const std::vector<McInput>& universe, int runs, int pick,
                               const StrategyConfig& config, std::uint64_t seed) {
  if (pick < 1 || runs < 1) throw ContractError("monte_carlo: runs and pick must be >= 1");
  if (universe.size() < static_cast<std::size_t>(pick)) {
    throw ContractError("monte_carlo: universe of " + std::to_string(universe.size()) +
                        " tickers cannot supply " + std::to_string(pick) + " picks");
  }
  std::vector<McRun> out;
  out.reserve(static_cast<std::size_t>(runs));
  for (int r = 0; r < runs; ++r) {
    Rng rng = Rng::substream(seed, "mc-run-" + std::to_string(r));
    McRun run;
    run.picked = rng.sample_without_replacement(static_cast<int>(universe.size()), pick);
    for (int idx : run.picked) {
      const McInput& input = universe[static_cast<std::size_t>(idx)];
      run.profit += simulate(input.days, input.scores, config).profit;
    }
    out.push_back(std::move(run));
  }
  return out;
}

std::vector<double> load_scores_csv(const std::string& path, std::span<const DayRecord> days) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open scores file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ":1: empty scores file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "Date,Score") throw ParseError(path + ":1: expected header Date,Score");
  std::map<Date, double> by_date;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected Date,Score");
    }
    Date date;
    try {
      date = parse_date(line.substr(0, comma));
    } catch (const ParseError& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    try {
      by_date[date] = std::stod(line.substr(comma + 1));
    } catch (const std::exception&) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": unreadable score");
    }
  }
  std::vector<double> out;
  out.reserve(days.size());
  for (const auto& day : days) {
    auto it = by_date.find(day.date);
    if (it == by_date.end()) {
      throw DataError(path + ": no score for trading day " + to_string(day.date));
    }
    out.push_back(it->second);
  }
  return out;
}

void write_scores_csv(const std::string& path, std::span<const DayRecord> days,
                      std::span<const double> scores) {
  if (days.size() != scores.size()) throw ContractError("write_scores_csv: misaligned inputs");
  std::ofstream out(path);
  if (!out) throw DataError("cannot write scores CSV: " + path);
  out.precision(17);
  out << "Date,Score\n";
  for (std::size_t i = 0; i < days.size(); ++i) {
    out << to_string(days[i].date) << "," << scores[i] << "\n";
  }
}

void write_ledger_csv(const std::string& path, const TradeLedger& ledger) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write ledger CSV: " + path);
  out.precision(17);
  out << "Date,Action,Price,Cost,Position,CashDelta\n";
  for (const auto& ev : ledger.events) {
    out << to_string(ev.date) << "," << to_string(ev.action) << "," << ev.price << ","
        << ev.cost << "," << ev.position_after << "," << ev.cash_delta << "\n";
  }
}

void write_ledger_summary_json(const std::string& path, const TradeLedger& ledger,
                               const StrategyConfig& config) {
  nlohmann::json j;
  j["profit"] = ledger.profit;
  j["return"] = ledger.period_return;
  j["trade_returns"] = ledger.trade_returns;
  j["daily_returns"] = ledger.daily_returns;
  j["weighted_returns"] = ledger.weighted_returns;
  j["n_trades"] = ledger.n_trades;
  j["total_cost"] = ledger.total_cost;
  j["forced_close"] = ledger.forced_close;
  if (ledger.weighted_returns.size() >= 2) {
    j["expected_return"] = mean(ledger.weighted_returns);
    j["std_return"] = sample_std(ledger.weighted_returns);
    const SharpeResult sr = sharpe(ledger.weighted_returns);
    j["sharpe"] = sr.defined ? nlohmann::json(sr.value) : nlohmann::json(nullptr);
  } else {
    j["expected_return"] = nullptr;
    j["std_return"] = nullptr;
    j["sharpe"] = nullptr;
  }
  j["strategy"] = to_string(config.kind);
  j["buy_threshold"] = config.buy_threshold;
  j["sell_threshold"] = config.sell_threshold;
  j["transaction_cost_rate"] = config.transaction_cost_rate;
  j["shares"] = config.shares;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write ledger summary: " + path);
  out << j.dump(2) << "\n";
}

void write_mc_csv(const std::string& path, const std::vector<McRun>& runs,
                  const std::vector<McInput>& universe) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write MC CSV: " + path);
  out.precision(17);
  out << "Run,Profit,Tickers\n";
  for (std::size_t r = 0; r < runs.size(); ++r) {
    out << r << "," << runs[r].profit << ",";
    for (std::size_t i = 0; i < runs[r].picked.size(); ++i) {
      if (i) out << "|";
      out << universe[static_cast<std::size_t>(runs[r].picked[i])].ticker;
    }
    out << "\n";
  }
}

}  // namespace hpsmp
