#include <doctest.h>

#include <cmath>
#include <fstream>

#include "hpsmp/backtest.hpp"
#include "hpsmp/errors.hpp"
#include "hpsmp/rng.hpp"
#include "hpsmp/stats.hpp"

using namespace hpsmp;

namespace {

DayRecord make_day(const std::string& date, double adj) {
  DayRecord d;
  d.date = parse_date(date);
  d.open = adj;
  d.high = adj * 1.01;
  d.low = adj * 0.99;
  d.close = adj;
  d.adj_close = adj;
  d.volume = 1000;
  return d;
}

std::vector<DayRecord> day_series(std::size_t n, double start, Rng* rng = nullptr) {
  std::vector<DayRecord> out;
  Date d = parse_date("2020-03-02");
  double price = start;
  for (std::size_t i = 0; i < n; ++i) {
    while (is_weekend(d)) d = civil_from_days(days_from_civil(d) + 1);
    out.push_back(make_day(to_string(d), price));
    d = civil_from_days(days_from_civil(d) + 1);
    if (rng) price = std::max(1.0, price * (1.0 + rng->uniform(-0.05, 0.05)));
  }
  return out;
}

}  // namespace

TEST_CASE("signal thresholds") {
  const StrategyConfig fifty = StrategyConfig::fifty_fifty();
  CHECK(signal(0.49, fifty) == Action::Sell);
  CHECK(signal(0.51, fifty) == Action::Buy);
  CHECK(signal(0.5, fifty) == Action::Buy);  // tie rule

  const StrategyConfig sixty = StrategyConfig::sixty_forty();
  CHECK(signal(0.5, sixty) == Action::Hold);
  CHECK(signal(0.4, sixty) == Action::Hold);
  CHECK(signal(0.39, sixty) == Action::Sell);
  CHECK(signal(0.6, sixty) == Action::Buy);
  CHECK(signal(0.61, sixty) == Action::Buy);
}

TEST_CASE("signal is monotone in the score") {
  Rng rng(3);
  for (const StrategyConfig& config :
       {StrategyConfig::fifty_fifty(), StrategyConfig::sixty_forty()}) {
    auto rank = [](Action a) { return a == Action::Sell ? 0 : (a == Action::Hold ? 1 : 2); };
    for (int trial = 0; trial < 200; ++trial) {
      const double lo = rng.uniform01();
      const double hi = rng.uniform01();
      if (lo > hi) continue;
      CHECK(rank(signal(lo, config)) <= rank(signal(hi, config)));
    }
  }
}

TEST_CASE("daily and weighted returns") {
  CHECK(daily_return(110.0, 100.0) == doctest::Approx(0.10));
  CHECK(weighted_return(0.0, 0.37) == 0.0);
  CHECK_THROWS_AS(daily_return(-1.0, 100.0), DataError);
  CHECK_THROWS_AS(weighted_return(1.5, 0.1), ContractError);
  std::vector<DayRecord> flat = day_series(5, 100.0);
  std::vector<double> scores(5, 0.5);
  TradeLedger ledger = simulate(flat, scores, StrategyConfig::sixty_forty());
  for (double r : ledger.daily_returns) CHECK(r == 0.0);
}

TEST_CASE("simulate: scores inside the hold band trade nothing") {
  std::vector<DayRecord> days = day_series(6, 100.0);
  std::vector<double> scores(6, 0.5);
  TradeLedger ledger = simulate(days, scores, StrategyConfig::sixty_forty());
  CHECK(ledger.n_trades == 0);
  CHECK(ledger.profit == 0.0);
  CHECK_FALSE(ledger.forced_close);
  for (const auto& ev : ledger.events) CHECK(ev.action == Action::Hold);
}

TEST_CASE("simulate: two-day hand accounting at 0.3% cost") {
  std::vector<DayRecord> days{make_day("2020-03-02", 100.0), make_day("2020-03-03", 110.0)};
  std::vector<double> scores{0.9, 0.1};  // BUY then SELL
  StrategyConfig config = StrategyConfig::fifty_fifty();
  config.shares = 1;
  TradeLedger ledger = simulate(days, scores, config);
  CHECK(ledger.n_trades == 2);
  CHECK(ledger.profit == doctest::Approx(9.37).epsilon(1e-12));
  CHECK_FALSE(ledger.forced_close);

  config.shares = 100;
  TradeLedger scaled = simulate(days, scores, config);
  CHECK(scaled.profit == doctest::Approx(937.0).epsilon(1e-12));
  CHECK(scaled.profit / config.shares == doctest::Approx(9.37).epsilon(1e-12));
}

TEST_CASE("simulate: open positions are force-closed at the period end") {
  std::vector<DayRecord> days = day_series(4, 100.0);
  std::vector<double> scores{0.9, 0.9, 0.9, 0.9};  // never a SELL signal
  TradeLedger ledger = simulate(days, scores, StrategyConfig::fifty_fifty());
  CHECK(ledger.forced_close);
  CHECK(ledger.events.back().action == Action::Sell);
  CHECK(ledger.events.back().forced_close);
  CHECK(ledger.events.back().position_after == 0);
}

TEST_CASE("simulate: ledger accounting reconciles on random streams") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    Rng walk(1000 + static_cast<std::uint64_t>(trial));
    const std::size_t n = 3 + walk.uniform_int(40);
    std::vector<DayRecord> days = day_series(n, 50.0 + walk.uniform(0.0, 100.0), &walk);
    std::vector<double> scores;
    for (std::size_t i = 0; i < n; ++i) scores.push_back(walk.uniform01());
    const StrategyConfig config = walk.bernoulli(0.5) ? StrategyConfig::fifty_fifty()
                                                      : StrategyConfig::sixty_forty();
    TradeLedger ledger = simulate(days, scores, config);

    // Reconciliation: cash deltas in event order reproduce the profit.
    double cash = 0.0;
    double buys = 0.0, sells = 0.0, costs = 0.0;
    int position = 0;
    for (const auto& ev : ledger.events) {
      cash += ev.cash_delta;
      costs += ev.cost;
      if (ev.action == Action::Buy) {
        CHECK(position == 0);  // no double-buy
        position = ev.position_after;
        buys += ev.price * position;
      } else if (ev.action == Action::Sell) {
        CHECK(position > 0);  // no short selling
        sells += ev.price * position;
        position = 0;
      }
      CHECK(ev.position_after >= 0);
    }
    CHECK(position == 0);  // always ends flat
    CHECK(cash == ledger.profit);
    CHECK(ledger.profit == doctest::Approx(sells - buys - costs).epsilon(1e-9));
    CHECK(ledger.total_cost == doctest::Approx(costs).epsilon(1e-12));
  }
}

TEST_CASE("simulate: buy-and-hold cumulative return identity on 2-day cases") {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const double p1 = rng.uniform(10.0, 200.0);
    const double p2 = rng.uniform(10.0, 200.0);
    std::vector<DayRecord> days{make_day("2020-03-02", p1), make_day("2020-03-03", p2)};
    StrategyConfig config = StrategyConfig::hold_period();
    TradeLedger ledger = simulate(days, std::vector<double>{0.5, 0.5}, config);
    const double expected =
        (p2 / p1 - 1.0) - config.transaction_cost_rate * (p1 + p2) / p1;
    CHECK(ledger.period_return == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("hold strategies enter and exit as documented") {
  std::vector<DayRecord> days = day_series(6, 100.0);
  std::vector<double> scores{0.2, 0.8, 0.3, 0.9, 0.3, 0.6};

  SUBCASE("hold strategy 1: first BUY in, last SELL out") {
    TradeLedger ledger = simulate(days, scores, StrategyConfig::hold_signal());
    CHECK(ledger.n_trades == 2);
    CHECK(ledger.events[1].action == Action::Buy);   // first score >= 0.5
    CHECK(ledger.events[4].action == Action::Sell);  // last score < 0.5
    CHECK_FALSE(ledger.forced_close);
  }
  SUBCASE("hold strategy 2: enter on the first day, exit on the last") {
    TradeLedger ledger = simulate(days, scores, StrategyConfig::hold_period());
    CHECK(ledger.n_trades == 2);
    CHECK(ledger.events.front().action == Action::Buy);
    CHECK(ledger.events.back().action == Action::Sell);
  }
}

TEST_CASE("simulate_actions adapts indicator signals to the same engine") {
  std::vector<DayRecord> days = day_series(5, 100.0);
  std::vector<Action> actions{Action::Hold, Action::Buy, Action::Hold, Action::Sell,
                              Action::Hold};
  TradeLedger ledger = simulate_actions(days, actions, StrategyConfig::fifty_fifty());
  CHECK(ledger.n_trades == 2);
  CHECK(ledger.events[1].action == Action::Buy);
  CHECK(ledger.events[3].action == Action::Sell);
  // Position-indicator weights drive the weighted returns.
  CHECK(ledger.weighted_returns[0] == 0.0);  // day1: flat before
  CHECK(ledger.weighted_returns[1] == ledger.daily_returns[1]);
  CHECK(ledger.weighted_returns[3] == 0.0);  // sold on day 3
}

TEST_CASE("simulate rejects misaligned scores") {
  std::vector<DayRecord> days = day_series(4, 100.0);
  std::vector<double> scores(3, 0.5);
  CHECK_THROWS_AS(simulate(days, scores, StrategyConfig::fifty_fifty()), DataError);
}

TEST_CASE("sharpe ratio") {
  CHECK(sharpe(std::vector<double>{0.01, -0.01}).value == doctest::Approx(0.0));
  CHECK(sharpe(std::vector<double>{0.02, 0.04, 0.00}).value == doctest::Approx(1.0));
  SUBCASE("scale invariance") {
    Rng rng(23);
    std::vector<double> returns;
    for (int i = 0; i < 20; ++i) returns.push_back(rng.uniform(-0.05, 0.08));
    const double base = sharpe(returns).value;
    for (double& r : returns) r *= 3.7;
    CHECK(sharpe(returns).value == doctest::Approx(base).epsilon(1e-12));
  }
  SUBCASE("zero deviation is flagged, not infinite") {
    SharpeResult r = sharpe(std::vector<double>{0.01, 0.01, 0.01});
    CHECK_FALSE(r.defined);
  }
}

TEST_CASE("market weights") {
  const auto w = market_weights(std::vector<double>{10.0, 30.0, 60.0});
  CHECK(w[0] == doctest::Approx(0.1));
  CHECK(w[1] == doctest::Approx(0.3));
  CHECK(w[2] == doctest::Approx(0.6));
  const auto equal = market_weights(std::vector<double>{5.0, 5.0, 5.0, 5.0});
  for (double x : equal) CHECK(x == doctest::Approx(0.25));
  CHECK(market_weights(std::vector<double>{42.0})[0] == 1.0);
  CHECK_THROWS_AS(market_weights(std::vector<double>{1.0, -2.0}), DataError);
  double total = 0.0;
  for (double x : w) total += x;
  CHECK(total == doctest::Approx(1.0));
}

TEST_CASE("portfolio stats") {
  Rng rng(29);
  std::vector<DayRecord> days = day_series(10, 100.0, &rng);
  std::vector<double> scores;
  for (int i = 0; i < 10; ++i) scores.push_back(rng.uniform01());
  TradeLedger one = simulate(days, scores, StrategyConfig::fifty_fifty());

  SUBCASE("single ticker with weight 1 reduces to its own mean") {
    PortfolioStats stats = portfolio_stats({one}, std::vector<double>{1.0});
    CHECK(stats.expected_return == doctest::Approx(mean(one.weighted_returns)));
    CHECK(stats.total_profit == one.profit);
  }
  SUBCASE("two identical tickers at half weight match the single ticker") {
    PortfolioStats stats = portfolio_stats({one, one}, std::vector<double>{0.5, 0.5});
    PortfolioStats solo = portfolio_stats({one}, std::vector<double>{1.0});
    CHECK(stats.expected_return == doctest::Approx(solo.expected_return));
    CHECK(stats.std_return == doctest::Approx(solo.std_return));
    CHECK(stats.total_profit == doctest::Approx(2.0 * solo.total_profit));
  }
  SUBCASE("two-ticker case matches a spreadsheet-style hand oracle") {
    std::vector<DayRecord> other = day_series(10, 50.0, &rng);
    std::vector<double> other_scores;
    for (int i = 0; i < 10; ++i) other_scores.push_back(rng.uniform01());
    TradeLedger two = simulate(other, other_scores, StrategyConfig::fifty_fifty());
    const std::vector<double> weights{0.3, 0.7};
    PortfolioStats stats = portfolio_stats({one, two}, weights);
    CHECK(stats.expected_return ==
          doctest::Approx(0.3 * mean(one.weighted_returns) + 0.7 * mean(two.weighted_returns))
              .epsilon(1e-12));
    std::vector<double> combined(one.weighted_returns.size());
    for (std::size_t t = 0; t < combined.size(); ++t) {
      combined[t] = 0.3 * one.weighted_returns[t] + 0.7 * two.weighted_returns[t];
    }
    CHECK(stats.std_return == doctest::Approx(sample_std(combined)).epsilon(1e-12));
    CHECK(stats.total_profit == doctest::Approx(one.profit + two.profit));
  }
  SUBCASE("misaligned ledgers are rejected") {
    std::vector<DayRecord> shorter = day_series(5, 70.0, &rng);
    TradeLedger bad = simulate(shorter, std::vector<double>(5, 0.5),
                               StrategyConfig::sixty_forty());
    CHECK_THROWS_AS(portfolio_stats({one, bad}, std::vector<double>{0.5, 0.5}), DataError);
  }
}

TEST_CASE("monte carlo sampling") {
  Rng rng(31);
  std::vector<McInput> universe;
  for (int t = 0; t < 8; ++t) {
    McInput input;
    input.ticker = "T" + std::to_string(t);
    Rng walk(500 + static_cast<std::uint64_t>(t));
    input.days = day_series(12, 80.0 + 5.0 * t, &walk);
    for (int i = 0; i < 12; ++i) input.scores.push_back(walk.uniform01());
    universe.push_back(std::move(input));
  }
  const StrategyConfig config = StrategyConfig::fifty_fifty();

  SUBCASE("universe size equal to pick makes every run identical") {
    std::vector<McInput> small(universe.begin(), universe.begin() + 3);
    auto runs = monte_carlo(small, 5, 3, config, 42);
    for (const auto& run : runs) CHECK(run.profit == doctest::Approx(runs[0].profit));
  }
  SUBCASE("a single run with a fixed seed reproduces exactly") {
    auto a = monte_carlo(universe, 1, 6, config, 7);
    auto b = monte_carlo(universe, 1, 6, config, 7);
    REQUIRE(a.size() == 1);
    CHECK(a[0].profit == b[0].profit);
    CHECK(a[0].picked == b[0].picked);
  }
  SUBCASE("full determinism at the decimal-string level") {
    auto a = monte_carlo(universe, 20, 6, config, 99);
    auto b = monte_carlo(universe, 20, 6, config, 99);
    for (std::size_t r = 0; r < a.size(); ++r) {
      char sa[64], sb[64];
      std::snprintf(sa, sizeof(sa), "%.17g", a[r].profit);
      std::snprintf(sb, sizeof(sb), "%.17g", b[r].profit);
      CHECK(std::string(sa) == sb);
    }
  }
  SUBCASE("insufficient universe is a contract error") {
    std::vector<McInput> tiny(universe.begin(), universe.begin() + 2);
    CHECK_THROWS_AS(monte_carlo(tiny, 10, 6, config, 1), ContractError);
  }
}

TEST_CASE("scores csv round trip and alignment") {
  std::vector<DayRecord> days = day_series(4, 100.0);
  std::vector<double> scores{0.1, 0.6, 0.8, 0.4};
  const std::string path = "/tmp/hpsmp_test_scores.csv";
  write_scores_csv(path, days, scores);
  auto loaded = load_scores_csv(path, days);
  for (std::size_t i = 0; i < scores.size(); ++i) CHECK(loaded[i] == scores[i]);

  std::vector<DayRecord> more = day_series(5, 100.0);
  CHECK_THROWS_WITH_AS(load_scores_csv(path, more), doctest::Contains("no score"), DataError);
}
