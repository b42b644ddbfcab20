// Acceptance gate: one check per release criterion, one PASS/FAIL line each.
// Exits nonzero if any criterion fails. Oracles here are self-contained
// plain-loop implementations, independent of the graph machinery they check.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "hpsmp/backtest.hpp"
#include "hpsmp/data.hpp"
#include "hpsmp/gradcheck.hpp"
#include "hpsmp/gradsuite.hpp"
#include "hpsmp/indicators.hpp"
#include "hpsmp/model.hpp"
#include "hpsmp/rng.hpp"
#include "hpsmp/stats.hpp"
#include "hpsmp/train.hpp"

using namespace hpsmp;

namespace {

int g_failures = 0;

void report(const std::string& criterion, bool pass, const std::string& detail = "") {
  std::cout << (pass ? "PASS" : "FAIL") << " — " << criterion;
  if (!detail.empty()) std::cout << " (" << detail << ")";
  std::cout << "\n";
  if (!pass) ++g_failures;
}

void skip(const std::string& criterion, const std::string& why) {
  std::cout << "SKIP — " << criterion << " (" << why << ")\n";
}

double sigmoid_ref(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// ---------------------------------------------------------------------------
// 1. Gradient suite: every op and both full paths, plus 100 random-seed
//    composite checks, all under 1e-4 relative error and two minutes.
// ---------------------------------------------------------------------------
void check_gradient_suite() {
  const auto start = std::chrono::steady_clock::now();
  const auto results = run_gradient_suite(2024, 1e-4);
  bool pass = all_passed(results);
  double worst = 0.0;
  std::string worst_name;
  for (const auto& r : results) {
    if (r.report.max_rel_err > worst) {
      worst = r.report.max_rel_err;
      worst_name = r.name;
    }
    if (!r.report.pass) {
      std::cout << "       failing case: " << r.name << " max rel err "
                << r.report.max_rel_err << "\n";
    }
  }

  int seeds_passed = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed * 7919 + 13);
    ParamSet params;
    params.add("a", Tensor::uniform({2, 3}, rng, -2.0, 2.0));
    params.add("b", Tensor::uniform({2, 3}, rng, -2.0, 2.0));
    params.add("w", Tensor::uniform({3, 2}, rng, -2.0, 2.0));
    LossFn f = [](Graph& g, ParamSet& p) {
      Tensor mixed = g.hadamard(p.at("a"), p.at("b"));
      Tensor conv_in = g.pad_rows(mixed, 1, 1);
      Tensor act = g.tanh(g.matmul(conv_in, p.at("w")));
      return g.mean(g.hadamard(act, act));
    };
    seeds_passed += grad_check(f, params, 1e-4).pass;
  }
  pass = pass && seeds_passed == 100;

  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  pass = pass && elapsed < 120.0;
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "%zu op/path cases, worst %.2e in '%s'; %d/100 seeded composites; %.2fs",
                results.size(), worst, worst_name.c_str(), seeds_passed, elapsed);
  report("gradient suite: all ops and both paths match finite differences at 1e-4", pass,
         detail);
}

// ---------------------------------------------------------------------------
// 2. LSTM oracle: hand-evaluated zero-weight and c_prev = 1 cases at 1e-12.
// ---------------------------------------------------------------------------
void check_lstm_oracle() {
  auto zero_gates = [](int hidden, int input) {
    LstmGateParams p;
    p.W_i = Tensor({hidden, input});
    p.U_i = Tensor({hidden, hidden});
    p.b_i = Tensor({hidden});
    p.W_f = p.W_i.clone();
    p.U_f = p.U_i.clone();
    p.b_f = p.b_i.clone();
    p.W_c = p.W_i.clone();
    p.U_c = p.U_i.clone();
    p.b_c = p.b_i.clone();
    p.W_o = p.W_i.clone();
    p.U_o = p.U_i.clone();
    p.b_o = p.b_i.clone();
    return p;
  };
  bool pass = true;
  {
    Graph g;
    auto [h, c] = lstm_step(g, Tensor({3}, {0.7, -0.2, 1.1}), Tensor({2}), Tensor({2}),
                            zero_gates(2, 3));
    for (int r = 0; r < 2; ++r) {
      pass = pass && std::abs(c.value_at(static_cast<std::size_t>(r))) < 1e-12;
      pass = pass && std::abs(h.value_at(static_cast<std::size_t>(r))) < 1e-12;
    }
  }
  {
    Graph g;
    auto [h, c] = lstm_step(g, Tensor({3}, {0.7, -0.2, 1.1}), Tensor({2}), Tensor({2}, 1.0),
                            zero_gates(2, 3));
    // i = f = o = 0.5, g = 0 => c = 0.5, h = 0.5 * tanh(0.5).
    const double expected_h = 0.5 * std::tanh(0.5);
    for (int r = 0; r < 2; ++r) {
      pass = pass && std::abs(c.value_at(static_cast<std::size_t>(r)) - 0.5) < 1e-12;
      pass = pass &&
             std::abs(h.value_at(static_cast<std::size_t>(r)) - expected_h) < 1e-12;
    }
  }
  report("lstm_step matches the hand-evaluated gate equations at 1e-12", pass);
}

// ---------------------------------------------------------------------------
// 3. Labeling oracle: all 2^5 up/down patterns under the >= 3 rule.
// ---------------------------------------------------------------------------
void check_labeling_oracle() {
  int agreements = 0;
  for (int pattern = 0; pattern < 32; ++pattern) {
    std::vector<DayRecord> days;
    Date d{2021, 3, 1};
    double price = 100.0;
    auto push = [&](double p) {
      while (is_weekend(d)) d = civil_from_days(days_from_civil(d) + 1);
      DayRecord rec;
      rec.date = d;
      rec.open = rec.high = rec.low = rec.close = rec.adj_close = p;
      rec.high = p * 1.01;
      rec.low = p * 0.99;
      days.push_back(rec);
      d = civil_from_days(days_from_civil(d) + 1);
    };
    push(price);
    int expected_ups = 0;
    for (int k = 0; k < 5; ++k) {
      const int up = (pattern >> k) & 1;
      expected_ups += up;
      price += up ? 1.0 : -1.0;
      push(price);
    }
    label(days, 5, 3);
    const int expected = expected_ups >= 3 ? 1 : 0;
    agreements += days[0].label.has_value() && *days[0].label == expected;
  }
  report("labeling agrees with exhaustive 2^5 enumeration under the >=3 rule",
         agreements == 32, std::to_string(agreements) + "/32 patterns");
}

// ---------------------------------------------------------------------------
// 4. Attention identities: zero parameters give scores exactly 0.5 and
//    output exactly 0.5 * input; random cases match brute-force oracles.
// ---------------------------------------------------------------------------
void check_attention_identities() {
  bool pass = true;
  Rng rng(404);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor seq = Tensor::uniform({5, 3}, rng, -2.0, 2.0);
    {
      Graph g;
      AttentionOut local = local_attention(g, seq, Tensor({3, 3}), Tensor({1}));
      AttentionOut global = global_attention(g, seq, Tensor({8, 3}), Tensor({1}));
      for (int i = 0; i < 5; ++i) {
        pass = pass && local.scores.value_at(static_cast<std::size_t>(i)) == 0.5;
        pass = pass && global.scores.value_at(static_cast<std::size_t>(i)) == 0.5;
        for (int c = 0; c < 3; ++c) {
          pass = pass && local.weighted.at(i, c) == 0.5 * seq.at(i, c);
          pass = pass && global.weighted.at(i, c) == 0.5 * seq.at(i, c);
        }
      }
    }
    {
      // Brute-force windowed inner product, zero-padded at the edges.
      Tensor w = Tensor::uniform({3, 3}, rng, -1.5, 1.5);
      Tensor b = Tensor::uniform({1}, rng, -1.0, 1.0);
      Graph g;
      AttentionOut local = local_attention(g, seq, w, b);
      for (int i = 0; i < 5; ++i) {
        double acc = b.value_at(0);
        for (int k = 0; k < 3; ++k) {
          const int row = i - 1 + k;
          if (row < 0 || row >= 5) continue;
          for (int c = 0; c < 3; ++c) acc += seq.at(row, c) * w.at(k, c);
        }
        pass = pass &&
               std::abs(local.scores.value_at(static_cast<std::size_t>(i)) - sigmoid_ref(acc)) <
                   1e-12;
      }
    }
    {
      // Whole-input Frobenius product against the first rows of the weight.
      Tensor w = Tensor::uniform({8, 3}, rng, -1.5, 1.5);
      Tensor b = Tensor::uniform({1}, rng, -1.0, 1.0);
      Graph g;
      AttentionOut global = global_attention(g, seq, w, b);
      double acc = b.value_at(0);
      for (int i = 0; i < 5; ++i) {
        for (int c = 0; c < 3; ++c) acc += seq.at(i, c) * w.at(i, c);
      }
      const double expected = sigmoid_ref(acc);
      for (int i = 0; i < 5; ++i) {
        pass = pass &&
               std::abs(global.scores.value_at(static_cast<std::size_t>(i)) - expected) < 1e-12;
      }
    }
  }
  report("attention identities: zero-parameter scores exactly 0.5, oracles match at 1e-12",
         pass);
}

// ---------------------------------------------------------------------------
// 5. Overfit sanity: tiny hybrid reaches 95% train accuracy on a 16-sample
//    separable set within 200 epochs, reproducibly.
// ---------------------------------------------------------------------------
LabeledDataset separable_16() {
  LabeledDataset ds;
  Date d{2020, 1, 6};
  Rng rng(3);
  for (int i = 0; i < 16; ++i) {
    while (is_weekend(d)) d = civil_from_days(days_from_civil(d) + 1);
    const int cls = i % 2;
    DayRecord day;
    day.date = d;
    const double adj = 100.0 + rng.uniform(-1.0, 1.0);
    day.open = day.close = day.adj_close = adj;
    day.high = adj * 1.02;
    day.low = adj * 0.98;
    day.tokens.assign(4, cls);  // token identity carries the class
    day.label = cls;
    ds.days.push_back(day);
    ds.train_idx.push_back(static_cast<std::size_t>(i));
    d = civil_from_days(days_from_civil(d) + 1);
  }
  ds.bounds = SplitBounds{ds.days.back().date, civil_from_days(days_from_civil(ds.days.back().date) + 1),
                          civil_from_days(days_from_civil(ds.days.back().date) + 2)};
  return ds;
}

TrainConfig overfit_config() {
  TrainConfig config;
  config.model.max_len = 6;
  config.model.embed_width = 4;
  config.model.la_window = 3;
  config.model.lg_conv_filters = 4;
  config.model.lg_conv_kernel = 3;
  config.model.bl_conv1_filters = 4;
  config.model.bl_conv1_kernel = 3;
  config.model.bl_conv2_filters = 6;
  config.model.bl_conv2_kernel = 2;
  config.model.lstm_hidden = 6;
  config.model.fusion1 = 8;
  config.model.fusion2 = 4;
  config.model.dropout = 0.0;  // noiseless sanity check
  config.lr = 0.005;           // desk-scale step for the 200-epoch budget
  config.batch_size = 4;
  config.epochs = 200;
  config.seed = 77;
  return config;
}

EmbeddingTable overfit_table(std::uint64_t seed) {
  Vocabulary vocab = Vocabulary::build({{"down", "up"}}, 1);
  Rng rng(seed);
  return random_embeddings(vocab, 4, rng);
}

void check_overfit() {
  LabeledDataset ds = separable_16();
  const TrainConfig config = overfit_config();
  TrainResult a = train(ds, overfit_table(5), config);
  double best_acc = 0.0;
  int reached_at = -1;
  for (const auto& s : a.curves) {
    if (s.train_acc > best_acc) best_acc = s.train_acc;
    if (reached_at < 0 && s.train_acc >= 0.95) reached_at = s.epoch;
  }
  TrainResult b = train(ds, overfit_table(5), config);
  bool reproducible = a.curves.size() == b.curves.size();
  for (std::size_t e = 0; reproducible && e < a.curves.size(); ++e) {
    reproducible = a.curves[e].train_loss == b.curves[e].train_loss &&
                   a.curves[e].train_acc == b.curves[e].train_acc;
  }
  char detail[128];
  std::snprintf(detail, sizeof(detail), "best train acc %.3f, >=0.95 at epoch %d, %s",
                best_acc, reached_at, reproducible ? "bit-reproducible" : "NOT reproducible");
  report("overfit sanity: 16-sample separable set reaches 95% train accuracy in 200 epochs",
         best_acc >= 0.95 && reached_at > 0 && reproducible, detail);
}

// ---------------------------------------------------------------------------
// 6. Backtest accounting: 1000 random streams reconcile exactly; the 2-day
//    hand case yields 9.37 per share.
// ---------------------------------------------------------------------------
std::vector<DayRecord> price_walk(Rng& rng, std::size_t n, double start) {
  std::vector<DayRecord> out;
  Date d{2020, 3, 2};
  double price = start;
  for (std::size_t i = 0; i < n; ++i) {
    while (is_weekend(d)) d = civil_from_days(days_from_civil(d) + 1);
    DayRecord rec;
    rec.date = d;
    rec.open = rec.close = rec.adj_close = price;
    rec.high = price * 1.01;
    rec.low = price * 0.99;
    out.push_back(rec);
    d = civil_from_days(days_from_civil(d) + 1);
    price = std::max(1.0, price * (1.0 + rng.uniform(-0.06, 0.06)));
  }
  return out;
}

void check_backtest_accounting() {
  bool pass = true;
  std::size_t reconciled = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    Rng rng(5000 + static_cast<std::uint64_t>(trial));
    const std::size_t n = 2 + rng.uniform_int(45);
    std::vector<DayRecord> days = price_walk(rng, n, 20.0 + rng.uniform(0.0, 180.0));
    std::vector<double> scores;
    for (std::size_t i = 0; i < n; ++i) scores.push_back(rng.uniform01());
    StrategyConfig config;
    switch (rng.uniform_int(4)) {
      case 0: config = StrategyConfig::fifty_fifty(); break;
      case 1: config = StrategyConfig::sixty_forty(); break;
      case 2: config = StrategyConfig::hold_signal(); break;
      default: config = StrategyConfig::hold_period(); break;
    }
    TradeLedger ledger = simulate(days, scores, config);
    double cash = 0.0;
    int position = 0;
    bool ok = true;
    for (const auto& ev : ledger.events) {
      cash += ev.cash_delta;
      if (ev.action == Action::Buy) {
        ok = ok && position == 0;
        position = ev.position_after;
      } else if (ev.action == Action::Sell) {
        ok = ok && position > 0;
        position = 0;
      }
      ok = ok && ev.position_after >= 0;
    }
    ok = ok && position == 0 && cash == ledger.profit;
    reconciled += ok;
    pass = pass && ok;
  }

  // Explicit 2-day case: BUY at 100, SELL at 110, 0.3% per fill.
  std::vector<DayRecord> days;
  DayRecord d1;
  d1.date = Date{2020, 3, 2};
  d1.open = d1.high = d1.low = d1.close = d1.adj_close = 100.0;
  DayRecord d2 = d1;
  d2.date = Date{2020, 3, 3};
  d2.open = d2.high = d2.low = d2.close = d2.adj_close = 110.0;
  days = {d1, d2};
  StrategyConfig config = StrategyConfig::fifty_fifty();
  config.shares = 1;
  TradeLedger ledger = simulate(days, std::vector<double>{0.9, 0.1}, config);
  const bool hand_case = std::abs(ledger.profit - 9.37) < 1e-12;
  pass = pass && hand_case;
  report("backtest accounting: 1000 random ledgers reconcile; 2-day case profits 9.37/share",
         pass,
         std::to_string(reconciled) + "/1000 reconciled, 2-day profit " +
             std::to_string(ledger.profit));
}

// ---------------------------------------------------------------------------
// 7. Strategy thresholds.
// ---------------------------------------------------------------------------
void check_strategy_thresholds() {
  const StrategyConfig fifty = StrategyConfig::fifty_fifty();
  const StrategyConfig sixty = StrategyConfig::sixty_forty();
  const bool pass = signal(0.49, fifty) == Action::Sell &&
                    signal(0.51, fifty) == Action::Buy &&
                    signal(0.50, fifty) == Action::Buy &&
                    signal(0.50, sixty) == Action::Hold &&
                    signal(0.39, sixty) == Action::Sell &&
                    signal(0.61, sixty) == Action::Buy;
  report("strategy thresholds: 0.49 sells / 0.51 buys under 50-50; 0.5 holds under 60-40",
         pass);
}

// ---------------------------------------------------------------------------
// 8. Indicator oracles.
// ---------------------------------------------------------------------------
void check_indicators() {
  bool pass = true;
  Rng rng(808);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 6 + static_cast<int>(rng.uniform_int(60));
    const int window = 1 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n)));
    std::vector<double> prices;
    for (int i = 0; i < n; ++i) prices.push_back(rng.uniform(5.0, 500.0));
    const auto fast = sma(prices, window);
    for (int i = window - 1; i < n; ++i) {
      double acc = 0.0;
      for (int k = i - window + 1; k <= i; ++k) acc += prices[static_cast<std::size_t>(k)];
      pass = pass && fast[static_cast<std::size_t>(i)].has_value() &&
             std::abs(*fast[static_cast<std::size_t>(i)] - acc / window) < 1e-12;
    }
  }

  // MACD at (12, 26, 9): constant series emits nothing; random walks
  // strictly alternate BUY/SELL.
  {
    std::vector<double> constant(60, 250.0);
    MacdState state = macd(constant, 12, 26, 9);
    for (Action a : state.actions) pass = pass && a == Action::Hold;
  }
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> prices{100.0};
    for (int i = 0; i < 150; ++i) {
      prices.push_back(std::max(1.0, prices.back() * (1.0 + rng.uniform(-0.04, 0.04))));
    }
    MacdState state = macd(prices, 12, 26, 9);
    Action previous = Action::Hold;
    for (Action a : state.actions) {
      if (a == Action::Hold) continue;
      pass = pass && (previous == Action::Hold || a != previous);
      previous = a;
    }
  }
  report("indicator oracles: SMA equals brute force at 1e-12; MACD(12,26,9) alternates, "
         "silent on constants",
         pass);
}

// ---------------------------------------------------------------------------
// 9. Statistics: the df=14 two-sided 95% quantile equals 2.145 within 1e-3,
//    and the reference (t, p) pair is consistent under the implemented CDF.
// ---------------------------------------------------------------------------
void check_statistics() {
  const double q = student_t_two_sided_quantile(0.95, 14.0);
  const bool quantile_ok = std::abs(q - 2.145) < 1e-3;
  // alpha = 2.145 is the two-sided 95% cut at df 14; the companion p-value
  // 0.004303 for t = 3.0526 is that distribution's one-sided tail.
  const double one_sided = student_t_two_sided_p(3.0526, 14.0) / 2.0;
  const bool pair_ok = std::abs(one_sided - 0.004303) < 5e-4;
  char detail[128];
  std::snprintf(detail, sizeof(detail), "quantile %.6f, one-sided tail %.6f at df 14", q,
                one_sided);
  report("statistics: t quantile(df=14, 95%) = 2.145 +- 1e-3; (3.0526, 0.004303) consistent",
         quantile_ok && pair_ok, detail);
}

// ---------------------------------------------------------------------------
// 10. Metric identities on 1000 random confusion matrices.
// ---------------------------------------------------------------------------
void check_metric_identities() {
  Rng rng(909);
  bool pass = true;
  for (int trial = 0; trial < 1000; ++trial) {
    EvalReport r;
    r.tp = static_cast<long>(rng.uniform_int(200));
    r.fp = static_cast<long>(rng.uniform_int(200));
    r.tn = static_cast<long>(rng.uniform_int(200));
    r.fn = static_cast<long>(rng.uniform_int(200));
    fill_metrics(r);
    const long total = r.tp + r.fp + r.tn + r.fn;
    if (total > 0) {
      pass = pass && r.accuracy.has_value() &&
             *r.accuracy == static_cast<double>(r.tp + r.tn) / static_cast<double>(total);
    } else {
      pass = pass && !r.accuracy.has_value();
    }
    if (r.tp + r.fn > 0) {
      pass = pass && r.sensitivity.has_value() &&
             *r.sensitivity == static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);
    } else {
      pass = pass && !r.sensitivity.has_value();
    }
    if (r.tn + r.fp > 0) {
      pass = pass && r.specificity.has_value() &&
             *r.specificity == static_cast<double>(r.tn) / static_cast<double>(r.tn + r.fp);
    } else {
      pass = pass && !r.specificity.has_value();
    }
  }
  report("metric identities hold on 1000 random confusion matrices", pass);
}

}  // namespace

int main() {
  check_gradient_suite();
  check_lstm_oracle();
  check_labeling_oracle();
  check_attention_identities();
  check_overfit();
  check_backtest_accounting();
  check_strategy_thresholds();
  check_indicators();
  check_statistics();
  check_metric_identities();
  skip("published-dataset reproduction (hybrid accuracy ~66.48%, six-stock profit ~6369)",
       "requires the published dataset and full-scale training; excluded from CI");
  if (g_failures == 0) {
    std::cout << "acceptance: all criteria passed\n";
    return 0;
  }
  std::cout << "acceptance: " << g_failures << " criteria FAILED\n";
  return 1;
}
