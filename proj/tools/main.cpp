#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hpsmp/backtest.hpp"
#include "hpsmp/dataset.hpp"
#include "hpsmp/errors.hpp"
#include "hpsmp/gradsuite.hpp"
#include "hpsmp/indicators.hpp"
#include "hpsmp/model.hpp"
#include "hpsmp/stats.hpp"
#include "hpsmp/train.hpp"
#include "hpsmp/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOpts {
  std::string out_dir = "out";
  std::uint64_t seed = 42;
};

fs::path prepare_out_dir(const CommonOpts& common) {
  fs::path dir(common.out_dir);
  fs::create_directories(dir);
  return dir;
}

// Every run leaves a reproducibility record next to its outputs.
void write_run_echo(const fs::path& out_dir, const std::string& command,
                    const CommonOpts& common, json options) {
  json j;
  j["command"] = command;
  j["version"] = hpsmp::kVersion;
  j["seed"] = common.seed;
  j["options"] = std::move(options);
  std::ofstream out(out_dir / "run_config.json");
  out << j.dump(2) << "\n";
}

std::vector<std::size_t> split_indices(const hpsmp::BuiltDataset& built,
                                       const std::string& split) {
  if (split == "train") return built.dataset.train_idx;
  if (split == "val") return built.dataset.val_idx;
  if (split == "test") return built.dataset.test_idx;
  if (split == "all") {
    std::vector<std::size_t> all(built.dataset.days.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
  }
  throw hpsmp::ContractError("unknown split: " + split);
}

std::vector<hpsmp::DayRecord> subset_days(const hpsmp::BuiltDataset& built,
                                          const std::vector<std::size_t>& indices) {
  std::vector<hpsmp::DayRecord> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(built.dataset.days[i]);
  return out;
}

hpsmp::EmbeddingTable make_embedding(const std::string& embeddings_path,
                                     const hpsmp::Vocabulary& vocab, int width,
                                     std::uint64_t seed) {
  hpsmp::Rng rng = hpsmp::Rng::substream(seed, "embedding-init");
  if (embeddings_path.empty()) return hpsmp::random_embeddings(vocab, width, rng);
  return hpsmp::load_embeddings(embeddings_path, vocab, rng);
}

// ---------------------------------------------------------------------------
// build-dataset
// ---------------------------------------------------------------------------

struct BuildDatasetOpts {
  std::string prices;
  std::string tweets;
  hpsmp::DatasetBuildConfig config;
  std::string train_end = "2020-01-31";
  std::string val_end = "2020-02-29";
  std::string test_end = "2020-07-30";
};

int run_build_dataset(const CommonOpts& common, const BuildDatasetOpts& opts) {
  hpsmp::DatasetBuildConfig config = opts.config;
  config.bounds = hpsmp::SplitBounds{hpsmp::parse_date(opts.train_end),
                                     hpsmp::parse_date(opts.val_end),
                                     hpsmp::parse_date(opts.test_end)};
  auto prices = hpsmp::load_prices_csv(opts.prices);
  auto tweets = hpsmp::load_tweets_jsonl(opts.tweets);
  hpsmp::BuiltDataset built = hpsmp::build_dataset(std::move(prices), tweets, config, common.seed);

  const fs::path out_dir = prepare_out_dir(common);
  hpsmp::save_dataset(built, (out_dir / "dataset.json").string());
  {
    std::ofstream vocab_out(out_dir / "vocabulary.txt");
    for (const auto& token : built.vocab.tokens()) vocab_out << token << "\n";
  }
  hpsmp::export_summary_csv(built.dataset.days, (out_dir / "summary.csv").string());

  const std::vector<std::string> fields{"open", "high",       "low",  "close",
                                        "adj_close", "covid_flag", "label"};
  hpsmp::CorrelationMatrix cm = hpsmp::correlation_matrix(built.dataset.days, fields);
  {
    std::ofstream corr(out_dir / "correlation.csv");
    corr.precision(17);
    corr << "field";
    for (const auto& f : cm.fields) corr << "," << f;
    corr << "\n";
    for (std::size_t r = 0; r < cm.fields.size(); ++r) {
      corr << cm.fields[r];
      for (std::size_t c = 0; c < cm.fields.size(); ++c) corr << "," << cm.at(r, c);
      corr << "\n";
    }
  }

  long labeled = 0, ups = 0, covid_days = 0;
  for (const auto& d : built.dataset.days) {
    labeled += d.label.has_value();
    ups += d.label.value_or(0);
    covid_days += d.covid_flag;
  }
  {
    json counts;
    counts["days"] = built.dataset.days.size();
    counts["labeled"] = labeled;
    counts["label_up"] = ups;
    counts["label_down"] = labeled - ups;
    counts["covid_days"] = covid_days;
    counts["vocab_size"] = built.vocab.size();
    counts["train_days"] = built.dataset.train_idx.size();
    counts["val_days"] = built.dataset.val_idx.size();
    counts["test_days"] = built.dataset.test_idx.size();
    std::ofstream out(out_dir / "counts.json");
    out << counts.dump(2) << "\n";
  }
  write_run_echo(out_dir, "build-dataset", common,
                 json{{"prices", opts.prices},
                      {"tweets", opts.tweets},
                      {"horizon", config.horizon},
                      {"threshold", config.threshold},
                      {"min_count", config.min_count},
                      {"train_end", opts.train_end},
                      {"val_end", opts.val_end},
                      {"test_end", opts.test_end}});

  std::cout << "dataset: " << built.dataset.days.size() << " trading days, " << labeled
            << " labeled (" << ups << " up / " << (labeled - ups) << " down), vocabulary "
            << built.vocab.size() << " tokens\n";
  std::cout << "splits: train " << built.dataset.train_idx.size() << ", val "
            << built.dataset.val_idx.size() << ", test " << built.dataset.test_idx.size()
            << "\n";
  std::cout << "wrote " << (out_dir / "dataset.json").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train / evaluate / predict
// ---------------------------------------------------------------------------

struct TrainOpts {
  std::string dataset;
  std::string embeddings;
  std::string model = "hybrid";
  std::string head = "sigmoid";
  std::string price_fusion = "token";
  hpsmp::TrainConfig config;
  bool tiny = false;
};

void apply_tiny_preset(hpsmp::ModelConfig& m) {
  m.max_len = 12;
  m.embed_width = 8;
  m.la_window = 3;
  m.lg_conv_filters = 6;
  m.lg_conv_kernel = 5;
  m.bl_conv1_filters = 6;
  m.bl_conv1_kernel = 5;
  m.bl_conv2_filters = 8;
  m.bl_conv2_kernel = 3;
  m.lstm_hidden = 8;
  m.fusion1 = 16;
  m.fusion2 = 8;
  m.lg_standalone_conv_filters = 8;
  m.lg_standalone_ga_filters = 4;
  m.bl_standalone_conv_filters = 8;
  m.bl_standalone_dense = 12;
}

int run_train(const CommonOpts& common, TrainOpts opts) {
  hpsmp::BuiltDataset built = hpsmp::load_dataset(opts.dataset);
  opts.config.seed = common.seed;
  opts.config.model.kind = hpsmp::model_kind_from_string(opts.model);
  opts.config.model.head = hpsmp::head_kind_from_string(opts.head);
  if (opts.price_fusion == "none") {
    opts.config.model.price_fusion = hpsmp::PriceFusion::None;
  } else if (opts.price_fusion != "token") {
    throw hpsmp::ContractError("--price-fusion must be token or none");
  }
  opts.config.horizon = built.config.horizon;
  if (opts.tiny) apply_tiny_preset(opts.config.model);

  hpsmp::EmbeddingTable table = make_embedding(opts.embeddings, built.vocab,
                                               opts.config.model.embed_width, common.seed);
  opts.config.model.embed_width = table.width;

  hpsmp::TrainResult result = hpsmp::train(built.dataset, std::move(table), opts.config);

  const fs::path out_dir = prepare_out_dir(common);
  hpsmp::save_checkpoint(result.model, (out_dir / "checkpoint.txt").string());
  hpsmp::write_curves_csv((out_dir / "curves.csv").string(), result.curves);
  if (!built.dataset.val_idx.empty()) {
    bool any_labeled = false;
    for (std::size_t i : built.dataset.val_idx) {
      any_labeled = any_labeled || built.dataset.days[i].label.has_value();
    }
    if (any_labeled) {
      hpsmp::EvalReport report =
          hpsmp::evaluate(result.model, built.dataset.days, built.dataset.val_idx);
      hpsmp::write_report_json((out_dir / "val_report.json").string(), report, opts.config);
    }
  }
  write_run_echo(out_dir, "train", common,
                 json{{"dataset", opts.dataset},
                      {"embeddings", opts.embeddings},
                      {"model", opts.model},
                      {"head", opts.head},
                      {"lr", opts.config.lr},
                      {"batch_size", opts.config.batch_size},
                      {"epochs", opts.config.epochs},
                      {"tiny", opts.tiny},
                      {"model_config",
                       json::parse(hpsmp::config_to_json_string(opts.config.model))}});

  if (result.aborted_non_finite) {
    std::cout << "training aborted on a non-finite loss after "
              << result.completed_epochs << " epochs; last finite snapshot saved\n";
    return 3;
  }
  const auto& last = result.curves.back();
  std::cout << "trained " << opts.model << " for " << result.completed_epochs
            << " epochs: train loss " << last.train_loss << ", train acc " << last.train_acc;
  if (!std::isnan(last.val_acc)) {
    std::cout << ", val acc " << last.val_acc;
  }
  std::cout << "\nwrote " << (out_dir / "checkpoint.txt").string() << "\n";
  return 0;
}

struct EvaluateOpts {
  std::string dataset;
  std::string checkpoint;
  std::string split = "test";
};

int run_evaluate(const CommonOpts& common, const EvaluateOpts& opts) {
  hpsmp::BuiltDataset built = hpsmp::load_dataset(opts.dataset);
  hpsmp::Model model = hpsmp::load_checkpoint(opts.checkpoint);
  hpsmp::EvalReport report =
      hpsmp::evaluate(model, built.dataset.days, split_indices(built, opts.split));

  const fs::path out_dir = prepare_out_dir(common);
  hpsmp::TrainConfig echo;
  echo.model = model.config;
  echo.seed = model.seed;
  echo.horizon = built.config.horizon;
  hpsmp::write_report_json((out_dir / "report.json").string(), report, echo);
  write_run_echo(out_dir, "evaluate", common,
                 json{{"dataset", opts.dataset},
                      {"checkpoint", opts.checkpoint},
                      {"split", opts.split}});

  auto fmt = [](const std::optional<double>& v) {
    return v ? std::to_string(*v) : std::string("undefined");
  };
  std::cout << "confusion: TP " << report.tp << "  FP " << report.fp << "  TN " << report.tn
            << "  FN " << report.fn << "\n";
  std::cout << "accuracy " << fmt(report.accuracy) << ", sensitivity "
            << fmt(report.sensitivity) << ", specificity " << fmt(report.specificity) << "\n";
  return 0;
}

struct PredictOpts {
  std::string dataset;
  std::string checkpoint;
  std::string split = "test";
};

int run_predict(const CommonOpts& common, const PredictOpts& opts) {
  hpsmp::BuiltDataset built = hpsmp::load_dataset(opts.dataset);
  hpsmp::Model model = hpsmp::load_checkpoint(opts.checkpoint);
  const auto indices = split_indices(built, opts.split);
  if (indices.empty()) throw hpsmp::ContractError("predict: empty split " + opts.split);
  std::vector<hpsmp::DayRecord> days = subset_days(built, indices);
  std::vector<double> scores;
  scores.reserve(days.size());
  for (const auto& day : days) scores.push_back(hpsmp::predict(model, day));

  const fs::path out_dir = prepare_out_dir(common);
  hpsmp::write_scores_csv((out_dir / "scores.csv").string(), days, scores);
  write_run_echo(out_dir, "predict", common,
                 json{{"dataset", opts.dataset},
                      {"checkpoint", opts.checkpoint},
                      {"split", opts.split}});
  std::cout << "wrote " << scores.size() << " scores to "
            << (out_dir / "scores.csv").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// backtest / mc / baseline
// ---------------------------------------------------------------------------

struct BacktestOpts {
  std::string prices;
  std::string dataset;
  std::string split = "test";
  std::string scores;
  std::string strategy = "5050";
  double cost = 0.003;
  int shares = 100;
  std::string start_date;
  std::string end_date;
};

hpsmp::StrategyConfig strategy_from(const std::string& name, double cost, int shares,
                                    const std::string& start, const std::string& end) {
  hpsmp::StrategyConfig config =
      hpsmp::StrategyConfig::for_kind(hpsmp::strategy_kind_from_string(name));
  config.transaction_cost_rate = cost;
  config.shares = shares;
  if (!start.empty()) config.start_date = hpsmp::parse_date(start);
  if (!end.empty()) config.end_date = hpsmp::parse_date(end);
  return config;
}

void print_ledger_summary(const hpsmp::TradeLedger& ledger) {
  std::cout << "trades " << ledger.n_trades << ", profit " << ledger.profit
            << ", period return " << ledger.period_return << ", costs "
            << ledger.total_cost;
  if (ledger.forced_close) std::cout << " (forced close at period end)";
  std::cout << "\n";
  if (ledger.weighted_returns.size() >= 2) {
    const hpsmp::SharpeResult sr = hpsmp::sharpe(ledger.weighted_returns);
    std::cout << "E(R) " << hpsmp::mean(ledger.weighted_returns) << ", Std(R) "
              << hpsmp::sample_std(ledger.weighted_returns) << ", Sharpe "
              << (sr.defined ? std::to_string(sr.value) : std::string("undefined")) << "\n";
  }
}

int run_backtest(const CommonOpts& common, const BacktestOpts& opts) {
  if (opts.prices.empty() == opts.dataset.empty()) {
    throw hpsmp::ContractError("backtest needs exactly one of --prices or --dataset");
  }
  std::vector<hpsmp::DayRecord> days;
  if (!opts.prices.empty()) {
    days = hpsmp::align(hpsmp::load_prices_csv(opts.prices), {});
  } else {
    hpsmp::BuiltDataset built = hpsmp::load_dataset(opts.dataset);
    days = subset_days(built, split_indices(built, opts.split));
  }
  const hpsmp::StrategyConfig config =
      strategy_from(opts.strategy, opts.cost, opts.shares, opts.start_date, opts.end_date);
  const std::vector<double> scores = hpsmp::load_scores_csv(opts.scores, days);
  const hpsmp::TradeLedger ledger = hpsmp::simulate(days, scores, config);

  const fs::path out_dir = prepare_out_dir(common);
  hpsmp::write_ledger_csv((out_dir / "ledger.csv").string(), ledger);
  hpsmp::write_ledger_summary_json((out_dir / "backtest_summary.json").string(), ledger,
                                   config);
  write_run_echo(out_dir, "backtest", common,
                 json{{"prices", opts.prices},
                      {"dataset", opts.dataset},
                      {"split", opts.split},
                      {"scores", opts.scores},
                      {"strategy", opts.strategy},
                      {"cost", opts.cost},
                      {"shares", opts.shares}});
  print_ledger_summary(ledger);
  return 0;
}

struct McOpts {
  std::string prices_dir;
  std::string scores_dir;
  int runs = 100;
  int pick = 6;
  std::string strategy = "5050";
  double cost = 0.003;
  int shares = 100;
};

int run_mc(const CommonOpts& common, const McOpts& opts) {
  std::vector<fs::path> price_files;
  for (const auto& entry : fs::directory_iterator(opts.prices_dir)) {
    if (entry.path().extension() == ".csv") price_files.push_back(entry.path());
  }
  std::sort(price_files.begin(), price_files.end());
  if (price_files.empty()) {
    throw hpsmp::DataError("no .csv price files in " + opts.prices_dir);
  }
  std::vector<hpsmp::McInput> universe;
  for (const auto& file : price_files) {
    hpsmp::McInput input;
    input.ticker = file.stem().string();
    input.days = hpsmp::align(hpsmp::load_prices_csv(file.string()), {});
    const fs::path scores_file = fs::path(opts.scores_dir) / file.filename();
    input.scores = hpsmp::load_scores_csv(scores_file.string(), input.days);
    universe.push_back(std::move(input));
  }
  const hpsmp::StrategyConfig config =
      strategy_from(opts.strategy, opts.cost, opts.shares, "", "");
  const auto runs = hpsmp::monte_carlo(universe, opts.runs, opts.pick, config, common.seed);

  const fs::path out_dir = prepare_out_dir(common);
  hpsmp::write_mc_csv((out_dir / "mc.csv").string(), runs, universe);
  std::vector<double> profits;
  profits.reserve(runs.size());
  long positive = 0;
  for (const auto& r : runs) {
    profits.push_back(r.profit);
    positive += r.profit > 0.0;
  }
  {
    json j;
    j["runs"] = opts.runs;
    j["pick"] = opts.pick;
    j["mean_profit"] = hpsmp::mean(profits);
    j["std_profit"] = profits.size() >= 2 ? hpsmp::sample_std(profits) : 0.0;
    j["min_profit"] = *std::min_element(profits.begin(), profits.end());
    j["max_profit"] = *std::max_element(profits.begin(), profits.end());
    j["positive_fraction"] = static_cast<double>(positive) / static_cast<double>(runs.size());
    std::ofstream out(out_dir / "mc_summary.json");
    out << j.dump(2) << "\n";
  }
  write_run_echo(out_dir, "mc", common,
                 json{{"prices_dir", opts.prices_dir},
                      {"scores_dir", opts.scores_dir},
                      {"runs", opts.runs},
                      {"pick", opts.pick},
                      {"strategy", opts.strategy},
                      {"cost", opts.cost},
                      {"shares", opts.shares}});
  std::cout << opts.runs << " runs over " << universe.size() << " tickers: mean profit "
            << hpsmp::mean(profits) << ", positive in " << positive << "/" << runs.size()
            << " runs\n";
  return 0;
}

struct BaselineOpts {
  std::string prices;
  std::string indicator = "sma";
  int window = 5;
  int fast = 12;
  int slow = 26;
  int signal_period = 9;
  double cost = 0.003;
  int shares = 100;
};

int run_baseline(const CommonOpts& common, const BaselineOpts& opts) {
  const auto days = hpsmp::align(hpsmp::load_prices_csv(opts.prices), {});
  std::vector<double> closes;
  closes.reserve(days.size());
  for (const auto& d : days) closes.push_back(d.adj_close);

  const fs::path out_dir = prepare_out_dir(common);
  std::vector<hpsmp::Action> actions;
  if (opts.indicator == "sma") {
    actions = hpsmp::sma_signal(closes, opts.window);
    const auto avg = hpsmp::sma(closes, opts.window);
    std::ofstream csv(out_dir / "indicator.csv");
    csv.precision(17);
    csv << "Date,SMA,Action\n";
    for (std::size_t i = 0; i < days.size(); ++i) {
      csv << hpsmp::to_string(days[i].date) << ",";
      if (avg[i]) csv << *avg[i];
      csv << "," << hpsmp::to_string(actions[i]) << "\n";
    }
  } else if (opts.indicator == "macd") {
    const hpsmp::MacdState macd =
        hpsmp::macd(closes, opts.fast, opts.slow, opts.signal_period);
    actions = macd.actions;
    std::ofstream csv(out_dir / "indicator.csv");
    csv.precision(17);
    csv << "Date,Value,Signal,Divergence,Action\n";
    for (std::size_t i = 0; i < days.size(); ++i) {
      csv << hpsmp::to_string(days[i].date) << "," << macd.value[i] << "," << macd.signal[i]
          << "," << macd.divergence[i] << "," << hpsmp::to_string(actions[i]) << "\n";
    }
  } else {
    throw hpsmp::ContractError("unknown indicator: " + opts.indicator);
  }

  hpsmp::StrategyConfig config = hpsmp::StrategyConfig::fifty_fifty();
  config.transaction_cost_rate = opts.cost;
  config.shares = opts.shares;
  const hpsmp::TradeLedger ledger = hpsmp::simulate_actions(days, actions, config);
  hpsmp::write_ledger_csv((out_dir / "ledger.csv").string(), ledger);
  hpsmp::write_ledger_summary_json((out_dir / "baseline_summary.json").string(), ledger,
                                   config);
  write_run_echo(out_dir, "baseline", common,
                 json{{"prices", opts.prices},
                      {"indicator", opts.indicator},
                      {"window", opts.window},
                      {"fast", opts.fast},
                      {"slow", opts.slow},
                      {"signal_period", opts.signal_period},
                      {"cost", opts.cost},
                      {"shares", opts.shares}});
  std::cout << opts.indicator << " baseline: ";
  print_ledger_summary(ledger);
  return 0;
}

struct TtestOpts {
  std::string summary_a;
  std::string summary_b;
  std::string returns = "trade";  // trade | daily
};

std::vector<double> returns_from_summary(const std::string& path, const std::string& kind) {
  std::ifstream in(path);
  if (!in) throw hpsmp::DataError("cannot open backtest summary: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw hpsmp::ParseError(path + ": " + e.what());
  }
  const char* key = kind == "daily" ? "weighted_returns" : "trade_returns";
  if (!j.contains(key)) throw hpsmp::ParseError(path + ": summary lacks " + std::string(key));
  return j.at(key).get<std::vector<double>>();
}

int run_ttest(const CommonOpts& common, const TtestOpts& opts) {
  if (opts.returns != "trade" && opts.returns != "daily") {
    throw hpsmp::ContractError("--returns must be trade or daily");
  }
  const auto a = returns_from_summary(opts.summary_a, opts.returns);
  const auto b = returns_from_summary(opts.summary_b, opts.returns);
  const hpsmp::TTestResult result = hpsmp::t_test(a, b);

  const fs::path out_dir = prepare_out_dir(common);
  {
    json j;
    j["returns"] = opts.returns;
    j["n_a"] = a.size();
    j["n_b"] = b.size();
    j["t_value"] = result.t_value;
    j["p_value"] = result.p_value;
    j["df"] = result.df;
    j["reject_at_95"] = result.reject_at_95;
    j["defined"] = result.defined;
    std::ofstream out(out_dir / "ttest.json");
    out << j.dump(2) << "\n";
  }
  write_run_echo(out_dir, "ttest", common,
                 json{{"a", opts.summary_a}, {"b", opts.summary_b}, {"returns", opts.returns}});
  if (!result.defined) {
    std::cout << "t-test undefined: zero pooled variance\n";
    return 0;
  }
  std::cout << "t = " << result.t_value << ", two-sided p = " << result.p_value << " at df "
            << result.df << (result.reject_at_95 ? " -> reject at 95%" : " -> no rejection")
            << "\n";
  return 0;
}

struct GradcheckOpts {
  double tol = 1e-4;
};

int run_gradcheck(const CommonOpts& common, const GradcheckOpts& opts) {
  const auto results = hpsmp::run_gradient_suite(common.seed, opts.tol);
  bool ok = true;
  for (const auto& r : results) {
    ok = ok && r.report.pass;
    std::cout << (r.report.pass ? "PASS" : "FAIL") << "  " << r.name << "  max rel err "
              << r.report.max_rel_err << " over " << r.report.coords_checked << " coords";
    if (!r.report.finite) std::cout << " (non-finite values)";
    std::cout << "\n";
  }
  std::cout << (ok ? "gradient suite: all passed" : "gradient suite: FAILURES") << "\n";
  return ok ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hybrid stock-movement prediction and trading evaluation toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key = value configuration file with [section] headers");
  app.allow_config_extras(CLI::config_extras_mode::ignore);

  CommonOpts common;
  app.add_option("--seed", common.seed, "master seed; all randomness derives from it")
      ->capture_default_str();
  app.add_option("--out", common.out_dir, "output directory")
      ->envname("HPSMP_OUT_DIR")
      ->capture_default_str();

  BuildDatasetOpts bd;
  CLI::App* build = app.add_subcommand("build-dataset",
                                       "ingest prices + tweets into a labeled dataset archive");
  build->add_option("--prices", bd.prices, "price CSV (Date,Open,High,Low,Close,AdjClose,Volume)")
      ->required();
  build->add_option("--tweets", bd.tweets, "tweet JSONL (date, text, retweets)")->required();
  build->add_option("--horizon", bd.config.horizon, "labeling horizon in trading days")
      ->capture_default_str();
  build->add_option("--threshold", bd.config.threshold, "up-day count needed for label 1")
      ->capture_default_str();
  build->add_option("--min-count", bd.config.min_count, "vocabulary frequency cutoff")
      ->capture_default_str();
  build->add_option("--train-end", bd.train_end, "last training date")->capture_default_str();
  build->add_option("--val-end", bd.val_end, "last validation date")->capture_default_str();
  build->add_option("--test-end", bd.test_end, "last test date")->capture_default_str();

  TrainOpts tr;
  CLI::App* train_cmd = app.add_subcommand("train", "train a model on a dataset archive");
  train_cmd->add_option("--dataset", tr.dataset, "dataset archive from build-dataset")
      ->required();
  train_cmd->add_option("--embeddings", tr.embeddings,
                        "pretrained embedding file (token + floats per line)");
  train_cmd->add_option("--model", tr.model, "hybrid | cnn-lg | cnn-blstm")
      ->capture_default_str();
  train_cmd->add_option("--head", tr.head, "sigmoid | relu")->capture_default_str();
  train_cmd->add_option("--lr", tr.config.lr, "Adam learning rate")->capture_default_str();
  train_cmd->add_option("--batch", tr.config.batch_size, "batch size")->capture_default_str();
  train_cmd->add_option("--epochs", tr.config.epochs, "training epochs")->capture_default_str();
  train_cmd->add_option("--max-len", tr.config.model.max_len, "tokens per day")
      ->capture_default_str();
  train_cmd->add_option("--embed-width", tr.config.model.embed_width,
                        "embedding width (overridden by --embeddings files)")
      ->capture_default_str();
  train_cmd->add_option("--dropout", tr.config.model.dropout, "fusion dropout rate")
      ->capture_default_str();
  train_cmd->add_flag("--batch-norm", tr.config.model.use_batch_norm,
                      "insert batch normalization after conv layers");
  train_cmd->add_flag("--finetune-embeddings", tr.config.model.finetune_embeddings,
                      "also train pretrained embedding rows");
  train_cmd->add_option("--price-fusion", tr.price_fusion,
                        "token: learned synthetic price row | none: text only")
      ->capture_default_str();
  train_cmd->add_flag("--tiny", tr.tiny, "desk-scale layer sizes");

  EvaluateOpts ev;
  CLI::App* eval_cmd = app.add_subcommand("evaluate", "confusion matrix and metrics on a split");
  eval_cmd->add_option("--dataset", ev.dataset, "dataset archive")->required();
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "model checkpoint")->required();
  eval_cmd->add_option("--split", ev.split, "train | val | test")->capture_default_str();

  PredictOpts pr;
  CLI::App* predict_cmd = app.add_subcommand("predict", "emit per-day movement scores");
  predict_cmd->add_option("--dataset", pr.dataset, "dataset archive")->required();
  predict_cmd->add_option("--checkpoint", pr.checkpoint, "model checkpoint")->required();
  predict_cmd->add_option("--split", pr.split, "train | val | test | all")
      ->capture_default_str();

  BacktestOpts bt;
  CLI::App* backtest_cmd = app.add_subcommand("backtest", "simulate trading from scores");
  backtest_cmd->add_option("--prices", bt.prices, "price CSV");
  backtest_cmd->add_option("--dataset", bt.dataset, "dataset archive (alternative to --prices)");
  backtest_cmd->add_option("--split", bt.split, "dataset split to trade")->capture_default_str();
  backtest_cmd->add_option("--scores", bt.scores, "scores CSV (Date,Score)")->required();
  backtest_cmd->add_option("--strategy", bt.strategy, "5050 | 6040 | hold1 | hold2")
      ->capture_default_str();
  backtest_cmd->add_option("--cost", bt.cost, "transaction cost rate")->capture_default_str();
  backtest_cmd->add_option("--shares", bt.shares, "shares per position")->capture_default_str();
  backtest_cmd->add_option("--start", bt.start_date, "first trading date (YYYY-MM-DD)");
  backtest_cmd->add_option("--end", bt.end_date, "last trading date (YYYY-MM-DD)");

  McOpts mc;
  CLI::App* mc_cmd = app.add_subcommand("mc", "Monte Carlo portfolio sampling");
  mc_cmd->add_option("--prices-dir", mc.prices_dir, "directory of <ticker>.csv price files")
      ->required();
  mc_cmd->add_option("--scores-dir", mc.scores_dir, "directory of matching <ticker>.csv scores")
      ->required();
  mc_cmd->add_option("--runs", mc.runs, "simulation runs")->capture_default_str();
  mc_cmd->add_option("--pick", mc.pick, "tickers sampled per run")->capture_default_str();
  mc_cmd->add_option("--strategy", mc.strategy, "5050 | 6040 | hold1 | hold2")
      ->capture_default_str();
  mc_cmd->add_option("--cost", mc.cost, "transaction cost rate")->capture_default_str();
  mc_cmd->add_option("--shares", mc.shares, "shares per position")->capture_default_str();

  BaselineOpts bl;
  CLI::App* baseline_cmd = app.add_subcommand("baseline", "SMA / MACD indicator baselines");
  baseline_cmd->add_option("--prices", bl.prices, "price CSV")->required();
  baseline_cmd->add_option("--indicator", bl.indicator, "sma | macd")->capture_default_str();
  baseline_cmd->add_option("--window", bl.window, "SMA window")->capture_default_str();
  baseline_cmd->add_option("--fast", bl.fast, "MACD fast EMA period")->capture_default_str();
  baseline_cmd->add_option("--slow", bl.slow, "MACD slow EMA period")->capture_default_str();
  baseline_cmd->add_option("--signal-period", bl.signal_period, "MACD signal EMA period")
      ->capture_default_str();
  baseline_cmd->add_option("--cost", bl.cost, "transaction cost rate")->capture_default_str();
  baseline_cmd->add_option("--shares", bl.shares, "shares per position")->capture_default_str();

  TtestOpts tt;
  CLI::App* ttest_cmd = app.add_subcommand(
      "ttest", "Welch t-test between two backtest summaries' return series");
  ttest_cmd->add_option("--a", tt.summary_a, "first backtest summary JSON")->required();
  ttest_cmd->add_option("--b", tt.summary_b, "second backtest summary JSON")->required();
  ttest_cmd->add_option("--returns", tt.returns, "trade | daily")->capture_default_str();

  GradcheckOpts gc;
  CLI::App* gradcheck_cmd =
      app.add_subcommand("gradcheck", "finite-difference checks over all ops and paths");
  gradcheck_cmd->add_option("--tol", gc.tol, "max relative error")->capture_default_str();

  // Global options (--seed, --out, --config) may appear after the subcommand.
  for (CLI::App* sub : {build, train_cmd, eval_cmd, predict_cmd, backtest_cmd, mc_cmd,
                        baseline_cmd, ttest_cmd, gradcheck_cmd}) {
    sub->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // usage errors
  }

  try {
    if (build->parsed()) return run_build_dataset(common, bd);
    if (train_cmd->parsed()) return run_train(common, tr);
    if (eval_cmd->parsed()) return run_evaluate(common, ev);
    if (predict_cmd->parsed()) return run_predict(common, pr);
    if (backtest_cmd->parsed()) return run_backtest(common, bt);
    if (mc_cmd->parsed()) return run_mc(common, mc);
    if (baseline_cmd->parsed()) return run_baseline(common, bl);
    if (ttest_cmd->parsed()) return run_ttest(common, tt);
    if (gradcheck_cmd->parsed()) return run_gradcheck(common, gc);
  } catch (const hpsmp::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const hpsmp::ContractError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {  // parse/data/dimension errors
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
