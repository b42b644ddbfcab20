#include <doctest.h>

#include <cmath>
#include <fstream>

#include "hpsmp/rng.hpp"
#include "hpsmp/train.hpp"

using namespace hpsmp;

namespace {

DayRecord synth_day(const Date& date, double adj, std::vector<int> tokens,
                    std::optional<int> label) {
  DayRecord d;
  d.date = date;
  d.open = adj;
  d.high = adj * 1.02;
  d.low = adj * 0.98;
  d.close = adj;
  d.adj_close = adj;
  d.volume = 1000;
  d.tokens = std::move(tokens);
  d.label = label;
  return d;
}

// Tiny two-token world: token 0 means "up" days, token 1 means "down" days.
// Labels follow the token exactly, so the set is linearly separable.
LabeledDataset separable_dataset(int n_train, int n_val) {
  LabeledDataset ds;
  Date d = parse_date("2020-01-06");
  Rng rng(3);
  for (int i = 0; i < n_train + n_val; ++i) {
    while (is_weekend(d)) d = civil_from_days(days_from_civil(d) + 1);
    const int cls = i % 2;
    const double adj = 100.0 + rng.uniform(-1.0, 1.0);
    ds.days.push_back(synth_day(d, adj, std::vector<int>(4, cls), cls));
    if (i < n_train) {
      ds.train_idx.push_back(static_cast<std::size_t>(i));
    } else {
      ds.val_idx.push_back(static_cast<std::size_t>(i));
    }
    d = civil_from_days(days_from_civil(d) + 1);
  }
  ds.bounds = SplitBounds{ds.days[static_cast<std::size_t>(n_train - 1)].date,
                          ds.days.back().date,
                          civil_from_days(days_from_civil(ds.days.back().date) + 30)};
  return ds;
}

TrainConfig tiny_train_config(int epochs, std::uint64_t seed) {
  TrainConfig config;
  config.model.kind = ModelKind::Hybrid;
  config.model.max_len = 6;
  config.model.embed_width = 3;
  config.model.la_window = 3;
  config.model.lg_conv_filters = 3;
  config.model.lg_conv_kernel = 3;
  config.model.bl_conv1_filters = 3;
  config.model.bl_conv1_kernel = 3;
  config.model.bl_conv2_filters = 4;
  config.model.bl_conv2_kernel = 2;
  config.model.lstm_hidden = 4;
  config.model.fusion1 = 5;
  config.model.fusion2 = 3;
  config.model.dropout = 0.0;  // keep the tiny runs noiseless
  config.batch_size = 4;
  config.epochs = epochs;
  config.seed = seed;
  return config;
}

EmbeddingTable tiny_table(std::uint64_t seed) {
  Vocabulary vocab = Vocabulary::build({{"up", "down", "flat"}}, 1);
  Rng rng(seed);
  return random_embeddings(vocab, 3, rng);
}

}  // namespace

TEST_CASE("metric identities hold on random confusion counts") {
  Rng rng(41);
  for (int trial = 0; trial < 1000; ++trial) {
    EvalReport r;
    r.tp = static_cast<long>(rng.uniform_int(50));
    r.fp = static_cast<long>(rng.uniform_int(50));
    r.tn = static_cast<long>(rng.uniform_int(50));
    r.fn = static_cast<long>(rng.uniform_int(50));
    fill_metrics(r);
    const long total = r.tp + r.fp + r.tn + r.fn;
    if (total == 0) {
      CHECK_FALSE(r.accuracy.has_value());
    } else {
      CHECK(*r.accuracy == doctest::Approx(static_cast<double>(r.tp + r.tn) / total));
    }
    if (r.tp + r.fn == 0) {
      CHECK_FALSE(r.sensitivity.has_value());
    } else {
      CHECK(*r.sensitivity ==
            doctest::Approx(static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn)));
    }
    if (r.tn + r.fp == 0) {
      CHECK_FALSE(r.specificity.has_value());
    } else {
      CHECK(*r.specificity ==
            doctest::Approx(static_cast<double>(r.tn) / static_cast<double>(r.tn + r.fp)));
    }
  }
}

TEST_CASE("metric spot values") {
  SUBCASE("perfect predictor scores 1.0 across the board") {
    EvalReport r;
    r.tp = 12;
    r.tn = 8;
    fill_metrics(r);
    CHECK(*r.accuracy == 1.0);
    CHECK(*r.sensitivity == 1.0);
    CHECK(*r.specificity == 1.0);
  }
  SUBCASE("TP=30, FN=20 gives sensitivity 0.60") {
    EvalReport r;
    r.tp = 30;
    r.fn = 20;
    r.tn = 1;
    fill_metrics(r);
    CHECK(*r.sensitivity == doctest::Approx(0.60));
  }
}

TEST_CASE("train determinism and the zero-lr fixed point") {
  LabeledDataset ds = separable_dataset(8, 4);
  SUBCASE("lr = 0 leaves parameters at their initialization") {
    TrainConfig config = tiny_train_config(2, 5);
    config.lr = 1e-300;  // effectively zero without tripping validation
    TrainResult result = train(ds, tiny_table(5), config);
    Model reference = build_model(config.model, tiny_table(5),
                                  PriceNormalizer::fit(ds.days, ds.train_idx), config.seed);
    for (const auto& name : reference.params.names()) {
      const Tensor& a = result.model.params.at(name);
      const Tensor& b = reference.params.at(name);
      for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.value_at(i) == doctest::Approx(b.value_at(i)).epsilon(1e-12));
      }
    }
  }
  SUBCASE("the same seed trains to bit-identical parameters") {
    TrainConfig config = tiny_train_config(3, 17);
    TrainResult a = train(ds, tiny_table(17), config);
    TrainResult b = train(ds, tiny_table(17), config);
    for (const auto& name : a.model.params.names()) {
      const Tensor& ta = a.model.params.at(name);
      const Tensor& tb = b.model.params.at(name);
      REQUIRE(ta.size() == tb.size());
      for (std::size_t i = 0; i < ta.size(); ++i) CHECK(ta.value_at(i) == tb.value_at(i));
    }
    REQUIRE(a.curves.size() == b.curves.size());
    for (std::size_t e = 0; e < a.curves.size(); ++e) {
      CHECK(a.curves[e].train_loss == b.curves[e].train_loss);
      CHECK(a.curves[e].val_loss == b.curves[e].val_loss);
    }
  }
  SUBCASE("dropout draws differ across seeds") {
    TrainConfig config = tiny_train_config(2, 17);
    config.model.dropout = 0.5;
    TrainResult a = train(ds, tiny_table(17), config);
    config.seed = 18;
    TrainResult b = train(ds, tiny_table(18), config);
    bool any_diff = false;
    for (const auto& name : a.model.params.names()) {
      const Tensor& ta = a.model.params.at(name);
      const Tensor& tb = b.model.params.at(name);
      for (std::size_t i = 0; i < ta.size(); ++i) {
        if (ta.value_at(i) != tb.value_at(i)) any_diff = true;
      }
    }
    CHECK(any_diff);
  }
}

TEST_CASE("a non-finite loss aborts with the last finite snapshot") {
  LabeledDataset ds = separable_dataset(8, 0);
  TrainConfig config = tiny_train_config(5, 7);
  config.lr = 1e300;  // first step flings parameters to +-inf
  TrainResult result = train(ds, tiny_table(7), config);
  CHECK(result.aborted_non_finite);
  CHECK(result.completed_epochs < 5);
  // The returned snapshot is still usable.
  result.model.params.for_each([](const std::string&, Tensor& t, bool) {
    CHECK(t.all_finite());
  });
  const double y = predict(result.model, ds.days[0]);
  CHECK(std::isfinite(y));
}

TEST_CASE("training curves are finite and logged per epoch") {
  LabeledDataset ds = separable_dataset(8, 4);
  TrainConfig config = tiny_train_config(3, 23);
  TrainResult result = train(ds, tiny_table(23), config);
  REQUIRE(result.curves.size() == 3);
  for (const auto& s : result.curves) {
    CHECK(std::isfinite(s.train_loss));
    CHECK(std::isfinite(s.val_loss));
    CHECK(s.train_acc >= 0.0);
    CHECK(s.train_acc <= 1.0);
  }
  CHECK_FALSE(result.aborted_non_finite);
  CHECK(result.completed_epochs == 3);

  const std::string path = "/tmp/hpsmp_test_curves.csv";
  write_curves_csv(path, result.curves);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "epoch,train_loss,train_acc,val_loss,val_acc");
}

TEST_CASE("evaluate fills the confusion matrix at threshold 0.5") {
  LabeledDataset ds = separable_dataset(8, 4);
  TrainConfig config = tiny_train_config(1, 29);
  TrainResult result = train(ds, tiny_table(29), config);
  EvalReport report = evaluate(result.model, ds.days, ds.val_idx);
  CHECK(report.tp + report.fp + report.tn + report.fn ==
        static_cast<long>(ds.val_idx.size()));
  REQUIRE(report.accuracy.has_value());
  CHECK(*report.accuracy >= 0.0);
  CHECK(*report.accuracy <= 1.0);
  CHECK(report.predictions.size() == ds.val_idx.size());

  SUBCASE("empty split is an error") {
    CHECK_THROWS_AS(evaluate(result.model, ds.days, {}), ContractError);
  }
  SUBCASE("report json is written and parseable") {
    const std::string path = "/tmp/hpsmp_test_report.json";
    write_report_json(path, report, config);
    std::ifstream in(path);
    std::string contents((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
    CHECK(contents.find("\"accuracy\"") != std::string::npos);
    CHECK(contents.find("\"seed\"") != std::string::npos);
  }
}

TEST_CASE("predict is a deterministic single forward pass") {
  LabeledDataset ds = separable_dataset(8, 4);
  TrainConfig config = tiny_train_config(1, 31);
  TrainResult result = train(ds, tiny_table(31), config);
  const double a = predict(result.model, ds.days[0]);
  const double b = predict(result.model, ds.days[0]);
  CHECK(a == b);
  CHECK(a >= 0.0);
  CHECK(a <= 1.0);
  // Threshold contract: score >= 0.5 maps to class 1 in evaluate.
  EvalReport report = evaluate(result.model, ds.days, {0});
  const int predicted_class = a >= 0.5 ? 1 : 0;
  const long positives = report.tp + report.fp;
  CHECK(positives == (predicted_class == 1 ? 1 : 0));
}
