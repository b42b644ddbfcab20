#include <benchmark/benchmark.h>

#include "hpsmp/backtest.hpp"
#include "hpsmp/model.hpp"
#include "hpsmp/rng.hpp"
#include "hpsmp/text.hpp"

using namespace hpsmp;

namespace {

Model bench_model(int max_len, int width) {
  ModelConfig config;
  config.max_len = max_len;
  config.embed_width = width;
  config.la_window = 5;
  config.lg_conv_filters = 16;
  config.lg_conv_kernel = 7;
  config.bl_conv1_filters = 16;
  config.bl_conv1_kernel = 7;
  config.bl_conv2_filters = 24;
  config.bl_conv2_kernel = 5;
  config.lstm_hidden = 32;
  config.fusion1 = 32;
  config.fusion2 = 16;
  config.dropout = 0.0;
  Vocabulary vocab = Vocabulary::build({{"a", "b", "c", "d"}}, 1);
  Rng rng(7);
  EmbeddingTable table = random_embeddings(vocab, width, rng);
  PriceNormalizer norm;
  return build_model(config, std::move(table), norm, 7);
}

}  // namespace

static void BM_HybridForward(benchmark::State& state) {
  Model model = bench_model(static_cast<int>(state.range(0)), 16);
  Rng rng(9);
  Tensor seq = Tensor::uniform({model.config.max_len, 16}, rng);
  ForwardContext ctx;
  for (auto _ : state) {
    Graph g;
    Tensor out = hpsmp_forward(g, model, seq, ctx);
    benchmark::DoNotOptimize(out.item());
  }
}
BENCHMARK(BM_HybridForward)->Arg(32)->Arg(64);

static void BM_HybridForwardBackward(benchmark::State& state) {
  Model model = bench_model(static_cast<int>(state.range(0)), 16);
  Rng rng(9);
  Tensor seq = Tensor::uniform({model.config.max_len, 16}, rng);
  ForwardContext ctx;
  for (auto _ : state) {
    Graph g;
    model.params.watch_all(g);
    Tensor loss = g.bce_loss(hpsmp_forward(g, model, seq, ctx), 1.0);
    g.backward(loss);
    benchmark::DoNotOptimize(loss.item());
  }
}
BENCHMARK(BM_HybridForwardBackward)->Arg(32)->Arg(64);

static void BM_Simulate(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(11);
  std::vector<DayRecord> days;
  Date d{2015, 1, 2};
  double price = 100.0;
  for (std::size_t i = 0; i < n; ++i) {
    while (is_weekend(d)) d = civil_from_days(days_from_civil(d) + 1);
    DayRecord rec;
    rec.date = d;
    rec.open = rec.close = rec.adj_close = price;
    rec.high = price * 1.01;
    rec.low = price * 0.99;
    days.push_back(rec);
    d = civil_from_days(days_from_civil(d) + 1);
    price = std::max(1.0, price * (1.0 + rng.uniform(-0.02, 0.02)));
  }
  std::vector<double> scores;
  for (std::size_t i = 0; i < n; ++i) scores.push_back(rng.uniform01());
  const StrategyConfig config = StrategyConfig::fifty_fifty();
  for (auto _ : state) {
    TradeLedger ledger = simulate(days, scores, config);
    benchmark::DoNotOptimize(ledger.profit);
  }
}
BENCHMARK(BM_Simulate)->Arg(256)->Arg(1024);
