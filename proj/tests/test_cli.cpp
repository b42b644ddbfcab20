#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

std::string cli_path() { return HPSMP_CLI_PATH; }
std::string fixture(const std::string& name) {
  return std::string(HPSMP_FIXTURE_DIR) + "/" + name;
}

int run_cli(const std::string& args) {
  const std::string cmd = cli_path() + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::path("/tmp/hpsmp_cli_test") / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct PriceRow {
  std::string date;
  double adj = 0.0;
};

std::vector<PriceRow> read_prices(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);  // header
  std::vector<PriceRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::istringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    rows.push_back({fields[0], std::stod(fields[5])});
  }
  return rows;
}

}  // namespace

TEST_CASE("build-dataset: missing tweets file fails with a data error") {
  const fs::path out = fresh_dir("missing");
  const int code = run_cli("build-dataset --prices " + fixture("prices.csv") +
                           " --tweets /nonexistent/tweets.jsonl --out " + out.string());
  CHECK(code == 2);
}

TEST_CASE("build-dataset: archive bytes are deterministic for a fixed seed") {
  const std::string common = "build-dataset --prices " + fixture("prices.csv") +
                             " --tweets " + fixture("tweets.jsonl") +
                             " --train-end 2020-02-28 --val-end 2020-03-20"
                             " --test-end 2020-04-30 --seed 11 --out ";
  const fs::path a = fresh_dir("hash_a");
  const fs::path b = fresh_dir("hash_b");
  REQUIRE(run_cli(common + a.string()) == 0);
  REQUIRE(run_cli(common + b.string()) == 0);
  const std::string archive_a = slurp(a / "dataset.json");
  CHECK_FALSE(archive_a.empty());
  CHECK(archive_a == slurp(b / "dataset.json"));
  CHECK(slurp(a / "summary.csv") == slurp(b / "summary.csv"));
  CHECK(slurp(a / "vocabulary.txt") == slurp(b / "vocabulary.txt"));
}

TEST_CASE("build-dataset: 12 trading days at horizon 5 yield exactly 7 labeled days") {
  const fs::path out = fresh_dir("twelve");
  REQUIRE(run_cli("build-dataset --prices " + fixture("prices_12.csv") + " --tweets " +
                  fixture("tweets_12.jsonl") +
                  " --min-count 1 --train-end 2020-03-06 --val-end 2020-03-10"
                  " --test-end 2020-03-17 --out " + out.string()) == 0);
  const nlohmann::json counts = nlohmann::json::parse(slurp(out / "counts.json"));
  CHECK(counts.at("days").get<int>() == 12);
  CHECK(counts.at("labeled").get<int>() == 7);
}

TEST_CASE("gradcheck subcommand passes at the default tolerance") {
  CHECK(run_cli("gradcheck --seed 3") == 0);
}

TEST_CASE("backtest 6040 on fixture scores matches the hand-accounting oracle") {
  const auto prices = read_prices(fixture("prices_12.csv"));
  REQUIRE(prices.size() == 12);
  // BUY day 0, SELL day 3, BUY day 5, forced close on the last day.
  std::vector<double> scores(12, 0.5);
  scores[0] = 0.7;
  scores[3] = 0.3;
  scores[5] = 0.65;
  const fs::path out = fresh_dir("backtest");
  {
    std::ofstream f(out / "scores.csv");
    f.precision(17);
    f << "Date,Score\n";
    for (std::size_t i = 0; i < prices.size(); ++i) {
      f << prices[i].date << "," << scores[i] << "\n";
    }
  }
  REQUIRE(run_cli("backtest --prices " + fixture("prices_12.csv") + " --scores " +
                  (out / "scores.csv").string() + " --strategy 6040 --out " + out.string()) ==
          0);
  const nlohmann::json summary = nlohmann::json::parse(slurp(out / "backtest_summary.json"));
  const double p0 = prices[0].adj, p3 = prices[3].adj, p5 = prices[5].adj,
               p11 = prices[11].adj;
  const double expected = 100.0 * ((p3 - p0) + (p11 - p5)) -
                          0.003 * 100.0 * (p0 + p3 + p5 + p11);
  CHECK(summary.at("profit").get<double>() == doctest::Approx(expected).epsilon(1e-12));
  CHECK(summary.at("n_trades").get<int>() == 4);
  CHECK(summary.at("forced_close").get<bool>());

  // The ledger CSV carries one row per trading day.
  std::ifstream ledger(out / "ledger.csv");
  std::string line;
  int rows = 0;
  std::getline(ledger, line);
  CHECK(line == "Date,Action,Price,Cost,Position,CashDelta");
  while (std::getline(ledger, line)) rows += !line.empty();
  CHECK(rows == 12);
}

TEST_CASE("mc runs are reproducible byte-for-byte") {
  const std::string common = "mc --prices-dir " + fixture("mc/prices") + " --scores-dir " +
                             fixture("mc/scores") + " --runs 5 --pick 3 --seed 7 --out ";
  const fs::path a = fresh_dir("mc_a");
  const fs::path b = fresh_dir("mc_b");
  REQUIRE(run_cli(common + a.string()) == 0);
  REQUIRE(run_cli(common + b.string()) == 0);
  const std::string mc_a = slurp(a / "mc.csv");
  CHECK_FALSE(mc_a.empty());
  CHECK(mc_a == slurp(b / "mc.csv"));
  CHECK(slurp(a / "mc_summary.json") == slurp(b / "mc_summary.json"));

  SUBCASE("single-run determinism") {
    const fs::path c = fresh_dir("mc_c");
    const fs::path d = fresh_dir("mc_d");
    const std::string one = "mc --prices-dir " + fixture("mc/prices") + " --scores-dir " +
                            fixture("mc/scores") + " --runs 1 --pick 3 --seed 7 --out ";
    REQUIRE(run_cli(one + c.string()) == 0);
    REQUIRE(run_cli(one + d.string()) == 0);
    CHECK(slurp(c / "mc.csv") == slurp(d / "mc.csv"));
  }
}

TEST_CASE("train twice with one seed produces identical checkpoints") {
  const fs::path ds = fresh_dir("train_ds");
  REQUIRE(run_cli("build-dataset --prices " + fixture("prices.csv") + " --tweets " +
                  fixture("tweets.jsonl") +
                  " --train-end 2020-02-28 --val-end 2020-03-20 --test-end 2020-04-30"
                  " --seed 11 --out " + ds.string()) == 0);
  const std::string common = "train --dataset " + (ds / "dataset.json").string() +
                             " --embeddings " + fixture("embeddings.txt") +
                             " --tiny --epochs 2 --batch 16 --seed 13 --out ";
  const fs::path a = fresh_dir("train_a");
  const fs::path b = fresh_dir("train_b");
  REQUIRE(run_cli(common + a.string()) == 0);
  REQUIRE(run_cli(common + b.string()) == 0);
  const std::string ckpt = slurp(a / "checkpoint.txt");
  CHECK_FALSE(ckpt.empty());
  CHECK(ckpt == slurp(b / "checkpoint.txt"));
  CHECK(slurp(a / "curves.csv") == slurp(b / "curves.csv"));

  SUBCASE("evaluate and predict run off the checkpoint") {
    const fs::path eval_out = fresh_dir("eval");
    CHECK(run_cli("evaluate --dataset " + (ds / "dataset.json").string() + " --checkpoint " +
                  (a / "checkpoint.txt").string() + " --split val --out " +
                  eval_out.string()) == 0);
    const nlohmann::json report = nlohmann::json::parse(slurp(eval_out / "report.json"));
    CHECK(report.contains("accuracy"));
    const fs::path pred_out = fresh_dir("pred");
    CHECK(run_cli("predict --dataset " + (ds / "dataset.json").string() + " --checkpoint " +
                  (a / "checkpoint.txt").string() + " --split test --out " +
                  pred_out.string()) == 0);
    std::ifstream scores(pred_out / "scores.csv");
    std::string header;
    std::getline(scores, header);
    CHECK(header == "Date,Score");
  }
}

TEST_CASE("sub-commands do not mutate their inputs") {
  const std::string before = slurp(fixture("prices.csv"));
  const fs::path out = fresh_dir("nomutate");
  REQUIRE(run_cli("baseline --prices " + fixture("prices.csv") + " --indicator sma --out " +
                  out.string()) == 0);
  CHECK(slurp(fixture("prices.csv")) == before);
}

TEST_CASE("usage errors exit with code 1") {
  CHECK(run_cli("backtest --scores /tmp/nope.csv") == 1);  // neither --prices nor --dataset
  CHECK(run_cli("definitely-not-a-command") == 1);
}
