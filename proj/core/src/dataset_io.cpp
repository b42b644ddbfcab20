#include <fstream>

#include <json.hpp>

#include "hpsmp/dataset.hpp"
#include "hpsmp/errors.hpp"

namespace hpsmp {

BuiltDataset build_dataset(std::vector<DayRecord> prices, const std::vector<Tweet>& tweets,
                           const DatasetBuildConfig& config, std::uint64_t seed) {
  BuiltDataset built;
  built.config = config;
  built.seed = seed;
  std::vector<DayRecord> aligned = align(std::move(prices), tweets);
  label(aligned, config.horizon, config.threshold);
  built.dataset = split(std::move(aligned), config.bounds);

  std::vector<std::vector<std::string>> corpus;
  for (std::size_t i : built.dataset.train_idx) {
    corpus.push_back(built.dataset.days[i].words);
  }
  built.vocab = Vocabulary::build(corpus, config.min_count);
  for (auto& day : built.dataset.days) {
    day.tokens.clear();
    day.tokens.reserve(day.words.size());
    for (const auto& word : day.words) day.tokens.push_back(built.vocab.index_of(word));
  }
  return built;
}

void save_dataset(const BuiltDataset& built, const std::string& path) {
  nlohmann::json j;
  j["format"] = "hpsmp-dataset";
  j["version"] = 1;
  j["seed"] = built.seed;
  j["horizon"] = built.config.horizon;
  j["threshold"] = built.config.threshold;
  j["min_count"] = built.config.min_count;
  j["train_end"] = to_string(built.config.bounds.train_end);
  j["val_end"] = to_string(built.config.bounds.val_end);
  j["test_end"] = to_string(built.config.bounds.test_end);
  j["vocab"] = built.vocab.tokens();
  nlohmann::json days = nlohmann::json::array();
  for (const auto& d : built.dataset.days) {
    nlohmann::json jd;
    jd["date"] = to_string(d.date);
    jd["open"] = d.open;
    jd["high"] = d.high;
    jd["low"] = d.low;
    jd["close"] = d.close;
    jd["adj_close"] = d.adj_close;
    jd["volume"] = d.volume;
    jd["words"] = d.words;
    jd["tokens"] = d.tokens;
    jd["covid"] = d.covid_flag;
    jd["label"] = d.label ? nlohmann::json(*d.label) : nlohmann::json(nullptr);
    days.push_back(std::move(jd));
  }
  j["days"] = std::move(days);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset archive: " + path);
  out << j.dump() << "\n";
}

BuiltDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset archive: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "hpsmp-dataset" || j.at("version").get<int>() != 1) {
      throw ParseError(path + ": not a version-1 dataset archive");
    }
    BuiltDataset built;
    built.seed = j.at("seed").get<std::uint64_t>();
    built.config.horizon = j.at("horizon").get<int>();
    built.config.threshold = j.at("threshold").get<int>();
    built.config.min_count = j.at("min_count").get<int>();
    built.config.bounds.train_end = parse_date(j.at("train_end").get<std::string>());
    built.config.bounds.val_end = parse_date(j.at("val_end").get<std::string>());
    built.config.bounds.test_end = parse_date(j.at("test_end").get<std::string>());
    built.vocab = Vocabulary::from_tokens(j.at("vocab").get<std::vector<std::string>>(),
                                          built.config.min_count);
    std::vector<DayRecord> days;
    for (const auto& jd : j.at("days")) {
      DayRecord d;
      d.date = parse_date(jd.at("date").get<std::string>());
      d.open = jd.at("open").get<double>();
      d.high = jd.at("high").get<double>();
      d.low = jd.at("low").get<double>();
      d.close = jd.at("close").get<double>();
      d.adj_close = jd.at("adj_close").get<double>();
      d.volume = jd.at("volume").get<double>();
      d.words = jd.at("words").get<std::vector<std::string>>();
      d.tokens = jd.at("tokens").get<std::vector<int>>();
      d.covid_flag = jd.at("covid").get<bool>();
      if (!jd.at("label").is_null()) d.label = jd.at("label").get<int>();
      days.push_back(std::move(d));
    }
    built.dataset = split(std::move(days), built.config.bounds);
    return built;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace hpsmp
