#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hpsmp/data.hpp"
#include "hpsmp/text.hpp"

namespace hpsmp {

struct DatasetBuildConfig {
  SplitBounds bounds{parse_date("2020-01-31"), parse_date("2020-02-29"),
                     parse_date("2020-07-30")};
  int horizon = 5;
  int threshold = 3;
  int min_count = 5;
};

/// A labeled dataset together with the vocabulary its token indices refer to.
struct BuiltDataset {
  LabeledDataset dataset;
  Vocabulary vocab;
  DatasetBuildConfig config;
  std::uint64_t seed = 0;
};

/// Full ingestion pipeline: align tweets to trading days, label with the
/// horizon rule, split by date, build the vocabulary from the train split
/// only, and map every day's words to token indices.
BuiltDataset build_dataset(std::vector<DayRecord> prices, const std::vector<Tweet>& tweets,
                           const DatasetBuildConfig& config, std::uint64_t seed);

/// Single-file JSON archive; loading reproduces the dataset exactly.
void save_dataset(const BuiltDataset& built, const std::string& path);
BuiltDataset load_dataset(const std::string& path);

}  // namespace hpsmp
