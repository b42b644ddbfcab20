#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hpsmp/date.hpp"

namespace hpsmp {

/// One trading day: prices, that day's tweet tokens, and (once labeled) the
/// 5-day movement target.
struct DayRecord {
  Date date;
  double open = 0.0;
  double high = 0.0;
  double low = 0.0;
  double close = 0.0;
  double adj_close = 0.0;
  double volume = 0.0;
  /// Tokenized text of every tweet attached to this day, in arrival order.
  std::vector<std::string> words;
  /// Vocabulary indices for `words`, filled once a Vocabulary exists.
  std::vector<int> tokens;
  bool covid_flag = false;
  std::optional<int> label;
};

struct Tweet {
  Date date;
  std::string text;
  int retweets = 0;
};

/// Ordered trading dates. Derived from the price file; weekends are rejected
/// at ingestion.
struct TradingCalendar {
  std::vector<Date> dates;
};

struct SplitBounds {
  Date train_end;  // train: date <= train_end
  Date val_end;    // val:   train_end < date <= val_end
  Date test_end;   // test:  val_end < date <= test_end
};

/// Labeled days plus the (contiguous, ordered) split boundaries.
struct LabeledDataset {
  std::vector<DayRecord> days;
  SplitBounds bounds;
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> val_idx;
  std::vector<std::size_t> test_idx;
};

/// Parses `Date,Open,High,Low,Close,AdjClose,Volume` CSV. Throws ParseError
/// with line context, DataError on duplicate dates or weekend rows.
std::vector<DayRecord> load_prices_csv(const std::string& path);

/// Parses JSON-lines tweets with fields date/text/retweets. Tweets retweeted
/// less than once are dropped at ingestion.
std::vector<Tweet> load_tweets_jsonl(const std::string& path);

/// One record per trading day; tweet text is tokenized and attached to its
/// calendar date, or to the next trading day when the date is not a trading
/// day. Days without tweets keep an empty token list.
std::vector<DayRecord> align(std::vector<DayRecord> prices, const std::vector<Tweet>& tweets);

/// Up-indicators u_k = 1 when adj_close(d+k) > adj_close(d+k-1), k = 1..horizon;
/// label is 1 iff the up-count is >= threshold. The final `horizon` days carry
/// no label. Returns the number of labeled days.
std::size_t label(std::vector<DayRecord>& records, int horizon = 5, int threshold = 3);

/// Date-based partition; bounds must be strictly increasing.
LabeledDataset split(std::vector<DayRecord> records, const SplitBounds& bounds);

/// Numeric fields available to correlation_matrix.
struct FieldView {
  std::string name;
  std::vector<double> values;
};

std::vector<FieldView> numeric_fields(const std::vector<DayRecord>& records,
                                      const std::vector<std::string>& names);

/// Pearson correlation over the named fields: symmetric, unit diagonal.
/// Zero-variance fields get NaN rows/columns (flagged via `degenerate`).
struct CorrelationMatrix {
  std::vector<std::string> fields;
  std::vector<double> values;  // row-major fields x fields
  std::vector<bool> degenerate;

  double at(std::size_t r, std::size_t c) const { return values[r * fields.size() + c]; }
};

CorrelationMatrix correlation_matrix(const std::vector<DayRecord>& records,
                                     const std::vector<std::string>& fields);

/// `Date,AdjClose,CovidFlag,Label,TokenCount` export for plot-ready summaries.
void export_summary_csv(const std::vector<DayRecord>& records, const std::string& path);

}  // namespace hpsmp
