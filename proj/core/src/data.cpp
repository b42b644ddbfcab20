#include "hpsmp/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "hpsmp/errors.hpp"
#include "hpsmp/log.hpp"
#include "hpsmp/text.hpp"

namespace hpsmp {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

double parse_double(const std::string& s, const std::string& path, int line_no,
                    const std::string& field) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ParseError(path + ":" + std::to_string(line_no) + ": unreadable " + field +
                     " value '" + s + "'");
  }
}

bool contains_covid_term(const std::string& text) {
  std::string lower;
  lower.reserve(text.size());
  for (char c : text) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return lower.find("covid") != std::string::npos ||
         lower.find("coronavirus") != std::string::npos;
}

}  // namespace

std::vector<DayRecord> load_prices_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open price file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ":1: empty price file");
  if (strip_cr(line) != "Date,Open,High,Low,Close,AdjClose,Volume") {
    throw ParseError(path + ":1: expected header Date,Open,High,Low,Close,AdjClose,Volume");
  }
  std::vector<DayRecord> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 7) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected 7 fields, got " +
                       std::to_string(fields.size()));
    }
    DayRecord rec;
    try {
      rec.date = parse_date(fields[0]);
    } catch (const ParseError& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    rec.open = parse_double(fields[1], path, line_no, "Open");
    rec.high = parse_double(fields[2], path, line_no, "High");
    rec.low = parse_double(fields[3], path, line_no, "Low");
    rec.close = parse_double(fields[4], path, line_no, "Close");
    rec.adj_close = parse_double(fields[5], path, line_no, "AdjClose");
    rec.volume = parse_double(fields[6], path, line_no, "Volume");
    if (rec.open <= 0 || rec.high <= 0 || rec.low <= 0 || rec.close <= 0 || rec.adj_close <= 0) {
      throw DataError(path + ":" + std::to_string(line_no) + ": non-positive price on " +
                      to_string(rec.date));
    }
    if (rec.volume < 0) {
      throw DataError(path + ":" + std::to_string(line_no) + ": negative volume on " +
                      to_string(rec.date));
    }
    if (rec.high < std::max(rec.open, rec.close) || rec.low > std::min(rec.open, rec.close)) {
      throw DataError(path + ":" + std::to_string(line_no) + ": inconsistent OHLC range on " +
                      to_string(rec.date));
    }
    if (is_weekend(rec.date)) {
      throw DataError(path + ":" + std::to_string(line_no) + ": weekend trading date " +
                      to_string(rec.date));
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<Tweet> load_tweets_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open tweets file: " + path);
  std::vector<Tweet> out;
  std::string line;
  int line_no = 0;
  std::size_t dropped = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.contains("date") || !j.contains("text") || !j.contains("retweets")) {
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": tweet object needs date, text, retweets");
    }
    Tweet t;
    try {
      t.date = parse_date(j.at("date").get<std::string>());
    } catch (const ParseError& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    try {
      t.text = j.at("text").get<std::string>();
      t.retweets = j.at("retweets").get<int>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (t.retweets < 0) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": negative retweet count");
    }
    if (t.retweets < 1) {
      ++dropped;  // only tweets retweeted at least once are informative enough
      continue;
    }
    out.push_back(std::move(t));
  }
  if (dropped > 0) {
    log_warning(std::to_string(dropped) + " tweets dropped (retweets < 1) from " + path);
  }
  return out;
}

std::vector<DayRecord> align(std::vector<DayRecord> prices, const std::vector<Tweet>& tweets) {
  std::sort(prices.begin(), prices.end(),
            [](const DayRecord& a, const DayRecord& b) { return a.date < b.date; });
  std::vector<std::string> duplicates;
  for (std::size_t i = 1; i < prices.size(); ++i) {
    if (prices[i].date == prices[i - 1].date) duplicates.push_back(to_string(prices[i].date));
  }
  if (!duplicates.empty()) {
    std::string joined;
    for (const auto& d : duplicates) joined += (joined.empty() ? "" : ", ") + d;
    throw DataError("duplicate price dates: " + joined);
  }

  std::vector<Date> dates;
  dates.reserve(prices.size());
  for (const auto& p : prices) dates.push_back(p.date);

  std::size_t dropped = 0;
  for (const auto& tweet : tweets) {
    // First trading day on or after the tweet's calendar date.
    auto it = std::lower_bound(dates.begin(), dates.end(), tweet.date);
    if (it == dates.end()) {
      ++dropped;
      continue;
    }
    DayRecord& day = prices[static_cast<std::size_t>(it - dates.begin())];
    for (auto& word : tokenize(tweet.text)) day.words.push_back(std::move(word));
    if (contains_covid_term(tweet.text)) day.covid_flag = true;
  }
  if (dropped > 0) {
    log_warning(std::to_string(dropped) + " tweets dated after the last trading day were dropped");
  }
  return prices;
}

std::size_t label(std::vector<DayRecord>& records, int horizon, int threshold) {
  if (horizon < 1) throw ContractError("label: horizon must be >= 1");
  if (records.size() < static_cast<std::size_t>(horizon) + 1) {
    log_warning("label: fewer than horizon+1 records, nothing labeled");
    for (auto& r : records) r.label.reset();
    return 0;
  }
  const std::size_t n = records.size();
  std::size_t labeled = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i + static_cast<std::size_t>(horizon) >= n) {
      records[i].label.reset();
      continue;
    }
    int ups = 0;
    for (int k = 1; k <= horizon; ++k) {
      // Equal consecutive closes count as "not up".
      if (records[i + static_cast<std::size_t>(k)].adj_close >
          records[i + static_cast<std::size_t>(k) - 1].adj_close) {
        ++ups;
      }
    }
    records[i].label = ups >= threshold ? 1 : 0;
    ++labeled;
  }
  return labeled;
}

LabeledDataset split(std::vector<DayRecord> records, const SplitBounds& bounds) {
  if (!(bounds.train_end < bounds.val_end && bounds.val_end < bounds.test_end)) {
    throw ContractError("split: bounds must satisfy train_end < val_end < test_end");
  }
  LabeledDataset out;
  out.bounds = bounds;
  out.days = std::move(records);
  std::sort(out.days.begin(), out.days.end(),
            [](const DayRecord& a, const DayRecord& b) { return a.date < b.date; });
  for (std::size_t i = 0; i < out.days.size(); ++i) {
    const Date& d = out.days[i].date;
    if (d <= bounds.train_end) {
      out.train_idx.push_back(i);
    } else if (d <= bounds.val_end) {
      out.val_idx.push_back(i);
    } else if (d <= bounds.test_end) {
      out.test_idx.push_back(i);
    }
  }
  if (out.train_idx.empty()) log_warning("split: empty train set");
  if (out.val_idx.empty()) log_warning("split: empty validation set");
  if (out.test_idx.empty()) log_warning("split: empty test set");
  return out;
}

std::vector<FieldView> numeric_fields(const std::vector<DayRecord>& records,
                                      const std::vector<std::string>& names) {
  // Rows with no label are skipped whenever "label" participates, so all
  // columns stay the same length.
  const bool needs_label =
      std::find(names.begin(), names.end(), "label") != names.end();
  std::vector<FieldView> out;
  for (const auto& name : names) {
    FieldView fv;
    fv.name = name;
    for (const auto& r : records) {
      if (needs_label && !r.label.has_value()) continue;
      double v = 0.0;
      if (name == "open") {
        v = r.open;
      } else if (name == "high") {
        v = r.high;
      } else if (name == "low") {
        v = r.low;
      } else if (name == "close") {
        v = r.close;
      } else if (name == "adj_close") {
        v = r.adj_close;
      } else if (name == "volume") {
        v = r.volume;
      } else if (name == "covid_flag") {
        v = r.covid_flag ? 1.0 : 0.0;
      } else if (name == "label") {
        v = r.label.value_or(0);
      } else if (name == "token_count") {
        v = static_cast<double>(r.words.size());
      } else {
        throw ContractError("unknown correlation field: " + name);
      }
      fv.values.push_back(v);
    }
    out.push_back(std::move(fv));
  }
  return out;
}

CorrelationMatrix correlation_matrix(const std::vector<DayRecord>& records,
                                     const std::vector<std::string>& fields) {
  if (records.size() < 2) throw ContractError("correlation_matrix: need at least 2 records");
  const auto views = numeric_fields(records, fields);
  const std::size_t k = views.size();
  const std::size_t n = views.empty() ? 0 : views[0].values.size();
  if (n < 2) throw ContractError("correlation_matrix: need at least 2 usable rows");

  std::vector<double> means(k, 0.0), sds(k, 0.0);
  CorrelationMatrix cm;
  cm.fields = fields;
  cm.values.assign(k * k, 0.0);
  cm.degenerate.assign(k, false);
  for (std::size_t a = 0; a < k; ++a) {
    double m = 0.0;
    for (double v : views[a].values) m += v;
    m /= static_cast<double>(n);
    means[a] = m;
    double s = 0.0;
    for (double v : views[a].values) s += (v - m) * (v - m);
    sds[a] = std::sqrt(s);
    if (sds[a] == 0.0) {
      cm.degenerate[a] = true;
      log_warning("correlation_matrix: field '" + views[a].name + "' has zero variance");
    }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < k; ++b) {
      if (a == b) {
        cm.values[a * k + b] = cm.degenerate[a] ? nan : 1.0;
        continue;
      }
      if (cm.degenerate[a] || cm.degenerate[b]) {
        cm.values[a * k + b] = nan;
        continue;
      }
      double cov = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        cov += (views[a].values[i] - means[a]) * (views[b].values[i] - means[b]);
      }
      cm.values[a * k + b] = cov / (sds[a] * sds[b]);
    }
  }
  return cm;
}

void export_summary_csv(const std::vector<DayRecord>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write summary CSV: " + path);
  out << "Date,AdjClose,CovidFlag,Label,TokenCount\n";
  for (const auto& r : records) {
    out << to_string(r.date) << "," << r.adj_close << "," << (r.covid_flag ? 1 : 0) << ",";
    if (r.label) {
      out << *r.label;
    }
    out << "," << r.words.size() << "\n";
  }
}

}  // namespace hpsmp
