#include "hpsmp/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "hpsmp/errors.hpp"

namespace hpsmp {

namespace {

bool is_token_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  std::string lower;
  lower.reserve(text.size());
  for (char c : text) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));

  // Blank out URLs and @-mentions wholesale; drop '#' but keep the word.
  std::string cleaned;
  cleaned.reserve(lower.size());
  std::size_t i = 0;
  while (i < lower.size()) {
    if (lower.compare(i, 7, "http://") == 0 || lower.compare(i, 8, "https://") == 0 ||
        lower.compare(i, 4, "www.") == 0) {
      while (i < lower.size() && !is_space(lower[i])) ++i;
      cleaned.push_back(' ');
      continue;
    }
    if (lower[i] == '@') {
      ++i;
      while (i < lower.size() && is_token_char(lower[i])) ++i;
      cleaned.push_back(' ');
      continue;
    }
    if (lower[i] == '#') {
      ++i;
      continue;
    }
    cleaned.push_back(lower[i]);
    ++i;
  }

  std::vector<std::string> tokens;
  std::string current;
  for (char c : cleaned) {
    if (is_token_char(c)) {
      current.push_back(c);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& corpus,
                             int min_count) {
  if (min_count < 1) throw ContractError("build_vocab: min_count must be >= 1");
  std::map<std::string, long> counts;  // ordered map fixes the tie order
  for (const auto& doc : corpus) {
    for (const auto& token : doc) ++counts[token];
  }
  std::vector<std::pair<std::string, long>> retained;
  for (const auto& [token, count] : counts) {
    if (count >= min_count) retained.emplace_back(token, count);
  }
  std::stable_sort(retained.begin(), retained.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary vocab;
  vocab.min_count_ = min_count;
  vocab.tokens_.reserve(retained.size());
  for (const auto& [token, count] : retained) {
    vocab.token_to_index_[token] = static_cast<int>(vocab.tokens_.size());
    vocab.tokens_.push_back(token);
  }
  vocab.unknown_index_ = static_cast<int>(vocab.tokens_.size());
  return vocab;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens, int min_count) {
  Vocabulary vocab;
  vocab.min_count_ = min_count;
  vocab.tokens_ = std::move(tokens);
  for (std::size_t i = 0; i < vocab.tokens_.size(); ++i) {
    vocab.token_to_index_[vocab.tokens_[i]] = static_cast<int>(i);
  }
  if (vocab.token_to_index_.size() != vocab.tokens_.size()) {
    throw ContractError("Vocabulary::from_tokens: duplicate tokens");
  }
  vocab.unknown_index_ = static_cast<int>(vocab.tokens_.size());
  return vocab;
}

void EmbeddingTable::mask_frozen_rows() const {
  if (finetune_pretrained) return;
  Tensor m = matrix;  // shared storage; the grad is edited in place
  double* grad = m.grad_data();
  if (grad == nullptr) return;
  const int cols = m.cols();
  for (int r = 0; r < m.rows(); ++r) {
    if (!pretrained[static_cast<std::size_t>(r)]) continue;
    for (int c = 0; c < cols; ++c) grad[static_cast<std::size_t>(r) * cols + c] = 0.0;
  }
}

EmbeddingTable load_embeddings(const std::string& path, const Vocabulary& vocab, Rng rng) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embeddings file: " + path);

  int width = -1;
  std::unordered_map<std::string, std::vector<double>> file_rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string token;
    ss >> token;
    std::vector<double> row;
    std::string field;
    while (ss >> field) {
      try {
        std::size_t pos = 0;
        row.push_back(std::stod(field, &pos));
        if (pos != field.size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw ParseError(path + ":" + std::to_string(line_no) + ": unreadable float '" +
                         field + "'");
      }
    }
    if (row.empty()) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": no values after token");
    }
    if (width == -1) {
      width = static_cast<int>(row.size());
    } else if (static_cast<int>(row.size()) != width) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(width) + " values, got " + std::to_string(row.size()));
    }
    file_rows[token] = std::move(row);
  }
  if (width == -1) throw ParseError(path + ": embedding file has no rows");

  EmbeddingTable table;
  table.width = width;
  const int rows = vocab.table_rows();
  table.matrix = Tensor({rows, width});
  table.pretrained.assign(static_cast<std::size_t>(rows), false);
  for (int r = 0; r < vocab.size(); ++r) {
    auto it = file_rows.find(vocab.token_at(r));
    if (it != file_rows.end()) {
      std::copy(it->second.begin(), it->second.end(),
                table.matrix.data() + static_cast<std::size_t>(r) * width);
      table.pretrained[static_cast<std::size_t>(r)] = true;
    } else {
      for (int c = 0; c < width; ++c) {
        table.matrix.data()[static_cast<std::size_t>(r) * width + c] = rng.uniform(-0.05, 0.05);
      }
    }
  }
  // Unknown slot: always a trainable random row.
  for (int c = 0; c < width; ++c) {
    table.matrix.data()[static_cast<std::size_t>(vocab.unknown_index()) * width + c] =
        rng.uniform(-0.05, 0.05);
  }
  return table;
}

EmbeddingTable random_embeddings(const Vocabulary& vocab, int width, Rng rng) {
  if (width < 1) throw ContractError("random_embeddings: width must be >= 1");
  EmbeddingTable table;
  table.width = width;
  table.matrix = Tensor::uniform({vocab.table_rows(), width}, rng);
  table.pretrained.assign(static_cast<std::size_t>(vocab.table_rows()), false);
  return table;
}

PriceNormalizer PriceNormalizer::fit(const std::vector<DayRecord>& records,
                                     const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw ContractError("PriceNormalizer::fit: empty index set");
  PriceNormalizer norm;
  for (int f = 0; f < 4; ++f) {
    norm.min[static_cast<std::size_t>(f)] = std::numeric_limits<double>::infinity();
    norm.max[static_cast<std::size_t>(f)] = -std::numeric_limits<double>::infinity();
  }
  for (std::size_t i : indices) {
    const DayRecord& r = records[i];
    const std::array<double, 4> vals{r.open, r.high, r.low, r.adj_close};
    for (std::size_t f = 0; f < 4; ++f) {
      norm.min[f] = std::min(norm.min[f], vals[f]);
      norm.max[f] = std::max(norm.max[f], vals[f]);
    }
  }
  return norm;
}

std::array<double, 4> PriceNormalizer::apply(const DayRecord& day) const {
  const std::array<double, 4> vals{day.open, day.high, day.low, day.adj_close};
  std::array<double, 4> out{};
  for (std::size_t f = 0; f < 4; ++f) {
    const double range = max[f] - min[f];
    out[f] = range > 0.0 ? (vals[f] - min[f]) / range : 0.0;
  }
  return out;
}

Tensor embed_day(Graph& graph, const DayRecord& day, const EmbeddingTable& table,
                 const Tensor& price_proj, const PriceNormalizer& norm, int max_len,
                 bool price_token) {
  if (max_len < 2) throw ContractError("embed_day: max_len must be >= 2");
  if (price_proj.rank() != 2 || price_proj.dim(0) != 4 || price_proj.dim(1) != table.width) {
    throw DimensionError("embed_day: price_proj must be [4, " + std::to_string(table.width) +
                         "], got " + shape_str(price_proj.shape()));
  }
  Tensor seq;
  int used = 0;
  if (price_token) {
    const auto prices = norm.apply(day);
    Tensor price_row(Shape{1, 4}, std::vector<double>(prices.begin(), prices.end()));
    seq = graph.matmul(price_row, price_proj);  // [1, width]
    used = std::min<int>(max_len - 1, static_cast<int>(day.tokens.size()));
    if (used > 0) {
      std::vector<int> ids(day.tokens.begin(), day.tokens.begin() + used);
      seq = graph.concat(seq, graph.embedding_lookup(table.matrix, ids), 0);
    }
  } else {
    used = std::min<int>(max_len, static_cast<int>(day.tokens.size()));
    if (used > 0) {
      std::vector<int> ids(day.tokens.begin(), day.tokens.begin() + used);
      seq = graph.embedding_lookup(table.matrix, ids);
    } else {
      seq = Tensor({1, table.width});  // tokenless day: a single zero row
      used = 1;
    }
  }
  const int rows = price_token ? 1 + used : used;
  const int pad = max_len - rows;
  if (pad > 0) seq = graph.pad_rows(seq, 0, pad);
  return seq;
}

}  // namespace hpsmp
