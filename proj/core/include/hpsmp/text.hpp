#pragma once

#include <array>
#include <string>
#include <unordered_map>
#include <vector>

#include "hpsmp/data.hpp"
#include "hpsmp/rng.hpp"
#include "hpsmp/tensor.hpp"

namespace hpsmp {

/// Lowercases, strips URLs and @-mentions, drops the '#' character (keeping
/// the hashtag word), then splits on non-alphanumeric runs.
std::vector<std::string> tokenize(const std::string& text);

/// Bijective token <-> index map over tokens that met the frequency cutoff,
/// plus one reserved unknown slot. Immutable after construction.
class Vocabulary {
 public:
  /// Retains tokens with count >= min_count; indices are assigned by
  /// descending count, ties broken lexicographically, so construction is
  /// order-independent.
  static Vocabulary build(const std::vector<std::vector<std::string>>& corpus, int min_count);

  /// Rebuilds a vocabulary from an already-ordered token list (archives).
  static Vocabulary from_tokens(std::vector<std::string> tokens, int min_count);

  int index_of(const std::string& token) const {
    auto it = token_to_index_.find(token);
    return it == token_to_index_.end() ? unknown_index_ : it->second;
  }
  bool contains(const std::string& token) const { return token_to_index_.count(token) != 0; }
  const std::string& token_at(int index) const { return tokens_.at(static_cast<std::size_t>(index)); }

  /// Number of retained tokens (the unknown slot excluded).
  int size() const { return static_cast<int>(tokens_.size()); }
  int unknown_index() const { return unknown_index_; }
  /// Rows an embedding table for this vocabulary needs (size() + 1).
  int table_rows() const { return size() + 1; }
  int min_count() const { return min_count_; }

  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> token_to_index_;
  int unknown_index_ = 0;
  int min_count_ = 1;
};

/// Embedding matrix of table_rows x width. Rows read from a pretrained file
/// stay frozen by default; rows initialized at random (vocabulary tokens the
/// file does not cover, plus the unknown slot) are trainable.
struct EmbeddingTable {
  Tensor matrix;                  // [table_rows, width]
  std::vector<bool> pretrained;   // per row
  int width = 0;
  bool finetune_pretrained = false;

  /// Zeroes the gradient of frozen rows after a backward pass, before the
  /// optimizer step.
  void mask_frozen_rows() const;
};

/// Reads a line-oriented embedding file: token then `width` decimal floats.
/// The width is inferred from the first line and enforced afterwards. Rows
/// for vocabulary tokens absent from the file are drawn uniformly from
/// [-0.05, 0.05] using the "embedding-init" sub-stream of the run seed.
EmbeddingTable load_embeddings(const std::string& path, const Vocabulary& vocab, Rng rng);

/// Random table for runs without a pretrained file: every row trainable.
EmbeddingTable random_embeddings(const Vocabulary& vocab, int width, Rng rng);

/// Per-feature min/max scaling of [open, high, low, adj_close] to [0, 1],
/// fitted on the training split and saved with the model.
struct PriceNormalizer {
  std::array<double, 4> min{0.0, 0.0, 0.0, 0.0};
  std::array<double, 4> max{1.0, 1.0, 1.0, 1.0};

  static PriceNormalizer fit(const std::vector<DayRecord>& records,
                             const std::vector<std::size_t>& indices);
  std::array<double, 4> apply(const DayRecord& day) const;
};

/// Builds the model input for one day: row 0 is a learned synthetic price
/// token (normalized prices times price_proj), rows 1.. are token embeddings,
/// truncated / zero-padded to exactly max_len rows. With price_token = false
/// the synthetic row is omitted and the sequence is token embeddings only.
Tensor embed_day(Graph& graph, const DayRecord& day, const EmbeddingTable& table,
                 const Tensor& price_proj, const PriceNormalizer& norm, int max_len,
                 bool price_token = true);

}  // namespace hpsmp
