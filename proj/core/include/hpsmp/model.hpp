#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hpsmp/data.hpp"
#include "hpsmp/params.hpp"
#include "hpsmp/rng.hpp"
#include "hpsmp/tensor.hpp"
#include "hpsmp/text.hpp"

namespace hpsmp {

enum class ModelKind { Hybrid, CnnLg, CnnBlstm };
enum class HeadKind { Sigmoid, ReluClipped };
/// Second attention layer of the CNN-BLSTM path: multiplicative reweighting
/// (default) or score-weighted mean pooling.
enum class AttentionMode { Reweight, WeightedMean };
/// Which BLSTM output slice feeds the fusion layers.
enum class BlstmFeature { FinalConcat, MeanPooled };
/// Price-text fusion at input: a learned synthetic price token prefixed to
/// the sequence (default), or token embeddings alone.
enum class PriceFusion { Token, None };

ModelKind model_kind_from_string(const std::string& s);
const char* to_string(ModelKind kind);
HeadKind head_kind_from_string(const std::string& s);
const char* to_string(HeadKind head);

/// Layer dimensions for all three configurations. Defaults are the full-scale
/// sizes; desk-scale runs shrink lengths and kernels proportionally.
struct ModelConfig {
  ModelKind kind = ModelKind::Hybrid;
  HeadKind head = HeadKind::Sigmoid;
  int max_len = 64;      // tokens per day incl. the synthetic price token
  int embed_width = 50;  // N_F

  // CNN local/global path
  int la_window = 5;  // odd
  int lg_conv_filters = 64;
  int lg_conv_kernel = 15;
  int lg_pool_window = 2;
  int lg_pool_stride = 2;

  // CNN-BLSTM path
  int bl_conv1_filters = 50;
  int bl_conv1_kernel = 25;
  int bl_conv2_filters = 100;
  int bl_conv2_kernel = 25;
  int lstm_hidden = 250;
  AttentionMode attention2 = AttentionMode::Reweight;
  BlstmFeature blstm_feature = BlstmFeature::FinalConcat;

  // Fusion head (hybrid)
  int fusion1 = 100;
  int fusion2 = 50;
  double dropout = 0.5;
  bool use_batch_norm = false;

  // Standalone CNN local/global: conv filters after the LAL, then two conv
  // blocks of ga_filters with kernels 2 and 3 after the GAL.
  int lg_standalone_conv_filters = 80;
  int lg_standalone_ga_filters = 50;

  // Standalone CNN-BLSTM: one conv block then a dense layer before the head.
  int bl_standalone_conv_filters = 64;
  int bl_standalone_dense = 300;

  bool finetune_embeddings = false;
  PriceFusion price_fusion = PriceFusion::Token;

  /// Throws DimensionError when a kernel or pool no longer fits the sequence
  /// lengths this configuration produces.
  void validate() const;

  // Derived sequence lengths.
  int lg_conv_len() const;
  int lg_pool_len() const;
  int lg_flat_width() const;
  int bl_conv1_len() const;
  int bl_conv2_len() const;
  int lg_standalone_conv_len() const;
  int lg_standalone_pool_len() const;
  int bl_standalone_conv_len() const;
  int bl_standalone_pool_len() const;
  /// Width of the concatenated feature vector entering the fusion layers.
  int fusion_input_width() const;
};

/// A complete trainable configuration: layer parameters, embedding table,
/// price normalization, and batch-norm running statistics. Parameter tensors
/// are shared handles; clone() detaches a snapshot.
struct Model {
  ModelConfig config;
  ParamSet params;
  EmbeddingTable embedding;  // matrix aliases params.at("embedding")
  PriceNormalizer normalizer;
  std::map<std::string, BatchNormState> bn_states;
  std::uint64_t seed = 0;

  Model clone() const;
};

/// Builds a model with uniform [-0.05, 0.05] parameter initialization from
/// the "model-init" sub-stream of `seed`. The embedding table is adopted as
/// given (pretrained rows stay frozen unless config.finetune_embeddings).
Model build_model(const ModelConfig& config, EmbeddingTable embedding,
                  const PriceNormalizer& normalizer, std::uint64_t seed);

enum class Mode { Train, Infer };

struct ForwardContext {
  Mode mode = Mode::Infer;
  /// Required in train mode when dropout > 0.
  Rng* dropout_rng = nullptr;
};

struct AttentionOut {
  Tensor weighted;  // same shape as the input sequence
  Tensor scores;    // [L], every entry strictly in (0, 1)
};

/// Sliding-window attention: score_i is the sigmoid of the Frobenius inner
/// product of the window centered on row i (zero-padded at the edges) with
/// the shared weight, plus a scalar bias; output row i is score_i * seq[i].
AttentionOut local_attention(Graph& graph, const Tensor& seq, const Tensor& weight,
                             const Tensor& bias);

/// Whole-sequence attention: the window is the entire (conceptually padded)
/// input, so one shared score multiplies every row. weight has max_len rows;
/// rows beyond the input length meet zero padding and drop out of the score.
AttentionOut global_attention(Graph& graph, const Tensor& seq, const Tensor& weight,
                              const Tensor& bias);

/// Per-row scores from each position's weight slice, then a score-weighted
/// mean of the rows: sum_i s_i x_i / sum_i s_i -> [1, width].
Tensor weighted_mean_attention(Graph& graph, const Tensor& seq, const Tensor& weight,
                               const Tensor& bias);

struct LstmGateParams {
  Tensor W_i, U_i, b_i;
  Tensor W_f, U_f, b_f;
  Tensor W_c, U_c, b_c;
  Tensor W_o, U_o, b_o;
};

/// One LSTM update: gates i, f, o via sigmoid, candidate g via tanh,
/// c_t = f o c_prev + i o g, h_t = o o tanh(c_t).
std::pair<Tensor, Tensor> lstm_step(Graph& graph, const Tensor& x_t, const Tensor& h_prev,
                                    const Tensor& c_prev, const LstmGateParams& p);

/// Forward and backward recurrences concatenated per position -> [L, 2H].
Tensor blstm_forward(Graph& graph, const Tensor& seq, const LstmGateParams& fwd,
                     const LstmGateParams& bwd);

/// Collects the LSTM gate tensors registered under `prefix` (e.g. "bl.lstm.fwd").
LstmGateParams lstm_params_at(ParamSet& params, const std::string& prefix);

/// Embeds one labeled day through the model's table and price projection.
Tensor embed_model_day(Graph& graph, Model& model, const DayRecord& day);

/// CNN local/global path: LAL -> conv -> max-pool -> GAL -> flatten.
Tensor cnn_lg_forward(Graph& graph, Model& model, const Tensor& day_seq,
                      const ForwardContext& ctx);

/// CNN-BLSTM path: conv1 -> attention -> conv2 -> attention -> global
/// max-pool -> BLSTM -> feature slice.
Tensor cnn_blstm_forward(Graph& graph, Model& model, const Tensor& day_seq,
                         const ForwardContext& ctx);

/// Full forward pass for the configured kind; returns a score in [0, 1].
Tensor model_forward(Graph& graph, Model& model, const Tensor& day_seq,
                     const ForwardContext& ctx);

/// Hybrid fusion alias (both paths concatenated into the dense stack).
Tensor hpsmp_forward(Graph& graph, Model& model, const Tensor& day_seq,
                     const ForwardContext& ctx);

/// End-to-end convenience: embed + forward for one day.
Tensor forward_day(Graph& graph, Model& model, const DayRecord& day,
                   const ForwardContext& ctx);

/// Self-describing text checkpoint; round-trips bit-exactly (hex floats).
void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

/// JSON round-trip of the configuration (used by checkpoints and run echoes).
std::string config_to_json_string(const ModelConfig& config);
ModelConfig config_from_json_string(const std::string& json);

}  // namespace hpsmp
