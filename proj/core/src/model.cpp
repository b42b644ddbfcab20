#include "hpsmp/model.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hpsmp/errors.hpp"

namespace hpsmp {

namespace {

int valid_out_len(const char* what, int len, int k, int stride) {
  if (len < k) {
    throw DimensionError(std::string(what) + ": input length " + std::to_string(len) +
                         " shorter than kernel/window " + std::to_string(k) +
                         " (shrink kernels or raise max_len)");
  }
  return (len - k) / stride + 1;
}

}  // namespace

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "hybrid") return ModelKind::Hybrid;
  if (s == "cnn-lg" || s == "cnn_lg") return ModelKind::CnnLg;
  if (s == "cnn-blstm" || s == "cnn_blstm") return ModelKind::CnnBlstm;
  throw ContractError("unknown model kind: " + s);
}

const char* to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Hybrid: return "hybrid";
    case ModelKind::CnnLg: return "cnn-lg";
    case ModelKind::CnnBlstm: return "cnn-blstm";
  }
  return "hybrid";
}

HeadKind head_kind_from_string(const std::string& s) {
  if (s == "sigmoid") return HeadKind::Sigmoid;
  if (s == "relu" || s == "relu_clipped") return HeadKind::ReluClipped;
  throw ContractError("unknown head kind: " + s);
}

const char* to_string(HeadKind head) {
  return head == HeadKind::Sigmoid ? "sigmoid" : "relu_clipped";
}

int ModelConfig::lg_conv_len() const {
  return valid_out_len("lg conv", max_len, lg_conv_kernel, 1);
}
int ModelConfig::lg_pool_len() const {
  return valid_out_len("lg max-pool", lg_conv_len(), lg_pool_window, lg_pool_stride);
}
int ModelConfig::lg_flat_width() const { return lg_pool_len() * lg_conv_filters; }
int ModelConfig::bl_conv1_len() const {
  return valid_out_len("blstm conv1", max_len, bl_conv1_kernel, 1);
}
int ModelConfig::bl_conv2_len() const {
  return valid_out_len("blstm conv2", bl_conv1_len(), bl_conv2_kernel, 1);
}
int ModelConfig::lg_standalone_conv_len() const {
  return valid_out_len("standalone lg conv", max_len, lg_conv_kernel, 1);
}
int ModelConfig::lg_standalone_pool_len() const {
  return valid_out_len("standalone lg max-pool", lg_standalone_conv_len(), lg_pool_window,
                       lg_pool_stride);
}
int ModelConfig::bl_standalone_conv_len() const {
  return valid_out_len("standalone blstm conv", max_len, bl_conv1_kernel, 1);
}
int ModelConfig::bl_standalone_pool_len() const {
  return valid_out_len("standalone blstm max-pool", bl_standalone_conv_len(), lg_pool_window,
                       lg_pool_stride);
}

int ModelConfig::fusion_input_width() const {
  return lg_flat_width() + 2 * lstm_hidden;
}

void ModelConfig::validate() const {
  if (max_len < 2) throw ContractError("max_len must be >= 2");
  if (embed_width < 1) throw ContractError("embed_width must be >= 1");
  if (la_window < 1 || la_window % 2 == 0) {
    throw ContractError("la_window must be odd and >= 1, got " + std::to_string(la_window));
  }
  if (dropout < 0.0 || dropout >= 1.0) throw ContractError("dropout must be in [0, 1)");
  if (lstm_hidden < 1) throw ContractError("lstm_hidden must be >= 1");
  switch (kind) {
    case ModelKind::Hybrid:
      (void)lg_pool_len();
      (void)bl_conv2_len();
      if (fusion1 < 1 || fusion2 < 1) throw ContractError("fusion widths must be >= 1");
      break;
    case ModelKind::CnnLg:
      if (lg_standalone_pool_len() < 3) {
        throw DimensionError("standalone lg: pooled length " +
                             std::to_string(lg_standalone_pool_len()) +
                             " too short for kernel-2/kernel-3 conv blocks");
      }
      break;
    case ModelKind::CnnBlstm:
      (void)bl_standalone_pool_len();
      if (bl_standalone_dense < 1) throw ContractError("standalone dense width must be >= 1");
      break;
  }
}

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

namespace {

void add_uniform(ParamSet& params, Rng& rng, const std::string& name, Shape shape) {
  params.add(name, Tensor::uniform(std::move(shape), rng));
}

void add_lstm(ParamSet& params, Rng& rng, const std::string& prefix, int hidden, int input) {
  for (const char* gate : {"i", "f", "c", "o"}) {
    add_uniform(params, rng, prefix + ".W_" + gate, {hidden, input});
    add_uniform(params, rng, prefix + ".U_" + gate, {hidden, hidden});
    add_uniform(params, rng, prefix + ".b_" + gate, {hidden});
  }
}

void add_batch_norm(Model& model, const std::string& site, int width) {
  model.params.add(site + ".bn.gamma", Tensor({width}, 1.0));
  model.params.add(site + ".bn.beta", Tensor({width}, 0.0));
  model.bn_states[site] = BatchNormState{};
}

}  // namespace

Model build_model(const ModelConfig& config, EmbeddingTable embedding,
                  const PriceNormalizer& normalizer, std::uint64_t seed) {
  config.validate();
  if (embedding.width != config.embed_width) {
    throw DimensionError("embedding width " + std::to_string(embedding.width) +
                         " does not match config embed_width " +
                         std::to_string(config.embed_width));
  }
  Model model;
  model.config = config;
  model.normalizer = normalizer;
  model.seed = seed;
  Rng rng = Rng::substream(seed, "model-init");

  model.params.add("embedding", embedding.matrix);
  embedding.finetune_pretrained = config.finetune_embeddings;
  model.embedding = std::move(embedding);
  add_uniform(model.params, rng, "price_proj", {4, config.embed_width});

  const int nf = config.embed_width;
  switch (config.kind) {
    case ModelKind::Hybrid: {
      add_uniform(model.params, rng, "lg.la.weight", {config.la_window, nf});
      add_uniform(model.params, rng, "lg.la.bias", {1});
      add_uniform(model.params, rng, "lg.conv.kernels",
                  {config.lg_conv_kernel, nf, config.lg_conv_filters});
      add_uniform(model.params, rng, "lg.conv.bias", {config.lg_conv_filters});
      if (config.use_batch_norm) add_batch_norm(model, "lg.conv", config.lg_conv_filters);
      add_uniform(model.params, rng, "lg.ga.weight",
                  {config.lg_pool_len(), config.lg_conv_filters});
      add_uniform(model.params, rng, "lg.ga.bias", {1});

      add_uniform(model.params, rng, "bl.conv1.kernels",
                  {config.bl_conv1_kernel, nf, config.bl_conv1_filters});
      add_uniform(model.params, rng, "bl.conv1.bias", {config.bl_conv1_filters});
      if (config.use_batch_norm) add_batch_norm(model, "bl.conv1", config.bl_conv1_filters);
      add_uniform(model.params, rng, "bl.att1.weight",
                  {config.bl_conv1_len(), config.bl_conv1_filters});
      add_uniform(model.params, rng, "bl.att1.bias", {1});
      add_uniform(model.params, rng, "bl.conv2.kernels",
                  {config.bl_conv2_kernel, config.bl_conv1_filters, config.bl_conv2_filters});
      add_uniform(model.params, rng, "bl.conv2.bias", {config.bl_conv2_filters});
      if (config.use_batch_norm) add_batch_norm(model, "bl.conv2", config.bl_conv2_filters);
      add_uniform(model.params, rng, "bl.att2.weight",
                  {config.bl_conv2_len(), config.bl_conv2_filters});
      add_uniform(model.params, rng, "bl.att2.bias", {1});
      add_lstm(model.params, rng, "bl.lstm.fwd", config.lstm_hidden, config.bl_conv2_filters);
      add_lstm(model.params, rng, "bl.lstm.bwd", config.lstm_hidden, config.bl_conv2_filters);

      add_uniform(model.params, rng, "fusion.1.weight",
                  {config.fusion1, config.fusion_input_width()});
      add_uniform(model.params, rng, "fusion.1.bias", {config.fusion1});
      add_uniform(model.params, rng, "fusion.2.weight", {config.fusion2, config.fusion1});
      add_uniform(model.params, rng, "fusion.2.bias", {config.fusion2});
      add_uniform(model.params, rng, "fusion.out.weight", {1, config.fusion2});
      add_uniform(model.params, rng, "fusion.out.bias", {1});
      break;
    }
    case ModelKind::CnnLg: {
      const int filters = config.lg_standalone_conv_filters;
      const int pool_len = config.lg_standalone_pool_len();
      const int ga_filters = config.lg_standalone_ga_filters;
      add_uniform(model.params, rng, "lg.la.weight", {config.la_window, nf});
      add_uniform(model.params, rng, "lg.la.bias", {1});
      add_uniform(model.params, rng, "lgs.conv.kernels", {config.lg_conv_kernel, nf, filters});
      add_uniform(model.params, rng, "lgs.conv.bias", {filters});
      if (config.use_batch_norm) add_batch_norm(model, "lgs.conv", filters);
      add_uniform(model.params, rng, "lg.ga.weight", {pool_len, filters});
      add_uniform(model.params, rng, "lg.ga.bias", {1});
      add_uniform(model.params, rng, "lgs.conv2a.kernels", {2, filters, ga_filters});
      add_uniform(model.params, rng, "lgs.conv2a.bias", {ga_filters});
      add_uniform(model.params, rng, "lgs.conv2b.kernels", {3, filters, ga_filters});
      add_uniform(model.params, rng, "lgs.conv2b.bias", {ga_filters});
      const int flat = (pool_len - 1) * ga_filters + (pool_len - 2) * ga_filters;
      add_uniform(model.params, rng, "lgs.out.weight", {1, flat});
      add_uniform(model.params, rng, "lgs.out.bias", {1});
      break;
    }
    case ModelKind::CnnBlstm: {
      const int filters = config.bl_standalone_conv_filters;
      const int conv_len = config.bl_standalone_conv_len();
      add_uniform(model.params, rng, "bls.conv.kernels",
                  {config.bl_conv1_kernel, nf, filters});
      add_uniform(model.params, rng, "bls.conv.bias", {filters});
      if (config.use_batch_norm) add_batch_norm(model, "bls.conv", filters);
      add_uniform(model.params, rng, "bls.att.weight", {conv_len, filters});
      add_uniform(model.params, rng, "bls.att.bias", {1});
      add_lstm(model.params, rng, "bl.lstm.fwd", config.lstm_hidden, filters);
      add_lstm(model.params, rng, "bl.lstm.bwd", config.lstm_hidden, filters);
      add_uniform(model.params, rng, "bls.dense.weight",
                  {config.bl_standalone_dense, 2 * config.lstm_hidden});
      add_uniform(model.params, rng, "bls.dense.bias", {config.bl_standalone_dense});
      add_uniform(model.params, rng, "bls.out.weight", {1, config.bl_standalone_dense});
      add_uniform(model.params, rng, "bls.out.bias", {1});
      break;
    }
  }
  return model;
}

Model Model::clone() const {
  Model out;
  out.config = config;
  out.params = params.clone();
  out.embedding = embedding;
  out.embedding.matrix = out.params.at("embedding");
  out.normalizer = normalizer;
  out.bn_states = bn_states;
  out.seed = seed;
  return out;
}

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

namespace {

Tensor dense(Graph& g, const Tensor& x, const Tensor& weight, const Tensor& bias) {
  return g.add(g.matmul(weight, x), bias);
}

Tensor apply_head(Graph& g, const Tensor& z, HeadKind head) {
  if (head == HeadKind::Sigmoid) return g.sigmoid(z);
  // Paper-faithful ReLU head; outputs clipped into [0, 1] so the trading
  // thresholds stay meaningful.
  return g.clamp(g.relu(z), 0.0, 1.0);
}

Tensor maybe_batch_norm(Graph& g, Model& model, const std::string& site, const Tensor& x,
                        const ForwardContext& ctx) {
  if (!model.config.use_batch_norm) return x;
  return g.batch_norm(x, model.params.at(site + ".bn.gamma"), model.params.at(site + ".bn.beta"),
                      model.bn_states.at(site), ctx.mode == Mode::Train);
}

Tensor maybe_dropout(Graph& g, Model& model, const Tensor& x, const ForwardContext& ctx) {
  if (ctx.mode != Mode::Train || model.config.dropout == 0.0) return x;
  if (ctx.dropout_rng == nullptr) {
    throw ContractError("train-mode forward needs a dropout rng");
  }
  return g.dropout(x, model.config.dropout, *ctx.dropout_rng, true);
}

}  // namespace

AttentionOut local_attention(Graph& graph, const Tensor& seq, const Tensor& weight,
                             const Tensor& bias) {
  if (seq.rank() != 2) {
    throw DimensionError("local_attention: seq must be rank 2, got " + shape_str(seq.shape()));
  }
  const int window = weight.dim(0);
  if (window % 2 == 0) throw ContractError("local_attention: window must be odd");
  if (weight.dim(1) != seq.dim(1)) {
    throw DimensionError("local_attention: weight width (axis 1) " +
                         std::to_string(weight.dim(1)) + " vs seq width " +
                         std::to_string(seq.dim(1)));
  }
  const int halo = (window - 1) / 2;
  // The windowed Frobenius product at every center is exactly a valid conv
  // with one filter over the zero-padded sequence.
  Tensor padded = graph.pad_rows(seq, halo, halo);
  Tensor kernel = graph.reshape(weight, {window, seq.dim(1), 1});
  Tensor pre = graph.conv1d(padded, kernel, bias, 1);  // [L, 1]
  Tensor scores = graph.sigmoid(pre);
  AttentionOut out;
  out.weighted = graph.row_scale(seq, scores);
  out.scores = graph.reshape(scores, {seq.dim(0)});
  return out;
}

AttentionOut global_attention(Graph& graph, const Tensor& seq, const Tensor& weight,
                              const Tensor& bias) {
  if (seq.rank() != 2) {
    throw DimensionError("global_attention: seq must be rank 2, got " + shape_str(seq.shape()));
  }
  const int len = seq.dim(0);
  if (len > weight.dim(0)) {
    throw DimensionError("global_attention: sequence length " + std::to_string(len) +
                         " exceeds weight rows " + std::to_string(weight.dim(0)));
  }
  if (weight.dim(1) != seq.dim(1)) {
    throw DimensionError("global_attention: weight width (axis 1) " +
                         std::to_string(weight.dim(1)) + " vs seq width " +
                         std::to_string(seq.dim(1)));
  }
  // Padding rows meet zero weight products, so only the first len weight rows
  // participate: the whole-input window yields one shared score.
  Tensor used = weight.dim(0) == len ? weight : graph.slice_rows(weight, 0, len);
  Tensor pre = graph.add(graph.sum(graph.hadamard(seq, used)), bias);
  Tensor score = graph.sigmoid(pre);  // [1]
  Tensor scores = graph.broadcast_rows(score, len);
  AttentionOut out;
  out.weighted = graph.row_scale(seq, scores);
  out.scores = scores;
  return out;
}

Tensor weighted_mean_attention(Graph& graph, const Tensor& seq, const Tensor& weight,
                               const Tensor& bias) {
  if (seq.rank() != 2) {
    throw DimensionError("weighted_mean_attention: seq must be rank 2");
  }
  const int len = seq.dim(0);
  const int width = seq.dim(1);
  if (len > weight.dim(0) || weight.dim(1) != width) {
    throw DimensionError("weighted_mean_attention: weight " + shape_str(weight.shape()) +
                         " does not cover seq " + shape_str(seq.shape()));
  }
  Tensor used = weight.dim(0) == len ? weight : graph.slice_rows(weight, 0, len);
  Tensor ones_w(Shape{width}, 1.0);
  Tensor pre = graph.matmul(graph.hadamard(seq, used), ones_w);  // [len]
  Tensor scores = graph.sigmoid(graph.add(pre, graph.broadcast_rows(bias, len)));
  Tensor weighted = graph.row_scale(seq, scores);  // [len, width]
  Tensor ones_l(Shape{len}, 1.0);
  Tensor num = graph.matmul(ones_l, weighted);  // [width] column sums
  Tensor denom = graph.broadcast_rows(graph.sum(scores), width);
  return graph.reshape(graph.divide(num, denom), {1, width});
}

std::pair<Tensor, Tensor> lstm_step(Graph& graph, const Tensor& x_t, const Tensor& h_prev,
                                    const Tensor& c_prev, const LstmGateParams& p) {
  auto gate = [&](const Tensor& W, const Tensor& U, const Tensor& b) {
    return graph.add(graph.add(graph.matmul(W, x_t), graph.matmul(U, h_prev)), b);
  };
  Tensor i_t = graph.sigmoid(gate(p.W_i, p.U_i, p.b_i));
  Tensor f_t = graph.sigmoid(gate(p.W_f, p.U_f, p.b_f));
  Tensor g_t = graph.tanh(gate(p.W_c, p.U_c, p.b_c));
  Tensor c_t = graph.add(graph.hadamard(f_t, c_prev), graph.hadamard(i_t, g_t));
  Tensor o_t = graph.sigmoid(gate(p.W_o, p.U_o, p.b_o));
  Tensor h_t = graph.hadamard(o_t, graph.tanh(c_t));
  return {h_t, c_t};
}

Tensor blstm_forward(Graph& graph, const Tensor& seq, const LstmGateParams& fwd,
                     const LstmGateParams& bwd) {
  if (seq.rank() != 2) {
    throw DimensionError("blstm_forward: seq must be rank 2, got " + shape_str(seq.shape()));
  }
  const int len = seq.dim(0);
  const int hidden = fwd.U_i.dim(0);
  std::vector<Tensor> rows;
  rows.reserve(static_cast<std::size_t>(len));
  for (int t = 0; t < len; ++t) {
    rows.push_back(graph.reshape(graph.slice_rows(seq, t, 1), {seq.dim(1)}));
  }
  std::vector<Tensor> h_fwd(static_cast<std::size_t>(len));
  {
    Tensor h(Shape{hidden}, 0.0), c(Shape{hidden}, 0.0);
    for (int t = 0; t < len; ++t) {
      auto [h_t, c_t] = lstm_step(graph, rows[static_cast<std::size_t>(t)], h, c, fwd);
      h = h_t;
      c = c_t;
      h_fwd[static_cast<std::size_t>(t)] = h_t;
    }
  }
  std::vector<Tensor> h_bwd(static_cast<std::size_t>(len));
  {
    Tensor h(Shape{hidden}, 0.0), c(Shape{hidden}, 0.0);
    for (int t = len - 1; t >= 0; --t) {
      auto [h_t, c_t] = lstm_step(graph, rows[static_cast<std::size_t>(t)], h, c, bwd);
      h = h_t;
      c = c_t;
      h_bwd[static_cast<std::size_t>(t)] = h_t;
    }
  }
  Tensor out;
  for (int t = 0; t < len; ++t) {
    Tensor row = graph.reshape(
        graph.concat(h_fwd[static_cast<std::size_t>(t)], h_bwd[static_cast<std::size_t>(t)], 0),
        {1, 2 * hidden});
    out = t == 0 ? row : graph.concat(out, row, 0);
  }
  return out;
}

LstmGateParams lstm_params_at(ParamSet& params, const std::string& prefix) {
  LstmGateParams p;
  p.W_i = params.at(prefix + ".W_i");
  p.U_i = params.at(prefix + ".U_i");
  p.b_i = params.at(prefix + ".b_i");
  p.W_f = params.at(prefix + ".W_f");
  p.U_f = params.at(prefix + ".U_f");
  p.b_f = params.at(prefix + ".b_f");
  p.W_c = params.at(prefix + ".W_c");
  p.U_c = params.at(prefix + ".U_c");
  p.b_c = params.at(prefix + ".b_c");
  p.W_o = params.at(prefix + ".W_o");
  p.U_o = params.at(prefix + ".U_o");
  p.b_o = params.at(prefix + ".b_o");
  return p;
}

Tensor embed_model_day(Graph& graph, Model& model, const DayRecord& day) {
  return embed_day(graph, day, model.embedding, model.params.at("price_proj"),
                   model.normalizer, model.config.max_len,
                   model.config.price_fusion == PriceFusion::Token);
}

Tensor cnn_lg_forward(Graph& graph, Model& model, const Tensor& day_seq,
                      const ForwardContext& ctx) {
  ParamSet& p = model.params;
  const bool standalone = model.config.kind == ModelKind::CnnLg;
  AttentionOut la = local_attention(graph, day_seq, p.at("lg.la.weight"), p.at("lg.la.bias"));
  const std::string conv_site = standalone ? "lgs.conv" : "lg.conv";
  Tensor conv = graph.conv1d(la.weighted, p.at(conv_site + ".kernels"),
                             p.at(conv_site + ".bias"), 1);
  conv = maybe_batch_norm(graph, model, conv_site, conv, ctx);
  Tensor pooled = graph.maxpool1d(conv, model.config.lg_pool_window,
                                  model.config.lg_pool_stride);
  AttentionOut ga = global_attention(graph, pooled, p.at("lg.ga.weight"), p.at("lg.ga.bias"));
  if (!standalone) {
    return graph.reshape(ga.weighted, {static_cast<int>(ga.weighted.size())});
  }
  Tensor conv_a = graph.conv1d(ga.weighted, p.at("lgs.conv2a.kernels"),
                               p.at("lgs.conv2a.bias"), 1);
  Tensor conv_b = graph.conv1d(ga.weighted, p.at("lgs.conv2b.kernels"),
                               p.at("lgs.conv2b.bias"), 1);
  Tensor flat_a = graph.reshape(conv_a, {static_cast<int>(conv_a.size())});
  Tensor flat_b = graph.reshape(conv_b, {static_cast<int>(conv_b.size())});
  return graph.concat(flat_a, flat_b, 0);
}

Tensor cnn_blstm_forward(Graph& graph, Model& model, const Tensor& day_seq,
                         const ForwardContext& ctx) {
  ParamSet& p = model.params;
  const ModelConfig& cfg = model.config;
  Tensor features;
  if (cfg.kind == ModelKind::CnnBlstm) {
    Tensor conv = graph.conv1d(day_seq, p.at("bls.conv.kernels"), p.at("bls.conv.bias"), 1);
    conv = maybe_batch_norm(graph, model, "bls.conv", conv, ctx);
    AttentionOut att = global_attention(graph, conv, p.at("bls.att.weight"), p.at("bls.att.bias"));
    Tensor pooled = graph.maxpool1d(att.weighted, cfg.lg_pool_window, cfg.lg_pool_stride);
    features = blstm_forward(graph, pooled, lstm_params_at(p, "bl.lstm.fwd"),
                             lstm_params_at(p, "bl.lstm.bwd"));
  } else {
    Tensor conv1 = graph.conv1d(day_seq, p.at("bl.conv1.kernels"), p.at("bl.conv1.bias"), 1);
    conv1 = maybe_batch_norm(graph, model, "bl.conv1", conv1, ctx);
    AttentionOut att1 = global_attention(graph, conv1, p.at("bl.att1.weight"),
                                         p.at("bl.att1.bias"));
    Tensor conv2 = graph.conv1d(att1.weighted, p.at("bl.conv2.kernels"),
                                p.at("bl.conv2.bias"), 1);
    conv2 = maybe_batch_norm(graph, model, "bl.conv2", conv2, ctx);
    Tensor encoded;
    if (cfg.attention2 == AttentionMode::Reweight) {
      AttentionOut att2 = global_attention(graph, conv2, p.at("bl.att2.weight"),
                                           p.at("bl.att2.bias"));
      encoded = att2.weighted;
    } else {
      encoded = weighted_mean_attention(graph, conv2, p.at("bl.att2.weight"),
                                        p.at("bl.att2.bias"));
    }
    // Global max-pool: window equals the remaining length.
    Tensor pooled = graph.maxpool1d(encoded, encoded.dim(0), 1);  // [1, filters]
    features = blstm_forward(graph, pooled, lstm_params_at(p, "bl.lstm.fwd"),
                             lstm_params_at(p, "bl.lstm.bwd"));
  }
  const int len = features.dim(0);
  const int width = features.dim(1);
  if (cfg.blstm_feature == BlstmFeature::FinalConcat) {
    return graph.reshape(graph.slice_rows(features, len - 1, 1), {width});
  }
  Tensor ones(Shape{len}, 1.0);
  return graph.scale(graph.matmul(ones, features), 1.0 / len);
}

Tensor model_forward(Graph& graph, Model& model, const Tensor& day_seq,
                     const ForwardContext& ctx) {
  ParamSet& p = model.params;
  const ModelConfig& cfg = model.config;
  switch (cfg.kind) {
    case ModelKind::Hybrid:
      return hpsmp_forward(graph, model, day_seq, ctx);
    case ModelKind::CnnLg: {
      Tensor flat = cnn_lg_forward(graph, model, day_seq, ctx);
      Tensor dropped = maybe_dropout(graph, model, flat, ctx);
      Tensor z = dense(graph, dropped, p.at("lgs.out.weight"), p.at("lgs.out.bias"));
      return apply_head(graph, z, cfg.head);
    }
    case ModelKind::CnnBlstm: {
      Tensor features = cnn_blstm_forward(graph, model, day_seq, ctx);
      Tensor hidden = graph.tanh(dense(graph, features, p.at("bls.dense.weight"),
                                       p.at("bls.dense.bias")));
      Tensor dropped = maybe_dropout(graph, model, hidden, ctx);
      Tensor z = dense(graph, dropped, p.at("bls.out.weight"), p.at("bls.out.bias"));
      return apply_head(graph, z, cfg.head);
    }
  }
  throw ContractError("model_forward: unknown model kind");
}

Tensor hpsmp_forward(Graph& graph, Model& model, const Tensor& day_seq,
                     const ForwardContext& ctx) {
  ParamSet& p = model.params;
  Tensor lg = cnn_lg_forward(graph, model, day_seq, ctx);
  Tensor bl = cnn_blstm_forward(graph, model, day_seq, ctx);
  Tensor fused = graph.concat(lg, bl, 0);
  Tensor h1 = graph.tanh(dense(graph, fused, p.at("fusion.1.weight"), p.at("fusion.1.bias")));
  h1 = maybe_dropout(graph, model, h1, ctx);
  Tensor h2 = graph.tanh(dense(graph, h1, p.at("fusion.2.weight"), p.at("fusion.2.bias")));
  h2 = maybe_dropout(graph, model, h2, ctx);
  Tensor z = dense(graph, h2, p.at("fusion.out.weight"), p.at("fusion.out.bias"));
  return apply_head(graph, z, model.config.head);
}

Tensor forward_day(Graph& graph, Model& model, const DayRecord& day,
                   const ForwardContext& ctx) {
  Tensor seq = embed_model_day(graph, model, day);
  return model_forward(graph, model, seq, ctx);
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

nlohmann::json config_to_json(const ModelConfig& c) {
  nlohmann::json j;
  j["kind"] = to_string(c.kind);
  j["head"] = to_string(c.head);
  j["max_len"] = c.max_len;
  j["embed_width"] = c.embed_width;
  j["la_window"] = c.la_window;
  j["lg_conv_filters"] = c.lg_conv_filters;
  j["lg_conv_kernel"] = c.lg_conv_kernel;
  j["lg_pool_window"] = c.lg_pool_window;
  j["lg_pool_stride"] = c.lg_pool_stride;
  j["bl_conv1_filters"] = c.bl_conv1_filters;
  j["bl_conv1_kernel"] = c.bl_conv1_kernel;
  j["bl_conv2_filters"] = c.bl_conv2_filters;
  j["bl_conv2_kernel"] = c.bl_conv2_kernel;
  j["lstm_hidden"] = c.lstm_hidden;
  j["attention2"] = c.attention2 == AttentionMode::Reweight ? "reweight" : "weighted_mean";
  j["blstm_feature"] =
      c.blstm_feature == BlstmFeature::FinalConcat ? "final_concat" : "mean_pooled";
  j["fusion1"] = c.fusion1;
  j["fusion2"] = c.fusion2;
  j["dropout"] = c.dropout;
  j["use_batch_norm"] = c.use_batch_norm;
  j["lg_standalone_conv_filters"] = c.lg_standalone_conv_filters;
  j["lg_standalone_ga_filters"] = c.lg_standalone_ga_filters;
  j["bl_standalone_conv_filters"] = c.bl_standalone_conv_filters;
  j["bl_standalone_dense"] = c.bl_standalone_dense;
  j["finetune_embeddings"] = c.finetune_embeddings;
  j["price_fusion"] = c.price_fusion == PriceFusion::Token ? "token" : "none";
  return j;
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.kind = model_kind_from_string(j.at("kind").get<std::string>());
  c.head = head_kind_from_string(j.at("head").get<std::string>());
  c.max_len = j.at("max_len").get<int>();
  c.embed_width = j.at("embed_width").get<int>();
  c.la_window = j.at("la_window").get<int>();
  c.lg_conv_filters = j.at("lg_conv_filters").get<int>();
  c.lg_conv_kernel = j.at("lg_conv_kernel").get<int>();
  c.lg_pool_window = j.at("lg_pool_window").get<int>();
  c.lg_pool_stride = j.at("lg_pool_stride").get<int>();
  c.bl_conv1_filters = j.at("bl_conv1_filters").get<int>();
  c.bl_conv1_kernel = j.at("bl_conv1_kernel").get<int>();
  c.bl_conv2_filters = j.at("bl_conv2_filters").get<int>();
  c.bl_conv2_kernel = j.at("bl_conv2_kernel").get<int>();
  c.lstm_hidden = j.at("lstm_hidden").get<int>();
  c.attention2 = j.at("attention2").get<std::string>() == "weighted_mean"
                     ? AttentionMode::WeightedMean
                     : AttentionMode::Reweight;
  c.blstm_feature = j.at("blstm_feature").get<std::string>() == "mean_pooled"
                        ? BlstmFeature::MeanPooled
                        : BlstmFeature::FinalConcat;
  c.fusion1 = j.at("fusion1").get<int>();
  c.fusion2 = j.at("fusion2").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.use_batch_norm = j.at("use_batch_norm").get<bool>();
  c.lg_standalone_conv_filters = j.at("lg_standalone_conv_filters").get<int>();
  c.lg_standalone_ga_filters = j.at("lg_standalone_ga_filters").get<int>();
  c.bl_standalone_conv_filters = j.at("bl_standalone_conv_filters").get<int>();
  c.bl_standalone_dense = j.at("bl_standalone_dense").get<int>();
  c.finetune_embeddings = j.at("finetune_embeddings").get<bool>();
  c.price_fusion =
      j.at("price_fusion").get<std::string>() == "none" ? PriceFusion::None : PriceFusion::Token;
  return c;
}

std::string hex_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

double parse_hex_double(const std::string& s, const std::string& context) {
  const char* begin = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') {
    throw ParseError(context + ": bad float literal '" + s + "'");
  }
  return v;
}

}  // namespace

std::string config_to_json_string(const ModelConfig& config) {
  return config_to_json(config).dump();
}

ModelConfig config_from_json_string(const std::string& json) {
  try {
    return config_from_json(nlohmann::json::parse(json));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad model config json: ") + e.what());
  }
}

void save_checkpoint(const Model& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out << "hpsmp-checkpoint 1\n";
  out << "config " << config_to_json(model.config).dump() << "\n";
  out << "seed " << model.seed << "\n";
  out << "norm";
  for (double v : model.normalizer.min) out << " " << hex_double(v);
  for (double v : model.normalizer.max) out << " " << hex_double(v);
  out << "\n";
  out << "pretrained " << model.embedding.pretrained.size() << " ";
  for (bool b : model.embedding.pretrained) out << (b ? '1' : '0');
  out << "\n";
  for (const auto& [site, state] : model.bn_states) {
    out << "bn " << site << " " << (state.initialized ? 1 : 0) << " "
        << hex_double(state.momentum) << " " << state.running_mean.size();
    for (double v : state.running_mean) out << " " << hex_double(v);
    for (double v : state.running_var) out << " " << hex_double(v);
    out << "\n";
  }
  model.params.for_each([&](const std::string& name, const Tensor& t, bool trainable) {
    out << "tensor " << name << " " << (trainable ? 1 : 0) << " " << t.rank();
    for (int ax = 0; ax < t.rank(); ++ax) out << " " << t.dim(ax);
    out << "\n";
    const double* v = t.data();
    for (std::size_t i = 0; i < t.size(); ++i) {
      out << (i ? " " : "") << hex_double(v[i]);
    }
    out << "\n";
  });
  out << "end\n";
  if (!out) throw DataError("write failure on checkpoint: " + path);
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "hpsmp-checkpoint 1") {
    throw ParseError(path + ": not a version-1 checkpoint");
  }
  Model model;
  bool saw_end = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "config") {
      std::string rest;
      std::getline(ss, rest);
      try {
        model.config = config_from_json(nlohmann::json::parse(rest));
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": bad config: " + e.what());
      }
    } else if (tag == "seed") {
      ss >> model.seed;
    } else if (tag == "norm") {
      std::string v;
      for (std::size_t i = 0; i < 4; ++i) {
        ss >> v;
        model.normalizer.min[i] = parse_hex_double(v, path);
      }
      for (std::size_t i = 0; i < 4; ++i) {
        ss >> v;
        model.normalizer.max[i] = parse_hex_double(v, path);
      }
    } else if (tag == "pretrained") {
      std::size_t n = 0;
      std::string flags;
      ss >> n >> flags;
      if (flags.size() != n) throw ParseError(path + ": pretrained flag count mismatch");
      model.embedding.pretrained.assign(n, false);
      for (std::size_t i = 0; i < n; ++i) model.embedding.pretrained[i] = flags[i] == '1';
    } else if (tag == "bn") {
      std::string site, momentum;
      int initialized = 0;
      std::size_t n = 0;
      ss >> site >> initialized >> momentum >> n;
      BatchNormState state;
      state.initialized = initialized != 0;
      state.momentum = parse_hex_double(momentum, path);
      state.running_mean.resize(n);
      state.running_var.resize(n);
      std::string v;
      for (std::size_t i = 0; i < n; ++i) {
        ss >> v;
        state.running_mean[i] = parse_hex_double(v, path);
      }
      for (std::size_t i = 0; i < n; ++i) {
        ss >> v;
        state.running_var[i] = parse_hex_double(v, path);
      }
      model.bn_states[site] = state;
    } else if (tag == "tensor") {
      std::string name;
      int trainable = 1, rank = 0;
      ss >> name >> trainable >> rank;
      Shape shape(static_cast<std::size_t>(rank));
      for (int ax = 0; ax < rank; ++ax) ss >> shape[static_cast<std::size_t>(ax)];
      if (!std::getline(in, line)) throw ParseError(path + ": missing values for " + name);
      std::istringstream vs(line);
      std::vector<double> values(shape_volume(shape));
      std::string v;
      for (std::size_t i = 0; i < values.size(); ++i) {
        if (!(vs >> v)) throw ParseError(path + ": too few values for tensor " + name);
        values[i] = parse_hex_double(v, path + " tensor " + name);
      }
      model.params.add(name, Tensor(std::move(shape), std::move(values)), trainable != 0);
    } else if (tag == "end") {
      saw_end = true;
      break;
    } else {
      throw ParseError(path + ": unknown checkpoint section '" + tag + "'");
    }
  }
  if (!saw_end) throw ParseError(path + ": truncated checkpoint (no end marker)");
  model.embedding.matrix = model.params.at("embedding");
  model.embedding.width = model.embedding.matrix.cols();
  model.embedding.finetune_pretrained = model.config.finetune_embeddings;
  if (model.embedding.pretrained.size() !=
      static_cast<std::size_t>(model.embedding.matrix.rows())) {
    throw ParseError(path + ": pretrained mask does not match embedding rows");
  }
  return model;
}

}  // namespace hpsmp
