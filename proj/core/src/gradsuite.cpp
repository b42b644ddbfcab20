#include "hpsmp/gradsuite.hpp"

#include <cmath>
#include <functional>

#include "hpsmp/model.hpp"
#include "hpsmp/rng.hpp"
#include "hpsmp/text.hpp"

namespace hpsmp {

namespace {

// Values bounded away from zero so relu and friends see no kink within the
// finite-difference step.
Tensor uniform_margin(Shape shape, Rng& rng, double lo = 0.2, double hi = 1.8) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
    t.data()[i] = sign * rng.uniform(lo, hi);
  }
  return t;
}

// Distinct values so max-pool argmaxes are stable under the FD step.
Tensor uniform_distinct(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) {
    t.data()[i] = rng.uniform(-2.0, 2.0) + static_cast<double>(i) * 1e-3;
  }
  return t;
}

struct Suite {
  std::uint64_t seed;
  double tol;
  std::vector<GradSuiteResult> results;

  Rng rng_for(const std::string& name) { return Rng::substream(seed, "gradsuite-" + name); }

  void add(const std::string& name, ParamSet& params, const LossFn& f) {
    GradSuiteResult entry;
    entry.name = name;
    entry.report = grad_check(f, params, tol);
    results.push_back(std::move(entry));
  }
};

void add_elementwise_cases(Suite& suite) {
  struct Case {
    const char* name;
    std::function<Tensor(Graph&, const Tensor&, const Tensor&)> op;
  };
  const Case cases[] = {
      {"add", [](Graph& g, const Tensor& a, const Tensor& b) { return g.add(a, b); }},
      {"sub", [](Graph& g, const Tensor& a, const Tensor& b) { return g.sub(a, b); }},
      {"hadamard", [](Graph& g, const Tensor& a, const Tensor& b) { return g.hadamard(a, b); }},
      {"divide", [](Graph& g, const Tensor& a, const Tensor& b) { return g.divide(a, b); }},
  };
  for (const auto& c : cases) {
    Rng rng = suite.rng_for(c.name);
    ParamSet params;
    params.add("a", Tensor::uniform({2, 3}, rng, -2.0, 2.0));
    // Divisors bounded away from zero.
    params.add("b", uniform_margin({2, 3}, rng, 0.5, 2.0));
    auto op = c.op;
    suite.add(c.name, params, [op](Graph& g, ParamSet& p) {
      Tensor out = op(g, p.at("a"), p.at("b"));
      return g.sum(g.hadamard(out, out));
    });
  }
}

void add_matmul_cases(Suite& suite) {
  {
    Rng rng = suite.rng_for("matmul-2d");
    ParamSet params;
    params.add("a", Tensor::uniform({2, 3}, rng, -2.0, 2.0));
    params.add("b", Tensor::uniform({3, 2}, rng, -2.0, 2.0));
    suite.add("matmul 2d x 2d", params, [](Graph& g, ParamSet& p) {
      return g.sum(g.matmul(p.at("a"), p.at("b")));
    });
  }
  {
    Rng rng = suite.rng_for("matmul-vec");
    ParamSet params;
    params.add("m", Tensor::uniform({3, 4}, rng, -2.0, 2.0));
    params.add("v", Tensor::uniform({4}, rng, -2.0, 2.0));
    params.add("u", Tensor::uniform({3}, rng, -2.0, 2.0));
    suite.add("matmul matrix-vector and dot", params, [](Graph& g, ParamSet& p) {
      Tensor mv = g.matmul(p.at("m"), p.at("v"));  // [3]
      return g.matmul(mv, p.at("u"));              // dot -> [1]
    });
  }
}

void add_structural_cases(Suite& suite) {
  {
    Rng rng = suite.rng_for("concat");
    ParamSet params;
    params.add("a", Tensor::uniform({2, 2}, rng, -2.0, 2.0));
    params.add("b", Tensor::uniform({3, 2}, rng, -2.0, 2.0));
    params.add("c", Tensor::uniform({2, 3}, rng, -2.0, 2.0));
    suite.add("concat both axes + scale + mean", params, [](Graph& g, ParamSet& p) {
      Tensor rows = g.concat(p.at("a"), p.at("b"), 0);          // [5, 2]
      Tensor cols = g.concat(p.at("a"), p.at("c"), 1);          // [2, 5]
      Tensor mixed = g.matmul(cols, rows);                      // [2, 2]
      return g.mean(g.scale(mixed, 1.5));
    });
  }
  {
    Rng rng = suite.rng_for("pad-slice-reshape");
    ParamSet params;
    params.add("x", Tensor::uniform({3, 2}, rng, -2.0, 2.0));
    suite.add("pad_rows + slice_rows + reshape", params, [](Graph& g, ParamSet& p) {
      Tensor padded = g.pad_rows(p.at("x"), 1, 2);        // [6, 2]
      Tensor sliced = g.slice_rows(padded, 1, 3);         // [3, 2]
      Tensor flat = g.reshape(sliced, {6});
      return g.sum(g.hadamard(flat, flat));
    });
  }
  {
    Rng rng = suite.rng_for("row-scale");
    ParamSet params;
    params.add("seq", Tensor::uniform({4, 3}, rng, -2.0, 2.0));
    params.add("scores", Tensor::uniform({4}, rng, -1.0, 1.0));
    params.add("s", Tensor::uniform({1}, rng, -1.0, 1.0));
    suite.add("row_scale + broadcast_rows", params, [](Graph& g, ParamSet& p) {
      Tensor bcast = g.broadcast_rows(p.at("s"), 4);
      Tensor scaled = g.row_scale(p.at("seq"), g.add(p.at("scores"), bcast));
      return g.sum(g.hadamard(scaled, scaled));
    });
  }
  {
    Rng rng = suite.rng_for("embedding");
    ParamSet params;
    params.add("table", Tensor::uniform({5, 3}, rng, -2.0, 2.0));
    suite.add("embedding_lookup", params, [](Graph& g, ParamSet& p) {
      Tensor rows = g.embedding_lookup(p.at("table"), {0, 3, 3, 1});
      return g.sum(g.hadamard(rows, rows));
    });
  }
}

void add_activation_cases(Suite& suite) {
  {
    Rng rng = suite.rng_for("smooth-acts");
    ParamSet params;
    params.add("x", Tensor::uniform({2, 3}, rng, -2.0, 2.0));
    suite.add("sigmoid + tanh", params, [](Graph& g, ParamSet& p) {
      return g.sum(g.hadamard(g.sigmoid(p.at("x")), g.tanh(p.at("x"))));
    });
  }
  {
    Rng rng = suite.rng_for("relu");
    ParamSet params;
    params.add("x", uniform_margin({2, 3}, rng));
    suite.add("relu", params,
              [](Graph& g, ParamSet& p) { return g.sum(g.relu(p.at("x"))); });
  }
  {
    Rng rng = suite.rng_for("clamp");
    ParamSet params;
    params.add("x", Tensor::uniform({2, 3}, rng, -0.8, 0.8));  // inside (-1, 1)
    suite.add("clamp (interior)", params, [](Graph& g, ParamSet& p) {
      Tensor out = g.clamp(p.at("x"), -1.0, 1.0);
      return g.sum(g.hadamard(out, out));
    });
  }
}

void add_conv_pool_cases(Suite& suite) {
  for (int stride : {1, 2}) {
    Rng rng = suite.rng_for("conv1d-" + std::to_string(stride));
    ParamSet params;
    params.add("x", Tensor::uniform({6, 2}, rng, -2.0, 2.0));
    params.add("k", Tensor::uniform({3, 2, 2}, rng, -2.0, 2.0));
    params.add("b", Tensor::uniform({2}, rng, -2.0, 2.0));
    suite.add("conv1d stride " + std::to_string(stride), params,
              [stride](Graph& g, ParamSet& p) {
                Tensor out = g.conv1d(p.at("x"), p.at("k"), p.at("b"), stride);
                return g.sum(g.hadamard(out, out));
              });
  }
  {
    Rng rng = suite.rng_for("maxpool");
    ParamSet params;
    params.add("x", uniform_distinct({8, 2}, rng));
    suite.add("maxpool1d", params, [](Graph& g, ParamSet& p) {
      Tensor out = g.maxpool1d(p.at("x"), 3, 2);
      return g.sum(g.hadamard(out, out));
    });
  }
}

void add_norm_loss_cases(Suite& suite) {
  {
    Rng rng = suite.rng_for("batchnorm");
    ParamSet params;
    params.add("x", Tensor::uniform({5, 3}, rng, -2.0, 2.0));
    params.add("gamma", Tensor::uniform({3}, rng, 0.5, 1.5));
    params.add("beta", Tensor::uniform({3}, rng, -0.5, 0.5));
    suite.add("batch_norm (train stats)", params, [](Graph& g, ParamSet& p) {
      BatchNormState state;
      Tensor out = g.batch_norm(p.at("x"), p.at("gamma"), p.at("beta"), state, true);
      return g.sum(g.hadamard(out, out));
    });
  }
  for (double target : {0.0, 1.0}) {
    Rng rng = suite.rng_for("bce-" + std::to_string(target));
    ParamSet params;
    params.add("p", Tensor(Shape{1}, rng.uniform(0.2, 0.8)));
    suite.add("bce_loss target " + std::to_string(static_cast<int>(target)), params,
              [target](Graph& g, ParamSet& p) { return g.bce_loss(p.at("p"), target); });
  }
}

void add_attention_cases(Suite& suite) {
  {
    Rng rng = suite.rng_for("local-attention");
    ParamSet params;
    params.add("seq", Tensor::uniform({5, 3}, rng, -1.0, 1.0));
    params.add("w", Tensor::uniform({3, 3}, rng, -1.0, 1.0));
    params.add("b", Tensor::uniform({1}, rng, -1.0, 1.0));
    suite.add("local_attention", params, [](Graph& g, ParamSet& p) {
      AttentionOut out = local_attention(g, p.at("seq"), p.at("w"), p.at("b"));
      return g.sum(g.hadamard(out.weighted, out.weighted));
    });
  }
  {
    Rng rng = suite.rng_for("global-attention");
    ParamSet params;
    params.add("seq", Tensor::uniform({4, 3}, rng, -1.0, 1.0));
    params.add("w", Tensor::uniform({6, 3}, rng, -1.0, 1.0));
    params.add("b", Tensor::uniform({1}, rng, -1.0, 1.0));
    suite.add("global_attention", params, [](Graph& g, ParamSet& p) {
      AttentionOut out = global_attention(g, p.at("seq"), p.at("w"), p.at("b"));
      return g.sum(g.hadamard(out.weighted, out.weighted));
    });
  }
  {
    Rng rng = suite.rng_for("weighted-mean-attention");
    ParamSet params;
    params.add("seq", Tensor::uniform({4, 3}, rng, -1.0, 1.0));
    params.add("w", Tensor::uniform({6, 3}, rng, -1.0, 1.0));
    params.add("b", Tensor::uniform({1}, rng, -1.0, 1.0));
    suite.add("weighted_mean_attention", params, [](Graph& g, ParamSet& p) {
      Tensor out = weighted_mean_attention(g, p.at("seq"), p.at("w"), p.at("b"));
      return g.sum(g.hadamard(out, out));
    });
  }
}

void add_recurrent_cases(Suite& suite) {
  Rng rng = suite.rng_for("lstm");
  auto add_gates = [&rng](ParamSet& params, const std::string& prefix, int hidden, int input) {
    for (const char* gate : {"i", "f", "c", "o"}) {
      params.add(prefix + ".W_" + gate, Tensor::uniform({hidden, input}, rng, -0.8, 0.8));
      params.add(prefix + ".U_" + gate, Tensor::uniform({hidden, hidden}, rng, -0.8, 0.8));
      params.add(prefix + ".b_" + gate, Tensor::uniform({hidden}, rng, -0.8, 0.8));
    }
  };
  {
    ParamSet params;
    params.add("x", Tensor::uniform({3}, rng, -1.0, 1.0));
    params.add("h", Tensor::uniform({2}, rng, -1.0, 1.0));
    params.add("c", Tensor::uniform({2}, rng, -1.0, 1.0));
    add_gates(params, "g", 2, 3);
    suite.add("lstm_step", params, [](Graph& g, ParamSet& p) {
      auto [h, c] = lstm_step(g, p.at("x"), p.at("h"), p.at("c"), lstm_params_at(p, "g"));
      return g.sum(g.hadamard(h, c));
    });
  }
  {
    ParamSet params;
    params.add("seq", Tensor::uniform({3, 2}, rng, -1.0, 1.0));
    add_gates(params, "fwd", 2, 2);
    add_gates(params, "bwd", 2, 2);
    suite.add("blstm_forward", params, [](Graph& g, ParamSet& p) {
      Tensor out = blstm_forward(g, p.at("seq"), lstm_params_at(p, "fwd"),
                                 lstm_params_at(p, "bwd"));
      return g.sum(g.hadamard(out, out));
    });
  }
}

ModelConfig tiny_path_config() {
  ModelConfig c;
  c.max_len = 8;
  c.embed_width = 3;
  c.la_window = 3;
  c.lg_conv_filters = 3;
  c.lg_conv_kernel = 3;
  c.bl_conv1_filters = 3;
  c.bl_conv1_kernel = 3;
  c.bl_conv2_filters = 4;
  c.bl_conv2_kernel = 3;
  c.lstm_hidden = 4;
  c.fusion1 = 5;
  c.fusion2 = 3;
  c.dropout = 0.0;
  c.lg_standalone_conv_filters = 3;
  c.lg_standalone_ga_filters = 2;
  c.bl_standalone_conv_filters = 3;
  c.bl_standalone_dense = 4;
  return c;
}

Model tiny_path_model(ModelKind kind, std::uint64_t seed) {
  ModelConfig config = tiny_path_config();
  config.kind = kind;
  Vocabulary vocab = Vocabulary::build({{"up", "down", "flat", "crash"}}, 1);
  Rng rng(seed);
  EmbeddingTable table = random_embeddings(vocab, config.embed_width, rng);
  PriceNormalizer norm;
  norm.min = {90.0, 90.0, 90.0, 90.0};
  norm.max = {110.0, 110.0, 110.0, 110.0};
  return build_model(config, std::move(table), norm, seed);
}

void add_path_cases(Suite& suite) {
  struct PathCase {
    const char* name;
    ModelKind kind;
    std::function<Tensor(Graph&, Model&, const Tensor&)> forward;
  };
  const ForwardContext infer{};
  const PathCase cases[] = {
      {"cnn_lg path", ModelKind::Hybrid,
       [infer](Graph& g, Model& m, const Tensor& seq) {
         return cnn_lg_forward(g, m, seq, infer);
       }},
      {"cnn_blstm path", ModelKind::Hybrid,
       [infer](Graph& g, Model& m, const Tensor& seq) {
         return cnn_blstm_forward(g, m, seq, infer);
       }},
      {"hybrid fused forward", ModelKind::Hybrid,
       [infer](Graph& g, Model& m, const Tensor& seq) {
         return hpsmp_forward(g, m, seq, infer);
       }},
      {"standalone cnn_lg forward", ModelKind::CnnLg,
       [infer](Graph& g, Model& m, const Tensor& seq) {
         return model_forward(g, m, seq, infer);
       }},
      {"standalone cnn_blstm forward", ModelKind::CnnBlstm,
       [infer](Graph& g, Model& m, const Tensor& seq) {
         return model_forward(g, m, seq, infer);
       }},
  };
  int case_idx = 0;
  for (const auto& c : cases) {
    Rng rng = suite.rng_for("path-" + std::to_string(case_idx++));
    // Shared storage: the ParamSet entries alias the model's tensors, so
    // finite-difference perturbations are visible to the forward pass.
    Model model = tiny_path_model(c.kind, suite.seed + static_cast<std::uint64_t>(case_idx));
    ParamSet params;
    params.add("day_seq", Tensor::uniform({8, 3}, rng, -1.0, 1.0));
    model.params.for_each([&params](const std::string& name, Tensor& t, bool trainable) {
      params.add(name, t, trainable);
    });
    auto forward = c.forward;
    auto shared_model = std::make_shared<Model>(std::move(model));
    suite.add(c.name, params, [forward, shared_model](Graph& g, ParamSet& p) {
      Tensor out = forward(g, *shared_model, p.at("day_seq"));
      return out.size() == 1 ? out : g.sum(g.hadamard(out, out));
    });
  }
}

}  // namespace

std::vector<GradSuiteResult> run_gradient_suite(std::uint64_t seed, double tol) {
  Suite suite{seed, tol, {}};
  add_elementwise_cases(suite);
  add_matmul_cases(suite);
  add_structural_cases(suite);
  add_activation_cases(suite);
  add_conv_pool_cases(suite);
  add_norm_loss_cases(suite);
  add_attention_cases(suite);
  add_recurrent_cases(suite);
  add_path_cases(suite);
  return std::move(suite.results);
}

bool all_passed(const std::vector<GradSuiteResult>& results) {
  for (const auto& r : results) {
    if (!r.report.pass) return false;
  }
  return true;
}

}  // namespace hpsmp
