#include "hpsmp/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

namespace hpsmp {

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

std::size_t shape_volume(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

namespace {

void check_shape(const Shape& shape) {
  for (std::size_t axis = 0; axis < shape.size(); ++axis) {
    if (shape[axis] <= 0) {
      throw DimensionError("tensor shape " + shape_str(shape) +
                           " has non-positive size on axis " + std::to_string(axis));
    }
  }
}

}  // namespace

Tensor::Tensor(Shape shape) {
  check_shape(shape);
  s_ = std::make_shared<Storage>();
  s_->values.assign(shape_volume(shape), 0.0);
  s_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<double> values) {
  check_shape(shape);
  if (shape_volume(shape) != values.size()) {
    throw DimensionError("tensor shape " + shape_str(shape) + " expects " +
                         std::to_string(shape_volume(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  s_ = std::make_shared<Storage>();
  s_->shape = std::move(shape);
  s_->values = std::move(values);
}

Tensor::Tensor(Shape shape, double fill) {
  check_shape(shape);
  s_ = std::make_shared<Storage>();
  s_->values.assign(shape_volume(shape), fill);
  s_->shape = std::move(shape);
}

Tensor Tensor::scalar(double v) { return Tensor(Shape{1}, std::vector<double>{v}); }

Tensor Tensor::uniform(Shape shape, Rng& rng, double lo, double hi) {
  Tensor t(std::move(shape));
  for (double& v : t.s_->values) v = rng.uniform(lo, hi);
  return t;
}

const Shape& Tensor::shape() const { return s_->shape; }
int Tensor::rank() const { return static_cast<int>(s_->shape.size()); }

int Tensor::dim(int axis) const {
  if (axis < 0 || axis >= rank()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                         shape_str(s_->shape));
  }
  return s_->shape[static_cast<std::size_t>(axis)];
}

int Tensor::rows() const { return s_->shape.empty() ? 0 : s_->shape[0]; }
int Tensor::cols() const { return rank() >= 2 ? s_->shape[1] : 1; }
std::size_t Tensor::size() const { return s_->values.size(); }

double* Tensor::data() { return s_->values.data(); }
const double* Tensor::data() const { return s_->values.data(); }
std::span<const double> Tensor::values() const { return s_->values; }
double Tensor::value_at(std::size_t i) const { return s_->values[i]; }

double& Tensor::at(int r, int c) {
  return s_->values[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols()) +
                    static_cast<std::size_t>(c)];
}

double Tensor::at(int r, int c) const {
  return s_->values[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols()) +
                    static_cast<std::size_t>(c)];
}

double Tensor::item() const {
  if (size() != 1) {
    throw ContractError("item() requires a single-element tensor, shape is " +
                        shape_str(s_->shape));
  }
  return s_->values[0];
}

bool Tensor::has_grad() const { return defined() && !s_->grad.empty(); }
std::span<const double> Tensor::grad() const { return s_->grad; }
double Tensor::grad_at(std::size_t i) const { return s_->grad[i]; }
double* Tensor::grad_data() { return s_->grad.empty() ? nullptr : s_->grad.data(); }
void Tensor::clear_grad() {
  if (defined()) s_->grad.clear();
}

Tensor Tensor::clone() const {
  Tensor t;
  if (defined()) {
    t.s_ = std::make_shared<Storage>(*s_);
  }
  return t;
}

bool Tensor::all_finite() const {
  for (double v : s_->values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Graph
// ---------------------------------------------------------------------------

void Graph::track(const Tensor& t) {
  if (!t.defined()) throw ContractError("undefined tensor passed to graph op");
  auto [it, inserted] = producer_.try_emplace(t.s_.get(), -1);
  if (inserted) tracked_.push_back(t.s_);
}

void Graph::watch(const Tensor& t) { track(t); }

Tensor Graph::make_result(Shape shape, std::vector<double> values) {
  Tensor out(std::move(shape), std::move(values));
  tracked_.push_back(out.s_);
  producer_[out.s_.get()] = static_cast<int>(nodes_.size());
  return out;
}

void Graph::push_node(const char* tag, std::function<void()> backprop) {
  nodes_.push_back(Node{tag, std::move(backprop)});
}

std::vector<double>& Graph::grad_of(const StoragePtr& s) { return s->grad; }

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()) + " differ");
  }
}

}  // namespace

Tensor Graph::add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  track(a);
  track(b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  Tensor res = make_result(a.shape(), std::move(out));
  auto as = a.s_, bs = b.s_, os = res.s_;
  push_node("add", [as, bs, os] {
    for (std::size_t i = 0; i < os->grad.size(); ++i) {
      as->grad[i] += os->grad[i];
      bs->grad[i] += os->grad[i];
    }
  });
  return res;
}

Tensor Graph::sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  track(a);
  track(b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  Tensor res = make_result(a.shape(), std::move(out));
  auto as = a.s_, bs = b.s_, os = res.s_;
  push_node("sub", [as, bs, os] {
    for (std::size_t i = 0; i < os->grad.size(); ++i) {
      as->grad[i] += os->grad[i];
      bs->grad[i] -= os->grad[i];
    }
  });
  return res;
}

Tensor Graph::hadamard(const Tensor& a, const Tensor& b) {
  require_same_shape("hadamard", a, b);
  track(a);
  track(b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  Tensor res = make_result(a.shape(), std::move(out));
  auto as = a.s_, bs = b.s_, os = res.s_;
  push_node("hadamard", [as, bs, os] {
    for (std::size_t i = 0; i < os->grad.size(); ++i) {
      as->grad[i] += os->grad[i] * bs->values[i];
      bs->grad[i] += os->grad[i] * as->values[i];
    }
  });
  return res;
}

Tensor Graph::divide(const Tensor& a, const Tensor& b) {
  require_same_shape("divide", a, b);
  track(a);
  track(b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] / b.data()[i];
  Tensor res = make_result(a.shape(), std::move(out));
  auto as = a.s_, bs = b.s_, os = res.s_;
  push_node("divide", [as, bs, os] {
    for (std::size_t i = 0; i < os->grad.size(); ++i) {
      const double inv = 1.0 / bs->values[i];
      as->grad[i] += os->grad[i] * inv;
      bs->grad[i] -= os->grad[i] * as->values[i] * inv * inv;
    }
  });
  return res;
}

Tensor Graph::matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() > 2 || b.rank() > 2 || a.rank() < 1 || b.rank() < 1) {
    throw DimensionError("matmul: ranks must be 1 or 2, got " + shape_str(a.shape()) +
                         " x " + shape_str(b.shape()));
  }
  // Canonical [m,k] x [k,n]; rank-1 operands are a row (lhs) or column (rhs).
  const int m = a.rank() == 2 ? a.dim(0) : 1;
  const int k = a.rank() == 2 ? a.dim(1) : a.dim(0);
  const int kb = b.rank() == 2 ? b.dim(0) : b.dim(0);
  const int n = b.rank() == 2 ? b.dim(1) : 1;
  if (k != kb) {
    throw DimensionError("matmul: inner axis mismatch, lhs axis " +
                         std::to_string(a.rank() - 1) + " = " + std::to_string(k) +
                         " vs rhs axis 0 = " + std::to_string(kb));
  }
  track(a);
  track(b);
  std::vector<double> out(static_cast<std::size_t>(m) * static_cast<std::size_t>(n), 0.0);
  const double* av = a.data();
  const double* bv = b.data();
  for (int i = 0; i < m; ++i) {
    for (int p = 0; p < k; ++p) {
      const double av_ip = av[i * k + p];
      for (int j = 0; j < n; ++j) out[static_cast<std::size_t>(i) * n + j] += av_ip * bv[p * n + j];
    }
  }
  Shape out_shape;
  if (a.rank() == 2 && b.rank() == 2) {
    out_shape = {m, n};
  } else if (a.rank() == 2) {
    out_shape = {m};
  } else if (b.rank() == 2) {
    out_shape = {n};
  } else {
    out_shape = {1};
  }
  Tensor res = make_result(std::move(out_shape), std::move(out));
  auto as = a.s_, bs = b.s_, os = res.s_;
  push_node("matmul", [as, bs, os, m, k, n] {
    const std::vector<double>& g = os->grad;
    // dA += G B^T, dB += A^T G
    for (int i = 0; i < m; ++i) {
      for (int p = 0; p < k; ++p) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j) acc += g[static_cast<std::size_t>(i) * n + j] * bs->values[p * n + j];
        as->grad[static_cast<std::size_t>(i) * k + p] += acc;
      }
    }
    for (int p = 0; p < k; ++p) {
      for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int i = 0; i < m; ++i) acc += as->values[static_cast<std::size_t>(i) * k + p] * g[static_cast<std::size_t>(i) * n + j];
        bs->grad[static_cast<std::size_t>(p) * n + j] += acc;
      }
    }
  });
  return res;
}

Tensor Graph::concat(const Tensor& a, const Tensor& b, int axis) {
  if (a.rank() != b.rank()) {
    throw DimensionError("concat: ranks differ, " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  if (axis < 0 || axis >= a.rank()) {
    throw DimensionError("concat: axis " + std::to_string(axis) + " out of range for " +
                         shape_str(a.shape()));
  }
  for (int ax = 0; ax < a.rank(); ++ax) {
    if (ax != axis && a.dim(ax) != b.dim(ax)) {
      throw DimensionError("concat: sizes differ on non-concat axis " + std::to_string(ax) +
                           ": " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
  }
  track(a);
  track(b);
  Shape out_shape = a.shape();
  out_shape[static_cast<std::size_t>(axis)] += b.dim(axis);
  std::vector<double> out(shape_volume(out_shape));
  const bool row_axis = (axis == 0);
  if (a.rank() == 1 || row_axis) {
    std::copy(a.data(), a.data() + a.size(), out.begin());
    std::copy(b.data(), b.data() + b.size(), out.begin() + static_cast<std::ptrdiff_t>(a.size()));
  } else {
    const int rows = a.dim(0), ac = a.dim(1), bc = b.dim(1);
    for (int r = 0; r < rows; ++r) {
      std::copy(a.data() + r * ac, a.data() + (r + 1) * ac, out.begin() + static_cast<std::ptrdiff_t>(r) * (ac + bc));
      std::copy(b.data() + r * bc, b.data() + (r + 1) * bc,
                out.begin() + static_cast<std::ptrdiff_t>(r) * (ac + bc) + ac);
    }
  }
  Tensor res = make_result(std::move(out_shape), std::move(out));
  auto as = a.s_, bs = b.s_, os = res.s_;
  const bool simple = (a.rank() == 1 || row_axis);
  const int rows = a.rank() == 2 ? a.dim(0) : 0;
  const int ac = a.rank() == 2 ? a.dim(1) : 0;
  const int bc = b.rank() == 2 ? b.dim(1) : 0;
  const std::size_t an = a.size();
  push_node("concat", [as, bs, os, simple, rows, ac, bc, an] {
    if (simple) {
      for (std::size_t i = 0; i < an; ++i) as->grad[i] += os->grad[i];
      for (std::size_t i = 0; i < bs->values.size(); ++i) bs->grad[i] += os->grad[an + i];
    } else {
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < ac; ++c)
          as->grad[static_cast<std::size_t>(r) * ac + c] += os->grad[static_cast<std::size_t>(r) * (ac + bc) + c];
        for (int c = 0; c < bc; ++c)
          bs->grad[static_cast<std::size_t>(r) * bc + c] += os->grad[static_cast<std::size_t>(r) * (ac + bc) + ac + c];
      }
    }
  });
  return res;
}

Tensor Graph::scale(const Tensor& a, double k) {
  track(a);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * k;
  Tensor res = make_result(a.shape(), std::move(out));
  auto as = a.s_, os = res.s_;
  push_node("scale", [as, os, k] {
    for (std::size_t i = 0; i < os->grad.size(); ++i) as->grad[i] += os->grad[i] * k;
  });
  return res;
}

Tensor Graph::sum(const Tensor& a) {
  track(a);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a.data()[i];
  Tensor res = make_result({1}, {acc});
  auto as = a.s_, os = res.s_;
  push_node("sum", [as, os] {
    for (double& g : as->grad) g += os->grad[0];
  });
  return res;
}

Tensor Graph::mean(const Tensor& a) {
  track(a);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a.data()[i];
  const double inv = 1.0 / static_cast<double>(a.size());
  Tensor res = make_result({1}, {acc * inv});
  auto as = a.s_, os = res.s_;
  push_node("mean", [as, os, inv] {
    for (double& g : as->grad) g += os->grad[0] * inv;
  });
  return res;
}

Tensor Graph::activation(const Tensor& a, Activation kind) {
  track(a);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = a.data()[i];
    switch (kind) {
      case Activation::Sigmoid: out[i] = 1.0 / (1.0 + std::exp(-x)); break;
      case Activation::Tanh: out[i] = std::tanh(x); break;
      case Activation::Relu: out[i] = x > 0.0 ? x : 0.0; break;
    }
  }
  Tensor res = make_result(a.shape(), std::move(out));
  auto as = a.s_, os = res.s_;
  push_node("activation", [as, os, kind] {
    for (std::size_t i = 0; i < os->grad.size(); ++i) {
      const double y = os->values[i];
      double d = 0.0;
      switch (kind) {
        case Activation::Sigmoid: d = y * (1.0 - y); break;
        case Activation::Tanh: d = 1.0 - y * y; break;
        case Activation::Relu: d = as->values[i] > 0.0 ? 1.0 : 0.0; break;
      }
      as->grad[i] += os->grad[i] * d;
    }
  });
  return res;
}

Tensor Graph::clamp(const Tensor& a, double lo, double hi) {
  track(a);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(a.data()[i], lo, hi);
  Tensor res = make_result(a.shape(), std::move(out));
  auto as = a.s_, os = res.s_;
  push_node("clamp", [as, os, lo, hi] {
    for (std::size_t i = 0; i < os->grad.size(); ++i) {
      const double x = as->values[i];
      if (x > lo && x < hi) as->grad[i] += os->grad[i];
    }
  });
  return res;
}

Tensor Graph::conv1d(const Tensor& input, const Tensor& kernels, const Tensor& bias,
                     int stride) {
  if (input.rank() != 2) {
    throw DimensionError("conv1d: input must be rank 2 [len, channels], got " +
                         shape_str(input.shape()));
  }
  if (kernels.rank() != 3) {
    throw DimensionError("conv1d: kernels must be rank 3 [k, channels, filters], got " +
                         shape_str(kernels.shape()));
  }
  const int len = input.dim(0), channels = input.dim(1);
  const int k = kernels.dim(0), kc = kernels.dim(1), filters = kernels.dim(2);
  if (kc != channels) {
    throw DimensionError("conv1d: channel mismatch, input axis 1 = " +
                         std::to_string(channels) + " vs kernels axis 1 = " +
                         std::to_string(kc));
  }
  if (bias.rank() != 1 || bias.dim(0) != filters) {
    throw DimensionError("conv1d: bias must be [filters] = [" + std::to_string(filters) +
                         "], got " + shape_str(bias.shape()));
  }
  if (stride < 1) throw ContractError("conv1d: stride must be >= 1");
  if (len < k) {
    throw DimensionError("conv1d: input length (axis 0) " + std::to_string(len) +
                         " shorter than kernel size " + std::to_string(k));
  }
  track(input);
  track(kernels);
  track(bias);
  const int out_len = (len - k) / stride + 1;
  std::vector<double> out(static_cast<std::size_t>(out_len) * filters);
  const double* x = input.data();
  const double* w = kernels.data();
  for (int o = 0; o < out_len; ++o) {
    for (int f = 0; f < filters; ++f) {
      double acc = bias.data()[f];
      for (int i = 0; i < k; ++i) {
        const int row = o * stride + i;
        for (int c = 0; c < channels; ++c) {
          acc += x[row * channels + c] * w[(i * channels + c) * filters + f];
        }
      }
      out[static_cast<std::size_t>(o) * filters + f] = acc;
    }
  }
  Tensor res = make_result({out_len, filters}, std::move(out));
  auto xs = input.s_, ws = kernels.s_, bs = bias.s_, os = res.s_;
  push_node("conv1d", [xs, ws, bs, os, out_len, filters, k, channels, stride] {
    const std::vector<double>& g = os->grad;
    for (int o = 0; o < out_len; ++o) {
      for (int f = 0; f < filters; ++f) {
        const double go = g[static_cast<std::size_t>(o) * filters + f];
        if (go == 0.0) continue;
        bs->grad[static_cast<std::size_t>(f)] += go;
        for (int i = 0; i < k; ++i) {
          const int row = o * stride + i;
          for (int c = 0; c < channels; ++c) {
            xs->grad[static_cast<std::size_t>(row) * channels + c] +=
                go * ws->values[(i * channels + c) * static_cast<std::size_t>(filters) + f];
            ws->grad[(i * channels + c) * static_cast<std::size_t>(filters) + f] +=
                go * xs->values[static_cast<std::size_t>(row) * channels + c];
          }
        }
      }
    }
  });
  return res;
}

Tensor Graph::maxpool1d(const Tensor& input, int window, int stride) {
  if (input.rank() != 2) {
    throw DimensionError("maxpool1d: input must be rank 2 [len, channels], got " +
                         shape_str(input.shape()));
  }
  if (window < 1 || stride < 1) throw ContractError("maxpool1d: window and stride must be >= 1");
  const int len = input.dim(0), channels = input.dim(1);
  if (window > len) {
    throw DimensionError("maxpool1d: window " + std::to_string(window) +
                         " exceeds input length (axis 0) " + std::to_string(len));
  }
  track(input);
  const int out_len = (len - window) / stride + 1;
  std::vector<double> out(static_cast<std::size_t>(out_len) * channels);
  std::vector<int> argmax(out.size());
  const double* x = input.data();
  for (int o = 0; o < out_len; ++o) {
    for (int c = 0; c < channels; ++c) {
      int best_row = o * stride;
      double best = x[best_row * channels + c];
      for (int i = 1; i < window; ++i) {
        const int row = o * stride + i;
        if (x[row * channels + c] > best) {  // strict: ties keep the first index
          best = x[row * channels + c];
          best_row = row;
        }
      }
      out[static_cast<std::size_t>(o) * channels + c] = best;
      argmax[static_cast<std::size_t>(o) * channels + c] = best_row;
    }
  }
  Tensor res = make_result({out_len, channels}, std::move(out));
  auto xs = input.s_, os = res.s_;
  push_node("maxpool1d", [xs, os, argmax = std::move(argmax), channels] {
    for (std::size_t i = 0; i < os->grad.size(); ++i) {
      const int c = static_cast<int>(i % static_cast<std::size_t>(channels));
      xs->grad[static_cast<std::size_t>(argmax[i]) * channels + c] += os->grad[i];
    }
  });
  return res;
}

Tensor Graph::pad_rows(const Tensor& input, int before, int after) {
  if (input.rank() != 2) {
    throw DimensionError("pad_rows: input must be rank 2, got " + shape_str(input.shape()));
  }
  if (before < 0 || after < 0) throw ContractError("pad_rows: negative padding");
  track(input);
  const int rows = input.dim(0), cols = input.dim(1);
  std::vector<double> out(static_cast<std::size_t>(rows + before + after) * cols, 0.0);
  std::copy(input.data(), input.data() + input.size(),
            out.begin() + static_cast<std::ptrdiff_t>(before) * cols);
  Tensor res = make_result({rows + before + after, cols}, std::move(out));
  auto xs = input.s_, os = res.s_;
  push_node("pad_rows", [xs, os, before, cols] {
    for (std::size_t i = 0; i < xs->grad.size(); ++i) {
      xs->grad[i] += os->grad[static_cast<std::size_t>(before) * cols + i];
    }
  });
  return res;
}

Tensor Graph::slice_rows(const Tensor& input, int start, int count) {
  if (input.rank() != 2) {
    throw DimensionError("slice_rows: input must be rank 2, got " + shape_str(input.shape()));
  }
  if (start < 0 || count < 1 || start + count > input.dim(0)) {
    throw DimensionError("slice_rows: rows [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") out of range for axis 0 size " +
                         std::to_string(input.dim(0)));
  }
  track(input);
  const int cols = input.dim(1);
  std::vector<double> out(input.data() + static_cast<std::size_t>(start) * cols,
                          input.data() + static_cast<std::size_t>(start + count) * cols);
  Tensor res = make_result({count, cols}, std::move(out));
  auto xs = input.s_, os = res.s_;
  push_node("slice_rows", [xs, os, start, cols] {
    for (std::size_t i = 0; i < os->grad.size(); ++i) {
      xs->grad[static_cast<std::size_t>(start) * cols + i] += os->grad[i];
    }
  });
  return res;
}

Tensor Graph::reshape(const Tensor& input, Shape shape) {
  check_shape(shape);
  if (shape_volume(shape) != input.size()) {
    throw DimensionError("reshape: " + shape_str(input.shape()) + " -> " + shape_str(shape) +
                         " changes element count");
  }
  track(input);
  std::vector<double> out(input.data(), input.data() + input.size());
  Tensor res = make_result(std::move(shape), std::move(out));
  auto xs = input.s_, os = res.s_;
  push_node("reshape", [xs, os] {
    for (std::size_t i = 0; i < os->grad.size(); ++i) xs->grad[i] += os->grad[i];
  });
  return res;
}

Tensor Graph::row_scale(const Tensor& seq, const Tensor& scores) {
  if (seq.rank() != 2) {
    throw DimensionError("row_scale: seq must be rank 2, got " + shape_str(seq.shape()));
  }
  const int rows = seq.dim(0), cols = seq.dim(1);
  const bool score_ok =
      (scores.rank() == 1 && scores.dim(0) == rows) ||
      (scores.rank() == 2 && scores.dim(0) == rows && scores.dim(1) == 1);
  if (!score_ok) {
    throw DimensionError("row_scale: scores must be [" + std::to_string(rows) + "] or [" +
                         std::to_string(rows) + ", 1], got " + shape_str(scores.shape()));
  }
  track(seq);
  track(scores);
  std::vector<double> out(seq.size());
  for (int r = 0; r < rows; ++r) {
    const double s = scores.data()[r];
    for (int c = 0; c < cols; ++c) out[static_cast<std::size_t>(r) * cols + c] = s * seq.at(r, c);
  }
  Tensor res = make_result(seq.shape(), std::move(out));
  auto qs = seq.s_, ss = scores.s_, os = res.s_;
  push_node("row_scale", [qs, ss, os, rows, cols] {
    for (int r = 0; r < rows; ++r) {
      const double s = ss->values[static_cast<std::size_t>(r)];
      double acc = 0.0;
      for (int c = 0; c < cols; ++c) {
        const std::size_t i = static_cast<std::size_t>(r) * cols + c;
        qs->grad[i] += os->grad[i] * s;
        acc += os->grad[i] * qs->values[i];
      }
      ss->grad[static_cast<std::size_t>(r)] += acc;
    }
  });
  return res;
}

Tensor Graph::broadcast_rows(const Tensor& scalar, int n) {
  if (scalar.size() != 1) {
    throw DimensionError("broadcast_rows: source must be a single element, got " +
                         shape_str(scalar.shape()));
  }
  if (n < 1) throw ContractError("broadcast_rows: n must be >= 1");
  track(scalar);
  Tensor res = make_result({n}, std::vector<double>(static_cast<std::size_t>(n), scalar.item()));
  auto ss = scalar.s_, os = res.s_;
  push_node("broadcast_rows", [ss, os] {
    double acc = 0.0;
    for (double g : os->grad) acc += g;
    ss->grad[0] += acc;
  });
  return res;
}

Tensor Graph::embedding_lookup(const Tensor& table, const std::vector<int>& ids) {
  if (table.rank() != 2) {
    throw DimensionError("embedding_lookup: table must be rank 2, got " +
                         shape_str(table.shape()));
  }
  if (ids.empty()) throw ContractError("embedding_lookup: empty id list");
  const int vocab = table.dim(0), width = table.dim(1);
  for (int id : ids) {
    if (id < 0 || id >= vocab) {
      throw ContractError("embedding_lookup: id " + std::to_string(id) +
                          " outside table rows [0, " + std::to_string(vocab) + ")");
    }
  }
  track(table);
  std::vector<double> out(ids.size() * static_cast<std::size_t>(width));
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const double* row = table.data() + static_cast<std::size_t>(ids[r]) * width;
    std::copy(row, row + width, out.begin() + static_cast<std::ptrdiff_t>(r * width));
  }
  Tensor res = make_result({static_cast<int>(ids.size()), width}, std::move(out));
  auto ts = table.s_, os = res.s_;
  push_node("embedding_lookup", [ts, os, ids, width] {
    for (std::size_t r = 0; r < ids.size(); ++r) {
      for (int c = 0; c < width; ++c) {
        ts->grad[static_cast<std::size_t>(ids[r]) * width + c] += os->grad[r * width + c];
      }
    }
  });
  return res;
}

Tensor Graph::dropout(const Tensor& a, double rate, Rng& rng, bool train) {
  if (rate < 0.0 || rate >= 1.0) throw ContractError("dropout: rate must be in [0, 1)");
  track(a);
  if (!train || rate == 0.0) {
    // Identity at inference; still a node so reachability is uniform.
    Tensor res = make_result(a.shape(), std::vector<double>(a.data(), a.data() + a.size()));
    auto as = a.s_, os = res.s_;
    push_node("dropout", [as, os] {
      for (std::size_t i = 0; i < os->grad.size(); ++i) as->grad[i] += os->grad[i];
    });
    return res;
  }
  const double scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(a.size());
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    mask[i] = rng.bernoulli(rate) ? 0.0 : scale;
    out[i] = a.data()[i] * mask[i];
  }
  Tensor res = make_result(a.shape(), std::move(out));
  auto as = a.s_, os = res.s_;
  push_node("dropout", [as, os, mask = std::move(mask)] {
    for (std::size_t i = 0; i < os->grad.size(); ++i) as->grad[i] += os->grad[i] * mask[i];
  });
  return res;
}

Tensor Graph::batch_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                         BatchNormState& state, bool train, double eps) {
  if (input.rank() != 2) {
    throw DimensionError("batch_norm: input must be rank 2, got " + shape_str(input.shape()));
  }
  const int rows = input.dim(0), cols = input.dim(1);
  if (gamma.rank() != 1 || gamma.dim(0) != cols || beta.rank() != 1 || beta.dim(0) != cols) {
    throw DimensionError("batch_norm: gamma/beta must be [" + std::to_string(cols) + "]");
  }
  track(input);
  track(gamma);
  track(beta);
  if (!state.initialized) {
    state.running_mean.assign(static_cast<std::size_t>(cols), 0.0);
    state.running_var.assign(static_cast<std::size_t>(cols), 1.0);
  }
  std::vector<double> mean(static_cast<std::size_t>(cols));
  std::vector<double> var(static_cast<std::size_t>(cols));
  if (train) {
    for (int c = 0; c < cols; ++c) {
      double m = 0.0;
      for (int r = 0; r < rows; ++r) m += input.at(r, c);
      m /= rows;
      double v = 0.0;
      for (int r = 0; r < rows; ++r) {
        const double d = input.at(r, c) - m;
        v += d * d;
      }
      v /= rows;
      mean[static_cast<std::size_t>(c)] = m;
      var[static_cast<std::size_t>(c)] = v;
    }
    if (!state.initialized) {
      state.running_mean = mean;
      state.running_var = var;
      state.initialized = true;
    } else {
      for (int c = 0; c < cols; ++c) {
        state.running_mean[static_cast<std::size_t>(c)] =
            state.momentum * state.running_mean[static_cast<std::size_t>(c)] +
            (1.0 - state.momentum) * mean[static_cast<std::size_t>(c)];
        state.running_var[static_cast<std::size_t>(c)] =
            state.momentum * state.running_var[static_cast<std::size_t>(c)] +
            (1.0 - state.momentum) * var[static_cast<std::size_t>(c)];
      }
    }
  } else {
    state.initialized = true;
    mean = state.running_mean;
    var = state.running_var;
  }
  std::vector<double> out(input.size());
  std::vector<double> xhat(input.size());
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * cols + c;
      xhat[i] = (input.at(r, c) - mean[static_cast<std::size_t>(c)]) /
                std::sqrt(var[static_cast<std::size_t>(c)] + eps);
      out[i] = gamma.data()[c] * xhat[i] + beta.data()[c];
    }
  }
  Tensor res = make_result(input.shape(), std::move(out));
  auto xs = input.s_, gs = gamma.s_, bs = beta.s_, os = res.s_;
  push_node("batch_norm", [xs, gs, bs, os, rows, cols, train, eps, mean = std::move(mean),
                           var = std::move(var), xhat = std::move(xhat)] {
    const std::vector<double>& g = os->grad;
    for (int c = 0; c < cols; ++c) {
      const double inv_sigma = 1.0 / std::sqrt(var[static_cast<std::size_t>(c)] + eps);
      double dgamma = 0.0, dbeta = 0.0, gsum = 0.0, gx_sum = 0.0;
      for (int r = 0; r < rows; ++r) {
        const std::size_t i = static_cast<std::size_t>(r) * cols + c;
        dgamma += g[i] * xhat[i];
        dbeta += g[i];
        gsum += g[i];
        gx_sum += g[i] * xhat[i];
      }
      gs->grad[static_cast<std::size_t>(c)] += dgamma;
      bs->grad[static_cast<std::size_t>(c)] += dbeta;
      const double gamma_c = gs->values[static_cast<std::size_t>(c)];
      for (int r = 0; r < rows; ++r) {
        const std::size_t i = static_cast<std::size_t>(r) * cols + c;
        if (train) {
          // Full adjoint through the in-tensor mean/variance.
          xs->grad[i] += gamma_c * inv_sigma / rows *
                         (rows * g[i] - gsum - xhat[i] * gx_sum);
        } else {
          xs->grad[i] += g[i] * gamma_c * inv_sigma;
        }
      }
    }
  });
  return res;
}

Tensor Graph::bce_loss(const Tensor& prediction, double target) {
  if (prediction.size() != 1) {
    throw ContractError("bce_loss: prediction must be a single element, got " +
                        shape_str(prediction.shape()));
  }
  if (target != 0.0 && target != 1.0) {
    throw ContractError("bce_loss: target must be 0 or 1");
  }
  track(prediction);
  constexpr double kEps = 1e-7;
  const double raw = prediction.item();
  const double p = std::clamp(raw, kEps, 1.0 - kEps);
  const double loss = -(target * std::log(p) + (1.0 - target) * std::log(1.0 - p));
  Tensor res = make_result({1}, {loss});
  auto ps = prediction.s_, os = res.s_;
  push_node("bce_loss", [ps, os, target, raw, p] {
    // Zero adjoint in the clipped region, matching the clamp.
    if (raw > 1e-7 && raw < 1.0 - 1e-7) {
      ps->grad[0] += os->grad[0] * (p - target) / (p * (1.0 - p));
    }
  });
  return res;
}

void Graph::backward(const Tensor& loss) {
  if (!loss.defined()) throw ContractError("backward: undefined loss tensor");
  if (loss.size() != 1) {
    throw ContractError("backward: loss must be scalar, shape is " + shape_str(loss.shape()));
  }
  auto it = producer_.find(loss.s_.get());
  if (it == producer_.end()) {
    throw ContractError("backward: loss tensor does not belong to this graph");
  }
  for (auto& s : tracked_) s->grad.assign(s->values.size(), 0.0);
  loss.s_->grad[0] = 1.0;
  for (auto node = nodes_.rbegin(); node != nodes_.rend(); ++node) node->backprop();
}

}  // namespace hpsmp
