#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "hpsmp/errors.hpp"
#include "hpsmp/rng.hpp"

namespace hpsmp {

/// Dimension sizes, outermost first. Rank 1 ([n]) and rank 2 ([rows, cols])
/// cover every layer in the model paths.
using Shape = std::vector<int>;

std::string shape_str(const Shape& shape);
std::size_t shape_volume(const Shape& shape);

/// Dense row-major tensor of 64-bit doubles.
///
/// A Tensor is a cheap handle onto shared storage: copies alias the same
/// values and gradient, so a parameter tensor updated by the optimizer is
/// seen by every holder. Use clone() for an independent deep copy.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> values);
  Tensor(Shape shape, double fill);

  static Tensor scalar(double v);
  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  /// Entries drawn uniformly from [lo, hi).
  static Tensor uniform(Shape shape, Rng& rng, double lo = -0.05, double hi = 0.05);

  bool defined() const { return s_ != nullptr; }
  const Shape& shape() const;
  int rank() const;
  int dim(int axis) const;
  /// Rank-2 convenience accessors; a rank-1 tensor reads as [n, 1].
  int rows() const;
  int cols() const;
  std::size_t size() const;

  double* data();
  const double* data() const;
  std::span<const double> values() const;
  double value_at(std::size_t i) const;
  double& at(int r, int c);
  double at(int r, int c) const;
  /// Value of a single-element tensor.
  double item() const;

  bool has_grad() const;
  std::span<const double> grad() const;
  double grad_at(std::size_t i) const;
  /// Mutable gradient storage; nullptr when no backward pass populated it.
  double* grad_data();
  /// Drops any gradient attached to the storage.
  void clear_grad();

  Tensor clone() const;
  bool same_storage(const Tensor& other) const { return s_ == other.s_; }
  bool all_finite() const;

 private:
  struct Storage {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;  // empty until a backward pass populates it
  };
  std::shared_ptr<Storage> s_;
  friend class Graph;
};

enum class Activation { Sigmoid, Tanh, Relu };

/// Running statistics for batch normalization, updated in train mode and
/// frozen at inference. One slot per feature column.
struct BatchNormState {
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.9;
  bool initialized = false;
};

/// Reverse-mode differentiation tape.
///
/// Every operation appends one node holding the saved forward values it
/// needs; inputs always precede their consumers, so the append order is a
/// topological order and backward() is a single reverse sweep. A Graph and
/// the tensors it touches are confined to one thread for the duration of a
/// forward/backward pass; separate graphs may run in parallel.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Registers a tensor so backward() gives it a (possibly zero) gradient
  /// even when no op consumed it.
  void watch(const Tensor& t);

  Tensor add(const Tensor& a, const Tensor& b);
  Tensor sub(const Tensor& a, const Tensor& b);
  Tensor hadamard(const Tensor& a, const Tensor& b);
  /// Elementwise a / b (same shapes).
  Tensor divide(const Tensor& a, const Tensor& b);
  /// [m,k]x[k,n] -> [m,n]; [m,k]x[k] -> [m]; [k]x[k,n] -> [n]; [k]x[k] -> [1].
  Tensor matmul(const Tensor& a, const Tensor& b);
  Tensor concat(const Tensor& a, const Tensor& b, int axis);
  Tensor scale(const Tensor& a, double k);
  Tensor sum(const Tensor& a);   // -> [1]
  Tensor mean(const Tensor& a);  // -> [1]
  Tensor activation(const Tensor& a, Activation kind);
  Tensor sigmoid(const Tensor& a) { return activation(a, Activation::Sigmoid); }
  Tensor tanh(const Tensor& a) { return activation(a, Activation::Tanh); }
  Tensor relu(const Tensor& a) { return activation(a, Activation::Relu); }
  /// Clamps values into [lo, hi]; zero adjoint outside the clamp band.
  Tensor clamp(const Tensor& a, double lo, double hi);

  /// Valid (no padding) 1-D convolution.
  /// input [len, channels], kernels [k, channels, filters], bias [filters];
  /// output [out_len, filters] with out_len = (len - k) / stride + 1.
  Tensor conv1d(const Tensor& input, const Tensor& kernels, const Tensor& bias,
                int stride = 1);
  /// Max pooling over rows, per channel. Gradient routes to the first
  /// occurrence of the maximum in each window.
  Tensor maxpool1d(const Tensor& input, int window, int stride);

  /// Prepends/appends zero rows to a rank-2 tensor.
  Tensor pad_rows(const Tensor& input, int before, int after);
  Tensor slice_rows(const Tensor& input, int start, int count);
  /// Same data, new shape (sizes must agree).
  Tensor reshape(const Tensor& input, Shape shape);
  /// out[i][c] = scores[i] * seq[i][c]; scores is [L] or [L, 1].
  Tensor row_scale(const Tensor& seq, const Tensor& scores);
  /// [1] -> [n] filled with the scalar.
  Tensor broadcast_rows(const Tensor& scalar, int n);
  /// Gathers table rows: table [V, width], ids in [0, V) -> [ids.size, width].
  Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids);

  /// Inverted-scaling dropout: in train mode keeps entries with probability
  /// 1-rate and scales by 1/(1-rate); identity at inference.
  Tensor dropout(const Tensor& a, double rate, Rng& rng, bool train);
  /// Per-feature normalization with learned scale/shift. Train mode uses the
  /// current tensor's per-column statistics and updates the running ones;
  /// inference normalizes with the running statistics.
  Tensor batch_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                    BatchNormState& state, bool train, double eps = 1e-5);

  /// Binary cross-entropy against a 0/1 target; prediction is clipped to
  /// [eps, 1-eps] with eps = 1e-7 before the logs.
  Tensor bce_loss(const Tensor& prediction, double target);

  /// Populates grad on every tensor this graph touched: the true derivative
  /// of the (scalar) loss for reachable tensors, zeros for the rest.
  void backward(const Tensor& loss);

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    const char* tag;
    std::function<void()> backprop;
  };

  using StoragePtr = std::shared_ptr<Tensor::Storage>;

  void track(const Tensor& t);
  Tensor make_result(Shape shape, std::vector<double> values);
  void push_node(const char* tag, std::function<void()> backprop);
  static std::vector<double>& grad_of(const StoragePtr& s);

  std::vector<Node> nodes_;
  std::vector<StoragePtr> tracked_;
  std::unordered_map<Tensor::Storage*, int> producer_;  // storage -> node index
};

}  // namespace hpsmp
