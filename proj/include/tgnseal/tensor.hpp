#pragma once

// Dense float64 tensors with reverse-mode automatic differentiation.
//
// A Tensor is a shared handle to a node holding row-major data. Every op
// whose inputs require gradients records itself (parents + backward closure)
// and is stamped with a monotonically increasing sequence number; the
// recorded nodes form the tape. backward() replays the reachable part of the
// tape in exact reverse execution order, accumulates (+=) into leaf grads,
// and then releases the tape.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace tgnseal {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until something accumulates into it
  bool requires_grad = false;
  std::uint64_t seq = 0;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  std::vector<double>& ensure_grad();
};

}  // namespace detail

class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value);
  /// Uniform(-bound, bound) leaf, used for parameter initialisation.
  static Tensor uniform(Shape shape, double bound, std::mt19937_64& rng, bool requires_grad);

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->data.size(); }
  /// Size of dimension `d`; rank-0 and rank-1 tensors act as [1 x n] for rows()/cols().
  std::size_t dim(std::size_t d) const { return node_->shape.at(d); }
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const { return node_->data; }
  /// Writable storage. Only meaningful on leaves (parameters, inputs).
  std::span<double> mutable_data() { return node_->data; }
  double item() const;
  double at(std::size_t i) const { return node_->data.at(i); }
  double at(std::size_t r, std::size_t c) const { return node_->data.at(r * cols() + c); }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool value) { node_->requires_grad = value; }
  bool has_grad() const { return !node_->grad.empty(); }
  /// Accumulated gradient; empty span if nothing has been accumulated yet.
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->ensure_grad(); }
  void zero_grad();

  /// New leaf sharing no history; copies the data.
  Tensor detach() const;
  bool same_node(const Tensor& other) const { return node_ == other.node_; }

  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;

  friend Tensor make_result(Shape shape, std::vector<double> data, std::vector<Tensor> inputs,
                            std::function<void(detail::Node&)> backward);
};

/// Builds an op output. Records it on the tape iff grad mode is on and some
/// input requires grad.
Tensor make_result(Shape shape, std::vector<double> data, std::vector<Tensor> inputs,
                   std::function<void(detail::Node&)> backward);

bool grad_enabled();

/// Disables tape recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Reverse pass from a single-element tensor. Throws ShapeError otherwise.
void backward(const Tensor& loss);

// ---- primitive ops -------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
/// Same shape, or b broadcast as a row vector ([m] or [1 x m]) over a [n x m].
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
/// Elementwise; same broadcasting rule as add().
Tensor mul(const Tensor& a, const Tensor& b);
/// alpha * x + beta
Tensor affine(const Tensor& x, double alpha, double beta);

/// Rank 1 (axis 0) or rank 2 (axis 0 or 1).
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
/// Half-open [begin, end) along `axis`.
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end);
Tensor reshape(const Tensor& x, Shape shape);

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor cos(const Tensor& x);
/// Rank 1 (axis 0) or rank 2.
Tensor softmax(const Tensor& x, std::size_t axis);

/// Sum of every element, rank-0 result.
Tensor sum(const Tensor& x);
/// Rank-2 reduction along `axis`, rank-1 result.
Tensor sum(const Tensor& x, std::size_t axis);
Tensor mean(const Tensor& x);
Tensor mean(const Tensor& x, std::size_t axis);

/// 1-D convolution over `batch` independent signals stacked row-wise.
/// x: [batch*L x C_in] (row = position), w: [K*C_in x C_out] with row index
/// j*C_in + c for tap j and input channel c, bias: [C_out].
/// Output: [batch*L_out x C_out], L_out = (L - K) / stride + 1.
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t kernel,
              std::size_t stride, std::size_t batch = 1);

/// Non-overlapping max pooling along positions of `batch` stacked signals.
/// x: [batch*L x C] -> [batch*(L / width) x C]; a trailing partial window is dropped.
Tensor maxpool1d(const Tensor& x, std::size_t width, std::size_t batch = 1);

/// Row gather; a negative index yields a zero row. Indices are constants.
Tensor gather_rows(const Tensor& x, std::span<const std::ptrdiff_t> indices);

/// Constant sparse row pattern: row i reads input rows
/// cols[offsets[i] .. offsets[i+1]) in that order.
struct RowPattern {
  std::vector<std::size_t> offsets{0};
  std::vector<std::size_t> cols;
  std::size_t num_rows() const { return offsets.size() - 1; }
};

/// out[i] = (1 / |row i|) * sum of x rows listed in row i (empty rows give 0).
Tensor mean_aggregate(const Tensor& x, const RowPattern& pattern);
/// Same, sharing one pattern across calls without copying it.
Tensor mean_aggregate(const Tensor& x, std::shared_ptr<const RowPattern> pattern);

/// Inverted dropout: zero with probability `rate`, scale survivors by 1/(1-rate).
Tensor dropout(const Tensor& x, double rate, std::mt19937_64& rng);

inline constexpr double kBceEpsilon = 1e-7;

/// Mean binary cross-entropy of probabilities against {0,1} labels.
/// Probabilities are clamped to [eps, 1 - eps]; the gradient is that of the
/// clamped expression evaluated at the clamped value.
Tensor bce_loss(const Tensor& probs, std::span<const double> labels);

}  // namespace tgnseal
