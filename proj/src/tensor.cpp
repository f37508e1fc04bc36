#include "tgnseal/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "tgnseal/errors.hpp"
#include "tgnseal/kernels.hpp"

namespace tgnseal {

namespace {

std::atomic<std::uint64_t> g_next_seq{1};
thread_local bool t_grad_enabled = true;

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_to_string(a) + " and " +
                   shape_to_string(b));
}

[[noreturn]] void shape_fail(const char* op, const Shape& a, const std::string& what) {
  throw ShapeError(std::string(op) + ": " + what + " (got " + shape_to_string(a) + ")");
}

std::vector<double> transpose(std::span<const double> x, std::size_t rows, std::size_t cols) {
  std::vector<double> t(x.size());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) t[c * rows + r] = x[r * cols + c];
  return t;
}

// Accumulate m into parent grad, if the parent wants one.
void accumulate_into(detail::Node& parent, std::span<const double> g) {
  if (!parent.requires_grad) return;
  kernels::accumulate(g.data(), parent.ensure_grad().data(), g.size());
}

enum class Broadcast { same, row };

Broadcast check_binary(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return Broadcast::same;
  if (a.rank() == 2) {
    const std::size_t m = a.dim(1);
    const bool row_vec = (b.rank() == 1 && b.dim(0) == m) ||
                         (b.rank() == 2 && b.dim(0) == 1 && b.dim(1) == m);
    if (row_vec) return Broadcast::row;
  }
  shape_fail(op, a.shape(), b.shape());
}

template <typename F, typename D>
Tensor unary(const Tensor& x, F f, D dfdx_from_out) {
  std::vector<double> out(x.numel());
  auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  return make_result(x.shape(), std::move(out), {x}, [dfdx_from_out](detail::Node& self) {
    detail::Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i)
      g[i] += self.grad[i] * dfdx_from_out(p.data[i], self.data[i]);
  });
}

double stable_sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

std::vector<double>& detail::Node::ensure_grad() {
  if (grad.empty()) grad.assign(data.size(), 0.0);
  return grad;
}

Tensor::Tensor() : Tensor(Shape{}, std::vector<double>{0.0}) {}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : node_(std::make_shared<detail::Node>()) {
  if (shape_numel(shape) != data.size())
    throw ShapeError("tensor: data length " + std::to_string(data.size()) +
                     " does not match shape " + shape_to_string(shape));
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
  node_->seq = g_next_seq.fetch_add(1, std::memory_order_relaxed);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, {value}); }

Tensor Tensor::uniform(Shape shape, double bound, std::mt19937_64& rng, bool requires_grad) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> data(shape_numel(shape));
  for (double& v : data) v = dist(rng);
  return Tensor(std::move(shape), std::move(data), requires_grad);
}

std::size_t Tensor::rows() const { return rank() < 2 ? 1 : dim(0); }

std::size_t Tensor::cols() const {
  if (rank() == 0) return 1;
  return rank() == 1 ? dim(0) : dim(rank() - 1);
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item: tensor has " + std::to_string(numel()) + " elements");
  return node_->data[0];
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return Tensor(shape(), node_->data, false); }

Tensor make_result(Shape shape, std::vector<double> data, std::vector<Tensor> inputs,
                   std::function<void(detail::Node&)> backward_fn) {
  Tensor out(std::move(shape), std::move(data), false);
  if (!t_grad_enabled) return out;
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const Tensor& t) { return t.requires_grad(); });
  if (!any) return out;
  detail::Node& node = *out.node_;
  node.requires_grad = true;
  node.parents.reserve(inputs.size());
  for (const Tensor& t : inputs) node.parents.push_back(t.node());
  node.backward = std::move(backward_fn);
  return out;
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

void backward(const Tensor& loss) {
  if (loss.numel() != 1)
    throw ShapeError("backward: loss must be a single element, got " +
                     shape_to_string(loss.shape()));
  const auto& root = loss.node();
  if (!root->requires_grad) return;

  // Collect the recorded part of the graph reachable from the loss.
  std::vector<detail::Node*> tape;
  std::vector<std::shared_ptr<detail::Node>> alive;  // keeps nodes valid while the tape is released
  std::unordered_set<detail::Node*> seen;
  std::vector<detail::Node*> stack{root.get()};
  seen.insert(root.get());
  while (!stack.empty()) {
    detail::Node* n = stack.back();
    stack.pop_back();
    if (!n->backward) continue;
    tape.push_back(n);
    for (const auto& p : n->parents) {
      if (p->requires_grad && seen.insert(p.get()).second) {
        stack.push_back(p.get());
        alive.push_back(p);
      }
    }
  }
  std::sort(tape.begin(), tape.end(),
            [](const detail::Node* a, const detail::Node* b) { return a->seq > b->seq; });

  root->ensure_grad()[0] += 1.0;
  for (detail::Node* n : tape) {
    if (n->grad.empty()) continue;  // unreachable through differentiable paths
    n->backward(*n);
  }
  for (detail::Node* n : tape) {
    n->backward = nullptr;
    n->parents.clear();
  }
}

// ---- linear algebra --------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    shape_fail("matmul", a.shape(), b.shape());
  const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  std::vector<double> out(n * m);
  kernels::matmul(a.data().data(), b.data().data(), out.data(), n, k, m);
  return make_result({n, m}, std::move(out), {a, b}, [n, k, m](detail::Node& self) {
    detail::Node& pa = *self.parents[0];
    detail::Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      // dA = dC * B^T
      const auto bt = transpose(pb.data, k, m);
      std::vector<double> da(n * k);
      kernels::matmul(self.grad.data(), bt.data(), da.data(), n, m, k);
      accumulate_into(pa, da);
    }
    if (pb.requires_grad) {
      // dB = A^T * dC
      const auto at = transpose(pa.data, n, k);
      std::vector<double> db(k * m);
      kernels::matmul(at.data(), self.grad.data(), db.data(), k, n, m);
      accumulate_into(pb, db);
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  const Broadcast mode = check_binary("add", a, b);
  std::vector<double> out(a.numel());
  if (mode == Broadcast::same) {
    kernels::add(a.data().data(), b.data().data(), out.data(), out.size());
  } else {
    const std::size_t n = a.dim(0), m = a.dim(1);
    for (std::size_t r = 0; r < n; ++r)
      kernels::add(a.data().data() + r * m, b.data().data(), out.data() + r * m, m);
  }
  return make_result(a.shape(), std::move(out), {a, b}, [mode](detail::Node& self) {
    accumulate_into(*self.parents[0], self.grad);
    detail::Node& pb = *self.parents[1];
    if (!pb.requires_grad) return;
    if (mode == Broadcast::same) {
      accumulate_into(pb, self.grad);
      return;
    }
    const std::size_t m = pb.data.size();
    auto& g = pb.ensure_grad();
    for (std::size_t r = 0; r < self.grad.size() / m; ++r)
      kernels::accumulate(self.grad.data() + r * m, g.data(), m);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_fail("sub", a.shape(), b.shape());
  std::vector<double> out(a.numel());
  auto da = a.data(), db = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] - db[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    accumulate_into(*self.parents[0], self.grad);
    detail::Node& pb = *self.parents[1];
    if (pb.requires_grad) kernels::axpy(-1.0, self.grad.data(), pb.ensure_grad().data(), self.grad.size());
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const Broadcast mode = check_binary("mul", a, b);
  std::vector<double> out(a.numel());
  const std::size_t m = mode == Broadcast::same ? out.size() : a.dim(1);
  for (std::size_t r = 0; r < out.size() / std::max<std::size_t>(m, 1); ++r) {
    const double* brow = mode == Broadcast::same ? b.data().data() + r * m : b.data().data();
    kernels::mul(a.data().data() + r * m, brow, out.data() + r * m, m);
  }
  return make_result(a.shape(), std::move(out), {a, b}, [mode, m](detail::Node& self) {
    detail::Node& pa = *self.parents[0];
    detail::Node& pb = *self.parents[1];
    const std::size_t rows = self.grad.size() / std::max<std::size_t>(m, 1);
    std::vector<double> tmp(m);
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        const double* brow = mode == Broadcast::same ? pb.data.data() + r * m : pb.data.data();
        kernels::mul(self.grad.data() + r * m, brow, tmp.data(), m);
        kernels::accumulate(tmp.data(), g.data() + r * m, m);
      }
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        double* grow = mode == Broadcast::same ? g.data() + r * m : g.data();
        kernels::mul(self.grad.data() + r * m, pa.data.data() + r * m, tmp.data(), m);
        kernels::accumulate(tmp.data(), grow, m);
      }
    }
  });
}

Tensor affine(const Tensor& x, double alpha, double beta) {
  std::vector<double> out(x.numel());
  auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = alpha * in[i] + beta;
  return make_result(x.shape(), std::move(out), {x}, [alpha](detail::Node& self) {
    detail::Node& p = *self.parents[0];
    if (p.requires_grad) kernels::axpy(alpha, self.grad.data(), p.ensure_grad().data(), self.grad.size());
  });
}

// ---- structural ------------------------------------------------------------

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const std::size_t rank = parts[0].rank();
  if (rank == 0 || rank > 2 || axis >= rank)
    shape_fail("concat", parts[0].shape(), "axis " + std::to_string(axis) + " out of range");

  if (rank == 1 || axis == 0) {
    Shape shape = parts[0].shape();
    shape[0] = 0;
    for (const Tensor& p : parts) {
      if (p.rank() != rank || (rank == 2 && p.dim(1) != parts[0].dim(1)))
        shape_fail("concat", parts[0].shape(), p.shape());
      shape[0] += p.dim(0);
    }
    std::vector<double> out;
    out.reserve(shape_numel(shape));
    for (const Tensor& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
    return make_result(shape, std::move(out), parts, [](detail::Node& self) {
      std::size_t off = 0;
      for (const auto& p : self.parents) {
        const std::size_t n = p->data.size();
        accumulate_into(*p, std::span<const double>(self.grad).subspan(off, n));
        off += n;
      }
    });
  }

  // rank 2, axis 1
  const std::size_t rows = parts[0].dim(0);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != 2 || p.dim(0) != rows) shape_fail("concat", parts[0].shape(), p.shape());
    widths.push_back(p.dim(1));
    total += p.dim(1);
  }
  std::vector<double> out(rows * total);
  std::size_t col = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    auto src = parts[i].data();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(src.data() + r * widths[i], widths[i], out.data() + r * total + col);
    col += widths[i];
  }
  return make_result({rows, total}, std::move(out), parts,
                     [rows, total, widths](detail::Node& self) {
                       std::size_t c = 0;
                       for (std::size_t i = 0; i < widths.size(); ++i) {
                         detail::Node& p = *self.parents[i];
                         if (p.requires_grad) {
                           auto& g = p.ensure_grad();
                           for (std::size_t r = 0; r < rows; ++r)
                             kernels::accumulate(self.grad.data() + r * total + c,
                                                 g.data() + r * widths[i], widths[i]);
                         }
                         c += widths[i];
                       }
                     });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
  if (x.rank() == 0 || x.rank() > 2 || axis >= x.rank() || begin > end || end > x.dim(axis))
    shape_fail("slice", x.shape(),
               "bad range [" + std::to_string(begin) + "," + std::to_string(end) + ") on axis " +
                   std::to_string(axis));
  const std::size_t rows = x.rank() == 1 ? 1 : x.dim(0);
  const std::size_t cols = x.cols();
  const bool by_row = x.rank() == 2 && axis == 0;
  const std::size_t r0 = by_row ? begin : 0, r1 = by_row ? end : rows;
  const std::size_t c0 = by_row ? 0 : begin, c1 = by_row ? cols : end;
  const std::size_t w = c1 - c0;
  Shape shape = x.shape();
  shape[axis] = end - begin;
  std::vector<double> out((r1 - r0) * w);
  auto in = x.data();
  for (std::size_t r = r0; r < r1; ++r)
    std::copy_n(in.data() + r * cols + c0, w, out.data() + (r - r0) * w);
  return make_result(shape, std::move(out), {x}, [r0, r1, c0, w, cols](detail::Node& self) {
    detail::Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (std::size_t r = r0; r < r1; ++r)
      kernels::accumulate(self.grad.data() + (r - r0) * w, g.data() + r * cols + c0, w);
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) shape_fail("reshape", x.shape(), shape);
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_result(std::move(shape), std::move(out), {x},
                     [](detail::Node& self) { accumulate_into(*self.parents[0], self.grad); });
}

// ---- elementwise nonlinearities ---------------------------------------------

Tensor sigmoid(const Tensor& x) {
  return unary(x, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& x) {
  return unary(x, [](double v) { return v > 0.0 ? v : 0.0; },
               [](double in, double) { return in > 0.0 ? 1.0 : 0.0; });
}

Tensor cos(const Tensor& x) {
  return unary(x, [](double v) { return std::cos(v); }, [](double in, double) { return -std::sin(in); });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  if (x.rank() == 0 || x.rank() > 2 || axis >= x.rank())
    shape_fail("softmax", x.shape(), "axis " + std::to_string(axis) + " out of range");
  const std::size_t rows = x.rank() == 1 ? 1 : x.dim(0);
  const std::size_t cols = x.cols();
  // Softmax runs over `len` entries spaced `stride` apart, `groups` times.
  const bool along_cols = x.rank() == 1 || axis == 1;
  const std::size_t groups = along_cols ? rows : cols;
  const std::size_t len = along_cols ? cols : rows;
  const std::size_t stride = along_cols ? 1 : cols;
  const std::size_t step = along_cols ? cols : 1;
  std::vector<double> out(x.numel());
  auto in = x.data();
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t base = g * step;
    double mx = in[base];
    for (std::size_t i = 1; i < len; ++i) mx = std::max(mx, in[base + i * stride]);
    double total = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      const double e = std::exp(in[base + i * stride] - mx);
      out[base + i * stride] = e;
      total += e;
    }
    for (std::size_t i = 0; i < len; ++i) out[base + i * stride] /= total;
  }
  return make_result(x.shape(), std::move(out), {x},
                     [groups, len, stride, step](detail::Node& self) {
                       detail::Node& p = *self.parents[0];
                       if (!p.requires_grad) return;
                       auto& g = p.ensure_grad();
                       for (std::size_t grp = 0; grp < groups; ++grp) {
                         const std::size_t base = grp * step;
                         double dot = 0.0;
                         for (std::size_t i = 0; i < len; ++i)
                           dot += self.grad[base + i * stride] * self.data[base + i * stride];
                         for (std::size_t i = 0; i < len; ++i) {
                           const std::size_t at = base + i * stride;
                           g[at] += self.data[at] * (self.grad[at] - dot);
                         }
                       }
                     });
}

// ---- reductions ---------------------------------------------------------------

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return make_result(Shape{}, {total}, {x}, [](detail::Node& self) {
    detail::Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    const double g0 = self.grad[0];
    for (double& g : p.ensure_grad()) g += g0;
  });
}

Tensor sum(const Tensor& x, std::size_t axis) {
  if (x.rank() != 2 || axis > 1) shape_fail("sum", x.shape(), "axis reduction needs rank 2");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  auto in = x.data();
  std::vector<double> out(axis == 0 ? cols : rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[axis == 0 ? c : r] += in[r * cols + c];
  const std::size_t n = out.size();
  return make_result({n}, std::move(out), {x}, [rows, cols, axis](detail::Node& self) {
    detail::Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += self.grad[axis == 0 ? c : r];
  });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw ShapeError("mean: empty tensor");
  return affine(sum(x), 1.0 / static_cast<double>(x.numel()), 0.0);
}

Tensor mean(const Tensor& x, std::size_t axis) {
  if (x.rank() != 2 || axis > 1) shape_fail("mean", x.shape(), "axis reduction needs rank 2");
  const std::size_t n = x.dim(axis);
  if (n == 0) throw ShapeError("mean: empty axis");
  return affine(sum(x, axis), 1.0 / static_cast<double>(n), 0.0);
}

// ---- convolution / pooling ----------------------------------------------------

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t kernel,
              std::size_t stride, std::size_t batch) {
  if (x.rank() != 2 || w.rank() != 2 || kernel == 0 || stride == 0 || batch == 0 ||
      x.dim(0) % batch != 0)
    shape_fail("conv1d", x.shape(), w.shape());
  const std::size_t c_in = x.dim(1);
  const std::size_t len = x.dim(0) / batch;
  const std::size_t c_out = w.dim(1);
  if (w.dim(0) != kernel * c_in) shape_fail("conv1d", x.shape(), w.shape());
  if (bias.numel() != c_out) shape_fail("conv1d", w.shape(), bias.shape());
  if (len < kernel)
    shape_fail("conv1d", x.shape(),
               "signal length " + std::to_string(len) + " shorter than kernel " +
                   std::to_string(kernel));
  const std::size_t l_out = (len - kernel) / stride + 1;
  const std::size_t patch = kernel * c_in;

  // im2col: one row per output position, holding `kernel` consecutive input rows.
  std::vector<double> cols(batch * l_out * patch);
  auto in = x.data();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t p = 0; p < l_out; ++p)
      std::copy_n(in.data() + (b * len + p * stride) * c_in, patch,
                  cols.data() + (b * l_out + p) * patch);

  const std::size_t out_rows = batch * l_out;
  std::vector<double> out(out_rows * c_out);
  kernels::matmul(cols.data(), w.data().data(), out.data(), out_rows, patch, c_out);
  for (std::size_t r = 0; r < out_rows; ++r)
    kernels::accumulate(bias.data().data(), out.data() + r * c_out, c_out);

  return make_result(
      {out_rows, c_out}, std::move(out), {x, w, bias},
      [cols = std::move(cols), batch, len, l_out, stride, c_in, c_out, patch,
       out_rows](detail::Node& self) {
        detail::Node& px = *self.parents[0];
        detail::Node& pw = *self.parents[1];
        detail::Node& pb = *self.parents[2];
        if (pw.requires_grad) {
          const auto cols_t = transpose(cols, out_rows, patch);
          std::vector<double> dw(patch * c_out);
          kernels::matmul(cols_t.data(), self.grad.data(), dw.data(), patch, out_rows, c_out);
          accumulate_into(pw, dw);
        }
        if (pb.requires_grad) {
          auto& g = pb.ensure_grad();
          for (std::size_t r = 0; r < out_rows; ++r)
            kernels::accumulate(self.grad.data() + r * c_out, g.data(), c_out);
        }
        if (px.requires_grad) {
          const auto w_t = transpose(pw.data, patch, c_out);
          std::vector<double> dcols(out_rows * patch);
          kernels::matmul(self.grad.data(), w_t.data(), dcols.data(), out_rows, c_out, patch);
          auto& g = px.ensure_grad();
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t p = 0; p < l_out; ++p)
              kernels::accumulate(dcols.data() + (b * l_out + p) * patch,
                                  g.data() + (b * len + p * stride) * c_in, patch);
        }
      });
}

Tensor maxpool1d(const Tensor& x, std::size_t width, std::size_t batch) {
  if (x.rank() != 2 || width == 0 || batch == 0 || x.dim(0) % batch != 0)
    shape_fail("maxpool1d", x.shape(), "needs [batch*L x C] input and width >= 1");
  const std::size_t len = x.dim(0) / batch;
  const std::size_t chans = x.dim(1);
  const std::size_t l_out = len / width;
  if (l_out == 0) shape_fail("maxpool1d", x.shape(), "signal shorter than pooling width");
  std::vector<double> out(batch * l_out * chans);
  std::vector<std::size_t> argmax(out.size());
  auto in = x.data();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t p = 0; p < l_out; ++p)
      for (std::size_t c = 0; c < chans; ++c) {
        std::size_t best = (b * len + p * width) * chans + c;
        for (std::size_t j = 1; j < width; ++j) {
          const std::size_t at = (b * len + p * width + j) * chans + c;
          if (in[at] > in[best]) best = at;
        }
        const std::size_t o = (b * l_out + p) * chans + c;
        out[o] = in[best];
        argmax[o] = best;
      }
  return make_result({batch * l_out, chans}, std::move(out), {x},
                     [argmax = std::move(argmax)](detail::Node& self) {
                       detail::Node& p = *self.parents[0];
                       if (!p.requires_grad) return;
                       auto& g = p.ensure_grad();
                       for (std::size_t o = 0; o < argmax.size(); ++o) g[argmax[o]] += self.grad[o];
                     });
}

Tensor gather_rows(const Tensor& x, std::span<const std::ptrdiff_t> indices) {
  if (x.rank() != 2) shape_fail("gather_rows", x.shape(), "needs rank 2");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  std::vector<double> out(indices.size() * cols, 0.0);
  auto in = x.data();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0) continue;
    const auto src = static_cast<std::size_t>(indices[i]);
    if (src >= rows)
      shape_fail("gather_rows", x.shape(), "row index " + std::to_string(src) + " out of range");
    std::copy_n(in.data() + src * cols, cols, out.data() + i * cols);
  }
  std::vector<std::ptrdiff_t> idx(indices.begin(), indices.end());
  return make_result({indices.size(), cols}, std::move(out), {x},
                     [idx = std::move(idx), cols](detail::Node& self) {
                       detail::Node& p = *self.parents[0];
                       if (!p.requires_grad) return;
                       auto& g = p.ensure_grad();
                       for (std::size_t i = 0; i < idx.size(); ++i) {
                         if (idx[i] < 0) continue;
                         kernels::accumulate(self.grad.data() + i * cols,
                                             g.data() + static_cast<std::size_t>(idx[i]) * cols,
                                             cols);
                       }
                     });
}

Tensor mean_aggregate(const Tensor& x, const RowPattern& pattern) {
  return mean_aggregate(x, std::make_shared<const RowPattern>(pattern));
}

Tensor mean_aggregate(const Tensor& x, std::shared_ptr<const RowPattern> shared) {
  const RowPattern& pattern = *shared;
  if (x.rank() != 2) shape_fail("mean_aggregate", x.shape(), "needs rank 2");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  const std::size_t out_rows = pattern.num_rows();
  for (std::size_t c : pattern.cols)
    if (c >= rows) shape_fail("mean_aggregate", x.shape(), "pattern references missing row");
  const kernels::KernelTable& kt = kernels::active();
  std::vector<double> out(out_rows * cols, 0.0);
  auto in = x.data();
  for (std::size_t i = 0; i < out_rows; ++i) {
    const std::size_t b = pattern.offsets[i], e = pattern.offsets[i + 1];
    if (b == e) continue;
    double* dst = out.data() + i * cols;
    for (std::size_t k = b; k < e; ++k) kt.accumulate(in.data() + pattern.cols[k] * cols, dst, cols);
    kt.scale(1.0 / static_cast<double>(e - b), dst, cols);
  }
  return make_result({out_rows, cols}, std::move(out), {x}, [shared, cols](detail::Node& self) {
    detail::Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    const RowPattern& pat = *shared;
    const kernels::KernelTable& kt = kernels::active();
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < pat.num_rows(); ++i) {
      const std::size_t b = pat.offsets[i], e = pat.offsets[i + 1];
      if (b == e) continue;
      const double inv = 1.0 / static_cast<double>(e - b);
      for (std::size_t k = b; k < e; ++k)
        kt.axpy(inv, self.grad.data() + i * cols, g.data() + pat.cols[k] * cols, cols);
    }
  });
}

Tensor dropout(const Tensor& x, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) return x;
  if (rate >= 1.0) throw ConfigError("dropout: rate must be < 1");
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.numel());
  for (double& m : mask) m = keep(rng) ? scale : 0.0;
  return mul(x, Tensor(x.shape(), std::move(mask)));
}

Tensor bce_loss(const Tensor& probs, std::span<const double> labels) {
  if (labels.size() != probs.numel() || labels.empty())
    throw ShapeError("bce_loss: " + std::to_string(labels.size()) + " labels for " +
                     shape_to_string(probs.shape()) + " predictions");
  const double n = static_cast<double>(labels.size());
  auto p = probs.data();
  std::vector<double> clamped(p.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pc = std::clamp(p[i], kBceEpsilon, 1.0 - kBceEpsilon);
    clamped[i] = pc;
    const double y = labels[i];
    total += -(y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc));
  }
  std::vector<double> y(labels.begin(), labels.end());
  return make_result(Shape{}, {total / n}, {probs},
                     [clamped = std::move(clamped), y = std::move(y), n](detail::Node& self) {
                       detail::Node& pp = *self.parents[0];
                       if (!pp.requires_grad) return;
                       auto& g = pp.ensure_grad();
                       const double g0 = self.grad[0] / n;
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         const double pc = clamped[i];
                         g[i] += g0 * (-y[i] / pc + (1.0 - y[i]) / (1.0 - pc));
                       }
                     });
}

}  // namespace tgnseal
