#include "tgnseal/dgcnn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tgnseal/errors.hpp"

namespace tgnseal {

std::size_t DgcnnConfig::total_channels() const {
  return std::accumulate(channels.begin(), channels.end(), std::size_t{0});
}

std::size_t DgcnnConfig::head_length() const {
  const std::size_t pooled = sortpool_k / pool_width;
  return pooled >= conv2_kernel ? pooled - conv2_kernel + 1 : 0;
}

void DgcnnConfig::validate() const {
  if (in_dim == 0) throw ConfigError("dgcnn: input width must be positive");
  if (channels.empty()) throw ConfigError("dgcnn: need at least one graph-conv layer");
  for (std::size_t c : channels)
    if (c == 0) throw ConfigError("dgcnn: graph-conv channels must be positive");
  if (conv1_filters == 0 || conv2_filters == 0 || conv2_kernel == 0 || pool_width == 0 ||
      dense_hidden == 0)
    throw ConfigError("dgcnn: head sizes must be positive");
  if (sortpool_k < min_sortpool_k())
    throw ConfigError("dgcnn: sortpool_k must be at least " + std::to_string(min_sortpool_k()));
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dgcnn: dropout must be in [0, 1)");
}

RowPattern propagation_pattern(std::span<const EnclosingSubgraph> subs) {
  RowPattern p;
  std::size_t total = 0;
  for (const EnclosingSubgraph& sub : subs) total += sub.size();
  p.offsets.reserve(total + 1);
  std::size_t offset = 0;
  std::vector<std::size_t> row;
  for (const EnclosingSubgraph& sub : subs) {
    for (std::size_t i = 0; i < sub.size(); ++i) {
      row.assign(1, i);
      row.insert(row.end(), sub.adj[i].begin(), sub.adj[i].end());
      std::sort(row.begin(), row.end(),
                [&](std::size_t a, std::size_t b) { return sub.nodes[a] < sub.nodes[b]; });
      for (std::size_t j : row) p.cols.push_back(offset + j);
      p.offsets.push_back(p.cols.size());
    }
    offset += sub.size();
  }
  return p;
}

Tensor graph_conv_stack(const RowPattern& propagation, const Tensor& x,
                        std::span<const Tensor> weights) {
  return graph_conv_stack(std::make_shared<const RowPattern>(propagation), x, weights);
}

Tensor graph_conv_stack(std::shared_ptr<const RowPattern> propagation, const Tensor& x,
                        std::span<const Tensor> weights) {
  if (propagation->num_rows() != x.rows())
    throw ShapeError("graph_conv_stack: propagation rows " + std::to_string(propagation->num_rows()) +
                     " vs feature rows " + std::to_string(x.rows()));
  std::vector<Tensor> outputs;
  Tensor h = x;
  for (const Tensor& w : weights) {
    h = tanh(mean_aggregate(matmul(h, w), propagation));
    outputs.push_back(h);
  }
  return concat(outputs, 1);
}

std::vector<std::ptrdiff_t> sort_pooling_order(const Tensor& h, std::size_t offset,
                                               std::size_t count, std::size_t k_sp) {
  const std::size_t c = h.cols();
  const auto data = h.data();
  std::vector<std::ptrdiff_t> order(count);
  std::iota(order.begin(), order.end(), static_cast<std::ptrdiff_t>(offset));
  std::stable_sort(order.begin(), order.end(), [&](std::ptrdiff_t a, std::ptrdiff_t b) {
    const double* ra = data.data() + static_cast<std::size_t>(a) * c;
    const double* rb = data.data() + static_cast<std::size_t>(b) * c;
    for (std::size_t ch = c; ch-- > 0;) {
      if (ra[ch] != rb[ch]) return ra[ch] > rb[ch];
    }
    return false;
  });
  order.resize(k_sp, -1);
  return order;
}

Tensor sort_pooling(const Tensor& h, std::size_t k_sp) {
  const auto order = sort_pooling_order(h, 0, h.rows(), k_sp);
  return gather_rows(h, order);
}

namespace {

Tensor param(Shape shape, double bound, std::mt19937_64& rng) {
  return Tensor::uniform(std::move(shape), bound, rng, true);
}

}  // namespace

Dgcnn::Dgcnn(const DgcnnConfig& config, std::mt19937_64& rng) : config_(config) {
  config_.validate();
  std::size_t in = config_.in_dim;
  for (std::size_t out : config_.channels) {
    gc_weights_.push_back(param({in, out}, std::sqrt(6.0 / static_cast<double>(in + out)), rng));
    in = out;
  }
  const std::size_t c_total = config_.total_channels();
  const double b1 = 1.0 / std::sqrt(static_cast<double>(c_total));
  conv1_w_ = param({c_total, config_.conv1_filters}, b1, rng);
  conv1_b_ = param({config_.conv1_filters}, b1, rng);
  const std::size_t fan2 = config_.conv2_kernel * config_.conv1_filters;
  const double b2 = 1.0 / std::sqrt(static_cast<double>(fan2));
  conv2_w_ = param({fan2, config_.conv2_filters}, b2, rng);
  conv2_b_ = param({config_.conv2_filters}, b2, rng);
  const std::size_t flat = config_.head_length() * config_.conv2_filters;
  const double b3 = 1.0 / std::sqrt(static_cast<double>(flat));
  dense1_w_ = param({flat, config_.dense_hidden}, b3, rng);
  dense1_b_ = param({config_.dense_hidden}, b3, rng);
  const double b4 = 1.0 / std::sqrt(static_cast<double>(config_.dense_hidden));
  dense2_w_ = param({config_.dense_hidden, 1}, b4, rng);
  dense2_b_ = param({1}, b4, rng);
}

Tensor Dgcnn::forward(std::span<const EnclosingSubgraph> subs, const Tensor& x, bool training,
                      std::mt19937_64* dropout_rng) const {
  if (subs.empty()) throw ContractViolation("dgcnn: empty batch");
  if (x.rank() != 2 || x.cols() != config_.in_dim)
    throw ShapeError("dgcnn: features " + shape_to_string(x.shape()) + ", expected width " +
                     std::to_string(config_.in_dim));
  if (training && config_.dropout > 0.0 && dropout_rng == nullptr)
    throw ContractViolation("dgcnn: training forward needs a dropout generator");

  const std::size_t batch = subs.size();
  const std::size_t k_sp = config_.sortpool_k;
  const std::size_t c_total = config_.total_channels();

  const Tensor h =
      graph_conv_stack(std::make_shared<const RowPattern>(propagation_pattern(subs)), x, gc_weights_);

  std::vector<std::ptrdiff_t> order;
  order.reserve(batch * k_sp);
  std::size_t offset = 0;
  for (const EnclosingSubgraph& sub : subs) {
    const auto part = sort_pooling_order(h, offset, sub.size(), k_sp);
    order.insert(order.end(), part.begin(), part.end());
    offset += sub.size();
  }
  if (offset != x.rows()) throw ShapeError("dgcnn: feature rows do not match subgraph sizes");
  const Tensor pooled = gather_rows(h, order);

  // Flattened [k_sp * C_total] signal per graph, one channel; kernel and
  // stride C_total read one sorted node per step.
  const Tensor signal = reshape(pooled, {batch * k_sp * c_total, 1});
  Tensor y = relu(conv1d(signal, conv1_w_, conv1_b_, c_total, c_total, batch));
  y = maxpool1d(y, config_.pool_width, batch);
  y = relu(conv1d(y, conv2_w_, conv2_b_, config_.conv2_kernel, 1, batch));
  y = reshape(y, {batch, config_.head_length() * config_.conv2_filters});
  y = relu(add(matmul(y, dense1_w_), dense1_b_));
  if (training && config_.dropout > 0.0) y = dropout(y, config_.dropout, *dropout_rng);
  return add(matmul(y, dense2_w_), dense2_b_);
}

std::vector<Tensor> Dgcnn::parameters() const {
  std::vector<Tensor> out = gc_weights_;
  out.insert(out.end(), {conv1_w_, conv1_b_, conv2_w_, conv2_b_, dense1_w_, dense1_b_, dense2_w_,
                         dense2_b_});
  return out;
}

std::vector<std::string> Dgcnn::parameter_names() const {
  std::vector<std::string> names;
  for (std::size_t l = 0; l < gc_weights_.size(); ++l)
    names.push_back("dgcnn.gc" + std::to_string(l) + ".w");
  names.insert(names.end(), {"dgcnn.conv1.w", "dgcnn.conv1.b", "dgcnn.conv2.w", "dgcnn.conv2.b",
                             "dgcnn.dense1.w", "dgcnn.dense1.b", "dgcnn.dense2.w", "dgcnn.dense2.b"});
  return names;
}

void Dgcnn::save(std::vector<NamedTensor>& out) const {
  const auto params = parameters();
  const auto names = parameter_names();
  for (std::size_t i = 0; i < params.size(); ++i)
    out.push_back({names[i], params[i].shape(),
                   std::vector<double>(params[i].data().begin(), params[i].data().end())});
}

void Dgcnn::load(const std::vector<NamedTensor>& in) {
  auto params = parameters();
  const auto names = parameter_names();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const NamedTensor& t = find_tensor(in, names[i]);
    if (t.shape != params[i].shape())
      throw FormatError("checkpoint tensor " + names[i] + " has shape " + shape_to_string(t.shape) +
                        ", expected " + shape_to_string(params[i].shape()));
    std::copy(t.values.begin(), t.values.end(), params[i].mutable_data().begin());
  }
}

Prediction predict_link(const EnclosingSubgraph& sub, const Tensor& x, const Dgcnn& model) {
  NoGradGuard guard;
  const Tensor logit = model.forward(std::span<const EnclosingSubgraph>(&sub, 1), x, false);
  const double z = logit.item();
  return {sigmoid(logit).item(), z};
}

}  // namespace tgnseal
