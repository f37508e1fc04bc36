#include "tgnseal/memory.hpp"

#include <algorithm>
#include <cmath>

#include "tgnseal/errors.hpp"

namespace tgnseal {

MemoryState::MemoryState(std::size_t nodes, std::size_t d)
    : num_nodes(nodes), dim(d), s(nodes * d, 0.0), last_update(nodes, 0.0) {}

void MemoryState::reset() {
  std::fill(s.begin(), s.end(), 0.0);
  std::fill(last_update.begin(), last_update.end(), 0.0);
}

void RawMessageBuffer::push(RawMessage message) {
  pending_[message.node].push_back(std::move(message));
}

std::span<const RawMessage> RawMessageBuffer::pending(NodeId node) const {
  auto it = pending_.find(node);
  if (it == pending_.end()) return {};
  return it->second;
}

std::vector<NodeId> RawMessageBuffer::nodes() const {
  std::vector<NodeId> out;
  out.reserve(pending_.size());
  for (const auto& [node, list] : pending_) out.push_back(node);
  return out;
}

TimeEncoder TimeEncoder::init(std::size_t d_time) {
  std::vector<double> w(d_time);
  for (std::size_t i = 0; i < d_time; ++i) {
    const double frac = d_time > 1 ? static_cast<double>(i) / static_cast<double>(d_time - 1) : 0.0;
    w[i] = std::pow(10.0, -9.0 * frac);
  }
  return {Tensor({1, d_time}, std::move(w), true), Tensor::zeros({d_time}, true)};
}

std::vector<double> time_encode(Timestamp dt, const TimeEncoder& enc) {
  if (dt < 0.0) throw ContractViolation("time_encode: negative elapsed time " + std::to_string(dt));
  std::vector<double> out(enc.dim());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::cos(dt * enc.w.at(i) + enc.b.at(i));
  return out;
}

Tensor time_encode(const Tensor& dt_column, const TimeEncoder& enc) {
  for (double dt : dt_column.data())
    if (dt < 0.0) throw ContractViolation("time_encode: negative elapsed time " + std::to_string(dt));
  return cos(add(matmul(dt_column, enc.w), enc.b));
}

GruParams GruParams::init(std::size_t d_in, std::size_t d_mem, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(d_mem));
  auto u = [&](Shape shape) { return Tensor::uniform(std::move(shape), bound, rng, true); };
  GruParams p;
  p.w_z = u({d_in, d_mem});
  p.w_r = u({d_in, d_mem});
  p.w_n = u({d_in, d_mem});
  p.u_z = u({d_mem, d_mem});
  p.u_r = u({d_mem, d_mem});
  p.u_n = u({d_mem, d_mem});
  p.b_z = u({d_mem});
  p.b_r = u({d_mem});
  p.b_n = u({d_mem});
  return p;
}

GruParams GruParams::zeros(std::size_t d_in, std::size_t d_mem) {
  auto z = [](Shape shape) { return Tensor::zeros(std::move(shape), true); };
  return {z({d_in, d_mem}), z({d_in, d_mem}), z({d_in, d_mem}), z({d_mem, d_mem}), z({d_mem, d_mem}),
          z({d_mem, d_mem}), z({d_mem}),       z({d_mem}),       z({d_mem})};
}

std::vector<Tensor> GruParams::tensors() const {
  return {w_z, w_r, w_n, u_z, u_r, u_n, b_z, b_r, b_n};
}

Tensor gru_cell(const Tensor& x, const Tensor& s, const GruParams& p) {
  const Tensor z = sigmoid(add(add(matmul(x, p.w_z), matmul(s, p.u_z)), p.b_z));
  const Tensor r = sigmoid(add(add(matmul(x, p.w_r), matmul(s, p.u_r)), p.b_r));
  const Tensor n = tanh(add(add(matmul(x, p.w_n), matmul(mul(r, s), p.u_n)), p.b_n));
  return add(mul(affine(z, -1.0, 1.0), n), mul(z, s));
}

namespace {

RawMessage build_message(NodeId self, NodeId other, const Event& event, const MemoryState& memory,
                         const TimeEncoder& enc) {
  RawMessage m;
  m.node = self;
  m.ts = event.ts;
  m.event_idx = event.idx;
  const auto phi = time_encode(event.ts - memory.last_update[self], enc);
  m.payload.reserve(2 * memory.dim + phi.size() + event.feats.size());
  const auto s_self = memory.row(self);
  const auto s_other = memory.row(other);
  m.payload.insert(m.payload.end(), s_self.begin(), s_self.end());
  m.payload.insert(m.payload.end(), s_other.begin(), s_other.end());
  m.payload.insert(m.payload.end(), phi.begin(), phi.end());
  m.payload.insert(m.payload.end(), event.feats.begin(), event.feats.end());
  return m;
}

}  // namespace

std::pair<RawMessage, RawMessage> compute_messages(const Event& event, const MemoryState& memory,
                                                   const TimeEncoder& enc) {
  if (event.src >= memory.num_nodes || event.dst >= memory.num_nodes)
    throw ContractViolation("compute_messages: event endpoint outside memory");
  return {build_message(event.src, event.dst, event, memory, enc),
          build_message(event.dst, event.src, event, memory, enc)};
}

RawMessage aggregate_messages(const RawMessageBuffer& buffer, NodeId node, Aggregation mode) {
  const auto msgs = buffer.pending(node);
  if (msgs.empty())
    throw ContractViolation("aggregate_messages: no pending message for node " + std::to_string(node));
  // Latest by (ts, event_idx); equal keys resolve to the later arrival.
  std::size_t latest = 0;
  for (std::size_t i = 1; i < msgs.size(); ++i) {
    const RawMessage& a = msgs[i];
    const RawMessage& b = msgs[latest];
    if (a.ts > b.ts || (a.ts == b.ts && a.event_idx >= b.event_idx)) latest = i;
  }
  if (mode == Aggregation::most_recent || msgs.size() == 1) return msgs[latest];

  RawMessage out = msgs[latest];
  std::fill(out.payload.begin(), out.payload.end(), 0.0);
  for (const RawMessage& m : msgs)
    for (std::size_t j = 0; j < out.payload.size(); ++j) out.payload[j] += m.payload[j];
  for (double& v : out.payload) v /= static_cast<double>(msgs.size());
  return out;
}

std::vector<double> update_memory(NodeId node, const RawMessage& aggregated, MemoryState& memory,
                                  const GruParams& gru) {
  if (aggregated.payload.size() != gru.w_z.dim(0))
    throw ShapeError("update_memory: message width " + std::to_string(aggregated.payload.size()) +
                     " does not match GRU input " + std::to_string(gru.w_z.dim(0)));
  NoGradGuard no_grad;
  const auto row = memory.row(node);
  const Tensor x({1, aggregated.payload.size()}, aggregated.payload);
  const Tensor s({1, memory.dim}, std::vector<double>(row.begin(), row.end()));
  const Tensor next = gru_cell(x, s, gru);
  std::copy(next.data().begin(), next.data().end(), memory.row(node).begin());
  memory.last_update[node] = aggregated.ts;
  return {next.data().begin(), next.data().end()};
}

void flush_batch(RawMessageBuffer& buffer, MemoryState& memory, const GruParams& gru,
                 Aggregation mode) {
  if (buffer.empty()) return;
  const auto nodes = buffer.nodes();
  const std::size_t d_in = gru.w_z.dim(0);
  std::vector<double> x, s;
  std::vector<Timestamp> stamps;
  x.reserve(nodes.size() * d_in);
  s.reserve(nodes.size() * memory.dim);
  for (NodeId v : nodes) {
    const RawMessage m = aggregate_messages(buffer, v, mode);
    if (m.payload.size() != d_in) throw ShapeError("flush_batch: message width mismatch");
    x.insert(x.end(), m.payload.begin(), m.payload.end());
    const auto row = memory.row(v);
    s.insert(s.end(), row.begin(), row.end());
    stamps.push_back(m.ts);
  }
  // Row-wise matmuls keep each node's result identical to a one-row update.
  NoGradGuard no_grad;
  const Tensor next = gru_cell(Tensor({nodes.size(), d_in}, std::move(x)),
                               Tensor({nodes.size(), memory.dim}, std::move(s)), gru);
  const auto out = next.data();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    std::copy_n(out.data() + i * memory.dim, memory.dim, memory.row(nodes[i]).begin());
    memory.last_update[nodes[i]] = stamps[i];
  }
  buffer.clear();
}

std::vector<double> embed_identity(NodeId node, const MemoryState& memory) {
  const auto row = memory.row(node);
  return {row.begin(), row.end()};
}

std::vector<double> embed_time_projection(NodeId node, Timestamp t, const MemoryState& memory,
                                          const Tensor& w_proj) {
  const double dt = t - memory.last_update[node];
  if (dt < 0.0) throw ContractViolation("embed_time_projection: query time precedes last update");
  const auto row = memory.row(node);
  std::vector<double> z(row.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = (1.0 + dt * w_proj.at(i)) * row[i];
  return z;
}

Tensor embed_nodes(std::span<const NodeId> nodes, std::span<const Timestamp> times,
                   const MemoryState& memory, EmbeddingKind kind, const Tensor& w_proj) {
  if (times.size() != nodes.size()) throw ShapeError("embed_nodes: nodes/times length mismatch");
  const std::size_t d = memory.dim;
  std::vector<double> s;
  s.reserve(nodes.size() * d);
  for (NodeId v : nodes) {
    const auto row = memory.row(v);
    s.insert(s.end(), row.begin(), row.end());
  }
  Tensor mem_rows({nodes.size(), d}, std::move(s));
  if (kind == EmbeddingKind::identity) return mem_rows;

  std::vector<double> dt(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    dt[i] = times[i] - memory.last_update[nodes[i]];
    if (dt[i] < 0.0) throw ContractViolation("embed_nodes: query time precedes last update");
  }
  const Tensor dt_col({nodes.size(), 1}, std::move(dt));
  return add(mem_rows, mul(matmul(dt_col, w_proj), mem_rows));
}

TemporalMemory::TemporalMemory(std::size_t num_nodes, const MemoryConfig& config,
                               std::mt19937_64& init_rng)
    : config_(config),
      state_(num_nodes, config.d_mem),
      time_(TimeEncoder::init(config.d_time)),
      gru_(GruParams::init(config.message_dim(), config.d_mem, init_rng)) {}

void TemporalMemory::reset() {
  state_.reset();
  buffer_.clear();
}

void TemporalMemory::stage(const Event& event) {
  auto [m_src, m_dst] = compute_messages(event, state_, time_);
  buffer_.push(std::move(m_src));
  buffer_.push(std::move(m_dst));
}

void TemporalMemory::flush() { flush_batch(buffer_, state_, gru_, config_.aggregation); }

void TemporalMemory::save(std::vector<NamedTensor>& out) const {
  out.push_back({"memory.s", {state_.num_nodes, state_.dim}, state_.s});
  out.push_back({"memory.last_update", {state_.num_nodes}, state_.last_update});
  out.push_back({"time.w", time_.w.shape(), {time_.w.data().begin(), time_.w.data().end()}});
  out.push_back({"time.b", time_.b.shape(), {time_.b.data().begin(), time_.b.data().end()}});
  const char* names[] = {"gru.w_z", "gru.w_r", "gru.w_n", "gru.u_z", "gru.u_r",
                         "gru.u_n", "gru.b_z", "gru.b_r", "gru.b_n"};
  const auto params = gru_.tensors();
  for (std::size_t i = 0; i < params.size(); ++i)
    out.push_back({names[i], params[i].shape(), {params[i].data().begin(), params[i].data().end()}});
}

void TemporalMemory::load(const std::vector<NamedTensor>& in) {
  auto fill = [&in](const std::string& name, Tensor target) {
    const NamedTensor& t = find_tensor(in, name);
    if (t.shape != target.shape())
      throw FormatError("checkpoint: tensor '" + name + "' has shape " + shape_to_string(t.shape) +
                        ", expected " + shape_to_string(target.shape()));
    std::copy(t.values.begin(), t.values.end(), target.mutable_data().begin());
  };
  const NamedTensor& s = find_tensor(in, "memory.s");
  const NamedTensor& lu = find_tensor(in, "memory.last_update");
  if (s.values.size() != state_.s.size() || lu.values.size() != state_.last_update.size())
    throw FormatError("checkpoint: memory snapshot does not match node count");
  state_.s = s.values;
  state_.last_update = lu.values;
  fill("time.w", time_.w);
  fill("time.b", time_.b);
  const char* names[] = {"gru.w_z", "gru.w_r", "gru.w_n", "gru.u_z", "gru.u_r",
                         "gru.u_n", "gru.b_z", "gru.b_r", "gru.b_n"};
  const auto params = gru_.tensors();
  for (std::size_t i = 0; i < params.size(); ++i) fill(names[i], params[i]);
}

}  // namespace tgnseal
