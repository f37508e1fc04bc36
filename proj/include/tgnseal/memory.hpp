#pragma once

// Temporal node memory: per-node state vectors, raw messages built from
// interaction events, per-batch aggregation, the GRU memory update and the
// two embedding modules (identity and time projection).

#include <cstddef>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tgnseal/checkpoint.hpp"
#include "tgnseal/events.hpp"
#include "tgnseal/tensor.hpp"

namespace tgnseal {

struct MemoryState {
  MemoryState() = default;
  MemoryState(std::size_t num_nodes, std::size_t dim);

  std::size_t num_nodes = 0;
  std::size_t dim = 0;
  std::vector<double> s;                // [num_nodes x dim], row-major
  std::vector<Timestamp> last_update;  // 0 = stream start

  std::span<const double> row(NodeId node) const { return {s.data() + node * dim, dim}; }
  std::span<double> row(NodeId node) { return {s.data() + node * dim, dim}; }
  void reset();

  bool operator==(const MemoryState&) const = default;
};

struct RawMessage {
  NodeId node = 0;
  Timestamp ts = 0.0;
  std::size_t event_idx = 0;
  std::vector<double> payload;  // s_self || s_other || time_enc(dt) || e
};

/// Messages waiting for the batch-boundary flush, keyed by node.
class RawMessageBuffer {
 public:
  void push(RawMessage message);
  std::span<const RawMessage> pending(NodeId node) const;
  /// Nodes with at least one pending message, ascending.
  std::vector<NodeId> nodes() const;
  bool empty() const { return pending_.empty(); }
  void clear() { pending_.clear(); }

 private:
  std::map<NodeId, std::vector<RawMessage>> pending_;
};

enum class Aggregation { most_recent, mean };

/// Learnable cosine features: phi(dt) = cos(dt * w + b).
struct TimeEncoder {
  Tensor w;  // [1 x d_time]
  Tensor b;  // [d_time]

  /// w_i = 10^(-9 i / (d - 1)), b = 0.
  static TimeEncoder init(std::size_t d_time);
  std::size_t dim() const { return w.numel(); }
};

/// phi(dt) for one interval. Throws ContractViolation for dt < 0.
std::vector<double> time_encode(Timestamp dt, const TimeEncoder& enc);
/// Row-wise phi over a [n x 1] column of intervals.
Tensor time_encode(const Tensor& dt_column, const TimeEncoder& enc);

/// GRU cell: z = sig(x Wz + s Uz + bz), r = sig(x Wr + s Ur + br),
/// n = tanh(x Wn + (r . s) Un + bn), s' = (1 - z) . n + z . s.
struct GruParams {
  Tensor w_z, w_r, w_n;  // [d_in x d_mem]
  Tensor u_z, u_r, u_n;  // [d_mem x d_mem]
  Tensor b_z, b_r, b_n;  // [d_mem]

  /// Uniform(+-1/sqrt(d_mem)) initialisation.
  static GruParams init(std::size_t d_in, std::size_t d_mem, std::mt19937_64& rng);
  static GruParams zeros(std::size_t d_in, std::size_t d_mem);
  std::vector<Tensor> tensors() const;
};

/// Batched cell over rows: x [B x d_in], s [B x d_mem] -> [B x d_mem].
Tensor gru_cell(const Tensor& x, const Tensor& s, const GruParams& p);

/// Messages for both endpoints, built from the current memory.
std::pair<RawMessage, RawMessage> compute_messages(const Event& event, const MemoryState& memory,
                                                   const TimeEncoder& enc);

/// Throws ContractViolation when `node` has nothing pending.
RawMessage aggregate_messages(const RawMessageBuffer& buffer, NodeId node, Aggregation mode);

/// Applies the GRU to one node and stamps last_update = message.ts.
std::vector<double> update_memory(NodeId node, const RawMessage& aggregated, MemoryState& memory,
                                  const GruParams& gru);

/// Aggregates and applies every pending message, then empties the buffer.
void flush_batch(RawMessageBuffer& buffer, MemoryState& memory, const GruParams& gru,
                 Aggregation mode = Aggregation::most_recent);

enum class EmbeddingKind { identity, time_projection };

std::vector<double> embed_identity(NodeId node, const MemoryState& memory);
/// (1 + dt * w_proj) . s with dt = t - last_update(node); w_proj is [1 x d_mem].
/// Throws ContractViolation if t precedes the node's last update.
std::vector<double> embed_time_projection(NodeId node, Timestamp t, const MemoryState& memory,
                                          const Tensor& w_proj);

/// Embeds rows (nodes[i] at times[i]) as one [n x d_mem] tensor. Memory
/// enters as a constant; only w_proj can receive gradients.
Tensor embed_nodes(std::span<const NodeId> nodes, std::span<const Timestamp> times,
                   const MemoryState& memory, EmbeddingKind kind, const Tensor& w_proj);

struct MemoryConfig {
  std::size_t d_mem = 32;
  std::size_t d_time = 16;
  std::size_t feat_dim = 2;
  Aggregation aggregation = Aggregation::most_recent;

  std::size_t message_dim() const { return 2 * d_mem + d_time + feat_dim; }
};

/// State plus the (frozen during decoder training) update machinery.
class TemporalMemory {
 public:
  TemporalMemory(std::size_t num_nodes, const MemoryConfig& config, std::mt19937_64& init_rng);

  const MemoryState& state() const { return state_; }
  MemoryState& state() { return state_; }
  const MemoryConfig& config() const { return config_; }
  const TimeEncoder& time_encoder() const { return time_; }
  const GruParams& gru() const { return gru_; }
  const RawMessageBuffer& buffer() const { return buffer_; }

  void reset();
  /// Builds both messages of `event` from the current state into the buffer.
  void stage(const Event& event);
  void flush();

  void save(std::vector<NamedTensor>& out) const;
  void load(const std::vector<NamedTensor>& in);

 private:
  MemoryConfig config_;
  MemoryState state_;
  TimeEncoder time_;
  GruParams gru_;
  RawMessageBuffer buffer_;
};

}  // namespace tgnseal
