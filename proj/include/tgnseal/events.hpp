#pragma once

// Time-ordered interaction log, temporal adjacency index, chronological
// splitting and negative sampling.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace tgnseal {

using NodeId = std::uint32_t;
using Timestamp = double;

/// One directed interaction src -> dst at time ts with edge features.
struct Event {
  std::size_t idx = 0;
  NodeId src = 0;
  NodeId dst = 0;
  Timestamp ts = 0.0;
  std::vector<double> feats;

  bool operator==(const Event&) const = default;
};

class EventStream {
 public:
  EventStream() = default;
  /// Sorts stably by (ts, idx), renumbers idx to the resulting position and
  /// validates every invariant. Throws FormatError on self-loops, ids
  /// >= num_nodes, non-finite timestamps or wrong feature length.
  EventStream(std::vector<Event> events, std::size_t num_nodes, std::size_t feat_dim);

  std::span<const Event> events() const { return events_; }
  const Event& operator[](std::size_t i) const { return events_[i]; }
  std::size_t size() const { return events_.size(); }
  bool empty() const { return events_.empty(); }
  std::size_t num_nodes() const { return num_nodes_; }
  std::size_t feat_dim() const { return feat_dim_; }

  bool operator==(const EventStream&) const = default;

 private:
  std::vector<Event> events_;
  std::size_t num_nodes_ = 0;
  std::size_t feat_dim_ = 0;
};

struct AdjEntry {
  NodeId neighbor = 0;
  Timestamp ts = 0.0;
  std::size_t event_idx = 0;

  bool operator==(const AdjEntry&) const = default;
};

/// Per-node time-sorted neighbour lists; every event is listed under both
/// endpoints. Immutable after construction.
class TemporalAdjacency {
 public:
  TemporalAdjacency() = default;
  /// `events` must be sorted by ts.
  TemporalAdjacency(std::span<const Event> events, std::size_t num_nodes);

  std::size_t num_nodes() const { return lists_.size(); }
  std::size_t total_entries() const { return total_; }
  /// Full history of `node`; empty for unknown nodes.
  std::span<const AdjEntry> entries(NodeId node) const;
  /// Every entry of `node` with ts < t (strict).
  std::span<const AdjEntry> before(NodeId node, Timestamp t) const;

 private:
  std::vector<std::vector<AdjEntry>> lists_;
  std::size_t total_ = 0;
};

TemporalAdjacency build_adjacency(const EventStream& stream);

/// The `limit` most recent entries of `node` with ts < t, oldest first.
/// Unknown nodes yield an empty span. Throws ContractViolation if limit == 0.
std::span<const AdjEntry> neighbors_before(const TemporalAdjacency& adj, NodeId node, Timestamp t,
                                           std::size_t limit);

struct SplitSpec {
  std::size_t train_end_idx = 0;
  std::size_t val_end_idx = 0;
  std::vector<NodeId> unseen_nodes;  // sorted ascending
  std::uint64_t seed = 0;

  bool is_unseen(NodeId node) const;
  /// An event whose prediction counts as "unseen": at least one endpoint unseen.
  bool touches_unseen(const Event& e) const;
  /// Training events are hidden from the model when they touch an unseen node.
  bool is_masked_training_event(const Event& e) const;

  bool operator==(const SplitSpec&) const = default;
};

/// Fraction boundaries over the time-ordered stream plus a seeded set of
/// nodes held out of training. unseen_nodes = nodes that first appear after
/// the training region, plus round(unseen_frac * num_nodes) nodes sampled
/// from those that appear in both regions (their training events get masked).
SplitSpec chronological_split(const EventStream& stream, double train_frac, double val_frac,
                              double unseen_frac, std::uint64_t seed);

/// Uniform over [0, num_nodes) without `exclude`. Throws ConfigError if num_nodes < 2.
NodeId sample_negative(std::mt19937_64& rng, std::size_t num_nodes, NodeId exclude);

/// Independent generator keyed by (seed, stream tag, index), so per-event draws
/// do not depend on processing order.
std::mt19937_64 derive_rng(std::uint64_t seed, std::uint64_t tag, std::uint64_t index);

}  // namespace tgnseal
