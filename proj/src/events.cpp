#include "tgnseal/events.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <string>

#include "tgnseal/errors.hpp"

namespace tgnseal {

EventStream::EventStream(std::vector<Event> events, std::size_t num_nodes, std::size_t feat_dim)
    : events_(std::move(events)), num_nodes_(num_nodes), feat_dim_(feat_dim) {
  std::stable_sort(events_.begin(), events_.end(), [](const Event& a, const Event& b) {
    return a.ts < b.ts || (a.ts == b.ts && a.idx < b.idx);
  });
  for (std::size_t i = 0; i < events_.size(); ++i) {
    Event& e = events_[i];
    e.idx = i;
    if (!std::isfinite(e.ts)) throw FormatError("event " + std::to_string(i) + ": non-finite timestamp");
    if (e.src == e.dst) throw FormatError("event " + std::to_string(i) + ": self-interaction");
    if (e.src >= num_nodes_ || e.dst >= num_nodes_)
      throw FormatError("event " + std::to_string(i) + ": node id out of range");
    if (e.feats.size() != feat_dim_)
      throw FormatError("event " + std::to_string(i) + ": expected " + std::to_string(feat_dim_) +
                        " features, got " + std::to_string(e.feats.size()));
  }
}

TemporalAdjacency::TemporalAdjacency(std::span<const Event> events, std::size_t num_nodes)
    : lists_(num_nodes) {
  for (const Event& e : events) {
    lists_.at(e.src).push_back({e.dst, e.ts, e.idx});
    lists_.at(e.dst).push_back({e.src, e.ts, e.idx});
    total_ += 2;
  }
  // Input is ts-sorted already; the sort only guards hand-built inputs.
  for (auto& list : lists_) {
    std::stable_sort(list.begin(), list.end(),
                     [](const AdjEntry& a, const AdjEntry& b) { return a.ts < b.ts; });
  }
}

std::span<const AdjEntry> TemporalAdjacency::entries(NodeId node) const {
  if (node >= lists_.size()) return {};
  return lists_[node];
}

std::span<const AdjEntry> TemporalAdjacency::before(NodeId node, Timestamp t) const {
  auto all = entries(node);
  auto end = std::lower_bound(all.begin(), all.end(), t,
                              [](const AdjEntry& e, Timestamp value) { return e.ts < value; });
  return all.first(static_cast<std::size_t>(std::distance(all.begin(), end)));
}

TemporalAdjacency build_adjacency(const EventStream& stream) {
  return TemporalAdjacency(stream.events(), stream.num_nodes());
}

std::span<const AdjEntry> neighbors_before(const TemporalAdjacency& adj, NodeId node, Timestamp t,
                                           std::size_t limit) {
  if (limit == 0) throw ContractViolation("neighbors_before: limit must be >= 1");
  auto prior = adj.before(node, t);
  return prior.last(std::min(limit, prior.size()));
}

bool SplitSpec::is_unseen(NodeId node) const {
  return std::binary_search(unseen_nodes.begin(), unseen_nodes.end(), node);
}

bool SplitSpec::touches_unseen(const Event& e) const { return is_unseen(e.src) || is_unseen(e.dst); }

bool SplitSpec::is_masked_training_event(const Event& e) const {
  return e.idx < train_end_idx && touches_unseen(e);
}

SplitSpec chronological_split(const EventStream& stream, double train_frac, double val_frac,
                              double unseen_frac, std::uint64_t seed) {
  if (!(train_frac >= 0.0) || !(val_frac >= 0.0) || !(train_frac + val_frac < 1.0))
    throw ConfigError("split: need train_frac, val_frac >= 0 and train_frac + val_frac < 1");
  if (!(unseen_frac >= 0.0 && unseen_frac < 1.0))
    throw ConfigError("split: unseen_frac must lie in [0, 1)");

  const auto n = static_cast<double>(stream.size());
  // The epsilon absorbs representation error such as 0.7 * 100 = 70.00000000000001.
  auto boundary = [n](double frac) { return static_cast<std::size_t>(std::floor(frac * n + 1e-9)); };

  SplitSpec split;
  split.seed = seed;
  split.train_end_idx = boundary(train_frac);
  split.val_end_idx = std::max(split.train_end_idx, boundary(train_frac + val_frac));

  std::vector<char> in_train(stream.num_nodes(), 0), after_train(stream.num_nodes(), 0);
  for (const Event& e : stream.events()) {
    auto& flag = e.idx < split.train_end_idx ? in_train : after_train;
    flag[e.src] = 1;
    flag[e.dst] = 1;
  }
  std::vector<NodeId> fresh, shared;
  for (NodeId v = 0; v < stream.num_nodes(); ++v) {
    if (!after_train[v]) continue;
    (in_train[v] ? shared : fresh).push_back(v);
  }

  const auto want = static_cast<std::size_t>(
      std::llround(unseen_frac * static_cast<double>(stream.num_nodes())));
  std::vector<NodeId> sampled;
  std::mt19937_64 rng(seed);
  std::sample(shared.begin(), shared.end(), std::back_inserter(sampled),
              std::min(want, shared.size()), rng);

  split.unseen_nodes = std::move(fresh);
  split.unseen_nodes.insert(split.unseen_nodes.end(), sampled.begin(), sampled.end());
  std::sort(split.unseen_nodes.begin(), split.unseen_nodes.end());
  return split;
}

NodeId sample_negative(std::mt19937_64& rng, std::size_t num_nodes, NodeId exclude) {
  if (num_nodes < 2) throw ConfigError("sample_negative: need at least 2 nodes");
  std::uniform_int_distribution<std::uint64_t> dist(0, num_nodes - 2);
  auto draw = static_cast<NodeId>(dist(rng));
  return draw >= exclude ? draw + 1 : draw;
}

std::mt19937_64 derive_rng(std::uint64_t seed, std::uint64_t tag, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace tgnseal
