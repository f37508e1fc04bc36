#pragma once

// Temporal enclosing subgraphs around a candidate pair, double-radius node
// labels and per-node feature assembly (embedding || one-hot label).

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "tgnseal/events.hpp"
#include "tgnseal/memory.hpp"
#include "tgnseal/tensor.hpp"

namespace tgnseal {

struct EnclosingSubgraph {
  std::vector<NodeId> nodes;                     // nodes[0] = u, nodes[1] = v
  std::vector<std::vector<std::size_t>> adj;     // local ids, sorted, symmetric, no self loops
  Timestamp cutoff = 0.0;
  std::size_t k = 0;
  std::vector<int> labels;                       // filled by label_subgraph()

  std::size_t size() const { return nodes.size(); }
  std::size_t num_edges() const;
  bool has_edge(std::size_t a, std::size_t b) const;
};

inline constexpr int kUnreachable = std::numeric_limits<int>::max();
inline constexpr int kDefaultMaxLabel = 10;

/// Union of k-hop BFS balls around u and v over events with ts < t. Each
/// expanded node contributes at most `cap` distinct neighbours, most recent
/// first. Edges are every node pair joined by at least one event before t.
/// Throws ContractViolation if u == v, ConfigError if k not in {1,2,3} or cap == 0.
EnclosingSubgraph extract_enclosing_subgraph(const TemporalAdjacency& adj, NodeId u, NodeId v,
                                             Timestamp t, std::size_t k, std::size_t cap);

/// 1 + min(du, dv) + (d/2) * ((d/2) + (d%2) - 1) with d = du + dv, clamped to
/// max_label; 0 if either distance is kUnreachable.
int drnl_from_distances(int du, int dv, int max_label = kDefaultMaxLabel);

/// Hop distances from `source` inside the subgraph with `removed` deleted.
std::vector<int> bfs_distances(const EnclosingSubgraph& sub, std::size_t source, std::size_t removed);

/// Targets get 1; every other node gets drnl_from_distances of its distance
/// to u (v removed) and to v (u removed).
std::vector<int> drnl_label(const EnclosingSubgraph& sub, int max_label = kDefaultMaxLabel);
void label_subgraph(EnclosingSubgraph& sub, int max_label = kDefaultMaxLabel);

/// Rows z_i(cutoff) || onehot(label_i, max_label + 1) for one labelled subgraph.
Tensor assemble_node_features(const EnclosingSubgraph& sub, const MemoryState& memory,
                              EmbeddingKind kind, const Tensor& w_proj,
                              int max_label = kDefaultMaxLabel);

/// The same rows for several subgraphs stacked in order; row values are
/// identical to assembling each subgraph on its own.
Tensor assemble_batch_features(std::span<const EnclosingSubgraph> subs, const MemoryState& memory,
                               EmbeddingKind kind, const Tensor& w_proj,
                               int max_label = kDefaultMaxLabel);

/// Plain-text dump: a header line, one "node <local> <global> <label>" line
/// per node and one "edge <a> <b>" line per edge (a < b).
std::string dump_subgraph(const EnclosingSubgraph& sub);

}  // namespace tgnseal
