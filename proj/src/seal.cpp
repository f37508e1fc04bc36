#include "tgnseal/seal.hpp"

#include <algorithm>
#include <deque>
#include <sstream>

#include "tgnseal/errors.hpp"

namespace tgnseal {

std::size_t EnclosingSubgraph::num_edges() const {
  std::size_t twice = 0;
  for (const auto& list : adj) twice += list.size();
  return twice / 2;
}

bool EnclosingSubgraph::has_edge(std::size_t a, std::size_t b) const {
  if (a >= adj.size()) return false;
  return std::binary_search(adj[a].begin(), adj[a].end(), b);
}

namespace {

// Up to `cap` distinct neighbours of `node` before t, most recent first.
void recent_neighbors(const TemporalAdjacency& adj, NodeId node, Timestamp t, std::size_t cap,
                      std::vector<NodeId>& out) {
  out.clear();
  const auto prior = adj.before(node, t);
  for (auto it = prior.rbegin(); it != prior.rend() && out.size() < cap; ++it) {
    if (std::find(out.begin(), out.end(), it->neighbor) == out.end()) out.push_back(it->neighbor);
  }
}

// Per-thread node-indexed marks, invalidated in O(1) by bumping a generation.
struct Marks {
  std::vector<std::uint64_t> gen;
  std::vector<std::size_t> value;
  std::uint64_t current = 0;

  void reset(std::size_t n) {
    if (gen.size() < n) {
      gen.assign(n, 0);
      value.assign(n, 0);
      current = 0;
    }
    ++current;
  }
  bool has(NodeId x) const { return gen[x] == current; }
  void set(NodeId x, std::size_t v) {
    gen[x] = current;
    value[x] = v;
  }
};

}  // namespace

EnclosingSubgraph extract_enclosing_subgraph(const TemporalAdjacency& adj, NodeId u, NodeId v,
                                             Timestamp t, std::size_t k, std::size_t cap) {
  if (u == v) throw ContractViolation("extract_enclosing_subgraph: u and v must differ");
  if (k < 1 || k > 3) throw ConfigError("extract_enclosing_subgraph: k must be 1, 2 or 3");
  if (cap == 0) throw ConfigError("extract_enclosing_subgraph: cap must be >= 1");
  const std::size_t n = std::max<std::size_t>(adj.num_nodes(), std::max(u, v) + std::size_t{1});

  thread_local Marks local, visited;
  thread_local std::vector<NodeId> frontier, next, nbrs;

  EnclosingSubgraph sub;
  sub.cutoff = t;
  sub.k = k;
  sub.nodes = {u, v};
  local.reset(n);
  local.set(u, 0);
  local.set(v, 1);

  for (NodeId root : {u, v}) {
    visited.reset(n);
    visited.set(root, 0);
    frontier.assign(1, root);
    for (std::size_t hop = 0; hop < k && !frontier.empty(); ++hop) {
      next.clear();
      for (NodeId x : frontier) {
        recent_neighbors(adj, x, t, cap, nbrs);
        for (NodeId y : nbrs) {
          if (visited.has(y)) continue;
          visited.set(y, 0);
          next.push_back(y);
          if (!local.has(y)) {
            local.set(y, sub.nodes.size());
            sub.nodes.push_back(y);
          }
        }
      }
      frontier.swap(next);
    }
  }

  sub.adj.resize(sub.nodes.size());
  for (std::size_t i = 0; i < sub.nodes.size(); ++i) {
    for (const AdjEntry& e : adj.before(sub.nodes[i], t)) {
      if (local.has(e.neighbor) && local.value[e.neighbor] != i)
        sub.adj[i].push_back(local.value[e.neighbor]);
    }
  }
  for (auto& list : sub.adj) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  return sub;
}

int drnl_from_distances(int du, int dv, int max_label) {
  if (du == kUnreachable || dv == kUnreachable) return 0;
  const long long d = static_cast<long long>(du) + dv;
  const long long half = d / 2;
  const long long label = 1 + std::min(du, dv) + half * (half + d % 2 - 1);
  return static_cast<int>(std::min<long long>(label, max_label));
}

std::vector<int> bfs_distances(const EnclosingSubgraph& sub, std::size_t source, std::size_t removed) {
  std::vector<int> dist(sub.size(), kUnreachable);
  dist[source] = 0;
  std::deque<std::size_t> queue{source};
  while (!queue.empty()) {
    const std::size_t x = queue.front();
    queue.pop_front();
    for (std::size_t y : sub.adj[x]) {
      if (y == removed || dist[y] != kUnreachable) continue;
      dist[y] = dist[x] + 1;
      queue.push_back(y);
    }
  }
  return dist;
}

std::vector<int> drnl_label(const EnclosingSubgraph& sub, int max_label) {
  std::vector<int> labels(sub.size(), 0);
  if (sub.size() < 2) return labels;
  const auto from_u = bfs_distances(sub, 0, 1);
  const auto from_v = bfs_distances(sub, 1, 0);
  labels[0] = labels[1] = 1;
  for (std::size_t i = 2; i < sub.size(); ++i)
    labels[i] = drnl_from_distances(from_u[i], from_v[i], max_label);
  return labels;
}

void label_subgraph(EnclosingSubgraph& sub, int max_label) { sub.labels = drnl_label(sub, max_label); }

Tensor assemble_batch_features(std::span<const EnclosingSubgraph> subs, const MemoryState& memory,
                               EmbeddingKind kind, const Tensor& w_proj, int max_label) {
  std::vector<NodeId> nodes;
  std::vector<Timestamp> times;
  std::vector<int> labels;
  for (const EnclosingSubgraph& sub : subs) {
    if (sub.labels.size() != sub.size())
      throw ContractViolation("assemble_node_features: subgraph is not labelled");
    nodes.insert(nodes.end(), sub.nodes.begin(), sub.nodes.end());
    times.insert(times.end(), sub.size(), sub.cutoff);
    labels.insert(labels.end(), sub.labels.begin(), sub.labels.end());
  }
  const auto width = static_cast<std::size_t>(max_label) + 1;
  std::vector<double> onehot(nodes.size() * width, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int l = std::clamp(labels[i], 0, max_label);
    onehot[i * width + static_cast<std::size_t>(l)] = 1.0;
  }
  const Tensor z = embed_nodes(nodes, times, memory, kind, w_proj);
  return concat({z, Tensor({nodes.size(), width}, std::move(onehot))}, 1);
}

Tensor assemble_node_features(const EnclosingSubgraph& sub, const MemoryState& memory,
                              EmbeddingKind kind, const Tensor& w_proj, int max_label) {
  return assemble_batch_features(std::span<const EnclosingSubgraph>(&sub, 1), memory, kind, w_proj,
                                 max_label);
}

std::string dump_subgraph(const EnclosingSubgraph& sub) {
  std::ostringstream os;
  os.precision(17);
  os << "subgraph u=" << sub.nodes.at(0) << " v=" << sub.nodes.at(1) << " cutoff=" << sub.cutoff
     << " k=" << sub.k << " nodes=" << sub.size() << " edges=" << sub.num_edges() << '\n';
  for (std::size_t i = 0; i < sub.size(); ++i)
    os << "node " << i << ' ' << sub.nodes[i] << ' ' << (i < sub.labels.size() ? sub.labels[i] : -1)
       << '\n';
  for (std::size_t a = 0; a < sub.size(); ++a)
    for (std::size_t b : sub.adj[a])
      if (a < b) os << "edge " << a << ' ' << b << '\n';
  return os.str();
}

}  // namespace tgnseal
