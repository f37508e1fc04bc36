#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "oracles.hpp"
#include "tgnseal/errors.hpp"
#include "tgnseal/seal.hpp"

using namespace tgnseal;

namespace {

EventStream stream_of(std::vector<std::tuple<NodeId, NodeId, double>> rows, std::size_t n) {
  std::vector<Event> events;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& [a, b, ts] = rows[i];
    events.push_back(Event{i, a, b, ts, {}});
  }
  return EventStream(std::move(events), n, 0);
}

std::set<NodeId> node_set(const EnclosingSubgraph& sub) { return {sub.nodes.begin(), sub.nodes.end()}; }

std::set<std::pair<NodeId, NodeId>> edge_set(const EnclosingSubgraph& sub) {
  std::set<std::pair<NodeId, NodeId>> out;
  for (std::size_t a = 0; a < sub.size(); ++a)
    for (std::size_t b : sub.adj[a]) {
      const NodeId x = sub.nodes[a], y = sub.nodes[b];
      out.insert({std::min(x, y), std::max(x, y)});
    }
  return out;
}

EnclosingSubgraph from_matrix(const std::vector<std::vector<bool>>& m) {
  EnclosingSubgraph sub;
  sub.adj.resize(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    sub.nodes.push_back(i);
    for (std::size_t j = 0; j < m.size(); ++j)
      if (m[i][j]) sub.adj[i].push_back(j);
  }
  sub.k = 2;
  return sub;
}

EventStream random_stream(std::mt19937_64& rng, std::size_t nodes, std::size_t count) {
  std::uniform_int_distribution<NodeId> pick(0, nodes - 1);
  std::uniform_int_distribution<int> tick(0, 3);
  std::vector<Event> events;
  double ts = 0;
  for (std::size_t i = 0; i < count; ++i) {
    NodeId a = pick(rng), b = pick(rng);
    while (b == a) b = pick(rng);
    ts += tick(rng);  // repeated timestamps on purpose
    events.push_back(Event{i, a, b, ts, {}});
  }
  return EventStream(std::move(events), nodes, 0);
}

}  // namespace

TEST_CASE("extraction worked examples") {
  const NodeId a = 0, b = 1, c = 2, d = 3;
  const auto stream = stream_of({{a, b, 1}, {b, c, 2}, {c, d, 3}}, 5);
  const auto adj = build_adjacency(stream);

  const auto empty = extract_enclosing_subgraph(adj, a, c, 0.5, 2, 20);
  CHECK(empty.nodes == std::vector<NodeId>{a, c});
  CHECK(empty.num_edges() == 0);

  const auto late = extract_enclosing_subgraph(adj, a, c, 10, 1, 20);
  CHECK(late.nodes[0] == a);
  CHECK(late.nodes[1] == c);
  CHECK(node_set(late) == std::set<NodeId>{a, b, c, d});
  CHECK(edge_set(late) == std::set<std::pair<NodeId, NodeId>>{{a, b}, {b, c}, {c, d}});
  CHECK(late.cutoff == 10);

  const auto early = extract_enclosing_subgraph(adj, a, c, 2.5, 1, 20);
  CHECK(node_set(early) == std::set<NodeId>{a, b, c});
  CHECK(edge_set(early) == std::set<std::pair<NodeId, NodeId>>{{a, b}, {b, c}});

  // A prior event between the targets is legitimate history.
  const auto direct = stream_of({{a, b, 1}, {a, b, 4}}, 2);
  const auto sub = extract_enclosing_subgraph(build_adjacency(direct), a, b, 5, 2, 20);
  CHECK(sub.has_edge(0, 1));
  CHECK(sub.num_edges() == 1);

  CHECK_THROWS_AS(extract_enclosing_subgraph(adj, a, a, 1, 2, 20), ContractViolation);
  CHECK_THROWS_AS(extract_enclosing_subgraph(adj, a, b, 1, 4, 20), ConfigError);
  CHECK_THROWS_AS(extract_enclosing_subgraph(adj, a, b, 1, 0, 20), ConfigError);
  CHECK_THROWS_AS(extract_enclosing_subgraph(adj, a, b, 1, 2, 0), ConfigError);
}

TEST_CASE("cap keeps the most recent partners") {
  // Hub 0 talks to 1..5 in order; cap 2 keeps 4 and 5.
  const auto stream = stream_of({{0, 1, 1}, {0, 2, 2}, {0, 3, 3}, {0, 4, 4}, {0, 5, 5}}, 7);
  const auto sub = extract_enclosing_subgraph(build_adjacency(stream), 0, 6, 10, 1, 2);
  CHECK(node_set(sub) == std::set<NodeId>{0, 4, 5, 6});
}

TEST_CASE("label formula") {
  CHECK(drnl_from_distances(1, 1) == 2);
  CHECK(drnl_from_distances(1, 2) == 3);
  CHECK(drnl_from_distances(2, 1) == 3);
  CHECK(drnl_from_distances(2, 2) == 5);
  CHECK(drnl_from_distances(kUnreachable, 1) == 0);
  CHECK(drnl_from_distances(3, kUnreachable) == 0);
  CHECK(drnl_from_distances(5, 6) == 10);
  CHECK(drnl_from_distances(5, 6, 1000) > 10);

  // Distinct unordered distance pairs map to distinct labels, and the
  // numbering agrees with plain enumeration.
  std::map<int, std::pair<int, int>> owner;
  for (int du = 1; du <= 6; ++du)
    for (int dv = du; dv <= 6; ++dv) {
      const int label = drnl_from_distances(du, dv, 1000);
      CHECK(label == oracle::drnl_by_enumeration(du, dv, 1000));
      const auto [it, fresh] = owner.emplace(label, std::pair{du, dv});
      CHECK(fresh);
    }
}

TEST_CASE("labels on small graphs") {
  // Path u - x - v.
  auto path = from_matrix({{0, 0, 1}, {0, 0, 1}, {1, 1, 0}});
  CHECK(drnl_label(path) == std::vector<int>{1, 1, 2});

  // y hangs off v only, so with v removed it cannot reach u.
  auto hanging = from_matrix({{0, 1, 0}, {1, 0, 1}, {0, 1, 0}});
  CHECK(drnl_label(hanging)[2] == 0);
  CHECK(bfs_distances(hanging, 1, 0)[2] == 1);
  CHECK(bfs_distances(hanging, 0, 1)[2] == kUnreachable);
}

TEST_CASE("labels match all-pairs oracle on random graphs") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t n = 2 + rng() % 29;
    const double p = 0.05 + 0.3 * static_cast<double>(rng() % 100) / 100.0;
    const auto m = oracle::random_graph(n, p, rng);
    const auto sub = from_matrix(m);
    INFO("seed " << seed);
    CHECK(drnl_label(sub, 1000) == oracle::drnl_labels(m, 1000));
    CHECK(drnl_label(sub) == oracle::drnl_labels(m, kDefaultMaxLabel));
  }
}

TEST_CASE("labels follow node permutations and target swaps") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 4 + rng() % 10;
    const auto m = oracle::random_graph(n, 0.3, rng);
    const auto base = drnl_label(from_matrix(m));

    // Shuffle non-targets.
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin() + 2, perm.end(), rng);
    std::vector<std::vector<bool>> pm(n, std::vector<bool>(n));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) pm[i][j] = m[perm[i]][perm[j]];
    const auto shuffled = drnl_label(from_matrix(pm));
    for (std::size_t i = 0; i < n; ++i) CHECK(shuffled[i] == base[perm[i]]);

    // Swap u and v.
    std::swap(perm[0], perm[1]);
    std::iota(perm.begin() + 2, perm.end(), 2);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) pm[i][j] = m[perm[i]][perm[j]];
    CHECK(drnl_label(from_matrix(pm)) == base);
  }
}

TEST_CASE("extraction matches a raw event scan and never leaks") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed + 1000);
    const std::size_t n = 6 + rng() % 30;
    const auto stream = random_stream(rng, n, 20 + rng() % 150);
    const auto adj = build_adjacency(stream);
    const std::vector<Event> events(stream.events().begin(), stream.events().end());
    for (int q = 0; q < 10; ++q) {
      const NodeId u = rng() % n;
      NodeId v = rng() % n;
      if (v == u) v = (u + 1) % n;
      const double t = static_cast<double>(rng() % static_cast<std::uint64_t>(events.back().ts + 2));
      const std::size_t k = 1 + rng() % 3, cap = 1 + rng() % 6;
      const auto sub = extract_enclosing_subgraph(adj, u, v, t, k, cap);
      const auto expected = oracle::extract(events, u, v, t, k, cap);
      INFO("seed " << seed << " query " << u << "," << v << " t " << t << " k " << k << " cap " << cap);
      CHECK(node_set(sub) == expected.nodes);
      CHECK(edge_set(sub) == expected.edges);
      CHECK(sub.size() == expected.nodes.size());
      for (const auto& [x, y] : edge_set(sub)) {
        bool backed = false;
        for (const Event& e : events)
          if (e.ts < t && std::min(e.src, e.dst) == x && std::max(e.src, e.dst) == y) backed = true;
        CHECK(backed);
      }
      for (std::size_t i = 0; i < sub.size(); ++i) {
        CHECK(std::is_sorted(sub.adj[i].begin(), sub.adj[i].end()));
        for (std::size_t j : sub.adj[i]) {
          CHECK(j != i);
          CHECK(sub.has_edge(j, i));
        }
      }
      if (k > 1) {
        const auto smaller = extract_enclosing_subgraph(adj, u, v, t, k - 1, cap);
        const auto big = node_set(sub);
        for (NodeId x : smaller.nodes) CHECK(big.count(x) == 1);
      }
    }
  }
}

TEST_CASE("feature assembly") {
  const auto stream = stream_of({{0, 2, 1}, {2, 1, 2}, {1, 3, 3}}, 4);
  auto sub = extract_enclosing_subgraph(build_adjacency(stream), 0, 1, 5, 2, 20);
  MemoryState zero(4, 3);
  const Tensor w_proj = Tensor::zeros({1, 3});
  CHECK_THROWS(assemble_node_features(sub, zero, EmbeddingKind::identity, w_proj));
  label_subgraph(sub);
  CHECK(sub.labels[0] == 1);
  CHECK(sub.labels[1] == 1);
  const Tensor x = assemble_node_features(sub, zero, EmbeddingKind::identity, w_proj);
  CHECK(x.rows() == sub.size());
  CHECK(x.cols() == 3 + kDefaultMaxLabel + 1);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double hot = 0;
    for (std::size_t c = 3; c < x.cols(); ++c) hot += x.at(i, c);
    CHECK(hot == 1.0);
    CHECK(x.at(i, 3 + static_cast<std::size_t>(sub.labels[i])) == 1.0);
  }
  CHECK(x.at(0, 0) == 0.0);
  CHECK(x.at(0, 4) == 1.0);

  // Swapping the targets gives the same multiset of rows.
  std::mt19937_64 rng(4);
  MemoryState mem(4, 3);
  for (double& s : mem.s) s = std::uniform_real_distribution<double>(-1, 1)(rng);
  auto swapped = extract_enclosing_subgraph(build_adjacency(stream), 1, 0, 5, 2, 20);
  label_subgraph(swapped);
  auto rows_of = [&](const EnclosingSubgraph& s) {
    const Tensor f = assemble_node_features(s, mem, EmbeddingKind::identity, w_proj);
    std::multiset<std::vector<double>> out;
    for (std::size_t i = 0; i < f.rows(); ++i)
      out.insert(std::vector<double>(f.data().begin() + i * f.cols(), f.data().begin() + (i + 1) * f.cols()));
    return out;
  };
  CHECK(rows_of(sub) == rows_of(swapped));

  // Batched assembly stacks the per-subgraph rows.
  const std::vector<EnclosingSubgraph> both{sub, swapped};
  const Tensor stacked = assemble_batch_features(both, mem, EmbeddingKind::identity, w_proj);
  const Tensor first = assemble_node_features(sub, mem, EmbeddingKind::identity, w_proj);
  CHECK(stacked.rows() == sub.size() + swapped.size());
  for (std::size_t i = 0; i < first.numel(); ++i) CHECK(stacked.at(i) == first.at(i));
}

TEST_CASE("subgraph dump") {
  const auto stream = stream_of({{0, 2, 1}, {2, 1, 2}}, 3);
  auto sub = extract_enclosing_subgraph(build_adjacency(stream), 0, 1, 5, 1, 20);
  label_subgraph(sub);
  const std::string text = dump_subgraph(sub);
  CHECK(text.find("node 2 2 2") != std::string::npos);
  CHECK(text.find("edge 0 2") != std::string::npos);
  CHECK(text.find("edge 1 2") != std::string::npos);
}
