#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "tgnseal/cdr.hpp"
#include "tgnseal/errors.hpp"

namespace tgnseal {
namespace {

void validate(std::size_t num_nodes, std::size_t num_events, const SyntheticParams& p) {
  if (num_nodes < 3) throw ConfigError("synth: need at least 3 nodes");
  if (num_events < 1) throw ConfigError("synth: need at least 1 event");
  auto prob = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!prob(p.p_repeat) || !prob(p.p_triad) || p.p_repeat + p.p_triad > 1.0)
    throw ConfigError("synth: p_repeat, p_triad must lie in [0, 1] with sum <= 1");
  if (!(p.mean_interarrival_s > 0.0) || !(p.mean_duration_s > 0.0))
    throw ConfigError("synth: mean inter-arrival and duration must be positive");
  if (!(p.activity_skew >= 0.0)) throw ConfigError("synth: activity_skew must be >= 0");
}

constexpr int kTriadAttempts = 8;

}  // namespace

EventStream generate_synthetic(std::size_t num_nodes, std::size_t num_events,
                               const SyntheticParams& params, std::uint64_t seed,
                               SyntheticStats* stats) {
  validate(num_nodes, num_events, params);
  std::mt19937_64 rng(seed);

  // Caller activity follows a power law over a random ranking of the nodes.
  std::vector<NodeId> ranking(num_nodes);
  std::iota(ranking.begin(), ranking.end(), NodeId{0});
  std::shuffle(ranking.begin(), ranking.end(), rng);
  std::vector<double> weight(num_nodes);
  for (std::size_t r = 0; r < num_nodes; ++r)
    weight[ranking[r]] = 1.0 / std::pow(static_cast<double>(r + 1), params.activity_skew);
  std::discrete_distribution<NodeId> pick_caller(weight.begin(), weight.end());

  std::exponential_distribution<double> gap(1.0 / params.mean_interarrival_s);
  std::exponential_distribution<double> duration(1.0 / params.mean_duration_s);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::bernoulli_distribution outgoing(0.5);
  auto pick = [&rng](const std::vector<NodeId>& from) {
    std::uniform_int_distribution<std::size_t> d(0, from.size() - 1);
    return from[d(rng)];
  };

  std::vector<std::vector<NodeId>> partners(num_nodes);
  SyntheticStats counts;
  std::vector<Event> events;
  events.reserve(num_events);
  double ts = 0.0;
  for (std::size_t i = 0; i < num_events; ++i) {
    ts += gap(rng);
    const NodeId src = pick_caller(rng);
    const double r = unit(rng);
    std::optional<NodeId> dst;
    if (r < params.p_repeat) {
      if (!partners[src].empty()) {
        dst = pick(partners[src]);
        ++counts.repeat;
      }
    } else if (r < params.p_repeat + params.p_triad) {
      for (int attempt = 0; attempt < kTriadAttempts && !dst && !partners[src].empty(); ++attempt) {
        const NodeId mid = pick(partners[src]);
        const NodeId far = pick(partners[mid]);
        if (far != src) dst = far;
      }
      if (dst) ++counts.triad;
    }
    if (!dst) {
      dst = sample_negative(rng, num_nodes, src);
      ++counts.uniform;
    }
    partners[src].push_back(*dst);
    partners[*dst].push_back(src);

    Event e;
    e.idx = i;
    e.src = src;
    e.dst = *dst;
    e.ts = ts;
    const double d = duration(rng);
    e.feats = {std::log1p(d), outgoing(rng) ? 1.0 : 0.0};
    events.push_back(std::move(e));
  }
  if (stats) *stats = counts;
  return EventStream(std::move(events), num_nodes, kCdrFeatureDim);
}

}  // namespace tgnseal
