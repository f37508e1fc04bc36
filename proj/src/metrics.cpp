#include "tgnseal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <vector>

#include "tgnseal/errors.hpp"

namespace tgnseal {

double average_precision(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size())
    throw ContractViolation("average_precision: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double hits = 0.0, total = 0.0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (labels[order[r]] > 0.5) {
      hits += 1.0;
      total += hits / static_cast<double>(r + 1);
    }
  }
  if (hits == 0.0) throw ContractViolation("average_precision: no positive labels");
  return total / hits;
}

Alternative parse_alternative(const std::string& name) {
  if (name == "two-sided" || name == "two_sided") return Alternative::two_sided;
  if (name == "greater") return Alternative::greater;
  if (name == "less") return Alternative::less;
  throw ConfigError("unknown alternative '" + name + "' (two-sided, greater, less)");
}

namespace {

// Null distribution of U for sample sizes (n, m) without ties, as counts
// over all C(n+m, n) rank arrangements. counts[u] for u in [0, n*m].
std::vector<double> exact_u_counts(std::size_t n, std::size_t m) {
  // f[i][j][u]: arrangements of i a-values and j b-values with statistic u.
  // The largest of the i+j values is either an a (adds j) or a b (adds 0).
  std::vector<std::vector<std::vector<double>>> f(
      n + 1, std::vector<std::vector<double>>(m + 1));
  for (std::size_t i = 0; i <= n; ++i) {
    for (std::size_t j = 0; j <= m; ++j) {
      auto& cell = f[i][j];
      cell.assign(i * j + 1, 0.0);
      if (i == 0 || j == 0) {
        cell[0] = 1.0;
        continue;
      }
      const auto& from_a = f[i - 1][j];
      for (std::size_t u = 0; u < from_a.size(); ++u) cell[u + j] += from_a[u];
      const auto& from_b = f[i][j - 1];
      for (std::size_t u = 0; u < from_b.size(); ++u) cell[u] += from_b[u];
    }
  }
  return f[n][m];
}

double upper_normal(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace

MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b,
                                 Alternative alternative) {
  if (a.empty() || b.empty()) throw ContractViolation("mann_whitney_u: empty sample");
  const std::size_t n = a.size(), m = b.size();

  MannWhitneyResult r;
  double ties_pairs = 0.0;
  for (double x : a) {
    for (double y : b) {
      if (x > y) r.u += 1.0;
      else if (x == y) ties_pairs += 1.0;
    }
  }
  r.u += 0.5 * ties_pairs;

  std::map<double, std::size_t> groups;
  for (double x : a) ++groups[x];
  for (double y : b) ++groups[y];
  const bool has_ties = groups.size() < n + m;

  if (!has_ties && n * m <= kExactMannWhitneyLimit) {
    r.exact = true;
    const auto counts = exact_u_counts(n, m);
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    const auto u = static_cast<std::size_t>(r.u);
    double lower = 0.0, upper = 0.0;
    for (std::size_t k = 0; k <= u; ++k) lower += counts[k];
    for (std::size_t k = u; k < counts.size(); ++k) upper += counts[k];
    lower /= total;
    upper /= total;
    switch (alternative) {
      case Alternative::greater: r.p = upper; break;
      case Alternative::less: r.p = lower; break;
      case Alternative::two_sided: r.p = std::min(1.0, 2.0 * std::min(lower, upper)); break;
    }
    return r;
  }

  const double nd = static_cast<double>(n), md = static_cast<double>(m);
  const double total = nd + md;
  double tie_term = 0.0;
  for (const auto& [value, t] : groups) {
    const double td = static_cast<double>(t);
    tie_term += td * td * td - td;
  }
  const double mu = nd * md / 2.0;
  const double var = nd * md / 12.0 * ((total + 1.0) - tie_term / (total * (total - 1.0)));
  if (var <= 0.0) {
    r.p = 1.0;
    return r;
  }
  const double sigma = std::sqrt(var);
  switch (alternative) {
    case Alternative::greater: r.p = upper_normal((r.u - mu - 0.5) / sigma); break;
    case Alternative::less: r.p = upper_normal((mu - r.u - 0.5) / sigma); break;
    case Alternative::two_sided: {
      const double z = std::max(0.0, std::abs(r.u - mu) - 0.5) / sigma;
      r.p = std::min(1.0, 2.0 * upper_normal(z));
      break;
    }
  }
  return r;
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  const double n = static_cast<double>(values.size());
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / (n - 1.0));
  }
  return out;
}

}  // namespace tgnseal
