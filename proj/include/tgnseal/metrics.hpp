#pragma once

#include <cstddef>
#include <span>
#include <string>

namespace tgnseal {

/// Mean over positives of precision at the positive's rank, ranking by score
/// descending with ties kept in input order. Labels are 0/1.
/// Throws ContractViolation if there is no positive or the lengths differ.
double average_precision(std::span<const double> scores, std::span<const double> labels);

enum class Alternative { two_sided, greater, less };

Alternative parse_alternative(const std::string& name);

struct MannWhitneyResult {
  double u = 0.0;  // U statistic of sample a
  double p = 1.0;
  bool exact = false;
};

/// Largest |a| * |b| for which the exact null distribution is used (no ties).
inline constexpr std::size_t kExactMannWhitneyLimit = 400;

/// U = #{a_i > b_j} + 0.5 #{a_i == b_j}. "greater" tests whether a tends to be
/// larger than b. Throws ContractViolation on an empty sample.
MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b,
                                 Alternative alternative = Alternative::two_sided);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single value
};

MeanStd mean_std(std::span<const double> values);

}  // namespace tgnseal
