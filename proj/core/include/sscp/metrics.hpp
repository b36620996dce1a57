#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "sscp/conformal.hpp"
#include "sscp/matrix.hpp"

namespace sscp::metrics {

struct SampleMetrics {
  double lower = 0.0;
  double upper = 0.0;
  double y = 0.0;
  bool covered = false;
  double width = 0.0;
  double deficit = 0.0;
  double excess = 0.0;
};

struct IntervalReport {
  std::vector<SampleMetrics> samples;
  double coverage = 0.0;
  /// +inf when any interval is unbounded.
  double average_width = 0.0;
  double average_deficit = 0.0;
  double average_excess = 0.0;
  /// Standard deviation of the widths (0 when all are equal).
  double width_std = 0.0;
  std::size_t n_infinite = 0;
};

/// Per-sample width, deficit and excess with plain means over all samples.
/// Throws ContractViolation when some lower bound exceeds its upper bound.
IntervalReport evaluate(std::span<const conformal::Interval> intervals, std::span<const double> ys);

/// Projections of the rows of `x` on its leading principal axis.
struct Pc1Result {
  std::vector<double> scores;
  std::vector<double> loading;
  double eigenvalue = 0.0;
  /// Eigenvalue over the total variance.
  double explained_share = 0.0;
  std::size_t iterations = 0;
};

/// Seeded power iteration on the covariance of the centred rows, stopped at
/// relative change 1e-9. The sign makes the largest-magnitude loading
/// positive. Throws DegenerateInputError for a rank-0 matrix and
/// InsufficientDataError for fewer than two rows.
Pc1Result pc1_project(const RealMatrix& x, std::uint64_t seed = 0);

/// Product-moment correlation. Throws DegenerateInputError on zero variance.
double pearson(std::span<const double> a, std::span<const double> b);

/// (rank, value) pairs, values in stable descending order, ranks from 1.
std::vector<std::pair<std::size_t, double>> sorted_metric_curve(std::span<const double> values);

struct GainCi {
  double mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.9;
  std::size_t n = 0;
};

/// Two-sided t interval mean +- t_{(1+level)/2, k-1} sd / sqrt(k).
/// Throws InsufficientDataError for fewer than two gains.
GainCi gain_ci(std::span<const double> gains, double level = 0.9);

/// Two-sided Student-t quantile used by gain_ci.
double student_t_quantile(double p, double dof);

}  // namespace sscp::metrics
