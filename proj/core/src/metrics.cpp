#include "sscp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <boost/math/distributions/students_t.hpp>

#include "sscp/error.hpp"
#include "sscp/random.hpp"

namespace sscp::metrics {

IntervalReport evaluate(std::span<const conformal::Interval> intervals, std::span<const double> ys) {
  if (intervals.size() != ys.size()) throw ShapeError("one target per interval is required");
  if (ys.empty()) throw EmptyInputError("nothing to evaluate");
  IntervalReport report;
  report.samples.resize(ys.size());
  double covered = 0.0;
  double width_sum = 0.0;
  double deficit_sum = 0.0;
  double excess_sum = 0.0;
  double min_width = conformal::kInfinity;
  double max_width = -conformal::kInfinity;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const auto& iv = intervals[i];
    if (!(iv.lower <= iv.upper)) {
      throw ContractViolation("interval " + std::to_string(i) + " has lower bound above upper bound");
    }
    auto& s = report.samples[i];
    s.lower = iv.lower;
    s.upper = iv.upper;
    s.y = ys[i];
    s.covered = iv.contains(ys[i]);
    s.width = iv.width();
    if (s.covered) {
      s.excess = std::min(ys[i] - iv.lower, iv.upper - ys[i]);
    } else {
      s.deficit = std::min(std::abs(ys[i] - iv.lower), std::abs(ys[i] - iv.upper));
    }
    if (std::isinf(s.width)) ++report.n_infinite;
    covered += s.covered ? 1.0 : 0.0;
    width_sum += s.width;
    deficit_sum += s.deficit;
    excess_sum += s.excess;
    min_width = std::min(min_width, s.width);
    max_width = std::max(max_width, s.width);
  }
  const auto n = static_cast<double>(ys.size());
  report.coverage = covered / n;
  report.average_width = width_sum / n;
  report.average_deficit = deficit_sum / n;
  report.average_excess = excess_sum / n;
  if (min_width == max_width) {
    report.width_std = 0.0;
  } else if (report.n_infinite > 0) {
    report.width_std = conformal::kInfinity;
  } else {
    double ss = 0.0;
    for (const auto& s : report.samples) ss += (s.width - report.average_width) * (s.width - report.average_width);
    report.width_std = std::sqrt(ss / n);
  }
  return report;
}

Pc1Result pc1_project(const RealMatrix& x, std::uint64_t seed) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  if (n < 2) throw InsufficientDataError("PC1 needs at least two rows");
  if (d == 0) throw DegenerateInputError("PC1 of a matrix without columns");

  std::vector<double> mean(d, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) mean[c] += x(r, c);
  }
  for (double& m : mean) m /= static_cast<double>(n);

  // Covariance (divided by n - 1).
  std::vector<double> cov(d * d, 0.0);
  std::vector<double> centred(d);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) centred[c] = x(r, c) - mean[c];
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = a; b < d; ++b) cov[a * d + b] += centred[a] * centred[b];
    }
  }
  double trace = 0.0;
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a; b < d; ++b) {
      cov[a * d + b] /= static_cast<double>(n - 1);
      cov[b * d + a] = cov[a * d + b];
    }
    trace += cov[a * d + a];
  }
  if (!(trace > 0.0)) throw DegenerateInputError("PC1 of a rank-0 matrix");

  Rng rng(seed);
  std::vector<double> v(d);
  for (double& e : v) e = rng.normal();
  auto normalise = [](std::vector<double>& u) {
    double norm = 0.0;
    for (double e : u) norm += e * e;
    norm = std::sqrt(norm);
    for (double& e : u) e /= norm;
    return norm;
  };
  normalise(v);

  Pc1Result out;
  std::vector<double> next(d);
  constexpr std::size_t kMaxIterations = 100000;
  constexpr double kTolerance = 1e-9;
  for (out.iterations = 1; out.iterations <= kMaxIterations; ++out.iterations) {
    for (std::size_t a = 0; a < d; ++a) {
      double s = 0.0;
      for (std::size_t b = 0; b < d; ++b) s += cov[a * d + b] * v[b];
      next[a] = s;
    }
    const double norm = normalise(next);
    if (!(norm > 0.0)) {
      // Start vector orthogonal to the column space; restart from a new draw.
      for (double& e : next) e = rng.normal();
      normalise(next);
    }
    double change = 0.0;
    for (std::size_t a = 0; a < d; ++a) change += (next[a] - v[a]) * (next[a] - v[a]);
    v.swap(next);
    if (std::sqrt(change) <= kTolerance) break;
  }
  out.iterations = std::min(out.iterations, kMaxIterations);

  std::size_t largest = 0;
  for (std::size_t a = 1; a < d; ++a) {
    if (std::abs(v[a]) > std::abs(v[largest])) largest = a;
  }
  if (v[largest] < 0.0) {
    for (double& e : v) e = -e;
  }

  double rayleigh = 0.0;
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = 0; b < d; ++b) rayleigh += v[a] * cov[a * d + b] * v[b];
  }
  out.loading = v;
  out.eigenvalue = rayleigh;
  out.explained_share = rayleigh / trace;
  out.scores.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < d; ++c) s += (x(r, c) - mean[c]) * v[c];
    out.scores[r] = s;
  }
  return out;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("correlation inputs differ in length");
  if (a.size() < 2) throw InsufficientDataError("correlation needs at least two pairs");
  const auto n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) throw DegenerateInputError("correlation is undefined for a constant input");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::vector<std::pair<std::size_t, double>> sorted_metric_curve(std::span<const double> values) {
  std::vector<double> sorted(values.begin(), values.end());
  std::stable_sort(sorted.begin(), sorted.end(), std::greater<>());
  std::vector<std::pair<std::size_t, double>> curve(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) curve[i] = {i + 1, sorted[i]};
  return curve;
}

double student_t_quantile(double p, double dof) {
  const boost::math::students_t dist(dof);
  return boost::math::quantile(dist, p);
}

GainCi gain_ci(std::span<const double> gains, double level) {
  if (gains.size() < 2) throw InsufficientDataError("a confidence interval needs at least two replicates");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence level must lie in (0, 1)");
  const auto k = static_cast<double>(gains.size());
  GainCi ci;
  ci.level = level;
  ci.n = gains.size();
  ci.mean = std::accumulate(gains.begin(), gains.end(), 0.0) / k;
  const auto [lo, hi] = std::minmax_element(gains.begin(), gains.end());
  if (*lo == *hi) {
    ci.mean = ci.lower = ci.upper = *lo;
    return ci;
  }
  double ss = 0.0;
  for (double g : gains) ss += (g - ci.mean) * (g - ci.mean);
  const double sd = std::sqrt(ss / (k - 1.0));
  const double half = student_t_quantile(0.5 + level / 2.0, k - 1.0) * sd / std::sqrt(k);
  ci.lower = ci.mean - half;
  ci.upper = ci.mean + half;
  return ci;
}

}  // namespace sscp::metrics
