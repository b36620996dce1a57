#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sscp/matrix.hpp"

namespace sscp::data {

/// 1.5 on the open intervals (0.2, 0.4) and (0.6, 0.8), 0.1 elsewhere.
double step(double latent) noexcept;

inline constexpr std::size_t kSyntheticPairs = 10;
inline constexpr std::size_t kSyntheticFeatures = 2 * kSyntheticPairs;

struct SyntheticSample {
  double latent = 0.0;
  /// Ten (x, y) points on the circle of radius `latent` centred at
  /// (0, latent), interleaved as x0, y0, x1, y1, ...
  std::vector<double> features;
  /// Signed residual: |r| ~ |N(step(latent), 0.1)| with a random sign.
  double residual = 0.0;
};

/// Draws `n` samples. The latent, residual magnitude, residual sign and the
/// ten angles are all drawn per sample from one seeded stream.
std::vector<SyntheticSample> synth_generate(std::size_t n, std::uint64_t seed);

struct TabularDataset {
  RealMatrix x;
  std::optional<std::vector<double>> y;
  std::vector<std::string> feature_names;
  std::string target_name;

  std::size_t rows() const noexcept { return x.rows(); }
  TabularDataset select_rows(std::span<const std::size_t> indices) const;
};

/// Features and targets of synthetic samples; the target is the signed
/// residual (the hypothetical predictor is the zero function).
TabularDataset to_dataset(std::span<const SyntheticSample> samples);

struct SplitAssignment {
  std::vector<std::size_t> train;
  std::vector<std::size_t> res;
  std::vector<std::size_t> cal;
  std::vector<std::size_t> test;
};

/// Seeded four-way split: test takes floor(20%) of all rows, res floor(20%)
/// of the rest, cal floor(20%) of what remains, train the remainder. Each
/// part is returned in ascending index order.
SplitAssignment split(std::size_t n, std::uint64_t seed);

/// Throws SplitIntegrityError unless the parts are pairwise disjoint and
/// cover [0, n).
void check_split(const SplitAssignment& parts, std::size_t n);

struct LabelPartition {
  std::vector<std::size_t> labeled;
  std::vector<std::size_t> unlabeled;
};

/// Seeded choice of ceil(p * n) labeled rows among `train`.
LabelPartition label_mask(std::span<const std::size_t> train, double p, std::uint64_t seed);

/// Feature z-scoring and target mean-absolute rescaling, fitted on one split
/// and applied to others.
class Standardizer {
 public:
  static Standardizer fit(const TabularDataset& fit_split);

  TabularDataset apply(const TabularDataset& data) const;
  RealMatrix apply_features(const RealMatrix& x) const;
  std::vector<double> apply_target(std::span<const double> y) const;
  RealMatrix invert_features(const RealMatrix& z) const;

  const std::vector<double>& means() const noexcept { return means_; }
  const std::vector<double>& stds() const noexcept { return stds_; }
  double target_scale() const noexcept { return target_scale_; }
  /// Columns whose standard deviation was zero (replaced by 1).
  const std::vector<bool>& degenerate_columns() const noexcept { return degenerate_; }
  bool any_degenerate() const noexcept;

 private:
  std::vector<double> means_;
  std::vector<double> stds_;
  std::vector<bool> degenerate_;
  double target_scale_ = 1.0;
};

/// Reads a comma-separated file with a header row. All cells must parse as
/// finite numbers; errors name the offending row and column.
TabularDataset load_csv(const std::filesystem::path& path, const std::string& target_column);

/// Writes features then target (if any) with a header row.
void write_csv(const std::filesystem::path& path, const TabularDataset& data);

}  // namespace sscp::data
