#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace sscp {

/// Dense row-major matrix of doubles.
class RealMatrix {
 public:
  RealMatrix() = default;
  RealMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  RealMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  RealMatrix(std::initializer_list<std::initializer_list<double>> rows);

  /// Single-column matrix from a vector.
  static RealMatrix column_vector(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return values_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {values_.data() + r * cols_, cols_};
  }

  std::vector<double> column(std::size_t c) const;

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }

  /// Rows gathered in the order given by `indices`.
  RealMatrix select_rows(std::span<const std::size_t> indices) const;

  /// This matrix with `column` appended on the right.
  RealMatrix append_column(std::span<const double> column) const;

  /// Rows of `other` stacked below this matrix. An empty matrix acts as identity.
  RealMatrix vstack(const RealMatrix& other) const;

  bool all_finite() const noexcept;

  friend bool operator==(const RealMatrix&, const RealMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

/// Gathers `values[i]` for every index.
std::vector<double> select(std::span<const double> values, std::span<const std::size_t> indices);

}  // namespace sscp
