#include "sscp/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sscp/error.hpp"

namespace sscp {

RealMatrix::RealMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

RealMatrix::RealMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows * cols) {
    throw ShapeError("matrix of " + std::to_string(rows) + "x" + std::to_string(cols) +
                     " given " + std::to_string(values_.size()) + " values");
  }
}

RealMatrix::RealMatrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() == 0 ? 0 : rows.begin()->size()) {
  values_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("ragged initializer for RealMatrix");
    values_.insert(values_.end(), r.begin(), r.end());
  }
}

RealMatrix RealMatrix::column_vector(std::span<const double> values) {
  return RealMatrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

std::vector<double> RealMatrix::column(std::size_t c) const {
  std::vector<double> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

RealMatrix RealMatrix::select_rows(std::span<const std::size_t> indices) const {
  RealMatrix out(indices.size(), cols_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows_) throw ShapeError("row index out of range");
    std::copy_n(values_.begin() + static_cast<std::ptrdiff_t>(indices[i] * cols_), cols_,
                out.values_.begin() + static_cast<std::ptrdiff_t>(i * cols_));
  }
  return out;
}

RealMatrix RealMatrix::append_column(std::span<const double> column) const {
  if (column.size() != rows_) throw ShapeError("appended column length differs from row count");
  RealMatrix out(rows_, cols_ + 1);
  for (std::size_t r = 0; r < rows_; ++r) {
    auto dst = out.row(r);
    std::copy(row(r).begin(), row(r).end(), dst.begin());
    dst[cols_] = column[r];
  }
  return out;
}

RealMatrix RealMatrix::vstack(const RealMatrix& other) const {
  if (rows_ == 0) return other;
  if (other.rows_ == 0) return *this;
  if (other.cols_ != cols_) throw ShapeError("vstack column mismatch");
  RealMatrix out = *this;
  out.values_.insert(out.values_.end(), other.values_.begin(), other.values_.end());
  out.rows_ += other.rows_;
  return out;
}

bool RealMatrix::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

std::vector<double> select(std::span<const double> values, std::span<const std::size_t> indices) {
  std::vector<double> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= values.size()) throw ShapeError("index out of range");
    out.push_back(values[i]);
  }
  return out;
}

}  // namespace sscp
