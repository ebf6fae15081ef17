#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace treatkit {

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

  std::span<const double> flat() const { return data_; }
  std::span<double> flat() { return data_; }

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// rows x arms x outcomes array, flattened row-major.
class Array3 {
 public:
  Array3() = default;
  Array3(std::size_t rows, std::size_t arms, std::size_t outcomes, double fill = 0.0)
      : rows_(rows), arms_(arms), outcomes_(outcomes), data_(rows * arms * outcomes, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t arms() const { return arms_; }
  std::size_t outcomes() const { return outcomes_; }

  double& operator()(std::size_t i, std::size_t a, std::size_t j) {
    return data_[(i * arms_ + a) * outcomes_ + j];
  }
  double operator()(std::size_t i, std::size_t a, std::size_t j) const {
    return data_[(i * arms_ + a) * outcomes_ + j];
  }

  // Outcome vector for one (row, arm) cell.
  std::span<const double> cell(std::size_t i, std::size_t a) const {
    return {data_.data() + (i * arms_ + a) * outcomes_, outcomes_};
  }
  std::span<double> cell(std::size_t i, std::size_t a) {
    return {data_.data() + (i * arms_ + a) * outcomes_, outcomes_};
  }

  std::span<const double> flat() const { return data_; }

  friend bool operator==(const Array3& a, const Array3& b) {
    return a.rows_ == b.rows_ && a.arms_ == b.arms_ && a.outcomes_ == b.outcomes_ &&
           a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t arms_ = 0;
  std::size_t outcomes_ = 0;
  std::vector<double> data_;
};

}  // namespace treatkit
