#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace timesliver {

/// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data[r * cols + c];
  }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

/// Dense depth x rows x cols tensor, row-major within each slice.
struct Tensor3 {
  std::size_t depth = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Tensor3() = default;
  Tensor3(std::size_t d, std::size_t r, std::size_t c, double fill = 0.0)
      : depth(d), rows(r), cols(c), data(d * r * c, fill) {}

  double& operator()(std::size_t d, std::size_t r, std::size_t c) {
    return data[(d * rows + r) * cols + c];
  }
  double operator()(std::size_t d, std::size_t r, std::size_t c) const {
    return data[(d * rows + r) * cols + c];
  }

  std::span<double> slice(std::size_t d) {
    return {data.data() + d * rows * cols, rows * cols};
  }
  std::span<const double> slice(std::size_t d) const {
    return {data.data() + d * rows * cols, rows * cols};
  }

  std::size_t size() const { return data.size(); }

  friend bool operator==(const Tensor3&, const Tensor3&) = default;
};

}  // namespace timesliver
