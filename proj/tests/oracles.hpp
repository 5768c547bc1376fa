#pragma once

// Brute-force reference implementations used only by the tests. They share
// no code with the library and favour obviousness over speed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <set>
#include <vector>

#include "timesliver/random.hpp"
#include "timesliver/tensor.hpp"

namespace oracle {

using timesliver::Matrix;
using timesliver::Tensor3;

inline Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed, double lo = -1.0,
                            double hi = 1.0) {
  timesliver::Rng rng(seed);
  Matrix m(r, c);
  for (auto& v : m.data) v = rng.uniform(lo, hi);
  return m;
}

// output[k][j] = bias[j] + sum_{l, c} input[k + l][c] * kernels[j][l][c]
inline Matrix conv1d(const Matrix& input, const Tensor3& kernels, const std::vector<double>& bias) {
  const std::size_t m = kernels.rows;
  const std::size_t kappa = input.rows - m + 1;
  Matrix out(kappa, kernels.depth);
  for (std::size_t k = 0; k < kappa; ++k)
    for (std::size_t j = 0; j < kernels.depth; ++j) {
      double acc = bias[j];
      for (std::size_t l = 0; l < m; ++l)
        for (std::size_t c = 0; c < input.cols; ++c) acc += input(k + l, c) * kernels(j, l, c);
      out(k, j) = acc;
    }
  return out;
}

// P = Z^T Q by the triple loop.
inline Matrix zt_q(const Matrix& z, const Matrix& q) {
  Matrix p(z.cols, q.cols);
  for (std::size_t i = 0; i < z.cols; ++i)
    for (std::size_t j = 0; j < q.cols; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < z.rows; ++k) acc += z(k, i) * q(k, j);
      p(i, j) = acc;
    }
  return p;
}

// Window-loop pooling; trailing windows truncated.
inline Matrix pool(const Matrix& in, std::size_t w, bool max) {
  const std::size_t R = (in.rows + w - 1) / w, C = (in.cols + w - 1) / w;
  Matrix out(R, C);
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < C; ++c) {
      std::vector<double> cell;
      for (std::size_t a = r * w; a < std::min(in.rows, r * w + w); ++a)
        for (std::size_t b = c * w; b < std::min(in.cols, c * w + w); ++b) cell.push_back(in(a, b));
      double v = max ? cell[0] : 0.0;
      for (double x : cell) v = max ? std::max(v, x) : v + x;
      out(r, c) = max ? v : v / static_cast<double>(cell.size());
    }
  return out;
}

// Non-interpolated PR area from every distinct threshold, each evaluated
// from scratch.
inline double auprc(const std::vector<double>& raw, const std::vector<std::uint8_t>& mask) {
  double mx = *std::max_element(raw.begin(), raw.end());
  std::vector<double> s(raw.size());
  double total = 0.0;
  for (std::size_t t = 0; t < raw.size(); ++t) total += (s[t] = std::exp(raw[t] - mx));
  for (auto& v : s) v /= total;
  double positives = 0.0;
  for (auto g : mask) positives += g;
  std::set<double, std::greater<double>> thresholds(s.begin(), s.end());
  double area = 0.0, prev_recall = 0.0;
  for (double tau : thresholds) {
    double tp = 0.0, sel = 0.0;
    for (std::size_t t = 0; t < s.size(); ++t)
      if (s[t] >= tau) {
        sel += 1.0;
        tp += mask[t];
      }
    const double recall = tp / positives;
    area += (recall - prev_recall) * (tp / sel);
    prev_recall = recall;
  }
  return area;
}

// Adam for a scalar sequence.
struct ScalarAdam {
  double lr = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double m = 0.0, v = 0.0;
  int t = 0;
  double step(double theta, double g) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    return theta - lr * mh / (std::sqrt(vh) + eps);
  }
};

// Central difference of f along coordinate i.
inline double central_difference(const std::function<double(const std::vector<double>&)>& f,
                                 std::vector<double> x, std::size_t i, double h = 1e-5) {
  const double x0 = x[i];
  x[i] = x0 + h;
  const double up = f(x);
  x[i] = x0 - h;
  const double down = f(x);
  return (up - down) / (2 * h);
}

inline double rel_err(double a, double b) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-6});
}

}  // namespace oracle
