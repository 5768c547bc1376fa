#include <doctest.h>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "timesliver/error.hpp"
#include "timesliver/kernels.hpp"

using namespace timesliver;
using namespace timesliver::kernels;

namespace {

Conv1dParams random_conv(std::size_t q, std::size_t m, std::size_t v, std::uint64_t seed) {
  Rng rng(seed);
  Conv1dParams p{Tensor3(q, m, v), std::vector<double>(q)};
  for (auto& w : p.kernels.data) w = rng.uniform(-1, 1);
  for (auto& b : p.bias) b = rng.uniform(-1, 1);
  return p;
}

// Scalar loss sum(out .* weights) so every output entry matters.
double weighted_sum(const Matrix& out, const Matrix& w) {
  double s = 0.0;
  for (std::size_t e = 0; e < out.size(); ++e) s += out.data[e] * w.data[e];
  return s;
}

}  // namespace

TEST_SUITE("conv1d") {
  TEST_CASE("sum filter over [1,2,3]") {
    Matrix x(3, 1);
    x.data = {1, 2, 3};
    Conv1dParams p{Tensor3(1, 3, 1, 1.0), {0.0}};
    const auto out = conv1d_forward(x, p);
    CHECK(out.rows == 1);
    CHECK(out.cols == 1);
    CHECK(out(0, 0) == 6.0);
  }

  TEST_CASE("zero input gives the bias on every row") {
    auto p = random_conv(3, 2, 2, 5);
    const auto out = conv1d_forward(Matrix(6, 2), p);
    for (std::size_t k = 0; k < out.rows; ++k)
      for (std::size_t j = 0; j < 3; ++j) CHECK(out(k, j) == p.bias[j]);
  }

  TEST_CASE("random 8x2 input, 4 filters of width 3 match the loop oracle") {
    const auto x = oracle::random_matrix(8, 2, 11);
    const auto p = random_conv(4, 3, 2, 12);
    const auto out = conv1d_forward(x, p);
    const auto ref = oracle::conv1d(x, p.kernels, p.bias);
    REQUIRE(out.rows == 6);
    REQUIRE(out.cols == 4);
    for (std::size_t e = 0; e < out.size(); ++e) CHECK(out.data[e] == doctest::Approx(ref.data[e]).epsilon(1e-14));
  }

  TEST_CASE("output length is L - m + 1 and m > L is rejected") {
    for (std::size_t L = 1; L <= 9; ++L)
      for (std::size_t m = 1; m <= L; ++m)
        CHECK(conv1d_forward(Matrix(L, 1), random_conv(2, m, 1, L * 10 + m)).rows == L - m + 1);
    CHECK_THROWS_AS(conv1d_forward(Matrix(3, 1), random_conv(1, 4, 1, 1)), Error);
  }

  TEST_CASE("zero upstream gradient gives zero gradients") {
    const auto x = oracle::random_matrix(7, 3, 2);
    const auto p = random_conv(2, 3, 3, 3);
    const auto g = conv1d_backward(Matrix(5, 2), x, p);
    for (double v : g.input.data) CHECK(v == 0.0);
    for (double v : g.kernels.data) CHECK(v == 0.0);
    for (double v : g.bias) CHECK(v == 0.0);
  }

  TEST_CASE("single element: d out / d kernel is the input value") {
    Matrix x(1, 1);
    x.data = {3.5};
    Conv1dParams p{Tensor3(1, 1, 1, 2.0), {0.0}};
    Matrix go(1, 1, 1.0);
    const auto g = conv1d_backward(go, x, p);
    CHECK(g.kernels.data[0] == 3.5);
    CHECK(g.input.data[0] == 2.0);
    CHECK(g.bias[0] == 1.0);
  }

  TEST_CASE("backward matches central differences") {
    const auto x = oracle::random_matrix(9, 2, 21);
    const auto p = random_conv(3, 4, 2, 22);
    const auto w = oracle::random_matrix(6, 3, 23);
    const auto g = conv1d_backward(w, x, p);

    for (std::size_t e = 0; e < x.size(); ++e) {
      auto f = [&](const std::vector<double>& xs) {
        Matrix xx = x;
        xx.data = xs;
        return weighted_sum(conv1d_forward(xx, p), w);
      };
      CHECK(oracle::rel_err(g.input.data[e], oracle::central_difference(f, x.data, e)) < 1e-4);
    }
    for (std::size_t e = 0; e < p.kernels.size(); ++e) {
      auto f = [&](const std::vector<double>& ks) {
        auto pp = p;
        pp.kernels.data = ks;
        return weighted_sum(conv1d_forward(x, pp), w);
      };
      CHECK(oracle::rel_err(g.kernels.data[e], oracle::central_difference(f, p.kernels.data, e)) < 1e-4);
    }
    for (std::size_t e = 0; e < p.bias.size(); ++e) {
      auto f = [&](const std::vector<double>& bs) {
        auto pp = p;
        pp.bias = bs;
        return weighted_sum(conv1d_forward(x, pp), w);
      };
      CHECK(oracle::rel_err(g.bias[e], oracle::central_difference(f, p.bias, e)) < 1e-4);
    }
  }

  TEST_CASE("backward rejects a mismatched upstream gradient") {
    const auto x = oracle::random_matrix(6, 1, 1);
    CHECK_THROWS_AS(conv1d_backward(Matrix(2, 2), x, random_conv(2, 3, 1, 1)), Error);
  }
}

TEST_SUITE("dense") {
  TEST_CASE("identity weights pass features through plus bias") {
    Matrix w(3, 3);
    for (int i = 0; i < 3; ++i) w(i, i) = 1.0;
    const std::vector<double> x{1, -2, 3}, b{0.5, 0.5, 0.5};
    const auto y = dense_forward(x, w, b);
    CHECK(y == std::vector<double>{1.5, -1.5, 3.5});
  }

  TEST_CASE("zero weights give the bias") {
    const std::vector<double> x{4, 5}, b{-1, 2, 7};
    CHECK(dense_forward(x, Matrix(3, 2), b) == b);
  }

  TEST_CASE("backward matches central differences") {
    const auto w = oracle::random_matrix(3, 5, 31);
    const auto xm = oracle::random_matrix(1, 5, 32);
    const std::vector<double> x = xm.data, b{0.1, -0.2, 0.3}, up{0.7, -1.1, 0.4};
    const auto g = dense_backward(up, x, w);
    auto loss = [&](const std::vector<double>& xs, const Matrix& ww, const std::vector<double>& bb) {
      const auto y = dense_forward(xs, ww, bb);
      double s = 0.0;
      for (std::size_t c = 0; c < y.size(); ++c) s += y[c] * up[c];
      return s;
    };
    for (std::size_t i = 0; i < x.size(); ++i)
      CHECK(oracle::rel_err(g.features[i],
                            oracle::central_difference([&](const auto& v) { return loss(v, w, b); }, x, i)) < 1e-4);
    for (std::size_t e = 0; e < w.size(); ++e)
      CHECK(oracle::rel_err(g.weights.data[e], oracle::central_difference(
                                                   [&](const auto& v) {
                                                     Matrix ww = w;
                                                     ww.data = v;
                                                     return loss(x, ww, b);
                                                   },
                                                   w.data, e)) < 1e-4);
    for (std::size_t c = 0; c < b.size(); ++c)
      CHECK(oracle::rel_err(g.bias[c],
                            oracle::central_difference([&](const auto& v) { return loss(x, w, v); }, b, c)) < 1e-4);
  }
}

TEST_SUITE("pooling") {
  TEST_CASE("2x2 window 2") {
    Matrix x(2, 2);
    x.data = {1, 2, 3, 4};
    CHECK(avgpool2d(x, 2).data == std::vector<double>{2.5});
    CHECK(maxpool2d(x, 2).output.data == std::vector<double>{4.0});
  }

  TEST_CASE("window 1 is the identity") {
    const auto x = oracle::random_matrix(4, 3, 41);
    CHECK(avgpool2d(x, 1) == x);
    CHECK(maxpool2d(x, 1).output == x);
  }

  TEST_CASE("random 5x7 window 2 matches the loop oracle") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto x = oracle::random_matrix(5, 7, 100 + seed);
      const auto avg = avgpool2d(x, 2);
      const auto ref_avg = oracle::pool(x, 2, false);
      REQUIRE(avg.rows == 3);
      REQUIRE(avg.cols == 4);
      for (std::size_t e = 0; e < avg.size(); ++e) CHECK(avg.data[e] == doctest::Approx(ref_avg.data[e]).epsilon(1e-14));
      CHECK(maxpool2d(x, 2).output == oracle::pool(x, 2, true));
    }
  }

  TEST_CASE("window 0 is rejected") {
    CHECK_THROWS_AS(avgpool2d(Matrix(2, 2), 0), Error);
    CHECK_THROWS_AS(maxpool2d(Matrix(2, 2), 0), Error);
  }

  TEST_CASE("backward: avg spreads uniformly, max routes to the first argmax") {
    Matrix x(3, 3, 1.0);  // all tied
    Matrix go(2, 2);
    go.data = {1, 2, 3, 4};
    const auto ga = avgpool2d_backward(go, 3, 3, 2);
    CHECK(ga(0, 0) == 0.25);
    CHECK(ga(0, 2) == 1.0);  // truncated 2x1 window
    CHECK(ga(2, 2) == 4.0);  // truncated 1x1 window
    const auto mp = maxpool2d(x, 2);
    const auto gm = maxpool2d_backward(go, mp.argmax, 3, 3);
    CHECK(gm(0, 0) == 1.0);
    CHECK(gm(0, 1) == 0.0);
    CHECK(gm(0, 2) == 2.0);
    CHECK(gm(2, 0) == 3.0);
  }

  TEST_CASE("backward matches central differences") {
    const auto x = oracle::random_matrix(5, 7, 51);
    const auto w = oracle::random_matrix(3, 4, 52);
    const auto ga = avgpool2d_backward(w, 5, 7, 2);
    const auto mp = maxpool2d(x, 2);
    const auto gm = maxpool2d_backward(w, mp.argmax, 5, 7);
    for (std::size_t e = 0; e < x.size(); ++e) {
      auto favg = [&](const std::vector<double>& v) {
        Matrix m = x;
        m.data = v;
        return weighted_sum(avgpool2d(m, 2), w);
      };
      auto fmax = [&](const std::vector<double>& v) {
        Matrix m = x;
        m.data = v;
        return weighted_sum(maxpool2d(m, 2).output, w);
      };
      CHECK(oracle::rel_err(ga.data[e], oracle::central_difference(favg, x.data, e)) < 1e-4);
      CHECK(oracle::rel_err(gm.data[e], oracle::central_difference(fmax, x.data, e)) < 1e-4);
    }
  }
}

TEST_SUITE("softmax cross-entropy") {
  TEST_CASE("uniform logits over 4 classes give ln 4") {
    const std::vector<double> logits(4, 0.3);
    CHECK(softmax_cross_entropy(logits, 2).loss == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  }

  TEST_CASE("loss falls monotonically toward 0 as the label logit grows") {
    double prev = std::numeric_limits<double>::infinity();
    for (double z = 0.0; z <= 60.0; z += 2.0) {
      const double loss = softmax_cross_entropy(std::vector<double>{0.0, z, -1.0}, 1).loss;
      CHECK(loss >= 0.0);
      CHECK(loss < prev);
      prev = loss;
    }
    CHECK(prev < 1e-20);
  }

  TEST_CASE("gradient is softmax minus one-hot, sums to 0, matches differences") {
    const std::vector<double> logits{0.2, -1.3, 2.2, 0.7, -0.1};
    const auto r = softmax_cross_entropy(logits, 3);
    double sum = 0.0;
    for (double g : r.grad) sum += g;
    CHECK(std::fabs(sum) < 1e-15);
    for (std::size_t c = 0; c < logits.size(); ++c) {
      auto f = [](const std::vector<double>& z) { return softmax_cross_entropy(z, 3).loss; };
      CHECK(oracle::rel_err(r.grad[c], oracle::central_difference(f, logits, c)) < 1e-4);
    }
  }

  TEST_CASE("large logits stay finite") {
    const auto r = softmax_cross_entropy(std::vector<double>{1000.0, 999.0}, 1);
    CHECK(r.loss == doctest::Approx(std::log1p(std::exp(1.0))).epsilon(1e-12));
  }

  TEST_CASE("non-finite logits and bad labels are rejected") {
    CHECK_THROWS_AS(softmax_cross_entropy(std::vector<double>{0.0, NAN}, 0), Error);
    CHECK_THROWS_AS(softmax_cross_entropy(std::vector<double>{0.0, INFINITY}, 0), Error);
    CHECK_THROWS_AS(softmax_cross_entropy(std::vector<double>{0.0, 1.0}, 2), Error);
    CHECK_THROWS_AS(softmax_cross_entropy(std::vector<double>{0.0}, 0), Error);
  }
}

TEST_SUITE("adam") {
  TEST_CASE("zero gradient leaves parameters unchanged") {
    std::vector<double> p{1.0, -2.0, 3.0};
    const auto before = p;
    AdamState s(3, {});
    for (int i = 0; i < 3; ++i) adam_step(p, std::vector<double>(3, 0.0), s);
    CHECK(p == before);
    CHECK(s.step == 3);
  }

  TEST_CASE("first step moves by -sign(g) * lr") {
    std::vector<double> p{0.0, 0.0, 0.0};
    AdamState s(3, {0.01, 0.9, 0.999, 1e-8});
    adam_step(p, std::vector<double>{3.0, -0.5, 1e-3}, s);
    CHECK(p[0] == doctest::Approx(-0.01).epsilon(1e-6));
    CHECK(p[1] == doctest::Approx(0.01).epsilon(1e-6));
    CHECK(p[2] == doctest::Approx(-0.01).epsilon(1e-4));
  }

  TEST_CASE("three steps match the scalar recurrence") {
    std::vector<double> p{0.5, -0.25};
    AdamState s(2, {0.003, 0.9, 0.999, 1e-8});
    oracle::ScalarAdam a0{0.003}, a1{0.003};
    double r0 = 0.5, r1 = -0.25;
    const double g0[] = {0.3, -0.1, 0.7}, g1[] = {-2.0, 0.5, 0.0};
    for (int t = 0; t < 3; ++t) {
      adam_step(p, std::vector<double>{g0[t], g1[t]}, s);
      r0 = a0.step(r0, g0[t]);
      r1 = a1.step(r1, g1[t]);
      CHECK(p[0] == doctest::Approx(r0).epsilon(1e-14));
      CHECK(p[1] == doctest::Approx(r1).epsilon(1e-14));
    }
  }

  TEST_CASE("shape mismatch is rejected") {
    std::vector<double> p(3);
    AdamState s(3, {});
    CHECK_THROWS_AS(adam_step(p, std::vector<double>(2), s), Error);
  }
}

TEST_SUITE("grad_check") {
  TEST_CASE("linear function agrees to 1e-10") {
    const std::vector<double> a{1.5, -2.0, 0.25, 4.0};
    auto f = [&](std::span<const double> x) {
      double s = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) s += a[i] * x[i];
      return s;
    };
    auto g = [&](std::span<const double>) { return a; };
    const auto r = grad_check(f, g, std::vector<double>{0.1, 0.2, 0.3, 0.4});
    CHECK(r.probed == 4);
    CHECK(r.max_relative_error < 1e-10);
    CHECK(r.passed);
  }

  TEST_CASE("a corrupted gradient is reported") {
    auto f = [](std::span<const double> x) { return x[0] * x[0] + std::sin(x[1]); };
    auto g = [](std::span<const double> x) {
      return std::vector<double>{2 * x[0], std::cos(x[1]) * 1.01};  // 1% off
    };
    const auto r = grad_check(f, g, std::vector<double>{0.3, 0.4});
    CHECK_FALSE(r.passed);
    CHECK(r.worst_index == 1);
    CHECK(r.max_relative_error > 1e-4);
  }

  TEST_CASE("kernels are bit-deterministic") {
    const auto x = oracle::random_matrix(20, 3, 9);
    const auto p = random_conv(5, 4, 3, 10);
    CHECK(conv1d_forward(x, p) == conv1d_forward(x, p));
    const auto go = oracle::random_matrix(17, 5, 11);
    const auto a = conv1d_backward(go, x, p), b = conv1d_backward(go, x, p);
    CHECK(a.kernels == b.kernels);
    CHECK(a.input == b.input);
  }
}
