#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "timesliver/datasets.hpp"
#include "timesliver/error.hpp"
#include "timesliver/symbolic.hpp"

using namespace timesliver;
using namespace timesliver::symbolic;

namespace {

SymbolMatrix symbols_of(std::size_t L, std::size_t v, std::vector<std::uint16_t> s) {
  return SymbolMatrix{L, v, std::move(s)};
}

SymbolMatrix random_symbols(std::size_t L, std::size_t v, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  SymbolMatrix s{L, v, std::vector<std::uint16_t>(L * v)};
  for (auto& x : s.symbols) x = static_cast<std::uint16_t>(rng.integer(1, static_cast<std::int64_t>(n)));
  return s;
}

}  // namespace

TEST_SUITE("fit_bins") {
  TEST_CASE("median of {0,1,2,3} with two quantile bins") {
    const std::vector<double> values{0, 1, 2, 3};
    const auto e = fit_bins(values, 1, {2, 1, BinStrategy::Quantile});
    REQUIRE(e.edges.size() == 1);
    CHECK(e.edges[0] == std::vector<double>{1.5});
  }

  TEST_CASE("uniform bins on [0,10] with n=5") {
    const std::vector<double> values{0, 3, 10, 7};
    const auto e = fit_bins(values, 1, {5, 1, BinStrategy::Uniform});
    CHECK(e.edges[0] == std::vector<double>{2, 4, 6, 8});
  }

  TEST_CASE("per-variate pooling over interleaved layout") {
    // Two variates: column 0 is 0..9, column 1 is 100..109.
    std::vector<double> values;
    for (int t = 0; t < 10; ++t) {
      values.push_back(t);
      values.push_back(100 + t);
    }
    const auto e = fit_bins(values, 2, {2, 1, BinStrategy::Quantile});
    CHECK(e.edges[0][0] == doctest::Approx(4.5));
    CHECK(e.edges[1][0] == doctest::Approx(104.5));
  }

  TEST_CASE("FreqSum training split with n=15: 14 monotone edges per variate") {
    const auto data = datasets::generate({"freqsum", 200, 7, {}, 1});
    const auto e = fit_bins(std::span<const float>(data.x), data.variates, {15, 1, BinStrategy::Quantile});
    REQUIRE(e.variates() == 6);
    for (const auto& list : e.edges) {
      REQUIRE(list.size() == 14);
      for (std::size_t k = 1; k < list.size(); ++k) CHECK(list[k - 1] <= list[k]);
    }
  }

  TEST_CASE("constant variate: uniform edges collapse, every value maps to one symbol") {
    const std::vector<double> values(20, 3.0);
    const auto e = fit_bins(values, 1, {4, 1, BinStrategy::Uniform});
    for (double edge : e.edges[0]) CHECK(edge == 3.0);
    CHECK(symbol_of(3.0, e.edges[0]) == 1);
  }

  TEST_CASE("fewer distinct values than bins keeps duplicate edges") {
    const std::vector<double> values{1, 1, 1, 2, 2, 2};
    const auto e = fit_bins(values, 1, {5, 1, BinStrategy::Quantile});
    CHECK(e.edges[0].size() == 4);
  }

  TEST_CASE("invalid configurations are rejected") {
    const std::vector<double> values{0, 1, 2};
    CHECK_THROWS_AS(fit_bins(values, 1, {1, 1, BinStrategy::Quantile}), Error);
    CHECK_THROWS_AS(fit_bins(values, 1, {3, 2, BinStrategy::Quantile}), Error);
    CHECK_THROWS_AS(fit_bins(std::vector<double>{}, 1, {3, 1, BinStrategy::Quantile}), Error);
    CHECK_THROWS_AS(fit_bins(std::vector<double>{0.0, NAN}, 1, {2, 1, BinStrategy::Quantile}), Error);
  }
}

TEST_SUITE("discretize") {
  TEST_CASE("boundaries: below all edges is 1, above all is n, on an edge goes low") {
    const std::vector<double> edges{0.0, 1.0, 2.0};
    CHECK(symbol_of(-5.0, edges) == 1);
    CHECK(symbol_of(9.0, edges) == 4);
    CHECK(symbol_of(1.0, edges) == 2);
    CHECK(symbol_of(1.0000001, edges) == 3);
  }

  TEST_CASE("constant series gives a constant symbol column") {
    BinEdges e{4, {{-1.0, 0.0, 1.0}}};
    const auto s = discretize(Matrix(12, 1, 0.5), e);
    for (auto sym : s.symbols) CHECK(sym == 3);
  }

  TEST_CASE("monotone transform with refit quantile edges gives the same symbols") {
    const auto x = oracle::random_matrix(300, 3, 77, -2.0, 2.0);
    Matrix y = x;
    for (std::size_t t = 0; t < y.rows; ++t) {
      y(t, 0) = std::exp(x(t, 0));
      y(t, 1) = 5.0 * x(t, 1) - 3.0;
      y(t, 2) = std::pow(x(t, 2), 3) + x(t, 2);
    }
    const DiscretizerConfig cfg{10, 1, BinStrategy::Quantile};
    const auto sx = discretize(x, fit_bins(x.data, 3, cfg));
    const auto sy = discretize(y, fit_bins(y.data, 3, cfg));
    CHECK(sx == sy);
  }
}

TEST_SUITE("one_hot") {
  TEST_CASE("L=2, v=1, n=2") {
    const auto o = one_hot(symbols_of(2, 1, {1, 2}), 2);
    CHECK(o.data == std::vector<double>{1, 0, 0, 1});
  }

  TEST_CASE("v=2 rows have one 1 per block") {
    const auto o = one_hot(random_symbols(9, 2, 4, 3), 4);
    for (std::size_t t = 0; t < o.rows; ++t) {
      double a = 0, b = 0;
      for (std::size_t j = 0; j < 4; ++j) {
        a += o(t, j);
        b += o(t, 4 + j);
      }
      CHECK(a == 1.0);
      CHECK(b == 1.0);
    }
  }

  TEST_CASE("argmax per block recovers the symbols") {
    const auto s = random_symbols(40, 3, 7, 5);
    const auto o = one_hot(s, 7);
    for (std::size_t t = 0; t < s.length; ++t)
      for (std::size_t c = 0; c < 3; ++c) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < 7; ++j)
          if (o(t, c * 7 + j) > o(t, c * 7 + best)) best = j;
        CHECK(best + 1 == s(t, c));
      }
  }

  TEST_CASE("out-of-range symbols are rejected") {
    CHECK_THROWS_AS(one_hot(symbols_of(2, 1, {0, 1}), 2), Error);
    CHECK_THROWS_AS(one_hot(symbols_of(2, 1, {1, 3}), 2), Error);
  }

  TEST_CASE("re-discretizing symbols with unit-spaced edges is idempotent") {
    const auto s = random_symbols(30, 2, 6, 8);
    Matrix as_values(30, 2);
    for (std::size_t e = 0; e < s.symbols.size(); ++e) as_values.data[e] = s.symbols[e];
    BinEdges unit{6, {{1, 2, 3, 4, 5}, {1, 2, 3, 4, 5}}};
    const auto again = discretize(as_values, unit);
    CHECK(again == s);
    CHECK(one_hot(again, 6) == one_hot(s, 6));
  }
}

TEST_SUITE("compose") {
  TEST_CASE("L=3, symbols [1,1,2], m=2") {
    const auto z = compose(one_hot(symbols_of(3, 1, {1, 1, 2}), 2), 2);
    CHECK(z.segment == 2);
    CHECK(z.values.data == std::vector<double>{1, 0, 0.5, 0.5});
  }

  TEST_CASE("m=1 reproduces O") {
    const auto o = one_hot(random_symbols(15, 2, 5, 9), 5);
    CHECK(compose(o, 1).values == o);
  }

  TEST_CASE("m=L gives the column means of O") {
    const auto o = one_hot(random_symbols(12, 2, 3, 10), 3);
    const auto z = compose(o, 12).values;
    REQUIRE(z.rows == 1);
    for (std::size_t j = 0; j < o.cols; ++j) {
      double mean = 0;
      for (std::size_t t = 0; t < 12; ++t) mean += o(t, j);
      CHECK(z(0, j) == doctest::Approx(mean / 12).epsilon(1e-15));
    }
  }

  TEST_CASE("m > L is rejected") {
    CHECK_THROWS_AS(compose(Matrix(3, 2), 4), Error);
    CHECK_THROWS_AS(compose_symbols(symbols_of(3, 1, {1, 1, 1}), 2, 4), Error);
  }

  TEST_CASE("every row block sums to 1 and kappa = L - m + 1") {
    for (std::size_t m : {1, 3, 7, 20}) {
      const auto s = random_symbols(50, 3, 8, m);
      const auto z = compose_symbols(s, 8, m).values;
      CHECK(z.rows == 50 - m + 1);
      for (std::size_t k = 0; k < z.rows; ++k)
        for (std::size_t c = 0; c < 3; ++c) {
          double block = 0;
          for (std::size_t j = 0; j < 8; ++j) block += z(k, c * 8 + j);
          CHECK(std::fabs(block - 1.0) < 1e-12);
        }
    }
  }

  TEST_CASE("symbol-stream compose matches Eq.-style sliding mean") {
    const auto s = random_symbols(33, 2, 5, 12);
    const auto a = compose_symbols(s, 5, 4).values;
    const auto b = compose(one_hot(s, 5), 4).values;
    REQUIRE(a.rows == b.rows);
    for (std::size_t e = 0; e < a.size(); ++e) CHECK(a.data[e] == doctest::Approx(b.data[e]).epsilon(1e-15));
  }

  TEST_CASE("compose is linear in relaxed O") {
    const auto o1 = oracle::random_matrix(20, 6, 1);
    const auto o2 = oracle::random_matrix(20, 6, 2);
    Matrix mix(20, 6);
    for (std::size_t e = 0; e < mix.size(); ++e) mix.data[e] = 2.5 * o1.data[e] - 0.75 * o2.data[e];
    const auto z1 = compose(o1, 5).values, z2 = compose(o2, 5).values, zm = compose(mix, 5).values;
    for (std::size_t e = 0; e < zm.size(); ++e)
      CHECK(zm.data[e] == doctest::Approx(2.5 * z1.data[e] - 0.75 * z2.data[e]).epsilon(1e-12));
  }
}
