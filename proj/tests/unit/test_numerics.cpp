#include <doctest.h>

#include <cmath>

#include "conceptprobe/error.hpp"
#include "conceptprobe/numerics.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace cprobe;

namespace {

Matrix rows(std::initializer_list<std::initializer_list<double>> r) {
  oracle::Mat m;
  for (const auto& row : r) m.emplace_back(row);
  return testing::to_eigen(m);
}

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

}  // namespace

TEST_SUITE("numerics") {
  TEST_CASE("standardizer: two points") {
    const auto s = fit_standardizer(rows({{1}, {3}}));
    CHECK(s.mean(0) == 2.0);
    CHECK(s.std(0) == 1.0);
    CHECK(s.floored.empty());
  }

  TEST_CASE("standardizer: constant column is floored") {
    const auto m = rows({{5}, {5}, {5}});
    const auto s = fit_standardizer(m);
    CHECK(s.std(0) == 1.0);
    CHECK(s.floored == std::vector<std::size_t>{0});
    const auto z = apply_standardizer_rows(s, m);
    for (Eigen::Index i = 0; i < z.rows(); ++i) CHECK(z(i, 0) == 0.0);
  }

  TEST_CASE("standardizer: population moments") {
    const auto s = fit_standardizer(rows({{0, 10}, {2, 10}, {4, 10}}));
    CHECK(s.mean(0) == 2.0);
    CHECK(s.mean(1) == 10.0);
    CHECK(s.std(0) == doctest::Approx(std::sqrt(8.0 / 3.0)).epsilon(1e-15));
    CHECK(s.std(1) == 1.0);
    CHECK(s.floored == std::vector<std::size_t>{1});
  }

  TEST_CASE("standardizer matches oracle moments on random data") {
    Rng rng(3);
    const auto m = testing::random_matrix(30, 6, rng);
    const auto s = fit_standardizer(testing::to_eigen(m));
    const auto z = apply_standardizer_rows(s, testing::to_eigen(m));
    for (std::size_t j = 0; j < 6; ++j) {
      const auto col = testing::column(m, j);
      CHECK(std::abs(s.mean(static_cast<Eigen::Index>(j)) - oracle::pop_mean(col)) < 1e-12);
      CHECK(std::abs(s.std(static_cast<Eigen::Index>(j)) - oracle::pop_sd(col)) < 1e-12);
      CHECK(std::abs(z.col(static_cast<Eigen::Index>(j)).mean()) < 1e-10);
      const double sd = std::sqrt(z.col(static_cast<Eigen::Index>(j)).squaredNorm() / 30.0);
      CHECK(std::abs(sd - 1.0) < 1e-8);
    }
  }

  TEST_CASE("apply_standardizer examples") {
    Standardizer s;
    s.mean = vec({2});
    s.std = vec({1});
    CHECK(apply_standardizer(s, vec({3}))(0) == 1.0);
    CHECK(apply_standardizer(s, vec({2}))(0) == 0.0);
    s.mean = vec({0, 0});
    s.std = vec({2, 4});
    CHECK(apply_standardizer(s, vec({2, 4})) == vec({1, 1}));
  }

  TEST_CASE("standardizer errors") {
    CHECK_THROWS_AS(fit_standardizer(rows({{1, 2}})), NumericError);
    CHECK_THROWS_AS(fit_standardizer(rows({{1}, {NAN}})), NumericError);
  }

  TEST_CASE("pca: collinear points") {
    const auto r = pca_first_component(rows({{1, 1}, {-1, -1}, {2, 2}, {-2, -2}}), 2);
    CHECK(r.component(0) == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(r.component(1) == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(r.explained_ratios[0] == doctest::Approx(1.0));
  }

  TEST_CASE("pca: anisotropic cross") {
    const auto r = pca_first_component(rows({{1, 0}, {-1, 0}, {0, 0.1}, {0, -0.1}}), 2);
    CHECK(std::abs(r.component(0) - 1.0) < 1e-12);
    CHECK(std::abs(r.component(1)) < 1e-12);
    REQUIRE(r.explained_ratios.size() == 2);
    // Oracle: covariance diag(2/3, 0.02/3) -> ratios 1/1.01 and 0.01/1.01.
    CHECK(std::abs(r.explained_ratios[0] - 1.0 / 1.01) < 1e-12);
    CHECK(std::abs(r.explained_ratios[1] - 0.01 / 1.01) < 1e-12);
  }

  TEST_CASE("pca matches the dense eigensolver, both routes") {
    Rng rng(17);
    for (auto [n, d] : {std::pair<std::size_t, std::size_t>{12, 5}, {8, 20}, {64, 20}}) {
      CAPTURE(n);
      CAPTURE(d);
      const auto m = testing::random_matrix(n, d, rng);
      const auto r = pca_first_component(testing::to_eigen(m), 5);
      const auto [vals, vecs] = oracle::jacobi_eigen(oracle::covariance(m));
      CHECK(testing::max_abs_diff_up_to_sign(r.component, testing::column(vecs, 0)) < 1e-8);
      double total = 0.0;
      for (double v : vals) total += std::max(v, 0.0);
      for (std::size_t k = 0; k < r.explained_ratios.size(); ++k)
        CHECK(std::abs(r.explained_ratios[k] - vals[k] / total) < 1e-8);
    }
  }

  TEST_CASE("pca on a wide matrix equals the oracle on a slice") {
    Rng rng(99);
    const auto wide = testing::random_matrix(64, 5120, rng);
    oracle::Mat slice;
    for (const auto& r : wide) slice.emplace_back(r.begin(), r.begin() + 20);
    const auto r = pca_first_component(testing::to_eigen(slice), 3);
    const auto [vals, vecs] = oracle::jacobi_eigen(oracle::covariance(slice));
    CHECK(testing::max_abs_diff_up_to_sign(r.component, testing::column(vecs, 0)) < 1e-8);
    const auto full = pca_first_component(testing::to_eigen(wide), 10);
    CHECK(full.component.size() == 5120);
    CHECK(std::abs(full.component.norm() - 1.0) < 1e-10);
    CHECK(full.explained_ratios.size() == 10);
  }

  TEST_CASE("pca is scale invariant and sign fixed") {
    Rng rng(5);
    const auto m = testing::to_eigen(testing::random_matrix(20, 6, rng));
    const auto a = pca_first_component(m, 4);
    const auto b = pca_first_component(3.5 * m, 4);
    CHECK((a.component - b.component).cwiseAbs().maxCoeff() < 1e-10);
    for (std::size_t k = 0; k < 4; ++k)
      CHECK(std::abs(a.explained_ratios[k] - b.explained_ratios[k]) < 1e-10);
    Eigen::Index arg;
    a.component.cwiseAbs().maxCoeff(&arg);
    CHECK(a.component(arg) > 0.0);
    for (std::size_t k = 1; k < a.explained_ratios.size(); ++k)
      CHECK(a.explained_ratios[k] <= a.explained_ratios[k - 1]);
  }

  TEST_CASE("pca rejects zero variance") {
    CHECK_THROWS_AS(pca_first_component(rows({{1, 1}, {1, 1}}), 2), NumericError);
  }

  TEST_CASE("projection") {
    const Vector u = vec({0.6, 0.8});
    CHECK(project(u, u) == doctest::Approx(1.0));
    CHECK(project(u, -2.0 * u) == doctest::Approx(-2.0));
    CHECK(project(u, vec({0.8, -0.6})) == doctest::Approx(0.0));
    const Vector v = vec({1.5, -3}), w = vec({0.25, 7});
    CHECK(std::abs(project(u, 2.0 * v - 3.0 * w) - (2.0 * project(u, v) - 3.0 * project(u, w))) < 1e-10);
  }

  TEST_CASE("pearson") {
    const std::vector<double> x{1, 2, 3, 4};
    std::vector<double> y1, y2;
    for (double v : x) {
      y1.push_back(2 * v + 1);
      y2.push_back(-v);
    }
    CHECK(pearson_r(x, y1) == doctest::Approx(1.0));
    CHECK(pearson_r(x, y2) == doctest::Approx(-1.0));
    const std::vector<double> y{1, 2, 3, 100};
    CHECK(std::abs(pearson_r(x, y) - oracle::pearson(x, y)) < 1e-12);
    std::vector<double> ya;
    for (double v : y) ya.push_back(3.0 * v - 7.0);
    CHECK(std::abs(pearson_r(x, ya) - pearson_r(x, y)) < 1e-12);
    CHECK_THROWS_AS(pearson_r(std::vector<double>{1, 1, 1}, x), NumericError);
    CHECK_THROWS_AS(pearson_r(std::vector<double>{1, 2, 3}, x), NumericError);
    CHECK_THROWS_AS(pearson_r(std::vector<double>{1, 2}, std::vector<double>{2, 1}), NumericError);
  }

  TEST_CASE("spearman uses average ranks") {
    CHECK(average_ranks(std::vector<double>{10, 20, 20, 5}) == std::vector<double>{2, 3.5, 3.5, 1});
    const std::vector<double> x{1, 2, 3, 4, 5}, y{1, 4, 9, 16, 1000};
    CHECK(spearman_rho(x, y) == doctest::Approx(1.0));
  }

  TEST_CASE("zscores") {
    const auto z = zscores(std::vector<double>{1, 2, 3});
    CHECK(z[0] == doctest::Approx(-1.224744871391589));
    CHECK(z[1] == doctest::Approx(0.0));
    CHECK(z[2] == doctest::Approx(1.224744871391589));
    CHECK_THROWS_AS(zscores(std::vector<double>{4}), NumericError);
    CHECK_THROWS_AS(zscores(std::vector<double>{4, 4}), NumericError);
  }

  TEST_CASE("ols: exact line") {
    const auto X = rows({{1, 0}, {1, 1}, {1, 2}});
    const auto r = ols_fit(vec({1, 3, 5}), X, {"const", "x"});
    CHECK(r.coefficient("const") == doctest::Approx(1.0));
    CHECK(r.coefficient("x") == doctest::Approx(2.0));
    CHECK(r.r_squared == doctest::Approx(1.0));
    CHECK(r.n == 3);
    CHECK_THROWS_AS(r.index_of("nope"), UsageError);
  }

  TEST_CASE("ols: noise-free plane") {
    Rng rng(8);
    oracle::Mat X;
    std::vector<double> y;
    for (int i = 0; i < 10; ++i) {
      const double a = rng.normal(), b = rng.normal();
      X.push_back({1.0, a, b});
      y.push_back(0.5 - a + 2 * b);
    }
    const auto r = ols_fit(Eigen::Map<Vector>(y.data(), 10), testing::to_eigen(X), {"c", "a", "b"});
    CHECK(std::abs(r.coefficients[0] - 0.5) < 1e-10);
    CHECK(std::abs(r.coefficients[1] + 1.0) < 1e-10);
    CHECK(std::abs(r.coefficients[2] - 2.0) < 1e-10);
  }

  TEST_CASE("ols matches the normal equations") {
    Rng rng(21);
    auto X = testing::random_matrix(50, 3, rng);
    std::vector<double> y;
    for (auto& row : X) {
      row[0] = 1.0;
      y.push_back(0.3 + 1.2 * row[1] - 0.7 * row[2] + rng.normal());
    }
    const auto r = ols_fit(Eigen::Map<Vector>(y.data(), 50), testing::to_eigen(X), {"c", "a", "b"});
    const auto o = oracle::normal_equations(X, y);
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(std::abs(r.coefficients[k] - o.beta[k]) < 1e-8);
      CHECK(std::abs(r.std_errors[k] - o.se[k]) < 1e-8);
      CHECK(std::abs(r.t_stats[k] - o.t[k]) < 1e-8);
      CHECK(r.t_stats[k] == r.coefficients[k] / r.std_errors[k]);
    }
    CHECK(std::abs(r.r_squared - o.r2) < 1e-8);
    CHECK(r.r_squared >= 0.0);
    CHECK(r.r_squared <= 1.0);
  }

  TEST_CASE("ols failures") {
    CHECK_THROWS_AS(ols_fit(vec({1, 2}), rows({{1, 0}, {1, 1}}), {"c", "x"}), NumericError);
    CHECK_THROWS_AS(ols_fit(vec({1, 2, 4}), rows({{1, 2}, {1, 2}, {1, 2}}), {"c", "x"}), NumericError);
  }

  TEST_CASE("p-values and stars") {
    CHECK(two_sided_p_value(0.0, 10) == doctest::Approx(1.0));
    CHECK(two_sided_p_value(1.959963984540054, 1e9) == doctest::Approx(0.05).epsilon(1e-6));
    CHECK(two_sided_p_value(2.228138851986274, 10) == doctest::Approx(0.05).epsilon(1e-6));
    CHECK(significance_stars(0.005) == "***");
    CHECK(significance_stars(0.03) == "**");
    CHECK(significance_stars(0.07) == "*");
    CHECK(significance_stars(0.2).empty());
  }
}
