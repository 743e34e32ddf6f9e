#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "adagain/problems.hpp"
#include "adagain/rng.hpp"
#include "doctest.h"

using namespace adagain;

namespace {

std::filesystem::path temp_csv(const std::string& name,
                               const std::string& contents) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path, std::ios::binary);
  out << contents;
  return path;
}

}  // namespace

TEST_CASE("rosenbrock landmark values") {
  const auto at_min = rosenbrock({1.0, 1.0});
  CHECK(at_min.f == 0.0);
  CHECK(at_min.grad.norm() == 0.0);
  const auto at_origin = rosenbrock({0.0, 0.0});
  CHECK(at_origin.f == doctest::Approx(1.0));
  CHECK(at_origin.grad[0] == doctest::Approx(-2.0));
  CHECK(at_origin.grad[1] == doctest::Approx(0.0));
}

TEST_CASE("rosenbrock gradient matches central differences") {
  Rng rng(3);
  const double r = 1e-5;
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Vector2d w(rng.uniform(-2, 2), rng.uniform(-2, 2));
    Eigen::Vector2d fd;
    for (int i = 0; i < 2; ++i) {
      Eigen::Vector2d plus = w, minus = w;
      plus[i] += r;
      minus[i] -= r;
      fd[i] = (rosenbrock(plus).f - rosenbrock(minus).f) / (2 * r);
    }
    const auto eval = rosenbrock(w);
    CHECK((eval.grad - fd).norm() <= 1e-6 * (1.0 + eval.grad.norm()));
  }
}

TEST_CASE("rosenbrock hessian matches gradient differences") {
  Rng rng(4);
  const double r = 1e-6;
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::Vector2d w(rng.uniform(-2, 2), rng.uniform(-2, 2));
    const Eigen::Matrix2d h = rosenbrock_hessian(w);
    for (int i = 0; i < 2; ++i) {
      Eigen::Vector2d plus = w, minus = w;
      plus[i] += r;
      minus[i] -= r;
      const Eigen::Vector2d col =
          (rosenbrock(plus).grad - rosenbrock(minus).grad) / (2 * r);
      CHECK((h.col(i) - col).norm() <= 1e-4 * (1.0 + h.col(i).norm()));
    }
  }
}

TEST_CASE("tracking stream determinism and degenerate noise") {
  TrackingEnv a({{100, 0.0, 0.0}}, 7, 1.5);
  for (int t = 0; t < 50; ++t) {
    CHECK(a.step().y == 1.5);
  }
  TrackingEnv b1(TrackingEnv::default_schedule(), 42);
  TrackingEnv b2(TrackingEnv::default_schedule(), 42);
  for (int t = 0; t < 1000; ++t) {
    CHECK(b1.step().y == b2.step().y);
  }
}

TEST_CASE("tracking observation noise has the configured variance") {
  TrackingEnv env({{200000, 1.0, 0.5}}, 11);
  double sum = 0.0, sum_sq = 0.0;
  const int n = 100000;
  for (int t = 0; t < n; ++t) {
    const auto obs = env.step();
    const double noise = obs.y - obs.z;
    sum += noise;
    sum_sq += noise * noise;
  }
  const double var = sum_sq / n - (sum / n) * (sum / n);
  CHECK(var == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("tracking schedule advances and cycles") {
  TrackingEnv env({{3, 1.0, 0.0}, {2, 2.0, 0.0}}, 1);
  std::vector<double> sigmas;
  for (int t = 0; t < 10; ++t) {
    sigmas.push_back(env.step().sigma_y);
  }
  CHECK(sigmas == std::vector<double>{1, 1, 1, 2, 2, 1, 1, 1, 2, 2});
}

TEST_CASE("optimal constant step-size") {
  CHECK(optimal_constant_stepsize(1.0, 0.0) == doctest::Approx(0.0));
  CHECK(optimal_constant_stepsize(1.0, 1.0) ==
        doctest::Approx((std::sqrt(5.0) - 1.0) / 2.0).epsilon(1e-9));
  CHECK_THROWS_AS(optimal_constant_stepsize(0.0, 1.0), NumericError);
  //

  double prev = -1.0;
  for (double ratio : {0.01, 0.1, 0.5, 1.0, 2.0, 10.0, 100.0}) {
    const double k = optimal_constant_stepsize(1.0, ratio);
    CHECK(k > prev);
    CHECK(k < 1.0);
    prev = k;
  }
}

TEST_CASE("baird features and redundancy") {
  const Vec s1 = BairdEnv::features(1);
  CHECK(s1 == (Vec(8) << 2, 0, 0, 0, 0, 0, 0, 1).finished());
  const Vec s7 = BairdEnv::features(7);
  CHECK(s7 == (Vec(8) << 0, 0, 0, 0, 0, 0, 1, 2).finished());
  const Mat x = BairdEnv::feature_matrix();
  // Rows are independent; the redundancy is across columns (rank 7 < 8).
  Eigen::FullPivLU<Mat> lu(x);
  CHECK(lu.rank() == 7);
  CHECK(BairdEnv::initial_weights()[6] == 10.0);
}

TEST_CASE("baird behaviour policy statistics") {
  BairdEnv env(19);
  long solid = 0;
  const long n = 1000000;
  for (long t = 0; t < n; ++t) {
    const Sample s = env.step();
    if (s.rho > 0) {
      ++solid;
      CHECK(s.rho == doctest::Approx(7.0));
      CHECK(env.state() == 7);
    } else {
      CHECK(env.state() >= 1);
      CHECK(env.state() <= 6);
    }
    CHECK(s.reward == 0.0);
  }
  const double freq = double(solid) / double(n);
  CHECK(std::abs(freq - 1.0 / 7.0) <= 0.01 * (1.0 / 7.0));
}

TEST_CASE("ideal discounted return") {
  SUBCASE("constant series sums the geometric series") {
    std::vector<double> series(200, 3.0);
    CHECK(ideal_discounted_return(series, 0.5, 0, 1e-16) ==
          doctest::Approx(6.0).epsilon(1e-9));
  }
  SUBCASE("gamma 0 is the one-step target") {
    std::vector<double> series{1.0, 2.0, 3.0};
    CHECK(ideal_discounted_return(series, 0.0, 0) == 2.0);
    CHECK(ideal_discounted_return(series, 0.0, 1) == 3.0);
  }
  SUBCASE("truncation error stays below tol * max |series|") {
    Rng rng(6);
    std::vector<double> series(100);
    double peak = 0.0;
    for (auto& v : series) {
      v = rng.normal(0, 2);
      peak = std::max(peak, std::abs(v));
    }
    const double gamma = 0.9;
    const double tol = 1e-4;
    for (long t : {0L, 10L, 50L}) {
      double brute = 0.0;
      for (std::size_t k = std::size_t(t) + 1; k < series.size(); ++k) {
        brute += std::pow(gamma, double(k - std::size_t(t) - 1)) * series[k];
      }
      const double approx = ideal_discounted_return(series, gamma, t, tol);
      CHECK(std::abs(approx - brute) <= tol * peak / (1.0 - gamma));
    }
  }
  SUBCASE("needs at least one future value") {
    std::vector<double> series{1.0, 2.0};
    CHECK_THROWS_AS(ideal_discounted_return(series, 0.5, 1), DimensionError);
  }
}

TEST_CASE("csv ingestion") {
  SUBCASE("well-formed file with CRLF endings") {
    const auto path =
        temp_csv("adagain_ok.csv", "a,b\r\n1.5,2\r\n-0.25,1e3\r\n");
    const SeriesSource src = load_series_csv(path.string());
    CHECK(src.column_count() == 2);
    CHECK(src.row_count() == 2);
    CHECK(src.row(0)[0] == 1.5);
    CHECK(src.row(1)[1] == 1000.0);
    CHECK(src.column_names()[1] == "b");
    std::filesystem::remove(path);
  }
  SUBCASE("ragged row reports the line number") {
    const auto path = temp_csv("adagain_ragged.csv", "a,b\n1,2\n3\n");
    CHECK_THROWS_WITH_AS(load_series_csv(path.string()),
                         doctest::Contains("line 3"), NumericError);
    std::filesystem::remove(path);
  }
  SUBCASE("non-numeric field rejected") {
    const auto path = temp_csv("adagain_nan.csv", "a\n1\nfoo\n");
    CHECK_THROWS_AS(load_series_csv(path.string()), NumericError);
    std::filesystem::remove(path);
  }
  SUBCASE("empty and header-only files rejected") {
    const auto empty = temp_csv("adagain_empty.csv", "");
    CHECK_THROWS_AS(load_series_csv(empty.string()), NumericError);
    std::filesystem::remove(empty);
    const auto header_only = temp_csv("adagain_header.csv", "a,b\n");
    CHECK_THROWS_AS(load_series_csv(header_only.string()), NumericError);
    std::filesystem::remove(header_only);
  }
  SUBCASE("min-max normalization") {
    const auto path = temp_csv("adagain_norm.csv", "a,b\n0,5\n10,5\n5,5\n");
    SeriesOptions opt;
    opt.normalize = true;
    const SeriesSource src = load_series_csv(path.string(), opt);
    CHECK(src.row(0)[0] == 0.0);
    CHECK(src.row(1)[0] == 1.0);
    CHECK(src.row(2)[0] == 0.5);
    CHECK(src.row(0)[1] == 0.0);  // constant column maps to 0
    std::filesystem::remove(path);
  }
}
