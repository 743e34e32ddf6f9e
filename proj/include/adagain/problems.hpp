#pragma once

#include <string>
#include <vector>

#include "adagain/core.hpp"
#include "adagain/rng.hpp"

namespace adagain {

struct RosenbrockEval {
  double f;
  Eigen::Vector2d grad;
};

// f = (1-w1)^2 + 100 (w2 - w1^2)^2
RosenbrockEval rosenbrock(const Eigen::Vector2d& w);
Eigen::Matrix2d rosenbrock_hessian(const Eigen::Vector2d& w);

struct TrackingSegment {
  long duration;
  double sigma_y;  // observation noise
  double sigma_z;  // drift of the latent mean
};

// The observed value plus the generating segment's parameters. The truth
// fields exist for evaluation only and never reach a learner-facing Sample.
struct TrackingObservation {
  double y;
  double sigma_y;
  double sigma_z;
  double z;  // latent mean that produced y
};

// Stateless tracking stream: Y_t = Z_t + noise, then Z drifts. The schedule
// cycles, so it can drive runs of any length.
class TrackingEnv {
 public:
  TrackingEnv(std::vector<TrackingSegment> schedule, std::uint64_t seed,
              double z0 = 0.0);

  TrackingObservation step();

  // Six 20,000-step segments cycling the (sigma_y, sigma_z) regimes.
  static std::vector<TrackingSegment> default_schedule();

 private:
  std::vector<TrackingSegment> schedule_;
  Rng rng_;
  double z_;
  std::size_t segment_ = 0;
  long into_segment_ = 0;
};

// Steady-state gain of the optimal constant-step tracker: the fixed point of
// m = m R / (m + R) + q with q = sigma_z^2 and R = sigma_y^2.
double optimal_constant_stepsize(double sigma_y, double sigma_z);

// Seven-state star MDP whose feature redundancy makes off-policy TD diverge
// under any constant step-size.
class BairdEnv {
 public:
  static constexpr int kStates = 7;
  static constexpr int kFeatures = 8;

  explicit BairdEnv(std::uint64_t seed, double gamma = 0.99);

  // One behaviour-policy transition: solid (to state 7, rho = 7) with
  // probability 1/7, dashed (uniform over 1..6, rho = 0) otherwise.
  Sample step();

  int state() const { return state_; }
  double gamma() const { return gamma_; }

  static Vec features(int state);  // 1-based
  static Mat feature_matrix();     // 7 x 8
  static WeightVector initial_weights();

 private:
  Rng rng_;
  double gamma_;
  int state_ = 1;
};

// Truncated discounted sum of future values: sum_{k=0..K} gamma^k
// series[t+k+1], K the first index with gamma^(K+1) < tol (or the end of the
// series, whichever comes first).
double ideal_discounted_return(const std::vector<double>& series, double gamma,
                               long t, double tol = 1e-4);

struct SeriesOptions {
  bool normalize = false;  // min-max per column
};

// In-memory numeric time series loaded from CSV.
class SeriesSource {
 public:
  const std::vector<std::string>& column_names() const { return names_; }
  int column_count() const { return int(names_.size()); }
  long row_count() const { return long(rows_.size()); }
  const Vec& row(long i) const { return rows_[std::size_t(i)]; }
  std::vector<double> column(int j) const;

 private:
  friend SeriesSource load_series_csv(const std::string&, SeriesOptions);
  std::vector<std::string> names_;
  std::vector<Vec> rows_;
};

// Header + comma-separated decimal rows; LF or CRLF. Ragged rows and
// non-numeric fields fail with the line number.
SeriesSource load_series_csv(const std::string& path, SeriesOptions opt = {});

}  // namespace adagain
