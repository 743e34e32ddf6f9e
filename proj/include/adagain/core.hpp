#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace adagain {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Role aliases for the dense vectors every learner passes around: the model
// parameters w, the per-weight gains alpha, and the raw update direction.
using WeightVector = Vec;
using StepSizeVector = Vec;
using UpdateVector = Vec;

// Contract violation: coupled vectors with mismatched dimensions.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite values where finite ones are required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A learner's state left the finite domain; carries the offending step.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, long step)
      : std::runtime_error(what + " at step " + std::to_string(step)),
        step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

bool all_finite(const Vec& v);
bool all_finite(const Mat& m);

void require_same_dim(const Vec& a, const Vec& b, const char* what);

// w + alpha o delta (element-wise product); inputs untouched.
WeightVector apply_update(const WeightVector& w, const StepSizeVector& alpha,
                          const UpdateVector& delta);

// One observation consumed by an update rule. Regression rules read
// (x, target); TD rules read the transition fields. gamma_t discounts the
// incoming eligibility trace, gamma_next the successor value.
struct Sample {
  Vec x;
  double target = 0.0;

  Vec x_next;
  double reward = 0.0;
  double gamma_t = 0.0;
  double gamma_next = 0.0;
  double rho = 1.0;

  static Sample regression(Vec x, double target);
  static Sample transition(Vec x, Vec x_next, double reward, double gamma_t,
                           double gamma_next, double rho);
};

}  // namespace adagain
