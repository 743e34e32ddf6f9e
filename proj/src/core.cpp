#include "adagain/core.hpp"

#include <cmath>
#include <utility>

namespace adagain {

bool all_finite(const Vec& v) { return v.allFinite(); }

bool all_finite(const Mat& m) { return m.allFinite(); }

void require_same_dim(const Vec& a, const Vec& b, const char* what) {
  if (a.size() != b.size()) {
    throw DimensionError(std::string(what) + ": dimension mismatch (" +
                         std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()) + ")");
  }
}

WeightVector apply_update(const WeightVector& w, const StepSizeVector& alpha,
                          const UpdateVector& delta) {
  require_same_dim(w, alpha, "apply_update");
  require_same_dim(w, delta, "apply_update");
  return w.array() + alpha.array() * delta.array();
}

Sample Sample::regression(Vec x, double target) {
  if (!all_finite(x) || !std::isfinite(target)) {
    throw NumericError("regression sample has non-finite fields");
  }
  Sample s;
  s.x = std::move(x);
  s.target = target;
  return s;
}

Sample Sample::transition(Vec x, Vec x_next, double reward, double gamma_t,
                          double gamma_next, double rho) {
  if (!all_finite(x) || !all_finite(x_next) || !std::isfinite(reward)) {
    throw NumericError("transition sample has non-finite fields");
  }
  if (!(gamma_t >= 0.0 && gamma_t <= 1.0) ||
      !(gamma_next >= 0.0 && gamma_next <= 1.0)) {
    throw NumericError("discount outside [0, 1]");
  }
  if (!(rho >= 0.0) || !std::isfinite(rho)) {
    throw NumericError("importance ratio must be finite and >= 0");
  }
  Sample s;
  s.x = std::move(x);
  s.x_next = std::move(x_next);
  s.reward = reward;
  s.gamma_t = gamma_t;
  s.gamma_next = gamma_next;
  s.rho = rho;
  return s;
}

}  // namespace adagain
