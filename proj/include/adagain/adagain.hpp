#pragma once

#include "adagain/core.hpp"
#include "adagain/update_rule.hpp"

namespace adagain {

enum class Positivity { kExponential, kThresholded };

struct AdaGainOptions {
  double meta_step = 0.01;   // gain on the step-size gradient
  double forgetting = 0.1;   // horizon of the sensitivity trace
  double init_step = 0.1;
  Positivity positivity = Positivity::kExponential;
  double step_floor = 1e-3;  // projection floor for the thresholded mode
  // Per-coordinate bound on the exponential update's argument; keeps one
  // pathological step from multiplying alpha by more than e^10.
  double exponent_clamp = 10.0;
  double probe_radius = kDefaultProbeRadius;  // finite-difference mode
};

// One positivity-preserving step-size update, given the raw meta-gradient g:
// exponential mode multiplies by exp(-meta_step * g); thresholded mode takes
// the additive step and projects onto [floor, inf).
StepSizeVector stepsize_positivity(const StepSizeVector& alpha,
                                   const Vec& grad, double meta_step,
                                   Positivity mode, double floor = 1e-3);

namespace detail {
// Shared alpha update for the meta-descent steppers. meta_grad excludes the
// extra alpha factor of the exponential parametrization; sign > 0 descends.
// Returns the number of clamped coordinates.
long adapt_step_sizes(StepSizeVector& alpha, const Vec& meta_grad,
                      const AdaGainOptions& opt, double sign);
}  // namespace detail

// Quadratic-complexity form: the full sensitivity matrix psi, column i
// holding the gradient of the weights with respect to alpha_i.
class AdaGainQuad {
 public:
  AdaGainQuad(int dim, AdaGainOptions opt = {});

  // Uses the rule's full Jacobian (exact when provided, finite-difference
  // columns otherwise). Returns the next weights; commits the rule.
  WeightVector step(UpdateRule& rule, const WeightVector& w, const Sample& s);

  const StepSizeVector& step_sizes() const { return alpha_; }
  const Mat& sensitivity() const { return psi_; }
  const UpdateVector& last_update() const { return last_delta_; }
  long steps_taken() const { return steps_; }
  long clamp_events() const { return clamp_events_; }

 private:
  AdaGainOptions opt_;
  StepSizeVector alpha_;
  Mat psi_;
  UpdateVector last_delta_;
  long steps_ = 0;
  long clamp_events_ = 0;
};

// Linear-complexity form: diagonal sensitivity vector, Jacobian products
// either exact from the rule or from a single finite-difference probe pair.
class AdaGainLin {
 public:
  enum class Products { kExact, kFiniteDifference };

  AdaGainLin(int dim, AdaGainOptions opt = {},
             Products products = Products::kExact);

  WeightVector step(UpdateRule& rule, const WeightVector& w, const Sample& s);

  const StepSizeVector& step_sizes() const { return alpha_; }
  const Vec& sensitivity() const { return psi_hat_; }
  const UpdateVector& last_update() const { return last_delta_; }
  long steps_taken() const { return steps_; }
  long clamp_events() const { return clamp_events_; }
  Products products() const { return products_; }

 private:
  AdaGainOptions opt_;
  Products products_;
  StepSizeVector alpha_;
  Vec psi_hat_;
  UpdateVector last_delta_;
  long steps_ = 0;
  long clamp_events_ = 0;
};

}  // namespace adagain
