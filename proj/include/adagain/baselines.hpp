#pragma once

#include "adagain/core.hpp"

namespace adagain {

enum class AccumulatorVariant { kSgd, kAdaGrad, kRmsProp, kAdaDelta, kAdam, kAmsGrad };

struct AccumulatorOptions {
  double eta = 0.01;    // scalar gain
  double eps = 1e-8;
  double beta1 = 0.9;   // Adam/AMSGrad first-moment decay
  double beta2 = 0.999; // Adam/AMSGrad second-moment decay
  double rho = 0.9;     // RMSProp/AdaDelta decay
};

// The quasi-second-order family behind one state block: running gradient
// statistics approximating a diagonal inverse Hessian.
class AccumulatorOptimizer {
 public:
  AccumulatorOptimizer(AccumulatorVariant variant, int dim,
                       AccumulatorOptions opt = {});

  // Applies one variant recurrence; g is the stochastic (semi-)gradient.
  // Throws NumericError on non-finite g, leaving w and state untouched.
  void step(WeightVector& w, const UpdateVector& g);

  AccumulatorVariant variant() const { return variant_; }
  long steps_taken() const { return steps_; }
  const Vec& first_moment() const { return m_; }
  const Vec& second_moment() const { return v_; }
  const Vec& max_second_moment() const { return v_hat_; }

  // Per-coordinate multiplier of the gradient on the next step, given the
  // current statistics. Used for step-size logging.
  Vec effective_step_sizes() const;

 private:
  AccumulatorVariant variant_;
  AccumulatorOptions opt_;
  Vec m_;      // first moment
  Vec v_;      // second moment
  Vec v_hat_;  // AMSGrad running max of v
  Vec u_;      // AdaDelta accumulated squared deltas
  long steps_ = 0;
};

// Scalar-step hypergradient descent: alpha moves with the dot product of
// successive gradients, then w takes a plain gradient step.
class HypergradientDescent {
 public:
  HypergradientDescent(int dim, double init_step, double meta_step);

  void step(WeightVector& w, const UpdateVector& g);

  double step_size() const { return alpha_; }
  const Vec& previous_gradient() const { return prev_grad_; }

  static constexpr double kStepFloor = 1e-10;

 private:
  double alpha_;
  double meta_;
  Vec prev_grad_;
};

// IDBD for the LMS setting: log step-sizes adapted by correlating the
// current error with a decayed trace of past updates.
class Idbd {
 public:
  Idbd(int dim, double init_step, double meta_step);

  // delta is the prediction error T - w.x for this sample.
  void step(WeightVector& w, const Vec& x, double delta);

  StepSizeVector step_sizes() const { return log_step_.array().exp(); }
  const Vec& trace() const { return h_; }
  long clamp_events() const { return clamp_events_; }

  static constexpr double kLogStepClamp = 15.0;

 private:
  Vec log_step_;  // beta, with alpha = exp(beta)
  Vec h_;
  double theta_;
  long clamp_events_ = 0;
};

}  // namespace adagain
