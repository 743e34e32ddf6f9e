#pragma once

#include "adagain/core.hpp"

namespace adagain {

// Sign convention: g is the NEGATIVE loss gradient (the descent direction),
// so weights move by w + alpha o g and the step-size exponent carries a
// plus sign. Mixing conventions flips the alpha update.
struct SmdOptions {
  double meta_step = 0.01;
  double forgetting = 0.1;   // beta; 1 drops the (1-beta) memory term
  double init_step = 0.1;
  double exponent_clamp = 10.0;
};

// Full sensitivity matrix, Hessian-vector products per column.
class SmdQuad {
 public:
  SmdQuad(int dim, SmdOptions opt = {});

  WeightVector step(const WeightVector& w, const UpdateVector& g,
                    const Mat& hessian);

  const StepSizeVector& step_sizes() const { return alpha_; }
  const Mat& sensitivity() const { return psi_; }
  long steps_taken() const { return steps_; }
  long clamp_events() const { return clamp_events_; }

 private:
  SmdOptions opt_;
  StepSizeVector alpha_;
  Mat psi_;
  long steps_ = 0;
  long clamp_events_ = 0;
};

// Diagonal sensitivity with the Hessian diagonal.
class SmdLin {
 public:
  SmdLin(int dim, SmdOptions opt = {});

  WeightVector step(const WeightVector& w, const UpdateVector& g,
                    const Vec& hessian_diagonal);

  const StepSizeVector& step_sizes() const { return alpha_; }
  const Vec& sensitivity() const { return psi_hat_; }
  long steps_taken() const { return steps_; }
  long clamp_events() const { return clamp_events_; }

 private:
  SmdOptions opt_;
  StepSizeVector alpha_;
  Vec psi_hat_;
  long steps_ = 0;
  long clamp_events_ = 0;
};

// The originally published recursion: vector sensitivity, full
// Hessian-vector product, no forgetting.
class SmdOriginal {
 public:
  SmdOriginal(int dim, SmdOptions opt = {});

  WeightVector step(const WeightVector& w, const UpdateVector& g,
                    const Mat& hessian);

  const StepSizeVector& step_sizes() const { return alpha_; }
  const Vec& sensitivity() const { return psi_hat_; }
  long steps_taken() const { return steps_; }
  long clamp_events() const { return clamp_events_; }

 private:
  SmdOptions opt_;
  StepSizeVector alpha_;
  Vec psi_hat_;
  long steps_ = 0;
  long clamp_events_ = 0;
};

}  // namespace adagain
