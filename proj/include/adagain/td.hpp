#pragma once

#include "adagain/adagain.hpp"
#include "adagain/core.hpp"
#include "adagain/update_rule.hpp"

namespace adagain {

// r + gamma_next x_next.w - x.w
double td_error(const WeightVector& w, const Sample& s);

// d = gamma_next x_next - x, the gradient of the TD error in the weights.
Vec td_direction(const Sample& s);

// Off-policy linear TD(lambda) with an importance-sampled accumulating
// trace: e <- rho (gamma_t lambda e + x). evaluate() computes this step's
// pending trace without storing it; commit() advances it.
class TdLambdaRule : public UpdateRule {
 public:
  TdLambdaRule(int dim, double lambda);

  int dim() const override { return int(trace_.size()); }
  UpdateVector evaluate(const WeightVector& w, const Sample& s) const override;
  void commit(const WeightVector& w, const Sample& s) override;

  // G = e d^T, so both products are rank-one and O(k).
  bool has_exact_products() const override { return true; }
  UpdateVector jacobian_transpose_times(const WeightVector& w, const Sample& s,
                                        const UpdateVector& v) const override;
  UpdateVector jacobian_diagonal(const WeightVector& w,
                                 const Sample& s) const override;
  Mat jacobian(const WeightVector& w, const Sample& s,
               double probe_radius) const override;

  Vec pending_trace(const Sample& s) const;
  const Vec& trace() const { return trace_; }
  void reset_trace() { trace_.setZero(); }  // episode boundary
  double lambda() const { return lambda_; }

 private:
  Vec trace_;
  double lambda_;
};

struct TdProducts {
  Vec gt_delta;  // (e.delta) d
  Vec jdiag;     // e o d
};

// Rank-one Jacobian products for G = e d^T with d = gamma_next x_next - x.
TdProducts td_jacobian_products(const Vec& e, const Vec& x, const Vec& x_next,
                                double gamma_next, const Vec& delta_w);

struct LmsResult {
  UpdateVector delta_w;
  double error;
};

// delta = (T - w.x) x; the gamma = 0 reduction of the TD update.
LmsResult lms_update(const WeightVector& w, const Vec& x, double target);

// LMS as an update rule with exact products (G = -x x^T). Stateless.
class LmsRule : public UpdateRule {
 public:
  explicit LmsRule(int dim) : dim_(dim) {}

  int dim() const override { return dim_; }
  UpdateVector evaluate(const WeightVector& w, const Sample& s) const override;
  bool has_exact_products() const override { return true; }
  UpdateVector jacobian_transpose_times(const WeightVector& w, const Sample& s,
                                        const UpdateVector& v) const override;
  UpdateVector jacobian_diagonal(const WeightVector& w,
                                 const Sample& s) const override;
  Mat jacobian(const WeightVector& w, const Sample& s,
               double probe_radius) const override;

 private:
  int dim_;
};

// Which scalar pairs with the update in the TD step-size exponent. The two
// appear in the source material; with G = e d^T the first is the exact
// G^T Delta contraction, the second swaps the roles of e and d. Both
// coincide whenever G is diagonal.
enum class TdAlphaForm { kDeltaDotE, kDeltaDotD };

// Closed-form linear-complexity step-size adaptation for TD(lambda),
// using the rank-one Jacobian throughout.
class AdaGainTd {
 public:
  AdaGainTd(int dim, double lambda, AdaGainOptions opt = {},
            TdAlphaForm form = TdAlphaForm::kDeltaDotE);

  WeightVector step(const WeightVector& w, const Sample& s);

  const StepSizeVector& step_sizes() const { return alpha_; }
  const Vec& sensitivity() const { return psi_hat_; }
  const Vec& trace() const { return rule_.trace(); }
  void reset_trace() { rule_.reset_trace(); }
  double last_td_error() const { return last_td_error_; }
  const UpdateVector& last_update() const { return last_delta_; }
  long steps_taken() const { return steps_; }
  long clamp_events() const { return clamp_events_; }

 private:
  AdaGainOptions opt_;
  TdAlphaForm form_;
  TdLambdaRule rule_;
  StepSizeVector alpha_;
  Vec psi_hat_;
  UpdateVector last_delta_;
  double last_td_error_ = 0.0;
  long steps_ = 0;
  long clamp_events_ = 0;
};

// Quadratic-complexity companion; sensitivity columns propagated through the
// rank-one Jacobian without materializing it.
class AdaGainTdQuad {
 public:
  AdaGainTdQuad(int dim, double lambda, AdaGainOptions opt = {},
                TdAlphaForm form = TdAlphaForm::kDeltaDotD);

  WeightVector step(const WeightVector& w, const Sample& s);

  const StepSizeVector& step_sizes() const { return alpha_; }
  const Mat& sensitivity() const { return psi_; }
  const Vec& trace() const { return rule_.trace(); }
  double last_td_error() const { return last_td_error_; }
  long steps_taken() const { return steps_; }
  long clamp_events() const { return clamp_events_; }

 private:
  AdaGainOptions opt_;
  TdAlphaForm form_;
  TdLambdaRule rule_;
  StepSizeVector alpha_;
  Mat psi_;
  double last_td_error_ = 0.0;
  long steps_ = 0;
  long clamp_events_ = 0;
};

}  // namespace adagain
