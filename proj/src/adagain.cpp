#include "adagain/adagain.hpp"

#include <cmath>

namespace adagain {

StepSizeVector stepsize_positivity(const StepSizeVector& alpha,
                                   const Vec& grad, double meta_step,
                                   Positivity mode, double floor) {
  require_same_dim(alpha, grad, "stepsize_positivity");
  if (mode == Positivity::kExponential) {
    return alpha.array() * (-meta_step * grad.array()).exp();
  }
  return (alpha - meta_step * grad).cwiseMax(floor);
}

namespace detail {

long adapt_step_sizes(StepSizeVector& alpha, const Vec& meta_grad,
                      const AdaGainOptions& opt, double sign) {
  long clamped = 0;
  if (opt.positivity == Positivity::kExponential) {
    // alpha picks up an extra alpha factor from the log parametrization.
    Vec exponent =
        -sign * opt.meta_step * alpha.array() * meta_grad.array();
    for (Eigen::Index i = 0; i < exponent.size(); ++i) {
      if (exponent[i] > opt.exponent_clamp) {
        exponent[i] = opt.exponent_clamp;
        ++clamped;
      } else if (exponent[i] < -opt.exponent_clamp) {
        exponent[i] = -opt.exponent_clamp;
        ++clamped;
      }
    }
    alpha = alpha.array() * exponent.array().exp();
  } else {
    alpha = (alpha - sign * opt.meta_step * meta_grad).cwiseMax(opt.step_floor);
  }
  return clamped;
}

}  // namespace detail

AdaGainQuad::AdaGainQuad(int dim, AdaGainOptions opt)
    : opt_(opt),
      alpha_(StepSizeVector::Constant(dim, opt.init_step)),
      psi_(Mat::Zero(dim, dim)),
      last_delta_(Vec::Zero(dim)) {}

WeightVector AdaGainQuad::step(UpdateRule& rule, const WeightVector& w,
                               const Sample& s) {
  const Vec delta = rule.evaluate(w, s);
  const Mat g = rule.jacobian(w, s, opt_.probe_radius);

  // Psi^T (G^T Delta), right to left so no matrix-matrix product forms.
  const Vec gt_delta = g.transpose() * delta;
  const Vec meta_grad = psi_.transpose() * gt_delta;
  clamp_events_ += detail::adapt_step_sizes(alpha_, meta_grad, opt_, 1.0);

  const double beta = opt_.forgetting;
  Mat next_psi = (1.0 - beta) * psi_;
  next_psi.noalias() += beta * (alpha_.asDiagonal() * (g * psi_));
  next_psi.diagonal() += beta * delta;
  psi_ = std::move(next_psi);

  WeightVector next_w = apply_update(w, alpha_, delta);
  rule.commit(w, s);
  last_delta_ = delta;
  ++steps_;
  if (!all_finite(alpha_) || !all_finite(psi_) || !all_finite(next_w)) {
    throw DivergenceError("quadratic step-size adaptation diverged", steps_);
  }
  return next_w;
}

AdaGainLin::AdaGainLin(int dim, AdaGainOptions opt, Products products)
    : opt_(opt),
      products_(products),
      alpha_(StepSizeVector::Constant(dim, opt.init_step)),
      psi_hat_(Vec::Zero(dim)),
      last_delta_(Vec::Zero(dim)) {}

WeightVector AdaGainLin::step(UpdateRule& rule, const WeightVector& w,
                              const Sample& s) {
  const Vec delta = rule.evaluate(w, s);

  Vec gt_delta;
  Vec jdiag;
  if (products_ == Products::kExact) {
    gt_delta = rule.jacobian_transpose_times(w, s, delta);
    jdiag = rule.jacobian_diagonal(w, s);
  } else {
    FdProducts p = jacobian_products_fd(rule, w, s, delta, opt_.probe_radius);
    gt_delta = std::move(p.jtp);
    jdiag = std::move(p.jdiag);
  }

  const Vec meta_grad = psi_hat_.array() * gt_delta.array();
  clamp_events_ += detail::adapt_step_sizes(alpha_, meta_grad, opt_, 1.0);

  const double beta = opt_.forgetting;
  psi_hat_ = (1.0 - beta) * psi_hat_.array() +
             beta * alpha_.array() * jdiag.array() * psi_hat_.array() +
             beta * delta.array();

  WeightVector next_w = apply_update(w, alpha_, delta);
  rule.commit(w, s);
  last_delta_ = delta;
  ++steps_;
  if (!all_finite(alpha_) || !all_finite(psi_hat_) || !all_finite(next_w)) {
    throw DivergenceError("linear step-size adaptation diverged", steps_);
  }
  return next_w;
}

}  // namespace adagain
