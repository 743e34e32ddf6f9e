#include "adagain/smd.hpp"

#include "adagain/adagain.hpp"

namespace adagain {

namespace {

AdaGainOptions to_update_options(const SmdOptions& opt) {
  AdaGainOptions o;
  o.meta_step = opt.meta_step;
  o.positivity = Positivity::kExponential;
  o.exponent_clamp = opt.exponent_clamp;
  return o;
}

}  // namespace

SmdQuad::SmdQuad(int dim, SmdOptions opt)
    : opt_(opt),
      alpha_(StepSizeVector::Constant(dim, opt.init_step)),
      psi_(Mat::Zero(dim, dim)) {}

WeightVector SmdQuad::step(const WeightVector& w, const UpdateVector& g,
                           const Mat& hessian) {
  require_same_dim(w, g, "smd quadratic step");

  // Ascent sign on the exponent: g already points downhill.
  const Vec meta_grad = psi_.transpose() * g;
  clamp_events_ +=
      detail::adapt_step_sizes(alpha_, meta_grad, to_update_options(opt_), -1.0);

  const double beta = opt_.forgetting;
  Mat next_psi = (1.0 - beta) * psi_;
  next_psi.noalias() -= beta * (alpha_.asDiagonal() * (hessian * psi_));
  next_psi.diagonal() += beta * g;
  psi_ = std::move(next_psi);

  WeightVector next_w = apply_update(w, alpha_, g);
  ++steps_;
  if (!all_finite(alpha_) || !all_finite(psi_) || !all_finite(next_w)) {
    throw DivergenceError("smd quadratic diverged", steps_);
  }
  return next_w;
}

SmdLin::SmdLin(int dim, SmdOptions opt)
    : opt_(opt),
      alpha_(StepSizeVector::Constant(dim, opt.init_step)),
      psi_hat_(Vec::Zero(dim)) {}

WeightVector SmdLin::step(const WeightVector& w, const UpdateVector& g,
                          const Vec& hessian_diagonal) {
  require_same_dim(w, g, "smd linear step");
  require_same_dim(w, hessian_diagonal, "smd linear step");

  const Vec meta_grad = psi_hat_.array() * g.array();
  clamp_events_ +=
      detail::adapt_step_sizes(alpha_, meta_grad, to_update_options(opt_), -1.0);

  const double beta = opt_.forgetting;
  psi_hat_ =
      (1.0 - beta) * psi_hat_.array() -
      beta * alpha_.array() * hessian_diagonal.array() * psi_hat_.array() +
      beta * g.array();

  WeightVector next_w = apply_update(w, alpha_, g);
  ++steps_;
  if (!all_finite(alpha_) || !all_finite(psi_hat_) || !all_finite(next_w)) {
    throw DivergenceError("smd linear diverged", steps_);
  }
  return next_w;
}

SmdOriginal::SmdOriginal(int dim, SmdOptions opt)
    : opt_(opt),
      alpha_(StepSizeVector::Constant(dim, opt.init_step)),
      psi_hat_(Vec::Zero(dim)) {}

WeightVector SmdOriginal::step(const WeightVector& w, const UpdateVector& g,
                               const Mat& hessian) {
  require_same_dim(w, g, "smd original step");

  const Vec meta_grad = psi_hat_.array() * g.array();
  clamp_events_ +=
      detail::adapt_step_sizes(alpha_, meta_grad, to_update_options(opt_), -1.0);

  psi_hat_ = psi_hat_ - alpha_.cwiseProduct(hessian * psi_hat_) + g;

  WeightVector next_w = apply_update(w, alpha_, g);
  ++steps_;
  if (!all_finite(alpha_) || !all_finite(psi_hat_) || !all_finite(next_w)) {
    throw DivergenceError("smd original diverged", steps_);
  }
  return next_w;
}

}  // namespace adagain
