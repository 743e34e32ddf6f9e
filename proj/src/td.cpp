#include "adagain/td.hpp"

namespace adagain {

double td_error(const WeightVector& w, const Sample& s) {
  return s.reward + s.gamma_next * s.x_next.dot(w) - s.x.dot(w);
}

Vec td_direction(const Sample& s) { return s.gamma_next * s.x_next - s.x; }

TdLambdaRule::TdLambdaRule(int dim, double lambda)
    : trace_(Vec::Zero(dim)), lambda_(lambda) {}

Vec TdLambdaRule::pending_trace(const Sample& s) const {
  return s.rho * (s.gamma_t * lambda_ * trace_ + s.x);
}

UpdateVector TdLambdaRule::evaluate(const WeightVector& w,
                                    const Sample& s) const {
  return td_error(w, s) * pending_trace(s);
}

void TdLambdaRule::commit(const WeightVector&, const Sample& s) {
  trace_ = pending_trace(s);
}

UpdateVector TdLambdaRule::jacobian_transpose_times(const WeightVector&,
                                                    const Sample& s,
                                                    const UpdateVector& v) const {
  const Vec e = pending_trace(s);
  return (e.dot(v)) * td_direction(s);
}

UpdateVector TdLambdaRule::jacobian_diagonal(const WeightVector&,
                                             const Sample& s) const {
  return pending_trace(s).cwiseProduct(td_direction(s));
}

Mat TdLambdaRule::jacobian(const WeightVector&, const Sample& s,
                           double) const {
  const Vec e = pending_trace(s);
  return e * td_direction(s).transpose();
}

TdProducts td_jacobian_products(const Vec& e, const Vec& x, const Vec& x_next,
                                double gamma_next, const Vec& delta_w) {
  require_same_dim(e, delta_w, "td_jacobian_products");
  const Vec d = gamma_next * x_next - x;
  TdProducts p;
  p.gt_delta = e.dot(delta_w) * d;
  p.jdiag = e.cwiseProduct(d);
  return p;
}

LmsResult lms_update(const WeightVector& w, const Vec& x, double target) {
  require_same_dim(w, x, "lms_update");
  LmsResult r;
  r.error = target - w.dot(x);
  r.delta_w = r.error * x;
  return r;
}

UpdateVector LmsRule::evaluate(const WeightVector& w, const Sample& s) const {
  return lms_update(w, s.x, s.target).delta_w;
}

UpdateVector LmsRule::jacobian_transpose_times(const WeightVector&,
                                               const Sample& s,
                                               const UpdateVector& v) const {
  return -(s.x.dot(v)) * s.x;
}

UpdateVector LmsRule::jacobian_diagonal(const WeightVector&,
                                        const Sample& s) const {
  return -s.x.cwiseProduct(s.x);
}

Mat LmsRule::jacobian(const WeightVector&, const Sample& s, double) const {
  return -s.x * s.x.transpose();
}

AdaGainTd::AdaGainTd(int dim, double lambda, AdaGainOptions opt,
                     TdAlphaForm form)
    : opt_(opt),
      form_(form),
      rule_(dim, lambda),
      alpha_(StepSizeVector::Constant(dim, opt.init_step)),
      psi_hat_(Vec::Zero(dim)),
      last_delta_(Vec::Zero(dim)) {}

WeightVector AdaGainTd::step(const WeightVector& w, const Sample& s) {
  const Vec e = rule_.pending_trace(s);
  const double delta = td_error(w, s);
  const Vec delta_w = delta * e;
  const Vec d = td_direction(s);

  Vec meta_grad;
  if (form_ == TdAlphaForm::kDeltaDotE) {
    meta_grad = (delta_w.dot(e)) * d.cwiseProduct(psi_hat_);
  } else {
    meta_grad = (delta_w.dot(d)) * e.cwiseProduct(psi_hat_);
  }
  clamp_events_ += detail::adapt_step_sizes(alpha_, meta_grad, opt_, 1.0);

  const double beta = opt_.forgetting;
  psi_hat_ = (1.0 - beta) * psi_hat_.array() +
             beta * alpha_.array() * e.array() * d.array() * psi_hat_.array() +
             beta * delta_w.array();

  WeightVector next_w = apply_update(w, alpha_, delta_w);
  rule_.commit(w, s);
  last_delta_ = delta_w;
  last_td_error_ = delta;
  ++steps_;
  if (!all_finite(alpha_) || !all_finite(psi_hat_) || !all_finite(next_w)) {
    throw DivergenceError("td step-size adaptation diverged", steps_);
  }
  return next_w;
}

AdaGainTdQuad::AdaGainTdQuad(int dim, double lambda, AdaGainOptions opt,
                             TdAlphaForm form)
    : opt_(opt),
      form_(form),
      rule_(dim, lambda),
      alpha_(StepSizeVector::Constant(dim, opt.init_step)),
      psi_(Mat::Zero(dim, dim)) {}

WeightVector AdaGainTdQuad::step(const WeightVector& w, const Sample& s) {
  const Vec e = rule_.pending_trace(s);
  const double delta = td_error(w, s);
  const Vec delta_w = delta * e;
  const Vec d = td_direction(s);

  Vec meta_grad;
  if (form_ == TdAlphaForm::kDeltaDotD) {
    meta_grad = (delta_w.dot(d)) * (psi_.transpose() * e);
  } else {
    meta_grad = (delta_w.dot(e)) * (psi_.transpose() * d);
  }
  clamp_events_ += detail::adapt_step_sizes(alpha_, meta_grad, opt_, 1.0);

  // G Psi = e (d^T Psi), one rank-one product per step.
  const double beta = opt_.forgetting;
  const Eigen::RowVectorXd dt_psi = d.transpose() * psi_;
  Mat next_psi = (1.0 - beta) * psi_;
  next_psi.noalias() += beta * (alpha_.cwiseProduct(e)) * dt_psi;
  next_psi.diagonal() += beta * delta_w;
  psi_ = std::move(next_psi);

  WeightVector next_w = apply_update(w, alpha_, delta_w);
  rule_.commit(w, s);
  last_td_error_ = delta;
  ++steps_;
  if (!all_finite(alpha_) || !all_finite(psi_) || !all_finite(next_w)) {
    throw DivergenceError("td quadratic step-size adaptation diverged",
                          steps_);
  }
  return next_w;
}

}  // namespace adagain
