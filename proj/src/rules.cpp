#include "adagain/rules.hpp"

namespace adagain {

UpdateVector ObjectiveGradientRule::jacobian_transpose_times(
    const WeightVector& w, const Sample& s, const UpdateVector& v) const {
  if (!hessian_) {
    return UpdateRule::jacobian_transpose_times(w, s, v);
  }
  // G = -H and H is symmetric.
  return -(hessian_(w) * v);
}

UpdateVector ObjectiveGradientRule::jacobian_diagonal(const WeightVector& w,
                                                      const Sample& s) const {
  if (!hessian_) {
    return UpdateRule::jacobian_diagonal(w, s);
  }
  return -hessian_(w).diagonal();
}

Mat ObjectiveGradientRule::jacobian(const WeightVector& w, const Sample& s,
                                    double probe_radius) const {
  if (!hessian_) {
    return UpdateRule::jacobian(w, s, probe_radius);
  }
  return -hessian_(w);
}

RmsPropPreconditionedRule::RmsPropPreconditionedRule(
    std::unique_ptr<UpdateRule> inner, double eta, double rho, double eps)
    : inner_(std::move(inner)),
      v_(Vec::Zero(inner_->dim())),
      eta_(eta),
      rho_(rho),
      eps_(eps) {}

UpdateVector RmsPropPreconditionedRule::evaluate(const WeightVector& w,
                                                 const Sample& s) const {
  const Vec direction = inner_->evaluate(w, s);
  const Vec v_now =
      rho_ * v_.array() + (1.0 - rho_) * direction.array().square();
  return eta_ * direction.array() / (v_now.array().sqrt() + eps_);
}

void RmsPropPreconditionedRule::commit(const WeightVector& w, const Sample& s) {
  const Vec direction = inner_->evaluate(w, s);
  v_ = rho_ * v_.array() + (1.0 - rho_) * direction.array().square();
  inner_->commit(w, s);
}

}  // namespace adagain
