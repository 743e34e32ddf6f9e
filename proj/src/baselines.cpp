#include "adagain/baselines.hpp"

#include <cmath>

namespace adagain {

AccumulatorOptimizer::AccumulatorOptimizer(AccumulatorVariant variant, int dim,
                                           AccumulatorOptions opt)
    : variant_(variant),
      opt_(opt),
      m_(Vec::Zero(dim)),
      v_(Vec::Zero(dim)),
      v_hat_(Vec::Zero(dim)),
      u_(Vec::Zero(dim)) {}

void AccumulatorOptimizer::step(WeightVector& w, const UpdateVector& g) {
  require_same_dim(w, g, "accumulator step");
  if (!all_finite(g)) {
    throw NumericError("accumulator step received non-finite gradient");
  }
  const double eta = opt_.eta;
  const double eps = opt_.eps;
  ++steps_;

  switch (variant_) {
    case AccumulatorVariant::kSgd:
      w -= eta * g;
      break;
    case AccumulatorVariant::kAdaGrad:
      v_.array() += g.array().square();
      w.array() -= eta * g.array() / (v_.array().sqrt() + eps);
      break;
    case AccumulatorVariant::kRmsProp:
      v_ = opt_.rho * v_ + (1.0 - opt_.rho) * g.cwiseProduct(g);
      w.array() -= eta * g.array() / (v_.array().sqrt() + eps);
      break;
    case AccumulatorVariant::kAdaDelta: {
      v_ = opt_.rho * v_ + (1.0 - opt_.rho) * g.cwiseProduct(g);
      const Vec dw =
          -eta * ((u_.array() + eps).sqrt() / (v_.array() + eps).sqrt() *
                  g.array())
                     .matrix();
      u_ = opt_.rho * u_ + (1.0 - opt_.rho) * dw.cwiseProduct(dw);
      w += dw;
      break;
    }
    case AccumulatorVariant::kAdam: {
      m_ = opt_.beta1 * m_ + (1.0 - opt_.beta1) * g;
      v_ = opt_.beta2 * v_ + (1.0 - opt_.beta2) * g.cwiseProduct(g);
      const double mc = 1.0 - std::pow(opt_.beta1, double(steps_));
      const double vc = 1.0 - std::pow(opt_.beta2, double(steps_));
      w.array() -=
          eta * (m_.array() / mc) / ((v_.array() / vc).sqrt() + eps);
      break;
    }
    case AccumulatorVariant::kAmsGrad: {
      // Max of second moments in the denominator, no bias correction on it.
      m_ = opt_.beta1 * m_ + (1.0 - opt_.beta1) * g;
      v_ = opt_.beta2 * v_ + (1.0 - opt_.beta2) * g.cwiseProduct(g);
      v_hat_ = v_hat_.cwiseMax(v_);
      const double mc = 1.0 - std::pow(opt_.beta1, double(steps_));
      w.array() -= eta * (m_.array() / mc) / (v_hat_.array().sqrt() + eps);
      break;
    }
  }
}

Vec AccumulatorOptimizer::effective_step_sizes() const {
  const double eta = opt_.eta;
  const double eps = opt_.eps;
  switch (variant_) {
    case AccumulatorVariant::kSgd:
      return Vec::Constant(v_.size(), eta);
    case AccumulatorVariant::kAdaGrad:
    case AccumulatorVariant::kRmsProp:
      return eta / (v_.array().sqrt() + eps);
    case AccumulatorVariant::kAdaDelta:
      return eta * ((u_.array() + eps).sqrt() / (v_.array() + eps).sqrt());
    case AccumulatorVariant::kAdam:
      return eta / (v_.array().sqrt() + eps);
    case AccumulatorVariant::kAmsGrad:
      return eta / (v_hat_.array().sqrt() + eps);
  }
  return Vec::Constant(v_.size(), eta);
}

HypergradientDescent::HypergradientDescent(int dim, double init_step,
                                           double meta_step)
    : alpha_(init_step), meta_(meta_step), prev_grad_(Vec::Zero(dim)) {}

void HypergradientDescent::step(WeightVector& w, const UpdateVector& g) {
  require_same_dim(w, g, "hypergradient step");
  const double correlation = prev_grad_.dot(g);
  if (!std::isfinite(correlation)) {
    throw NumericError("hypergradient correlation is non-finite");
  }
  alpha_ = std::max(kStepFloor, alpha_ + meta_ * correlation);
  w -= alpha_ * g;
  prev_grad_ = g;
}

Idbd::Idbd(int dim, double init_step, double meta_step)
    : log_step_(Vec::Constant(dim, std::log(init_step))),
      h_(Vec::Zero(dim)),
      theta_(meta_step) {}

void Idbd::step(WeightVector& w, const Vec& x, double delta) {
  require_same_dim(w, x, "idbd step");
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    double b = log_step_[i] + theta_ * delta * x[i] * h_[i];
    if (b > kLogStepClamp || b < -kLogStepClamp || !std::isfinite(b)) {
      b = std::clamp(std::isfinite(b) ? b : kLogStepClamp, -kLogStepClamp,
                     kLogStepClamp);
      ++clamp_events_;
    }
    log_step_[i] = b;
    const double alpha = std::exp(b);
    w[i] += alpha * delta * x[i];
    h_[i] = h_[i] * std::max(0.0, 1.0 - alpha * x[i] * x[i]) +
            alpha * delta * x[i];
  }
}

}  // namespace adagain
