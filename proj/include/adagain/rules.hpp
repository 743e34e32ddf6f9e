#pragma once

#include <functional>
#include <memory>
#include <utility>

#include "adagain/core.hpp"
#include "adagain/update_rule.hpp"

namespace adagain {

// Plain gradient descent direction Delta(w) = -grad(w) for a differentiable
// objective. With a Hessian callback the Jacobian products are exact
// (G = -H); otherwise they fall back to finite differences.
class ObjectiveGradientRule : public UpdateRule {
 public:
  using GradFn = std::function<Vec(const Vec&)>;
  using HessFn = std::function<Mat(const Vec&)>;

  ObjectiveGradientRule(int dim, GradFn grad, HessFn hessian = nullptr)
      : dim_(dim), grad_(std::move(grad)), hessian_(std::move(hessian)) {}

  int dim() const override { return dim_; }
  UpdateVector evaluate(const WeightVector& w, const Sample&) const override {
    return -grad_(w);
  }

  bool has_exact_products() const override { return bool(hessian_); }
  UpdateVector jacobian_transpose_times(const WeightVector& w, const Sample& s,
                                        const UpdateVector& v) const override;
  UpdateVector jacobian_diagonal(const WeightVector& w,
                                 const Sample& s) const override;
  Mat jacobian(const WeightVector& w, const Sample& s,
               double probe_radius) const override;

 private:
  int dim_;
  GradFn grad_;
  HessFn hessian_;
};

// Scales an inner rule's direction by a running RMS normalizer. evaluate()
// folds the current direction into the normalizer without storing it; the
// accumulator advances once per step in commit(), after any probing.
class RmsPropPreconditionedRule : public UpdateRule {
 public:
  RmsPropPreconditionedRule(std::unique_ptr<UpdateRule> inner, double eta = 1.0,
                            double rho = 0.9, double eps = 1e-8);

  int dim() const override { return inner_->dim(); }
  UpdateVector evaluate(const WeightVector& w, const Sample& s) const override;
  void commit(const WeightVector& w, const Sample& s) override;

  UpdateRule& inner() { return *inner_; }
  const Vec& accumulator() const { return v_; }

 private:
  std::unique_ptr<UpdateRule> inner_;
  Vec v_;
  double eta_;
  double rho_;
  double eps_;
};

}  // namespace adagain
