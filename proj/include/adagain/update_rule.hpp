#pragma once

#include "adagain/core.hpp"

namespace adagain {

inline constexpr double kDefaultProbeRadius = 1e-3;
inline constexpr double kProbeDirectionGuard = 1e-6;

// Produces the update direction Delta(w) for one sample.
//
// evaluate() is a pure function of (w, sample) and the state committed so
// far; commit() advances internal state (eligibility traces, accumulators)
// exactly once per step. The split lets finite-difference probes query
// Delta at perturbed weights without disturbing the trajectory.
class UpdateRule {
 public:
  virtual ~UpdateRule() = default;

  virtual int dim() const = 0;
  virtual UpdateVector evaluate(const WeightVector& w,
                                const Sample& s) const = 0;
  virtual void commit(const WeightVector& /*w*/, const Sample& /*s*/) {}

  // Exact products with the Jacobian G = dDelta/dw, when the rule knows them.
  virtual bool has_exact_products() const { return false; }
  virtual UpdateVector jacobian_transpose_times(const WeightVector& w,
                                                const Sample& s,
                                                const UpdateVector& v) const;
  virtual UpdateVector jacobian_diagonal(const WeightVector& w,
                                         const Sample& s) const;

  // Full Jacobian. The default builds columns by central differences, so it
  // is only meant for small dimensions.
  virtual Mat jacobian(const WeightVector& w, const Sample& s,
                       double probe_radius = kDefaultProbeRadius) const;
};

// (Delta(w + r u) - Delta(w - r u)) / (2r): the directional derivative of the
// update along u, equal to G^T Delta when u = Delta.
UpdateVector jacobian_transpose_product_fd(
    const UpdateRule& rule, const WeightVector& w, const Sample& s,
    const UpdateVector& u, double probe_radius = kDefaultProbeRadius);

// The same centered difference divided element-wise by
// sign(u) * max(guard, |u|): an estimate of the Jacobian diagonal that
// reuses the probe direction u.
UpdateVector jacobian_diagonal_fd(const UpdateRule& rule,
                                  const WeightVector& w, const Sample& s,
                                  const UpdateVector& u,
                                  double probe_radius = kDefaultProbeRadius);

struct FdProducts {
  UpdateVector jtp;
  UpdateVector jdiag;
};

// Both products from a single probe pair: two rule evaluations total.
FdProducts jacobian_products_fd(const UpdateRule& rule, const WeightVector& w,
                                const Sample& s, const UpdateVector& u,
                                double probe_radius = kDefaultProbeRadius);

}  // namespace adagain
