#include "adagain/update_rule.hpp"

#include <cmath>
#include <string>

namespace adagain {

namespace {

void check_probe_radius(double r) {
  if (!(r > 0.0) || !std::isfinite(r)) {
    throw NumericError("probe radius must be finite and > 0");
  }
}

void check_probe_output(const Vec& out, const char* what) {
  if (!all_finite(out)) {
    for (Eigen::Index i = 0; i < out.size(); ++i) {
      if (!std::isfinite(out[i])) {
        throw NumericError(std::string(what) +
                           ": non-finite probe output in direction " +
                           std::to_string(i));
      }
    }
  }
}

}  // namespace

UpdateVector UpdateRule::jacobian_transpose_times(const WeightVector&,
                                                  const Sample&,
                                                  const UpdateVector&) const {
  throw NumericError("rule does not provide exact Jacobian products");
}

UpdateVector UpdateRule::jacobian_diagonal(const WeightVector&,
                                           const Sample&) const {
  throw NumericError("rule does not provide exact Jacobian products");
}

Mat UpdateRule::jacobian(const WeightVector& w, const Sample& s,
                         double probe_radius) const {
  check_probe_radius(probe_radius);
  const Eigen::Index k = w.size();
  Mat g(k, k);
  Vec probe = w;
  for (Eigen::Index j = 0; j < k; ++j) {
    probe[j] = w[j] + probe_radius;
    const Vec plus = evaluate(probe, s);
    probe[j] = w[j] - probe_radius;
    const Vec minus = evaluate(probe, s);
    probe[j] = w[j];
    g.col(j) = (plus - minus) / (2.0 * probe_radius);
  }
  check_probe_output(Vec(g.reshaped()), "jacobian");
  return g;
}

UpdateVector jacobian_transpose_product_fd(const UpdateRule& rule,
                                           const WeightVector& w,
                                           const Sample& s,
                                           const UpdateVector& u,
                                           double probe_radius) {
  check_probe_radius(probe_radius);
  require_same_dim(w, u, "jacobian_transpose_product_fd");
  const Vec plus = rule.evaluate(w + probe_radius * u, s);
  const Vec minus = rule.evaluate(w - probe_radius * u, s);
  Vec out = (plus - minus) / (2.0 * probe_radius);
  check_probe_output(out, "jacobian_transpose_product_fd");
  return out;
}

namespace {

// sign(u) max(guard, |u|), with sign(0) taken as +1 so the guard applies.
Vec guarded_direction(const Vec& u) {
  Vec d(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double mag = std::max(kProbeDirectionGuard, std::abs(u[i]));
    d[i] = u[i] < 0.0 ? -mag : mag;
  }
  return d;
}

}  // namespace

UpdateVector jacobian_diagonal_fd(const UpdateRule& rule,
                                  const WeightVector& w, const Sample& s,
                                  const UpdateVector& u, double probe_radius) {
  Vec centered = jacobian_transpose_product_fd(rule, w, s, u, probe_radius);
  return centered.array() / guarded_direction(u).array();
}

FdProducts jacobian_products_fd(const UpdateRule& rule, const WeightVector& w,
                                const Sample& s, const UpdateVector& u,
                                double probe_radius) {
  FdProducts p;
  p.jtp = jacobian_transpose_product_fd(rule, w, s, u, probe_radius);
  p.jdiag = p.jtp.array() / guarded_direction(u).array();
  return p;
}

}  // namespace adagain
