#include <cmath>

#include "adagain/adagain.hpp"
#include "adagain/rng.hpp"
#include "adagain/rules.hpp"
#include "adagain/td.hpp"
#include "doctest.h"

using namespace adagain;

namespace {

Vec make_vec(std::initializer_list<double> values) {
  Vec v(long(values.size()));
  long i = 0;
  for (double x : values) {
    v[i++] = x;
  }
  return v;
}

const Sample kNoSample = Sample::regression(Vec::Zero(1), 0.0);

// Decoupled quartic objective: grad = c o w^3, Hessian diag(3 c w^2).
// Smooth, nonlinear, and exactly diagonal.
ObjectiveGradientRule make_quartic_rule(const Vec& c) {
  return ObjectiveGradientRule(
      int(c.size()),
      [c](const Vec& w) -> Vec { return c.array() * w.array().cube(); },
      [c](const Vec& w) -> Mat {
        return (3.0 * c.array() * w.array().square()).matrix().asDiagonal();
      });
}

// Constant update, zero Jacobian.
class ConstantRule : public UpdateRule {
 public:
  explicit ConstantRule(Vec value) : value_(std::move(value)) {}
  int dim() const override { return int(value_.size()); }
  UpdateVector evaluate(const WeightVector&, const Sample&) const override {
    return value_;
  }
  bool has_exact_products() const override { return true; }
  UpdateVector jacobian_transpose_times(const WeightVector&, const Sample&,
                                        const UpdateVector&) const override {
    return Vec::Zero(value_.size());
  }
  UpdateVector jacobian_diagonal(const WeightVector&,
                                 const Sample&) const override {
    return Vec::Zero(value_.size());
  }

 private:
  Vec value_;
};

class CountingRule : public UpdateRule {
 public:
  explicit CountingRule(int dim) : inner_(dim) {}
  int dim() const override { return inner_.dim(); }
  UpdateVector evaluate(const WeightVector& w, const Sample& s) const override {
    ++evaluations;
    return inner_.evaluate(w, s);
  }
  mutable long evaluations = 0;

 private:
  LmsRule inner_;
};

}  // namespace

TEST_CASE("stepsize_positivity examples") {
  const Vec alpha = make_vec({0.1, 0.2});
  SUBCASE("zero gradient is the identity in both modes") {
    CHECK(stepsize_positivity(alpha, Vec::Zero(2), 0.01,
                              Positivity::kExponential) == alpha);
    CHECK(stepsize_positivity(alpha, Vec::Zero(2), 0.01,
                              Positivity::kThresholded) == alpha);
  }
  SUBCASE("exponential halving") {
    const double meta = 0.02;
    const Vec g = make_vec({std::log(2.0) / meta});
    const Vec out = stepsize_positivity(make_vec({0.1}), g, meta,
                                        Positivity::kExponential);
    CHECK(out[0] == doctest::Approx(0.05).epsilon(1e-12));
  }
  SUBCASE("threshold floor") {
    const Vec g = make_vec({1e9, 1e9});
    const Vec out =
        stepsize_positivity(alpha, g, 0.01, Positivity::kThresholded, 0.001);
    CHECK(out[0] == doctest::Approx(0.001));
    CHECK(out[1] == doctest::Approx(0.001));
  }
}

TEST_CASE("exponential form equals the additive log-space update") {
  // Maintaining beta = ln(alpha) additively and exponentiating must agree
  // with the direct multiplicative update.
  Rng rng(21);
  const double meta = 0.03;
  Vec alpha = make_vec({0.1, 0.5, 0.02});
  Vec log_alpha = alpha.array().log();
  for (int t = 0; t < 1000; ++t) {
    Vec g(3);
    for (int i = 0; i < 3; ++i) {
      g[i] = rng.normal(0, 2);
    }
    alpha = stepsize_positivity(alpha, g, meta, Positivity::kExponential);
    log_alpha -= meta * g;
    const Vec reference = log_alpha.array().exp();
    CHECK((alpha - reference).lpNorm<Eigen::Infinity>() <
          1e-12 * (1.0 + reference.lpNorm<Eigen::Infinity>()));
  }
}

TEST_CASE("frozen three-step trace on the scalar tracking recursion") {
  // Oracle: the two recursions scripted independently over targets
  // (1.0, 0.5, 2.0) with meta 0.01, forgetting 0.1, alpha0 0.1, w0 0.
  AdaGainOptions opt;
  opt.meta_step = 0.01;
  opt.forgetting = 0.1;
  opt.init_step = 0.1;
  AdaGainLin stepper(1, opt);
  LmsRule rule(1);
  Vec w = Vec::Zero(1);
  const Vec x = Vec::Ones(1);

  w = stepper.step(rule, w, Sample::regression(x, 1.0));
  CHECK(stepper.step_sizes()[0] == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(stepper.sensitivity()[0] == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(w[0] == doctest::Approx(0.1).epsilon(1e-14));

  w = stepper.step(rule, w, Sample::regression(x, 0.5));
  CHECK(stepper.step_sizes()[0] ==
        doctest::Approx(0.10000400008000108).epsilon(1e-14));
  CHECK(stepper.sensitivity()[0] ==
        doctest::Approx(0.1289999599992).epsilon(1e-14));
  CHECK(w[0] == doctest::Approx(0.14000160003200043).epsilon(1e-14));

  w = stepper.step(rule, w, Sample::regression(x, 2.0));
  CHECK(stepper.step_sizes()[0] ==
        doctest::Approx(0.10002799885064423).epsilon(1e-14));
  CHECK(stepper.sensitivity()[0] ==
        doctest::Approx(0.30080944321102665).epsilon(1e-14));
  CHECK(w[0] == doctest::Approx(0.3260535178461996).epsilon(1e-14));
}

TEST_CASE("recursion base cases") {
  AdaGainOptions opt;
  SUBCASE("linear: psi0 = 0 freezes alpha on the first step") {
    AdaGainLin lin(2, opt);
    LmsRule rule(2);
    const Sample s = Sample::regression(make_vec({1.0, -0.5}), 2.0);
    lin.step(rule, Vec::Zero(2), s);
    CHECK(lin.step_sizes() == Vec::Constant(2, opt.init_step));
    // psi1 = beta * Delta0
    const Vec delta0 = lms_update(Vec::Zero(2), make_vec({1.0, -0.5}), 2.0)
                           .delta_w;
    CHECK((lin.sensitivity() - opt.forgetting * delta0).norm() < 1e-15);
  }
  SUBCASE("quadratic: psi columns start from beta * e_i Delta_i") {
    AdaGainQuad quad(2, opt);
    LmsRule rule(2);
    const Sample s = Sample::regression(make_vec({1.0, -0.5}), 2.0);
    quad.step(rule, Vec::Zero(2), s);
    CHECK(quad.step_sizes() == Vec::Constant(2, opt.init_step));
    const Vec delta0 = lms_update(Vec::Zero(2), make_vec({1.0, -0.5}), 2.0)
                           .delta_w;
    Mat expected = Mat::Zero(2, 2);
    expected.diagonal() = opt.forgetting * delta0;
    CHECK((quad.sensitivity() - expected).norm() < 1e-15);
  }
  SUBCASE("forgetting = 1 drops the sensitivity memory term") {
    AdaGainOptions beta_one = opt;
    beta_one.forgetting = 1.0;
    AdaGainLin lin(1, beta_one);
    LmsRule rule(1);
    Vec w = Vec::Zero(1);
    w = lin.step(rule, w, Sample::regression(Vec::Ones(1), 1.0));
    const double psi1 = lin.sensitivity()[0];
    const double alpha1 = lin.step_sizes()[0];
    const double delta2 = 2.0 - w[0];
    w = lin.step(rule, w, Sample::regression(Vec::Ones(1), 2.0));
    // psi2 = alpha2 * jdiag * psi1 + Delta1 with jdiag = -1.
    const double alpha2 = lin.step_sizes()[0];
    CHECK(lin.sensitivity()[0] ==
          doctest::Approx(alpha2 * -1.0 * psi1 + delta2).epsilon(1e-12));
    CHECK(alpha1 == doctest::Approx(beta_one.init_step));
  }
}

TEST_CASE("null updates freeze alpha and decay the sensitivity") {
  ConstantRule rule(Vec::Zero(3));
  AdaGainOptions opt;
  AdaGainLin lin(3, opt);
  Vec w = make_vec({1, 2, 3});
  // Seed psi with something nonzero through a fake history.
  AdaGainLin seeded(3, opt);
  ConstantRule bump(make_vec({1, 1, 1}));
  w = seeded.step(bump, w, kNoSample);
  Vec psi = seeded.sensitivity();
  const Vec alpha = seeded.step_sizes();
  for (int t = 0; t < 5; ++t) {
    w = seeded.step(rule, w, kNoSample);
    psi *= (1.0 - opt.forgetting);
    CHECK((seeded.sensitivity() - psi).norm() < 1e-15);
    CHECK(seeded.step_sizes() == alpha);
  }
}

TEST_CASE("quadratic equals linear when the Jacobian is diagonal") {
  const Vec c = make_vec({1.0, 2.5, 0.7});
  auto rule_a = make_quartic_rule(c);
  auto rule_b = make_quartic_rule(c);
  AdaGainOptions opt;
  opt.meta_step = 0.05;
  AdaGainQuad quad(3, opt);
  AdaGainLin lin(3, opt);
  Vec wq = make_vec({0.9, -0.4, 0.6});
  Vec wl = wq;
  for (int t = 0; t < 100; ++t) {
    wq = quad.step(rule_a, wq, kNoSample);
    wl = lin.step(rule_b, wl, kNoSample);
    CHECK((wq - wl).lpNorm<Eigen::Infinity>() <= 1e-12);
    CHECK((quad.step_sizes() - lin.step_sizes()).lpNorm<Eigen::Infinity>() <=
          1e-12);
  }
}

TEST_CASE("finite-difference mode tracks the exact-product mode") {
  const Vec c = make_vec({1.0, 0.5});
  auto rule_exact = make_quartic_rule(c);
  auto rule_fd = make_quartic_rule(c);
  AdaGainOptions opt;
  AdaGainLin exact(2, opt);
  AdaGainLin fd(2, opt, AdaGainLin::Products::kFiniteDifference);
  Vec we = make_vec({0.5, -0.7});
  Vec wf = we;
  double max_rel = 0.0;
  for (int t = 0; t < 1000; ++t) {
    we = exact.step(rule_exact, we, kNoSample);
    wf = fd.step(rule_fd, wf, kNoSample);
    const double rel = (exact.step_sizes() - fd.step_sizes()).norm() /
                       exact.step_sizes().norm();
    max_rel = std::max(max_rel, rel);
  }
  CHECK(max_rel < 1e-4);
}

TEST_CASE("finite-difference error shrinks with the probe radius") {
  const Vec c = make_vec({1.0, 0.5});
  auto run_fd = [&](double radius) {
    auto rule_exact = make_quartic_rule(c);
    auto rule_fd = make_quartic_rule(c);
    AdaGainOptions opt;
    AdaGainLin exact(2, opt);
    AdaGainOptions fd_opt = opt;
    fd_opt.probe_radius = radius;
    AdaGainLin fd(2, fd_opt, AdaGainLin::Products::kFiniteDifference);
    Vec we = make_vec({0.5, -0.7});
    Vec wf = we;
    double max_err = 0.0;
    for (int t = 0; t < 200; ++t) {
      we = exact.step(rule_exact, we, kNoSample);
      wf = fd.step(rule_fd, wf, kNoSample);
      max_err = std::max(max_err,
                         (exact.step_sizes() - fd.step_sizes()).norm());
    }
    return max_err;
  };
  const double coarse = run_fd(1e-3);
  const double fine = run_fd(1e-4);
  CHECK(fine * 3.0 <= coarse);
}

TEST_CASE("finite-difference mode costs exactly two extra evaluations") {
  CountingRule counted(2);
  AdaGainLin fd(2, {}, AdaGainLin::Products::kFiniteDifference);
  Vec w = Vec::Zero(2);
  const Sample s = Sample::regression(make_vec({1.0, 2.0}), 1.0);
  for (int t = 0; t < 10; ++t) {
    w = fd.step(counted, w, s);
  }
  CHECK(counted.evaluations == 30);  // one nominal + two probes per step
}

TEST_CASE("thresholded mode projects onto the floor") {
  // A rule with constant positive G^T Delta marches alpha straight down
  // until the projection pins it at the floor.
  class DownhillRule : public UpdateRule {
   public:
    int dim() const override { return 1; }
    UpdateVector evaluate(const WeightVector&, const Sample&) const override {
      return Vec::Ones(1);
    }
    bool has_exact_products() const override { return true; }
    UpdateVector jacobian_transpose_times(const WeightVector&, const Sample&,
                                          const UpdateVector&) const override {
      return Vec::Ones(1);
    }
    UpdateVector jacobian_diagonal(const WeightVector&,
                                   const Sample&) const override {
      return Vec::Zero(1);
    }
  };
  AdaGainOptions opt;
  opt.positivity = Positivity::kThresholded;
  opt.step_floor = 0.001;
  opt.meta_step = 0.02;
  AdaGainLin lin(1, opt);
  DownhillRule rule;
  Vec w = Vec::Zero(1);
  for (int t = 0; t < 50; ++t) {
    w = lin.step(rule, w, kNoSample);
    CHECK(lin.step_sizes()[0] >= opt.step_floor);
  }
  CHECK(lin.step_sizes()[0] == doctest::Approx(opt.step_floor));
  CHECK(all_finite(w));
}

TEST_CASE("alpha stays in (0, inf) under randomized meta-gradients") {
  Rng rng(17);
  AdaGainOptions opt;
  opt.meta_step = 0.01;
  for (auto mode : {Positivity::kExponential, Positivity::kThresholded}) {
    opt.positivity = mode;
    StepSizeVector alpha = make_vec({0.1, 1.0, 0.001, 10.0});
    for (int t = 0; t < 100000; ++t) {
      Vec g(4);
      for (int i = 0; i < 4; ++i) {
        g[i] = rng.normal(0, 10);
      }
      detail::adapt_step_sizes(alpha, g, opt, 1.0);
    }
    CHECK((alpha.array() > 0.0).all());
    CHECK(all_finite(alpha));
  }
}

TEST_CASE("exponent clamping is counted") {
  AdaGainOptions opt;
  opt.meta_step = 1e6;
  AdaGainLin lin(1, opt);
  LmsRule rule(1);
  Vec w = Vec::Zero(1);
  w = lin.step(rule, w, Sample::regression(Vec::Ones(1), 1.0));
  w = lin.step(rule, w, Sample::regression(Vec::Ones(1), 10.0));
  CHECK(lin.clamp_events() > 0);
  CHECK(all_finite(lin.step_sizes()));
}
