#include <cmath>

#include "adagain/rng.hpp"
#include "adagain/smd.hpp"
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

}  // namespace

TEST_CASE("smd base cases") {
  SmdOptions opt;
  SUBCASE("psi0 = 0 leaves alpha untouched") {
    SmdQuad quad(2, opt);
    quad.step(Vec::Zero(2), make_vec({1, -1}), Mat::Identity(2, 2));
    CHECK(quad.step_sizes() == Vec::Constant(2, opt.init_step));
    SmdLin lin(2, opt);
    lin.step(Vec::Zero(2), make_vec({1, -1}), Vec::Ones(2));
    CHECK(lin.step_sizes() == Vec::Constant(2, opt.init_step));
    SmdOriginal orig(2, opt);
    orig.step(Vec::Zero(2), make_vec({1, -1}), Mat::Identity(2, 2));
    CHECK(orig.step_sizes() == Vec::Constant(2, opt.init_step));
  }
  SUBCASE("zero curvature turns the sensitivity into a decayed gradient sum") {
    SmdQuad quad(2, opt);
    const Vec g = make_vec({2, -3});
    quad.step(Vec::Zero(2), g, Mat::Zero(2, 2));
    Mat expected = Mat::Zero(2, 2);
    expected.diagonal() = opt.forgetting * g;
    CHECK((quad.sensitivity() - expected).norm() < 1e-15);

    SmdLin lin(1, opt);
    Vec w = Vec::Zero(1);
    double psi = 0.0;
    for (int t = 0; t < 5; ++t) {
      const Vec gt = make_vec({double(t + 1)});
      w = lin.step(w, gt, Vec::Zero(1));
      psi = (1.0 - opt.forgetting) * psi + opt.forgetting * gt[0];
      CHECK(lin.sensitivity()[0] == doctest::Approx(psi).epsilon(1e-14));
    }
  }
  SUBCASE("original variant accumulates the raw gradient sum when H = 0") {
    SmdOriginal orig(1, opt);
    Vec w = Vec::Zero(1);
    double sum = 0.0;
    for (int t = 0; t < 4; ++t) {
      const Vec g = make_vec({0.5 * (t + 1)});
      w = orig.step(w, g, Mat::Zero(1, 1));
      sum += g[0];
      CHECK(orig.sensitivity()[0] == doctest::Approx(sum).epsilon(1e-14));
    }
  }
}

TEST_CASE("frozen three-step trace on the 1-d quadratic loss") {
  // Loss 0.5 w^2 from w0 = 1: g = -w, H = 1; oracle scripted separately.
  SmdOptions opt;
  opt.meta_step = 0.01;
  opt.forgetting = 0.1;
  opt.init_step = 0.1;
  SmdQuad smd(1, opt);
  Vec w = make_vec({1.0});
  const Mat h = Mat::Identity(1, 1);

  w = smd.step(w, -w, h);
  CHECK(smd.step_sizes()[0] == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(smd.sensitivity()(0, 0) == doctest::Approx(-0.1).epsilon(1e-14));
  CHECK(w[0] == doctest::Approx(0.9).epsilon(1e-14));

  w = smd.step(w, -w, h);
  CHECK(smd.step_sizes()[0] ==
        doctest::Approx(0.10000900040501215).epsilon(1e-14));
  CHECK(smd.sensitivity()(0, 0) ==
        doctest::Approx(-0.1789999099959499).epsilon(1e-14));
  CHECK(w[0] == doctest::Approx(0.8099918996354891).epsilon(1e-14));

  w = smd.step(w, -w, h);
  CHECK(smd.step_sizes()[0] ==
        doctest::Approx(0.10002350291417042).epsilon(1e-14));
  CHECK(smd.sensitivity()(0, 0) ==
        doctest::Approx(-0.2403086891579922).epsilon(1e-14));
  CHECK(w[0] == doctest::Approx(0.7289736725018443).epsilon(1e-14));
}

TEST_CASE("linear equals quadratic on diagonal Hessians") {
  Rng rng(13);
  SmdOptions opt;
  opt.meta_step = 0.02;
  SmdQuad quad(3, opt);
  SmdLin lin(3, opt);
  Vec wq = make_vec({1.0, -0.5, 0.25});
  Vec wl = wq;
  for (int t = 0; t < 100; ++t) {
    Vec g(3), hdiag(3);
    for (int i = 0; i < 3; ++i) {
      g[i] = rng.normal(0, 1);
      hdiag[i] = std::abs(rng.normal(0, 1));
    }
    wq = quad.step(wq, g, Mat(hdiag.asDiagonal()));
    wl = lin.step(wl, g, hdiag);
    CHECK((wq - wl).lpNorm<Eigen::Infinity>() <= 1e-12);
    CHECK((quad.step_sizes() - lin.step_sizes()).lpNorm<Eigen::Infinity>() <=
          1e-12);
  }
}

TEST_CASE("original variant differs from forgetting form even at beta = 1") {
  // Documented inequality: beta = 1 drops the psi carry term that the
  // original recursion keeps.
  SmdOptions beta_one;
  beta_one.forgetting = 1.0;
  SmdLin lin(1, beta_one);
  SmdOriginal orig(1, beta_one);
  Vec wl = make_vec({1.0});
  Vec wo = wl;
  const Mat h = Mat::Identity(1, 1);
  for (int t = 0; t < 3; ++t) {
    wl = lin.step(wl, -wl, h.diagonal());
    wo = orig.step(wo, -wo, h);
  }
  CHECK(lin.sensitivity()[0] != orig.sensitivity()[0]);
}

TEST_CASE("all variants keep step-sizes positive") {
  Rng rng(29);
  SmdOptions opt;
  opt.meta_step = 0.5;
  SmdLin lin(2, opt);
  Vec w = Vec::Zero(2);
  for (int t = 0; t < 2000; ++t) {
    Vec g(2), hdiag(2);
    for (int i = 0; i < 2; ++i) {
      g[i] = rng.normal(0, 3);
      hdiag[i] = rng.normal(0, 1);
    }
    w = lin.step(w, g, hdiag);
    w.setZero();  // keep the iterate itself out of the picture
    CHECK((lin.step_sizes().array() > 0.0).all());
  }
}

TEST_CASE("divergence raises with the step index") {
  SmdOptions opt;
  opt.meta_step = 100.0;
  opt.exponent_clamp = 700.0;  // let it blow up
  SmdLin lin(1, opt);
  Vec w = make_vec({1e300});
  bool thrown = false;
  try {
    for (int t = 0; t < 10; ++t) {
      w = lin.step(w, make_vec({1e300}), make_vec({1e300}));
    }
  } catch (const DivergenceError& e) {
    thrown = true;
    CHECK(e.step() >= 1);
  }
  CHECK(thrown);
}
