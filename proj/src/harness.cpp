#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "adagain/adagain.hpp"
#include "adagain/baselines.hpp"
#include "adagain/harness.hpp"
#include "adagain/rng.hpp"
#include "adagain/rules.hpp"
#include "adagain/smd.hpp"
#include "adagain/td.hpp"

namespace adagain {

namespace {

// ---------------------------------------------------------------------------
// Parameter handling

struct Hyper {
  double eta = 0.01;
  double meta_step = 0.01;
  double forgetting = 0.1;
  double init_step = 0.1;
  double eps = 1e-8;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double rho = 0.9;
  double lambda = 0.0;
  double gamma = 0.99;
  Positivity positivity = Positivity::kExponential;
  double step_floor = 1e-3;
  double exponent_clamp = 10.0;
  double probe_radius = kDefaultProbeRadius;
  TdAlphaForm alpha_form = TdAlphaForm::kDeltaDotE;

  AdaGainOptions adagain() const {
    AdaGainOptions o;
    o.meta_step = meta_step;
    o.forgetting = forgetting;
    o.init_step = init_step;
    o.positivity = positivity;
    o.step_floor = step_floor;
    o.exponent_clamp = exponent_clamp;
    o.probe_radius = probe_radius;
    return o;
  }

  SmdOptions smd() const {
    SmdOptions o;
    o.meta_step = meta_step;
    o.forgetting = forgetting;
    o.init_step = init_step;
    o.exponent_clamp = exponent_clamp;
    return o;
  }

  AccumulatorOptions accumulator() const {
    AccumulatorOptions o;
    o.eta = eta;
    o.eps = eps;
    o.beta1 = beta1;
    o.beta2 = beta2;
    o.rho = rho;
    return o;
  }
};

Hyper parse_hyper(const Params& p) {
  Hyper h;
  h.eta = param_double(p, "eta", h.eta);
  h.meta_step = param_double(p, "meta_step", h.meta_step);
  h.forgetting = param_double(p, "forgetting", h.forgetting);
  h.init_step = param_double(p, "init_step", h.init_step);
  h.eps = param_double(p, "eps", h.eps);
  h.beta1 = param_double(p, "beta1", h.beta1);
  h.beta2 = param_double(p, "beta2", h.beta2);
  h.rho = param_double(p, "rho", h.rho);
  h.lambda = param_double(p, "lambda", h.lambda);
  h.gamma = param_double(p, "gamma", h.gamma);
  const std::string pos = param_str(p, "positivity", "exp");
  if (pos == "exp") {
    h.positivity = Positivity::kExponential;
  } else if (pos == "threshold") {
    h.positivity = Positivity::kThresholded;
  } else {
    throw NumericError("positivity must be 'exp' or 'threshold'");
  }
  h.step_floor = param_double(p, "step_floor", h.step_floor);
  h.exponent_clamp = param_double(p, "exponent_clamp", h.exponent_clamp);
  h.probe_radius = param_double(p, "probe_radius", h.probe_radius);
  const std::string form = param_str(p, "alpha_form", "delta-e");
  if (form == "delta-e") {
    h.alpha_form = TdAlphaForm::kDeltaDotE;
  } else if (form == "delta-d") {
    h.alpha_form = TdAlphaForm::kDeltaDotD;
  } else {
    throw NumericError("alpha_form must be 'delta-e' or 'delta-d'");
  }
  return h;
}

const std::set<std::string>& common_keys() {
  static const std::set<std::string> keys = {
      "eta",   "meta_step",      "forgetting",   "init_step",  "eps",
      "beta1", "beta2",          "rho",          "lambda",     "gamma",
      "positivity", "step_floor", "exponent_clamp", "probe_radius",
      "alpha_form", "objective", "eval_window"};
  return keys;
}

void validate_params(const ExperimentConfig& cfg) {
  std::set<std::string> allowed = common_keys();
  if (cfg.problem == "tracking") {
    allowed.insert("schedule");
  } else if (cfg.problem == "rosenbrock") {
    allowed.insert({"init", "init_box"});
  } else if (cfg.problem == "series") {
    allowed.insert({"csv", "normalize", "bias", "smape_x2"});
  }
  std::string unknown;
  for (const auto& [k, v] : cfg.params) {
    (void)v;
    if (!allowed.count(k)) {
      unknown += unknown.empty() ? k : ", " + k;
    }
  }
  if (!unknown.empty()) {
    std::string valid;
    for (const auto& k : allowed) {
      valid += valid.empty() ? k : ", " + k;
    }
    throw NumericError("unknown parameter(s) for problem '" + cfg.problem +
                       "': " + unknown + " (valid: " + valid + ")");
  }
}

std::vector<TrackingSegment> parse_schedule(const Params& p) {
  const std::string text = param_str(p, "schedule", "");
  if (text.empty()) {
    return TrackingEnv::default_schedule();
  }
  // duration:sigma_y:sigma_z segments joined by commas
  std::vector<TrackingSegment> segs;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    TrackingSegment seg{};
    if (std::sscanf(item.c_str(), "%ld:%lf:%lf", &seg.duration, &seg.sigma_y,
                    &seg.sigma_z) != 3) {
      throw NumericError("bad schedule segment '" + item +
                         "' (want duration:sigma_y:sigma_z)");
    }
    segs.push_back(seg);
  }
  return segs;
}

// ---------------------------------------------------------------------------
// Learner adapters

class RegressionLearner {
 public:
  virtual ~RegressionLearner() = default;
  virtual double predict(const Vec& x) const { return weights().dot(x); }
  virtual void learn(const Vec& x, double target) = 0;
  virtual const WeightVector& weights() const = 0;
  virtual double alpha_mean() const = 0;
};

class ConstantLms final : public RegressionLearner {
 public:
  ConstantLms(int dim, double eta) : w_(Vec::Zero(dim)), eta_(eta) {}
  void learn(const Vec& x, double target) override {
    w_ += eta_ * lms_update(w_, x, target).delta_w;
  }
  const WeightVector& weights() const override { return w_; }
  double alpha_mean() const override { return eta_; }

 private:
  Vec w_;
  double eta_;
};

class AccumulatorRegression final : public RegressionLearner {
 public:
  AccumulatorRegression(AccumulatorVariant v, int dim, AccumulatorOptions opt)
      : w_(Vec::Zero(dim)), opt_(v, dim, opt) {}
  void learn(const Vec& x, double target) override {
    const Vec g = -lms_update(w_, x, target).delta_w;
    opt_.step(w_, g);
  }
  const WeightVector& weights() const override { return w_; }
  double alpha_mean() const override {
    return opt_.effective_step_sizes().mean();
  }

 private:
  Vec w_;
  AccumulatorOptimizer opt_;
};

class HdRegression final : public RegressionLearner {
 public:
  HdRegression(int dim, double init_step, double meta)
      : w_(Vec::Zero(dim)), hd_(dim, init_step, meta) {}
  void learn(const Vec& x, double target) override {
    const Vec g = -lms_update(w_, x, target).delta_w;
    hd_.step(w_, g);
  }
  const WeightVector& weights() const override { return w_; }
  double alpha_mean() const override { return hd_.step_size(); }

 private:
  Vec w_;
  HypergradientDescent hd_;
};

class IdbdRegression final : public RegressionLearner {
 public:
  IdbdRegression(int dim, double init_step, double meta)
      : w_(Vec::Zero(dim)), idbd_(dim, init_step, meta) {}
  void learn(const Vec& x, double target) override {
    idbd_.step(w_, x, target - w_.dot(x));
  }
  const WeightVector& weights() const override { return w_; }
  double alpha_mean() const override { return idbd_.step_sizes().mean(); }

 private:
  Vec w_;
  Idbd idbd_;
};

enum class SmdVariant { kQuad, kLin, kOriginal };

class SmdRegression final : public RegressionLearner {
 public:
  SmdRegression(SmdVariant v, int dim, SmdOptions opt)
      : variant_(v), w_(Vec::Zero(dim)) {
    if (v == SmdVariant::kQuad) {
      quad_ = std::make_unique<SmdQuad>(dim, opt);
    } else if (v == SmdVariant::kLin) {
      lin_ = std::make_unique<SmdLin>(dim, opt);
    } else {
      orig_ = std::make_unique<SmdOriginal>(dim, opt);
    }
  }
  void learn(const Vec& x, double target) override {
    const Vec g = lms_update(w_, x, target).delta_w;  // descent direction
    switch (variant_) {
      case SmdVariant::kQuad:
        w_ = quad_->step(w_, g, x * x.transpose());
        break;
      case SmdVariant::kLin:
        w_ = lin_->step(w_, g, x.cwiseProduct(x));
        break;
      case SmdVariant::kOriginal:
        w_ = orig_->step(w_, g, x * x.transpose());
        break;
    }
  }
  const WeightVector& weights() const override { return w_; }
  double alpha_mean() const override {
    if (quad_) return quad_->step_sizes().mean();
    if (lin_) return lin_->step_sizes().mean();
    return orig_->step_sizes().mean();
  }

 private:
  SmdVariant variant_;
  Vec w_;
  std::unique_ptr<SmdQuad> quad_;
  std::unique_ptr<SmdLin> lin_;
  std::unique_ptr<SmdOriginal> orig_;
};

enum class AdaGainKind { kLin, kQuad, kFd, kFdRmsProp };

class AdaGainRegression final : public RegressionLearner {
 public:
  AdaGainRegression(AdaGainKind kind, int dim, const Hyper& h)
      : w_(Vec::Zero(dim)) {
    std::unique_ptr<UpdateRule> base = std::make_unique<LmsRule>(dim);
    if (kind == AdaGainKind::kFdRmsProp) {
      rule_ = std::make_unique<RmsPropPreconditionedRule>(std::move(base),
                                                          h.eta, h.rho, h.eps);
    } else {
      rule_ = std::move(base);
    }
    if (kind == AdaGainKind::kQuad) {
      quad_ = std::make_unique<AdaGainQuad>(dim, h.adagain());
    } else {
      const auto products = kind == AdaGainKind::kLin
                                ? AdaGainLin::Products::kExact
                                : AdaGainLin::Products::kFiniteDifference;
      lin_ = std::make_unique<AdaGainLin>(dim, h.adagain(), products);
    }
  }
  void learn(const Vec& x, double target) override {
    const Sample s = Sample::regression(x, target);
    w_ = quad_ ? quad_->step(*rule_, w_, s) : lin_->step(*rule_, w_, s);
  }
  const WeightVector& weights() const override { return w_; }
  double alpha_mean() const override {
    return (quad_ ? quad_->step_sizes() : lin_->step_sizes()).mean();
  }

 private:
  Vec w_;
  std::unique_ptr<UpdateRule> rule_;
  std::unique_ptr<AdaGainQuad> quad_;
  std::unique_ptr<AdaGainLin> lin_;
};

class AdaGainTdRegression final : public RegressionLearner {
 public:
  AdaGainTdRegression(int dim, const Hyper& h)
      : w_(Vec::Zero(dim)),
        stepper_(dim, h.lambda, h.adagain(), h.alpha_form),
        zero_(Vec::Zero(dim)) {}
  void learn(const Vec& x, double target) override {
    // gamma = 0 turns the TD update into LMS with the reward as target.
    w_ = stepper_.step(w_, Sample::transition(x, zero_, target, 0.0, 0.0, 1.0));
  }
  const WeightVector& weights() const override { return w_; }
  double alpha_mean() const override { return stepper_.step_sizes().mean(); }

 private:
  Vec w_;
  AdaGainTd stepper_;
  Vec zero_;
};

std::unique_ptr<RegressionLearner> make_regression_learner(
    const std::string& id, int dim, const Hyper& h) {
  if (id == "sgd") return std::make_unique<ConstantLms>(dim, h.eta);
  if (id == "adagrad")
    return std::make_unique<AccumulatorRegression>(AccumulatorVariant::kAdaGrad,
                                                   dim, h.accumulator());
  if (id == "rmsprop")
    return std::make_unique<AccumulatorRegression>(AccumulatorVariant::kRmsProp,
                                                   dim, h.accumulator());
  if (id == "adadelta")
    return std::make_unique<AccumulatorRegression>(
        AccumulatorVariant::kAdaDelta, dim, h.accumulator());
  if (id == "adam")
    return std::make_unique<AccumulatorRegression>(AccumulatorVariant::kAdam,
                                                   dim, h.accumulator());
  if (id == "amsgrad")
    return std::make_unique<AccumulatorRegression>(AccumulatorVariant::kAmsGrad,
                                                   dim, h.accumulator());
  if (id == "hd")
    return std::make_unique<HdRegression>(dim, h.init_step, h.meta_step);
  if (id == "idbd")
    return std::make_unique<IdbdRegression>(dim, h.init_step, h.meta_step);
  if (id == "smd-quad")
    return std::make_unique<SmdRegression>(SmdVariant::kQuad, dim, h.smd());
  if (id == "smd-lin")
    return std::make_unique<SmdRegression>(SmdVariant::kLin, dim, h.smd());
  if (id == "smd-orig")
    return std::make_unique<SmdRegression>(SmdVariant::kOriginal, dim, h.smd());
  if (id == "adagain-quad")
    return std::make_unique<AdaGainRegression>(AdaGainKind::kQuad, dim, h);
  if (id == "adagain-lin" || id == "adagain-lms")
    return std::make_unique<AdaGainRegression>(AdaGainKind::kLin, dim, h);
  if (id == "adagain-fd")
    return std::make_unique<AdaGainRegression>(AdaGainKind::kFd, dim, h);
  if (id == "adagain-fd-rmsprop")
    return std::make_unique<AdaGainRegression>(AdaGainKind::kFdRmsProp, dim, h);
  if (id == "adagain-td") return std::make_unique<AdaGainTdRegression>(dim, h);
  throw NumericError("algorithm '" + id +
                     "' is not available on this problem");
}

// TD learners shared by the Baird and series problems.
class TdLearner {
 public:
  virtual ~TdLearner() = default;
  virtual void observe(const Sample& s) = 0;
  virtual const WeightVector& weights() const = 0;
  virtual double alpha_mean() const = 0;
  virtual Vec step_sizes() const {
    return Vec::Constant(weights().size(), alpha_mean());
  }
};

class ConstantTd final : public TdLearner {
 public:
  ConstantTd(Vec w0, double lambda, double eta)
      : w_(std::move(w0)), rule_(int(w_.size()), lambda), eta_(eta) {}
  void observe(const Sample& s) override {
    w_ += eta_ * rule_.evaluate(w_, s);
    rule_.commit(w_, s);
  }
  const WeightVector& weights() const override { return w_; }
  double alpha_mean() const override { return eta_; }

 private:
  Vec w_;
  TdLambdaRule rule_;
  double eta_;
};

class AccumulatorTd final : public TdLearner {
 public:
  AccumulatorTd(AccumulatorVariant v, Vec w0, double lambda,
                AccumulatorOptions opt)
      : w_(std::move(w0)),
        rule_(int(w_.size()), lambda),
        opt_(v, int(w_.size()), opt) {}
  void observe(const Sample& s) override {
    const Vec g = -rule_.evaluate(w_, s);  // semi-gradient
    opt_.step(w_, g);
    rule_.commit(w_, s);
  }
  const WeightVector& weights() const override { return w_; }
  double alpha_mean() const override {
    return opt_.effective_step_sizes().mean();
  }
  Vec step_sizes() const override { return opt_.effective_step_sizes(); }

 private:
  Vec w_;
  TdLambdaRule rule_;
  AccumulatorOptimizer opt_;
};

class HdTd final : public TdLearner {
 public:
  HdTd(Vec w0, double lambda, double init_step, double meta)
      : w_(std::move(w0)),
        rule_(int(w_.size()), lambda),
        hd_(int(w_.size()), init_step, meta) {}
  void observe(const Sample& s) override {
    const Vec g = -rule_.evaluate(w_, s);
    hd_.step(w_, g);
    rule_.commit(w_, s);
  }
  const WeightVector& weights() const override { return w_; }
  double alpha_mean() const override { return hd_.step_size(); }

 private:
  Vec w_;
  TdLambdaRule rule_;
  HypergradientDescent hd_;
};

class AdaGainTdLearner final : public TdLearner {
 public:
  AdaGainTdLearner(Vec w0, double lambda, const Hyper& h)
      : w_(std::move(w0)),
        stepper_(int(w_.size()), lambda, h.adagain(), h.alpha_form) {}
  void observe(const Sample& s) override { w_ = stepper_.step(w_, s); }
  const WeightVector& weights() const override { return w_; }
  double alpha_mean() const override { return stepper_.step_sizes().mean(); }
  Vec step_sizes() const override { return stepper_.step_sizes(); }

 private:
  Vec w_;
  AdaGainTd stepper_;
};

class AdaGainTdQuadLearner final : public TdLearner {
 public:
  AdaGainTdQuadLearner(Vec w0, double lambda, const Hyper& h)
      : w_(std::move(w0)),
        stepper_(int(w_.size()), lambda, h.adagain()) {}
  void observe(const Sample& s) override { w_ = stepper_.step(w_, s); }
  const WeightVector& weights() const override { return w_; }
  double alpha_mean() const override { return stepper_.step_sizes().mean(); }
  Vec step_sizes() const override { return stepper_.step_sizes(); }

 private:
  Vec w_;
  AdaGainTdQuad stepper_;
};

class AdaGainFdTd final : public TdLearner {
 public:
  AdaGainFdTd(Vec w0, double lambda, const Hyper& h, bool rmsprop)
      : w_(std::move(w0)),
        stepper_(int(w_.size()), h.adagain(),
                 AdaGainLin::Products::kFiniteDifference) {
    std::unique_ptr<UpdateRule> base =
        std::make_unique<TdLambdaRule>(int(w_.size()), lambda);
    rule_ = rmsprop ? std::make_unique<RmsPropPreconditionedRule>(
                          std::move(base), h.eta, h.rho, h.eps)
                    : std::move(base);
  }
  void observe(const Sample& s) override { w_ = stepper_.step(*rule_, w_, s); }
  const WeightVector& weights() const override { return w_; }
  double alpha_mean() const override { return stepper_.step_sizes().mean(); }
  Vec step_sizes() const override { return stepper_.step_sizes(); }

 private:
  Vec w_;
  AdaGainLin stepper_;
  std::unique_ptr<UpdateRule> rule_;
};

// SMD driven by the same semi-gradient quantities as the TD steppers:
// g = delta e and curvature -G with G = e d^T. TD has no loss Hessian, so
// this stand-in is what lets SMD run on Baird's problem at all.
class SmdTd final : public TdLearner {
 public:
  SmdTd(SmdVariant v, Vec w0, double lambda, SmdOptions opt)
      : variant_(v), w_(std::move(w0)), rule_(int(w_.size()), lambda) {
    const int dim = int(w_.size());
    if (v == SmdVariant::kQuad) {
      quad_ = std::make_unique<SmdQuad>(dim, opt);
    } else if (v == SmdVariant::kLin) {
      lin_ = std::make_unique<SmdLin>(dim, opt);
    } else {
      orig_ = std::make_unique<SmdOriginal>(dim, opt);
    }
  }
  void observe(const Sample& s) override {
    const Vec e = rule_.pending_trace(s);
    const Vec g = td_error(w_, s) * e;
    const Vec d = td_direction(s);
    switch (variant_) {
      case SmdVariant::kQuad:
        w_ = quad_->step(w_, g, -e * d.transpose());
        break;
      case SmdVariant::kLin:
        w_ = lin_->step(w_, g, -e.cwiseProduct(d));
        break;
      case SmdVariant::kOriginal:
        w_ = orig_->step(w_, g, -e * d.transpose());
        break;
    }
    rule_.commit(w_, s);
  }
  const WeightVector& weights() const override { return w_; }
  double alpha_mean() const override {
    if (quad_) return quad_->step_sizes().mean();
    if (lin_) return lin_->step_sizes().mean();
    return orig_->step_sizes().mean();
  }

 private:
  SmdVariant variant_;
  Vec w_;
  TdLambdaRule rule_;
  std::unique_ptr<SmdQuad> quad_;
  std::unique_ptr<SmdLin> lin_;
  std::unique_ptr<SmdOriginal> orig_;
};

std::unique_ptr<TdLearner> make_td_learner(const std::string& id, Vec w0,
                                           const Hyper& h) {
  const double lambda = h.lambda;
  if (id == "sgd")
    return std::make_unique<ConstantTd>(std::move(w0), lambda, h.eta);
  if (id == "rmsprop")
    return std::make_unique<AccumulatorTd>(AccumulatorVariant::kRmsProp,
                                           std::move(w0), lambda,
                                           h.accumulator());
  if (id == "adam")
    return std::make_unique<AccumulatorTd>(AccumulatorVariant::kAdam,
                                           std::move(w0), lambda,
                                           h.accumulator());
  if (id == "amsgrad")
    return std::make_unique<AccumulatorTd>(AccumulatorVariant::kAmsGrad,
                                           std::move(w0), lambda,
                                           h.accumulator());
  if (id == "hd")
    return std::make_unique<HdTd>(std::move(w0), lambda, h.init_step,
                                  h.meta_step);
  if (id == "adagain-td" || id == "adagain-lin")
    return std::make_unique<AdaGainTdLearner>(std::move(w0), lambda, h);
  if (id == "adagain-quad")
    return std::make_unique<AdaGainTdQuadLearner>(std::move(w0), lambda, h);
  if (id == "adagain-fd")
    return std::make_unique<AdaGainFdTd>(std::move(w0), lambda, h, false);
  if (id == "adagain-fd-rmsprop")
    return std::make_unique<AdaGainFdTd>(std::move(w0), lambda, h, true);
  if (id == "smd-quad")
    return std::make_unique<SmdTd>(SmdVariant::kQuad, std::move(w0), lambda,
                                   h.smd());
  if (id == "smd-lin")
    return std::make_unique<SmdTd>(SmdVariant::kLin, std::move(w0), lambda,
                                   h.smd());
  if (id == "smd-orig")
    return std::make_unique<SmdTd>(SmdVariant::kOriginal, std::move(w0),
                                   lambda, h.smd());
  throw NumericError("algorithm '" + id +
                     "' is not available on this problem");
}

// Rosenbrock learners work on the analytic objective directly.
class RosenbrockLearner {
 public:
  virtual ~RosenbrockLearner() = default;
  virtual void step() = 0;
  virtual const Eigen::Vector2d& weights() const = 0;
  virtual double alpha_mean() const = 0;
};

Vec rb_gradient(const Vec& w) {
  return rosenbrock(Eigen::Vector2d(w[0], w[1])).grad;
}

Mat rb_hessian(const Vec& w) {
  return rosenbrock_hessian(Eigen::Vector2d(w[0], w[1]));
}

class GradientRosenbrock final : public RosenbrockLearner {
 public:
  GradientRosenbrock(AccumulatorVariant v, Eigen::Vector2d w0, const Hyper& h)
      : w_(w0), opt_(v, 2, h.accumulator()) {}
  void step() override {
    Vec w = w_;
    opt_.step(w, rosenbrock(w_).grad);
    w_ = w;
  }
  const Eigen::Vector2d& weights() const override { return w_; }
  double alpha_mean() const override {
    return opt_.effective_step_sizes().mean();
  }

 private:
  Eigen::Vector2d w_;
  AccumulatorOptimizer opt_;
};

class HdRosenbrock final : public RosenbrockLearner {
 public:
  HdRosenbrock(Eigen::Vector2d w0, const Hyper& h)
      : w_(w0), hd_(2, h.init_step, h.meta_step) {}
  void step() override {
    Vec w = w_;
    hd_.step(w, rosenbrock(w_).grad);
    w_ = w;
  }
  const Eigen::Vector2d& weights() const override { return w_; }
  double alpha_mean() const override { return hd_.step_size(); }

 private:
  Eigen::Vector2d w_;
  HypergradientDescent hd_;
};

class SmdRosenbrock final : public RosenbrockLearner {
 public:
  SmdRosenbrock(SmdVariant v, Eigen::Vector2d w0, const Hyper& h)
      : variant_(v), w_(w0) {
    if (v == SmdVariant::kQuad) {
      quad_ = std::make_unique<SmdQuad>(2, h.smd());
    } else if (v == SmdVariant::kLin) {
      lin_ = std::make_unique<SmdLin>(2, h.smd());
    } else {
      orig_ = std::make_unique<SmdOriginal>(2, h.smd());
    }
  }
  void step() override {
    const Vec g = -rosenbrock(w_).grad;
    const Mat hess = rosenbrock_hessian(w_);
    Vec w = w_;
    switch (variant_) {
      case SmdVariant::kQuad:
        w = quad_->step(w, g, hess);
        break;
      case SmdVariant::kLin:
        w = lin_->step(w, g, hess.diagonal());
        break;
      case SmdVariant::kOriginal:
        w = orig_->step(w, g, hess);
        break;
    }
    w_ = w;
  }
  const Eigen::Vector2d& weights() const override { return w_; }
  double alpha_mean() const override {
    if (quad_) return quad_->step_sizes().mean();
    if (lin_) return lin_->step_sizes().mean();
    return orig_->step_sizes().mean();
  }

 private:
  SmdVariant variant_;
  Eigen::Vector2d w_;
  std::unique_ptr<SmdQuad> quad_;
  std::unique_ptr<SmdLin> lin_;
  std::unique_ptr<SmdOriginal> orig_;
};

class AdaGainRosenbrock final : public RosenbrockLearner {
 public:
  AdaGainRosenbrock(AdaGainKind kind, Eigen::Vector2d w0, const Hyper& h)
      : w_(w0), sample_(Sample::regression(Vec::Zero(2), 0.0)) {
    std::unique_ptr<UpdateRule> base;
    if (kind == AdaGainKind::kLin || kind == AdaGainKind::kQuad) {
      base = std::make_unique<ObjectiveGradientRule>(2, rb_gradient,
                                                     rb_hessian);
    } else {
      // The generic wrapper treats the update as a black box.
      base = std::make_unique<ObjectiveGradientRule>(2, rb_gradient);
    }
    if (kind == AdaGainKind::kFdRmsProp) {
      rule_ = std::make_unique<RmsPropPreconditionedRule>(std::move(base),
                                                          h.eta, h.rho, h.eps);
    } else {
      rule_ = std::move(base);
    }
    if (kind == AdaGainKind::kQuad) {
      quad_ = std::make_unique<AdaGainQuad>(2, h.adagain());
    } else {
      const auto products = kind == AdaGainKind::kLin
                                ? AdaGainLin::Products::kExact
                                : AdaGainLin::Products::kFiniteDifference;
      lin_ = std::make_unique<AdaGainLin>(2, h.adagain(), products);
    }
  }
  void step() override {
    Vec w = w_;
    w = quad_ ? quad_->step(*rule_, w, sample_)
              : lin_->step(*rule_, w, sample_);
    w_ = w;
  }
  const Eigen::Vector2d& weights() const override { return w_; }
  double alpha_mean() const override {
    return (quad_ ? quad_->step_sizes() : lin_->step_sizes()).mean();
  }

 private:
  Eigen::Vector2d w_;
  Sample sample_;
  std::unique_ptr<UpdateRule> rule_;
  std::unique_ptr<AdaGainQuad> quad_;
  std::unique_ptr<AdaGainLin> lin_;
};

std::unique_ptr<RosenbrockLearner> make_rosenbrock_learner(
    const std::string& id, Eigen::Vector2d w0, const Hyper& h) {
  if (id == "sgd")
    return std::make_unique<GradientRosenbrock>(AccumulatorVariant::kSgd, w0, h);
  if (id == "adagrad")
    return std::make_unique<GradientRosenbrock>(AccumulatorVariant::kAdaGrad,
                                                w0, h);
  if (id == "rmsprop")
    return std::make_unique<GradientRosenbrock>(AccumulatorVariant::kRmsProp,
                                                w0, h);
  if (id == "adadelta")
    return std::make_unique<GradientRosenbrock>(AccumulatorVariant::kAdaDelta,
                                                w0, h);
  if (id == "adam")
    return std::make_unique<GradientRosenbrock>(AccumulatorVariant::kAdam, w0,
                                                h);
  if (id == "amsgrad")
    return std::make_unique<GradientRosenbrock>(AccumulatorVariant::kAmsGrad,
                                                w0, h);
  if (id == "hd") return std::make_unique<HdRosenbrock>(w0, h);
  if (id == "smd-quad")
    return std::make_unique<SmdRosenbrock>(SmdVariant::kQuad, w0, h);
  if (id == "smd-lin")
    return std::make_unique<SmdRosenbrock>(SmdVariant::kLin, w0, h);
  if (id == "smd-orig")
    return std::make_unique<SmdRosenbrock>(SmdVariant::kOriginal, w0, h);
  if (id == "adagain-quad")
    return std::make_unique<AdaGainRosenbrock>(AdaGainKind::kQuad, w0, h);
  if (id == "adagain-lin")
    return std::make_unique<AdaGainRosenbrock>(AdaGainKind::kLin, w0, h);
  if (id == "adagain-fd")
    return std::make_unique<AdaGainRosenbrock>(AdaGainKind::kFd, w0, h);
  if (id == "adagain-fd-rmsprop")
    return std::make_unique<AdaGainRosenbrock>(AdaGainKind::kFdRmsProp, w0, h);
  throw NumericError("algorithm '" + id +
                     "' is not available on this problem");
}

// ---------------------------------------------------------------------------
// Run loop

struct RunContext {
  RunOutcome& out;
  std::string hash;
  long thin;
  double threshold;
  double sentinel;
  long eval_window;
  MeanAccumulator window_error;
  double ewma = 0.0;
  long t = 0;

  RunContext(const ExperimentConfig& c, RunOutcome& o)
      : out(o),
        hash(config_hash_hex(c)),
        thin(c.effective_thin()),
        threshold(c.effective_divergence_threshold()),
        sentinel(c.effective_sentinel()),
        eval_window(param_long(c.params, "eval_window",
                               c.problem == "tracking" ? 500000 : c.steps)) {}

  void record(long step, const std::string& metric, double value) {
    out.records.push_back({hash, out.seed, step, metric, value});
  }

  // Returns false when the run must stop (divergence flagged).
  bool observe_error(double err, double weight_norm, double alpha_mean) {
    const double capped = std::isfinite(err) ? err : sentinel;
    if (t < eval_window) {
      window_error.add(capped);
    }
    const double rate = 1.0 / double(std::min(t + 1L, 1000L));
    ewma = t == 0 ? capped : ewma + rate * (capped - ewma);
    if (!std::isfinite(err) ||
        detect_divergence(ewma, weight_norm, threshold)) {
      flag_divergence(t);
      return false;
    }
    if (t % thin == 0) {
      record(t, "error", err);
      record(t, "alpha_mean", alpha_mean);
      record(t, "weight_norm", weight_norm);
    }
    out.final_error = err;
    ++t;
    return true;
  }

  void flag_divergence(long step) {
    out.diverged = true;
    out.divergence_step = step;
    out.final_error = sentinel;
    record(step, "error", sentinel);
    record(step, "diverged", 1.0);
  }

  void finish() { out.mean_error = window_error.mean(); }
};

RunOutcome run_tracking(const ExperimentConfig& cfg, int run_index) {
  RunOutcome out;
  out.run_index = run_index;
  out.seed = cfg.base_seed + std::uint64_t(run_index);
  RunContext ctx(cfg, out);
  const Hyper h = parse_hyper(cfg.params);
  TrackingEnv env(parse_schedule(cfg.params), out.seed);
  auto learner = make_regression_learner(cfg.algorithm, 1, h);
  const Vec x = Vec::Ones(1);
  try {
    for (long t = 0; t < cfg.steps; ++t) {
      const double prediction = learner->predict(x);
      const TrackingObservation obs = env.step();
      const double err = (prediction - obs.y) * (prediction - obs.y);
      learner->learn(x, obs.y);
      if (!ctx.observe_error(err, learner->weights().norm(),
                             learner->alpha_mean())) {
        break;
      }
    }
  } catch (const DivergenceError&) {
    ctx.flag_divergence(ctx.t);
  }
  ctx.finish();
  return out;
}

RunOutcome run_rosenbrock(const ExperimentConfig& cfg, int run_index) {
  RunOutcome out;
  out.run_index = run_index;
  out.seed = cfg.base_seed + std::uint64_t(run_index);
  RunContext ctx(cfg, out);
  const Hyper h = parse_hyper(cfg.params);
  Rng rng(out.seed);
  Eigen::Vector2d w0;
  const std::string init = param_str(cfg.params, "init", "classic");
  if (init == "classic") {
    // The hard protocol: jittered starts deep in the parabolic valley.
    w0 = {-1.2 + rng.uniform(-0.1, 0.1), 1.0 + rng.uniform(-0.1, 0.1)};
  } else if (init == "box") {
    const double box = param_double(cfg.params, "init_box", 2.0);
    w0 = {rng.uniform(-box, box), rng.uniform(-box, box)};
  } else {
    throw NumericError("init must be 'classic' or 'box'");
  }
  auto learner = make_rosenbrock_learner(cfg.algorithm, w0, h);
  try {
    for (long t = 0; t < cfg.steps; ++t) {
      const double f = rosenbrock(learner->weights()).f;
      learner->step();
      if (!ctx.observe_error(f, learner->weights().norm(),
                             learner->alpha_mean())) {
        break;
      }
    }
    if (!out.diverged) {
      const double f = rosenbrock(learner->weights()).f;
      if (std::isfinite(f)) {
        ctx.record(cfg.steps, "error", f);
        out.final_error = f;
      } else {
        ctx.flag_divergence(cfg.steps);
      }
    }
  } catch (const DivergenceError&) {
    ctx.flag_divergence(ctx.t);
  }
  ctx.finish();
  return out;
}

RunOutcome run_baird(const ExperimentConfig& cfg, int run_index) {
  RunOutcome out;
  out.run_index = run_index;
  out.seed = cfg.base_seed + std::uint64_t(run_index);
  RunContext ctx(cfg, out);
  const Hyper h = parse_hyper(cfg.params);
  BairdEnv env(out.seed, h.gamma);
  auto learner = make_td_learner(cfg.algorithm, BairdEnv::initial_weights(), h);
  const Mat features = BairdEnv::feature_matrix();
  const Vec truth = Vec::Zero(BairdEnv::kStates);  // reward is 0 everywhere
  const Vec d = Vec::Constant(BairdEnv::kStates, 1.0 / BairdEnv::kStates);
  try {
    for (long t = 0; t < cfg.steps; ++t) {
      const double rmsve =
          metric_rmsve(learner->weights(), features, truth, d);
      learner->observe(env.step());
      if (!ctx.observe_error(rmsve, learner->weights().norm(),
                             learner->alpha_mean())) {
        break;
      }
    }
    if (!out.diverged) {
      const double rmsve =
          metric_rmsve(learner->weights(), features, truth, d);
      if (std::isfinite(rmsve)) {
        ctx.record(cfg.steps, "error", rmsve);
        out.final_error = rmsve;
      } else {
        ctx.flag_divergence(cfg.steps);
      }
    }
  } catch (const DivergenceError&) {
    ctx.flag_divergence(ctx.t);
  }
  ctx.finish();
  return out;
}

RunOutcome run_series(const ExperimentConfig& cfg, int run_index) {
  RunOutcome out;
  out.run_index = run_index;
  out.seed = cfg.base_seed + std::uint64_t(run_index);
  RunContext ctx(cfg, out);
  const Hyper h = parse_hyper(cfg.params);
  const std::string path = param_str(cfg.params, "csv", "");
  if (path.empty()) {
    throw NumericError("missing required parameter(s) for series: csv");
  }
  const bool normalize = param_long(cfg.params, "normalize", 1) != 0;
  const bool bias = param_long(cfg.params, "bias", 1) != 0;
  const bool smape_x2 = param_long(cfg.params, "smape_x2", 0) != 0;
  const double gamma = param_double(cfg.params, "gamma", 0.9875);

  const SeriesSource raw = load_series_csv(path);
  const int sensors = raw.column_count();
  const long rows = raw.row_count();
  if (rows < 3) {
    throw NumericError("series needs at least 3 rows");
  }

  // Features are scaled into [0, 1]; targets stay in raw sensor units.
  Vec lo = raw.row(0);
  Vec hi = raw.row(0);
  for (long i = 1; i < rows; ++i) {
    lo = lo.cwiseMin(raw.row(i));
    hi = hi.cwiseMax(raw.row(i));
  }
  const int dim = sensors + (bias ? 1 : 0);
  auto make_features = [&](long row) {
    Vec x(dim);
    int o = 0;
    if (bias) {
      x[o++] = 1.0;
    }
    for (int j = 0; j < sensors; ++j) {
      double v = raw.row(row)[j];
      if (normalize) {
        const double span = hi[j] - lo[j];
        v = span > 0.0 ? (v - lo[j]) / span : 0.0;
      }
      x[o++] = v;
    }
    return x;
  };

  // Offline ideal returns, one per sensor and step.
  std::vector<std::vector<double>> ideal;
  ideal.resize(std::size_t(sensors));
  for (int j = 0; j < sensors; ++j) {
    const auto column = raw.column(j);
    ideal[std::size_t(j)].resize(std::size_t(rows - 1));
    for (long t = 0; t + 1 < rows; ++t) {
      ideal[std::size_t(j)][std::size_t(t)] =
          ideal_discounted_return(column, gamma, t);
    }
  }

  std::vector<std::unique_ptr<TdLearner>> learners;
  for (int j = 0; j < sensors; ++j) {
    learners.push_back(make_td_learner(cfg.algorithm, Vec::Zero(dim), h));
  }
  std::vector<SmapeAccumulator> smape;
  smape.assign(std::size_t(sensors), SmapeAccumulator(smape_x2));

  const long steps = std::min(cfg.steps, rows - 1);
  try {
    for (long t = 0; t < steps; ++t) {
      const Vec x = make_features(t);
      const Vec x_next = make_features(t + 1);
      double max_norm = 0.0;
      double alpha_sum = 0.0;
      for (int j = 0; j < sensors; ++j) {
        auto& learner = learners[std::size_t(j)];
        const double prediction = learner->weights().dot(x);
        smape[std::size_t(j)].add(prediction,
                                  ideal[std::size_t(j)][std::size_t(t)]);
        const double reward = raw.row(t + 1)[j];
        learner->observe(
            Sample::transition(x, x_next, reward, gamma, gamma, 1.0));
        max_norm = std::max(max_norm, learner->weights().norm());
        alpha_sum += learner->alpha_mean();
      }
      std::vector<double> values;
      values.reserve(std::size_t(sensors));
      for (const auto& acc : smape) {
        values.push_back(acc.value());
      }
      if (!ctx.observe_error(lower_median(values), max_norm,
                             alpha_sum / sensors)) {
        break;
      }
    }
  } catch (const DivergenceError&) {
    ctx.flag_divergence(ctx.t);
  }
  ctx.finish();
  return out;
}

void parallel_for(long n, int jobs, const std::function<void(long)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (long i = 0; i < n; ++i) {
      fn(i);
    }
    return;
  }
  std::atomic<long> next(0);
  std::atomic<bool> failed(false);
  std::exception_ptr error;
  std::mutex error_mutex;
  const int workers = int(std::min<long>(jobs, n));
  std::vector<std::thread> pool;
  pool.reserve(std::size_t(workers));
  for (int i = 0; i < workers; ++i) {
    pool.emplace_back([&] {
      for (;;) {
        const long idx = next.fetch_add(1);
        if (idx >= n || failed.load()) {
          return;
        }
        try {
          fn(idx);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) {
            error = std::current_exception();
          }
          failed.store(true);
          return;
        }
      }
    });
  }
  for (auto& th : pool) {
    th.join();
  }
  if (error) {
    std::rethrow_exception(error);
  }
}

}  // namespace

const std::vector<std::string>& algorithm_ids() {
  static const std::vector<std::string> ids = {
      "sgd",         "adagrad",     "rmsprop",    "adadelta",
      "adam",        "amsgrad",     "hd",         "idbd",
      "smd-quad",    "smd-lin",     "smd-orig",   "adagain-quad",
      "adagain-lin", "adagain-lms", "adagain-fd", "adagain-td",
      "adagain-fd-rmsprop"};
  return ids;
}

const std::vector<std::string>& problem_ids() {
  static const std::vector<std::string> ids = {"tracking", "rosenbrock",
                                               "baird", "series"};
  return ids;
}

void validate_config(const ExperimentConfig& cfg) {
  if (cfg.steps < 1) {
    throw NumericError("steps must be >= 1");
  }
  if (cfg.runs < 1) {
    throw NumericError("runs must be >= 1");
  }
  const auto& problems = problem_ids();
  if (std::find(problems.begin(), problems.end(), cfg.problem) ==
      problems.end()) {
    throw NumericError("unknown problem id: " + cfg.problem);
  }
  const auto& ids = algorithm_ids();
  if (std::find(ids.begin(), ids.end(), cfg.algorithm) == ids.end()) {
    throw NumericError("unknown algorithm id: " + cfg.algorithm);
  }
  validate_params(cfg);
  if (cfg.problem == "series" && param_str(cfg.params, "csv", "").empty()) {
    throw NumericError("missing required parameter(s) for series: csv");
  }
  parse_hyper(cfg.params);  // rejects malformed values
}

RunOutcome run_single(const ExperimentConfig& cfg, int run_index) {
  validate_config(cfg);
  if (cfg.problem == "tracking") return run_tracking(cfg, run_index);
  if (cfg.problem == "rosenbrock") return run_rosenbrock(cfg, run_index);
  if (cfg.problem == "baird") return run_baird(cfg, run_index);
  if (cfg.problem == "series") return run_series(cfg, run_index);
  throw NumericError("unknown problem id: " + cfg.problem);
}

std::vector<RunOutcome> run_all(const ExperimentConfig& cfg, int jobs) {
  std::vector<RunOutcome> outcomes(std::size_t(cfg.runs));
  parallel_for(cfg.runs, jobs, [&](long i) {
    outcomes[std::size_t(i)] = run_single(cfg, int(i));
  });
  return outcomes;
}

SweepResult sweep(const ExperimentConfig& base,
                  const std::vector<SweepAxis>& axes, int jobs) {
  long cells = 1;
  for (const auto& axis : axes) {
    if (axis.values.empty()) {
      throw NumericError("sweep axis '" + axis.key + "' has no values");
    }
    cells *= long(axis.values.size());
  }
  SweepResult result;
  result.algorithm = base.algorithm;
  result.axes = axes;
  result.cells.resize(std::size_t(cells));

  const std::string objective = param_str(
      base.params, "objective",
      (base.problem == "rosenbrock" || base.problem == "baird") ? "final"
                                                                : "mean");

  parallel_for(cells, jobs, [&](long idx) {
    SweepCell& cell = result.cells[std::size_t(idx)];
    ExperimentConfig cfg = base;
    long rem = idx;
    for (std::size_t a = axes.size(); a-- > 0;) {
      const auto& axis = axes[a];
      const std::size_t pick = std::size_t(rem % long(axis.values.size()));
      rem /= long(axis.values.size());
      cfg.params[axis.key] = axis.values[pick];
      cell.overrides[axis.key] = axis.values[pick];
    }
    const double sentinel = cfg.effective_sentinel();
    MeanAccumulator mean;
    for (int r = 0; r < cfg.runs; ++r) {
      const RunOutcome out = run_single(cfg, r);
      double summary = objective == "final" ? out.final_error : out.mean_error;
      if (out.diverged) {
        summary = sentinel;
        cell.diverged = true;
        if (cell.divergence_step < 0 ||
            out.divergence_step < cell.divergence_step) {
          cell.divergence_step = out.divergence_step;
        }
      }
      summary = std::min(summary, sentinel);
      cell.run_errors.push_back(summary);
      mean.add(summary);
    }
    cell.mean_error = cell.diverged ? sentinel : mean.mean();
  });
  return result;
}

}  // namespace adagain
