#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <sstream>

#include "adagain/harness.hpp"

namespace adagain {

double param_double(const Params& p, const std::string& key, double fallback) {
  auto it = p.find(key);
  if (it == p.end()) {
    return fallback;
  }
  std::size_t used = 0;
  const double v = std::stod(it->second, &used);
  if (used != it->second.size()) {
    throw NumericError("parameter '" + key + "' is not a number: " +
                       it->second);
  }
  return v;
}

long param_long(const Params& p, const std::string& key, long fallback) {
  auto it = p.find(key);
  if (it == p.end()) {
    return fallback;
  }
  return std::stol(it->second);
}

std::string param_str(const Params& p, const std::string& key,
                      const std::string& fallback) {
  auto it = p.find(key);
  return it == p.end() ? fallback : it->second;
}

long ExperimentConfig::effective_thin() const {
  if (thin > 0) {
    return thin;
  }
  return steps > 100000 ? 100 : 1;
}

double ExperimentConfig::effective_divergence_threshold() const {
  if (divergence_threshold > 0.0) {
    return divergence_threshold;
  }
  // Roughly 100x a decent baseline's error on each problem.
  if (problem == "tracking") return 200.0;
  if (problem == "rosenbrock") return 1e8;
  if (problem == "baird") return 1e6;
  return 1e12;
}

double ExperimentConfig::effective_sentinel() const {
  return sentinel > 0.0 ? sentinel : effective_divergence_threshold();
}

std::string ExperimentConfig::canonical() const {
  std::ostringstream out;
  out << "problem=" << problem << '\n'
      << "algorithm=" << algorithm << '\n'
      << "steps=" << steps << '\n'
      << "runs=" << runs << '\n'
      << "base_seed=" << base_seed << '\n'
      << "thin=" << effective_thin() << '\n'
      << "divergence_threshold=" << format_double(effective_divergence_threshold())
      << '\n'
      << "sentinel=" << format_double(effective_sentinel()) << '\n';
  for (const auto& [k, v] : params) {  // std::map keeps keys sorted
    out << k << '=' << v << '\n';
  }
  return out.str();
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  // FNV-1a, 64-bit.
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : cfg.canonical()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string config_hash_hex(const ExperimentConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(config_hash(cfg)));
  return buf;
}

void MeanAccumulator::add(double x) {
  // Neumaier-compensated sum.
  const double t = sum_ + x;
  if (std::abs(sum_) >= std::abs(x)) {
    compensation_ += (sum_ - t) + x;
  } else {
    compensation_ += (x - t) + sum_;
  }
  sum_ = t;
  ++n_;
}

double MeanAccumulator::mean() const {
  return n_ == 0 ? 0.0 : (sum_ + compensation_) / double(n_);
}

void MseAccumulator::add(double prediction, double target) {
  const double e = prediction - target;
  mean_.add(e * e);
}

void SmapeAccumulator::add(double prediction, double target) {
  const double denom = std::abs(prediction) + std::abs(target);
  const double ratio =
      denom == 0.0 ? 0.0 : std::abs(prediction - target) / denom;
  mean_.add(times_two_ ? 2.0 * ratio : ratio);
}

double metric_rmsve(const WeightVector& w, const Mat& features,
                    const Vec& true_values, const Vec& state_weights) {
  if (features.rows() != true_values.size() ||
      features.rows() != state_weights.size()) {
    throw DimensionError("metric_rmsve: row count mismatch");
  }
  if (features.cols() != w.size()) {
    throw DimensionError("metric_rmsve: feature/weight mismatch");
  }
  const double total = state_weights.sum();
  if (std::abs(total - 1.0) > 1e-9) {
    throw NumericError("metric_rmsve: state weights must sum to 1");
  }
  const Vec err = features * w - true_values;
  return std::sqrt((state_weights.array() * err.array().square()).sum());
}

bool detect_divergence(double windowed_error, double weights_norm,
                       double threshold) {
  if (!std::isfinite(windowed_error) || !std::isfinite(weights_norm)) {
    return true;
  }
  return windowed_error > threshold;
}

double lower_median(std::vector<double> values) {
  if (values.empty()) {
    throw DimensionError("median of an empty list");
  }
  const std::size_t idx = (values.size() - 1) / 2;
  std::nth_element(values.begin(), values.begin() + long(idx), values.end());
  return values[idx];
}

std::vector<double> aggregate_median(
    const std::vector<std::vector<double>>& curves) {
  if (curves.empty()) {
    throw DimensionError("aggregate_median needs at least one curve");
  }
  const std::size_t len = curves.front().size();
  for (const auto& c : curves) {
    if (c.size() != len) {
      throw DimensionError("aggregate_median: ragged curves");
    }
  }
  std::vector<double> out(len);
  std::vector<double> column(curves.size());
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t c = 0; c < curves.size(); ++c) {
      column[c] = curves[c][t];
    }
    out[t] = lower_median(column);
  }
  return out;
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) {
    return "nan";
  }
  return std::string(buf, ptr);
}

void write_curves_csv(std::ostream& out, const ExperimentConfig& cfg,
                      const std::vector<RunOutcome>& outcomes) {
  out << "config_hash,seed,step,metric,value\n";
  (void)cfg;
  for (const auto& run : outcomes) {
    for (const auto& r : run.records) {
      out << r.config_hash << ',' << r.seed << ',' << r.step << ',' << r.metric
          << ',' << format_double(r.value) << '\n';
    }
  }
}

void write_sweep_csv(std::ostream& out, const SweepResult& result) {
  out << "algorithm";
  for (const auto& axis : result.axes) {
    out << ',' << axis.key;
  }
  out << ",mean_error,diverged,divergence_step\n";
  for (const auto& cell : result.cells) {
    out << result.algorithm;
    for (const auto& axis : result.axes) {
      out << ',' << cell.overrides.at(axis.key);
    }
    out << ',' << format_double(cell.mean_error) << ','
        << (cell.diverged ? 1 : 0) << ',';
    if (cell.diverged && cell.divergence_step >= 0) {
      out << cell.divergence_step;
    }
    out << '\n';
  }
}

}  // namespace adagain
