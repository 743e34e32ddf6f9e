#include "adagain/problems.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace adagain {

RosenbrockEval rosenbrock(const Eigen::Vector2d& w) {
  const double a = 1.0 - w[0];
  const double b = w[1] - w[0] * w[0];
  RosenbrockEval e;
  e.f = a * a + 100.0 * b * b;
  e.grad[0] = -2.0 * a - 400.0 * w[0] * b;
  e.grad[1] = 200.0 * b;
  return e;
}

Eigen::Matrix2d rosenbrock_hessian(const Eigen::Vector2d& w) {
  Eigen::Matrix2d h;
  h(0, 0) = 2.0 - 400.0 * (w[1] - w[0] * w[0]) + 800.0 * w[0] * w[0];
  h(0, 1) = -400.0 * w[0];
  h(1, 0) = -400.0 * w[0];
  h(1, 1) = 200.0;
  return h;
}

TrackingEnv::TrackingEnv(std::vector<TrackingSegment> schedule,
                         std::uint64_t seed, double z0)
    : schedule_(std::move(schedule)), rng_(seed), z_(z0) {
  if (schedule_.empty()) {
    throw NumericError("tracking schedule needs at least one segment");
  }
  for (const auto& seg : schedule_) {
    if (seg.duration < 1 || seg.sigma_y < 0.0 || seg.sigma_z < 0.0) {
      throw NumericError("tracking segment with invalid parameters");
    }
  }
}

TrackingObservation TrackingEnv::step() {
  const TrackingSegment& seg = schedule_[segment_];
  TrackingObservation obs;
  obs.sigma_y = seg.sigma_y;
  obs.sigma_z = seg.sigma_z;
  obs.z = z_;
  obs.y = z_ + rng_.normal(0.0, seg.sigma_y);
  z_ += rng_.normal(0.0, seg.sigma_z);
  if (++into_segment_ >= seg.duration) {
    into_segment_ = 0;
    segment_ = (segment_ + 1) % schedule_.size();
  }
  return obs;
}

std::vector<TrackingSegment> TrackingEnv::default_schedule() {
  return {{20000, 1.0, 0.1}, {20000, 1.0, 1.0}, {20000, 0.1, 1.0},
          {20000, 1.0, 0.1}, {20000, 1.0, 1.0}, {20000, 0.1, 1.0}};
}

double optimal_constant_stepsize(double sigma_y, double sigma_z) {
  if (!(sigma_y > 0.0)) {
    throw NumericError("optimal step-size undefined for sigma_y <= 0");
  }
  if (sigma_z < 0.0) {
    throw NumericError("sigma_z must be >= 0");
  }
  const double q = sigma_z * sigma_z;
  const double r = sigma_y * sigma_y;
  const double m = 0.5 * (q + std::sqrt(q * q + 4.0 * q * r));
  return m / (m + r);
}

BairdEnv::BairdEnv(std::uint64_t seed, double gamma)
    : rng_(seed), gamma_(gamma) {}

Vec BairdEnv::features(int state) {
  Vec x = Vec::Zero(kFeatures);
  if (state < 1 || state > kStates) {
    throw DimensionError("baird state index out of range");
  }
  if (state <= 6) {
    x[state - 1] = 2.0;
    x[7] = 1.0;
  } else {
    x[6] = 1.0;
    x[7] = 2.0;
  }
  return x;
}

Mat BairdEnv::feature_matrix() {
  Mat x(kStates, kFeatures);
  for (int s = 1; s <= kStates; ++s) {
    x.row(s - 1) = features(s).transpose();
  }
  return x;
}

WeightVector BairdEnv::initial_weights() {
  WeightVector w = Vec::Ones(kFeatures);
  w[6] = 10.0;
  return w;
}

Sample BairdEnv::step() {
  const int from = state_;
  const bool solid = rng_.uniform() < 1.0 / 7.0;
  int to;
  double rho;
  if (solid) {
    to = 7;
    rho = 7.0;  // target always solid, behaviour picks it 1/7
  } else {
    to = rng_.uniform_int(1, 6);
    rho = 0.0;  // target never dashes
  }
  state_ = to;
  return Sample::transition(features(from), features(to), 0.0, gamma_, gamma_,
                            rho);
}

double ideal_discounted_return(const std::vector<double>& series, double gamma,
                               long t, double tol) {
  if (gamma < 0.0 || gamma >= 1.0) {
    throw NumericError("discount must lie in [0, 1)");
  }
  if (!(tol > 0.0)) {
    throw NumericError("truncation tolerance must be > 0");
  }
  if (t < 0 || std::size_t(t) + 1 >= series.size()) {
    throw DimensionError("ideal return needs at least one future value");
  }
  double sum = 0.0;
  double discount = 1.0;
  for (std::size_t k = std::size_t(t) + 1; k < series.size(); ++k) {
    sum += discount * series[k];
    discount *= gamma;
    if (discount < tol) {
      break;  // remaining tail weight below tol
    }
  }
  return sum;
}

std::vector<double> SeriesSource::column(int j) const {
  if (j < 0 || j >= column_count()) {
    throw DimensionError("column index out of range");
  }
  std::vector<double> out;
  out.reserve(rows_.size());
  for (const auto& r : rows_) {
    out.push_back(r[j]);
  }
  return out;
}

namespace {

std::vector<std::string> split_csv_line(std::string line) {
  if (!line.empty() && line.back() == '\r') {
    line.pop_back();
  }
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    fields.push_back(field);
  }
  if (!line.empty() && line.back() == ',') {
    fields.emplace_back();
  }
  return fields;
}

}  // namespace

SeriesSource load_series_csv(const std::string& path, SeriesOptions opt) {
  std::ifstream in(path);
  if (!in) {
    throw NumericError("cannot open series file: " + path);
  }
  SeriesSource src;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) {
      continue;
    }
    auto fields = split_csv_line(line);
    if (line_no == 1) {
      src.names_ = fields;
      continue;
    }
    if (fields.size() != src.names_.size()) {
      throw NumericError("ragged row at line " + std::to_string(line_no) +
                         ": expected " + std::to_string(src.names_.size()) +
                         " fields, got " + std::to_string(fields.size()));
    }
    Vec row(fields.size());
    for (std::size_t j = 0; j < fields.size(); ++j) {
      std::size_t used = 0;
      double value = 0.0;
      try {
        value = std::stod(fields[j], &used);
      } catch (const std::exception&) {
        throw NumericError("non-numeric field at line " +
                           std::to_string(line_no) + ", column " +
                           std::to_string(j + 1));
      }
      if (used != fields[j].size() || !std::isfinite(value)) {
        throw NumericError("non-numeric field at line " +
                           std::to_string(line_no) + ", column " +
                           std::to_string(j + 1));
      }
      row[long(j)] = value;
    }
    src.rows_.push_back(std::move(row));
  }
  if (src.names_.empty()) {
    throw NumericError("empty series file: " + path);
  }
  if (src.rows_.empty()) {
    throw NumericError("series file has a header but no rows: " + path);
  }
  if (opt.normalize) {
    const int cols = src.column_count();
    Vec lo = Vec::Constant(cols, std::numeric_limits<double>::infinity());
    Vec hi = Vec::Constant(cols, -std::numeric_limits<double>::infinity());
    for (const auto& r : src.rows_) {
      lo = lo.cwiseMin(r);
      hi = hi.cwiseMax(r);
    }
    for (auto& r : src.rows_) {
      for (int j = 0; j < cols; ++j) {
        const double span = hi[j] - lo[j];
        r[j] = span > 0.0 ? (r[j] - lo[j]) / span : 0.0;
      }
    }
  }
  return src;
}

}  // namespace adagain
