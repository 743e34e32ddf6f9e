#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "adagain/core.hpp"
#include "adagain/problems.hpp"

namespace adagain {

using Params = std::map<std::string, std::string>;

double param_double(const Params& p, const std::string& key, double fallback);
long param_long(const Params& p, const std::string& key, long fallback);
std::string param_str(const Params& p, const std::string& key,
                      const std::string& fallback);

// One runnable experiment: a problem, an algorithm, and their parameters.
// Everything that affects the trajectory is part of the config hash.
struct ExperimentConfig {
  std::string problem;    // tracking | rosenbrock | baird | series
  std::string algorithm;  // see algorithm_ids()
  Params params;
  long steps = 100000;
  int runs = 1;
  std::uint64_t base_seed = 0;
  long thin = 0;                      // 0 -> 100 for runs past 1e5 steps, else 1
  double divergence_threshold = 0.0;  // 0 -> per-problem default
  double sentinel = 0.0;              // 0 -> same as the threshold

  long effective_thin() const;
  double effective_divergence_threshold() const;
  double effective_sentinel() const;
  std::string canonical() const;
};

const std::vector<std::string>& algorithm_ids();
const std::vector<std::string>& problem_ids();

std::uint64_t config_hash(const ExperimentConfig& cfg);
std::string config_hash_hex(const ExperimentConfig& cfg);

struct RunRecord {
  std::string config_hash;
  std::uint64_t seed = 0;
  long step = 0;
  std::string metric;
  double value = 0.0;
};

struct RunOutcome {
  int run_index = 0;
  std::uint64_t seed = 0;
  bool diverged = false;
  long divergence_step = -1;
  double mean_error = 0.0;   // over the evaluation window
  double final_error = 0.0;  // last logged error (sentinel-capped)
  std::vector<RunRecord> records;
};

// Compensated running mean; permutation-stable up to ~1e-15 relative.
class MeanAccumulator {
 public:
  void add(double x);
  double mean() const;
  long count() const { return n_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
  long n_ = 0;
};

class MseAccumulator {
 public:
  void add(double prediction, double target);
  double value() const { return mean_.mean(); }
  long count() const { return mean_.count(); }

 private:
  MeanAccumulator mean_;
};

// |P - T| / (|P| + |T|) averaged, 0 when both are 0; the x2 variant is a flag.
class SmapeAccumulator {
 public:
  explicit SmapeAccumulator(bool times_two = false) : times_two_(times_two) {}
  void add(double prediction, double target);
  double value() const { return mean_.mean(); }
  long count() const { return mean_.count(); }

 private:
  MeanAccumulator mean_;
  bool times_two_;
};

// sqrt(sum_s d_s (x_s.w - v*_s)^2); d must be normalized to sum 1.
double metric_rmsve(const WeightVector& w, const Mat& features,
                    const Vec& true_values, const Vec& state_weights);

bool detect_divergence(double windowed_error, double weights_norm,
                       double threshold);

double lower_median(std::vector<double> values);

// Element-wise lower median across equally long curves.
std::vector<double> aggregate_median(
    const std::vector<std::vector<double>>& curves);

// Rejects unknown problem/algorithm ids, out-of-range steps/runs, and
// parameters that no problem or algorithm reads.
void validate_config(const ExperimentConfig& cfg);

RunOutcome run_single(const ExperimentConfig& cfg, int run_index);
std::vector<RunOutcome> run_all(const ExperimentConfig& cfg, int jobs = 1);

struct SweepAxis {
  std::string key;
  std::vector<std::string> values;
};

struct SweepCell {
  Params overrides;              // axis values for this cell
  double mean_error = 0.0;       // sentinel when diverged
  bool diverged = false;
  long divergence_step = -1;     // earliest across runs; -1 when none
  std::vector<double> run_errors;  // per-run summaries, sentinel-capped
};

struct SweepResult {
  std::string algorithm;
  std::vector<SweepAxis> axes;
  std::vector<SweepCell> cells;  // Cartesian product, first axis slowest
};

SweepResult sweep(const ExperimentConfig& base,
                  const std::vector<SweepAxis>& axes, int jobs = 1);

// Shortest decimal form that parses back to the same double.
std::string format_double(double value);

// curves schema: config_hash,seed,step,metric,value
void write_curves_csv(std::ostream& out, const ExperimentConfig& cfg,
                      const std::vector<RunOutcome>& outcomes);
// sweep schema: algorithm,<axis keys...>,mean_error,diverged,divergence_step
void write_sweep_csv(std::ostream& out, const SweepResult& result);

}  // namespace adagain
