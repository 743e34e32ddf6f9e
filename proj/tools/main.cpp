#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "adagain/harness.hpp"
#include "adagain/problems.hpp"

namespace fs = std::filesystem;
using adagain::ExperimentConfig;
using adagain::Params;

namespace {

// Flags that override config-file entries, which override defaults.
struct CliState {
  std::string config_file;
  std::string out_dir;
  std::string algorithm;
  long steps = -1;
  int runs = -1;
  long seed = -1;
  long thin = -1;
  int jobs = 1;
  double divergence_threshold = -1.0;
  double sentinel = -1.0;
  Params flag_params;  // only keys the user actually passed
};

const std::vector<std::pair<std::string, std::string>>& param_flags() {
  // flag name -> parameter key
  static const std::vector<std::pair<std::string, std::string>> flags = {
      {"--eta", "eta"},
      {"--meta-step", "meta_step"},
      {"--forgetting", "forgetting"},
      {"--init-step", "init_step"},
      {"--eps", "eps"},
      {"--beta1", "beta1"},
      {"--beta2", "beta2"},
      {"--rho", "rho"},
      {"--lambda", "lambda"},
      {"--gamma", "gamma"},
      {"--positivity", "positivity"},
      {"--step-floor", "step_floor"},
      {"--exponent-clamp", "exponent_clamp"},
      {"--probe-radius", "probe_radius"},
      {"--alpha-form", "alpha_form"},
      {"--objective", "objective"},
      {"--eval-window", "eval_window"},
      {"--schedule", "schedule"},
      {"--init-box", "init_box"},
      {"--csv", "csv"},
      {"--normalize", "normalize"},
      {"--bias", "bias"},
      {"--smape-x2", "smape_x2"},
  };
  return flags;
}

void add_common_options(CLI::App* cmd, CliState& state) {
  cmd->add_option("--config", state.config_file,
                  "key=value config file ('#' comments)");
  cmd->add_option("--out", state.out_dir, "output directory");
  cmd->add_option("--algo", state.algorithm, "algorithm id");
  cmd->add_option("--steps", state.steps, "steps per run");
  cmd->add_option("--runs", state.runs, "independent runs");
  cmd->add_option("--seed", state.seed, "base seed (run i uses seed+i)");
  cmd->add_option("--thin", state.thin, "log every N steps");
  cmd->add_option("--jobs", state.jobs, "worker threads");
  cmd->add_option("--div-threshold", state.divergence_threshold,
                  "divergence threshold on the windowed error");
  cmd->add_option("--sentinel", state.sentinel,
                  "error value reported for diverged runs");
  for (const auto& [flag, key] : param_flags()) {
    const std::string key_copy = key;
    CliState* st = &state;
    cmd->add_option_function<std::string>(
        flag,
        [st, key_copy](const std::string& value) {
          st->flag_params[key_copy] = value;
        },
        "sets " + key_copy);
  }
}

Params read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw adagain::NumericError("cannot open config file: " + path);
  }
  Params params;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) {
      line.erase(hash);
    }
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) {
      line.pop_back();
    }
    std::size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw adagain::NumericError("config line " + std::to_string(line_no) +
                                  " is not key=value: " + line);
    }
    std::string key = line.substr(start, eq - start);
    std::string value = line.substr(eq + 1);
    while (!key.empty() && key.back() == ' ') key.pop_back();
    while (!value.empty() && value.front() == ' ') value.erase(0, 1);
    params[key] = value;
  }
  return params;
}

// Defaults, then the file, then flags.
ExperimentConfig assemble_config(const std::string& problem, CliState& state) {
  ExperimentConfig cfg;
  cfg.problem = problem;
  cfg.algorithm = "adagain-lin";
  cfg.steps = 100000;

  if (!state.config_file.empty()) {
    Params file = read_config_file(state.config_file);
    auto take = [&](const char* key) {
      auto it = file.find(key);
      std::string value;
      if (it != file.end()) {
        value = it->second;
        file.erase(it);
      }
      return value;
    };
    if (auto v = take("problem"); !v.empty()) cfg.problem = v;
    if (auto v = take("algorithm"); !v.empty()) cfg.algorithm = v;
    if (auto v = take("steps"); !v.empty()) cfg.steps = std::stol(v);
    if (auto v = take("runs"); !v.empty()) cfg.runs = std::stoi(v);
    if (auto v = take("seed"); !v.empty()) cfg.base_seed = std::stoull(v);
    if (auto v = take("thin"); !v.empty()) cfg.thin = std::stol(v);
    if (auto v = take("divergence_threshold"); !v.empty())
      cfg.divergence_threshold = std::stod(v);
    if (auto v = take("sentinel"); !v.empty()) cfg.sentinel = std::stod(v);
    cfg.params = file;  // everything else is a problem/algorithm parameter
  }

  if (!state.algorithm.empty()) cfg.algorithm = state.algorithm;
  if (state.steps >= 0) cfg.steps = state.steps;
  if (state.runs >= 0) cfg.runs = state.runs;
  if (state.seed >= 0) cfg.base_seed = std::uint64_t(state.seed);
  if (state.thin >= 0) cfg.thin = state.thin;
  if (state.divergence_threshold >= 0)
    cfg.divergence_threshold = state.divergence_threshold;
  if (state.sentinel >= 0) cfg.sentinel = state.sentinel;
  for (const auto& [k, v] : state.flag_params) {
    cfg.params[k] = v;
  }
  return cfg;
}

fs::path resolve_out_dir(const CliState& state) {
  if (!state.out_dir.empty()) {
    return state.out_dir;
  }
  if (const char* env = std::getenv("ADAGAIN_OUT")) {
    return env;
  }
  return "out";
}

void dump_config(const fs::path& dir, const ExperimentConfig& cfg, int jobs) {
  std::ofstream out(dir / "config_used.txt");
  out << cfg.canonical();
  out << "jobs=" << jobs << '\n';
  out << "config_hash=" << adagain::config_hash_hex(cfg) << '\n';
}

int run_experiment(const std::string& problem, CliState& state) {
  ExperimentConfig cfg = assemble_config(problem, state);
  adagain::validate_config(cfg);

  try {
    const fs::path dir = resolve_out_dir(state);
    fs::create_directories(dir);
    dump_config(dir, cfg, state.jobs);

    const auto outcomes = adagain::run_all(cfg, state.jobs);
    {
      std::ofstream csv(dir / "curves.csv");
      adagain::write_curves_csv(csv, cfg, outcomes);
    }

    adagain::MeanAccumulator final_error;
    long diverged = 0;
    for (const auto& out : outcomes) {
      final_error.add(out.final_error);
      diverged += out.diverged ? 1 : 0;
    }
    std::cout << "problem=" << cfg.problem << " algo=" << cfg.algorithm
              << " final_error=" << adagain::format_double(final_error.mean())
              << " diverged_runs=" << diverged << "/" << outcomes.size()
              << " out=" << dir.string() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

std::vector<adagain::SweepAxis> parse_axes(const std::vector<std::string>& raw) {
  std::vector<adagain::SweepAxis> axes;
  for (const auto& spec : raw) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) {
      throw adagain::NumericError("grid axis is not key=v1,v2,...: " + spec);
    }
    adagain::SweepAxis axis;
    axis.key = spec.substr(0, eq);
    std::string rest = spec.substr(eq + 1);
    std::size_t pos = 0;
    while (pos != std::string::npos) {
      const auto comma = rest.find(',', pos);
      axis.values.push_back(rest.substr(
          pos, comma == std::string::npos ? std::string::npos : comma - pos));
      pos = comma == std::string::npos ? std::string::npos : comma + 1;
    }
    if (axis.values.empty() || axis.key.empty()) {
      throw adagain::NumericError("empty grid axis: " + spec);
    }
    axes.push_back(std::move(axis));
  }
  return axes;
}

int run_sweep(const std::string& problem, CliState& state,
              const std::vector<std::string>& grid_specs) {
  ExperimentConfig cfg = assemble_config(problem, state);
  const auto axes = parse_axes(grid_specs);
  {
    // Validate the base config with the first grid point filled in, so
    // missing required keys surface before any work happens.
    ExperimentConfig probe = cfg;
    for (const auto& axis : axes) {
      probe.params[axis.key] = axis.values.front();
    }
    adagain::validate_config(probe);
  }

  const fs::path dir = resolve_out_dir(state);
  try {
    fs::create_directories(dir);
    dump_config(dir, cfg, state.jobs);
    const adagain::SweepResult result = adagain::sweep(cfg, axes, state.jobs);
    {
      std::ofstream csv(dir / "sweep.csv");
      adagain::write_sweep_csv(csv, result);
    }

    long diverged = 0;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& cell : result.cells) {
      diverged += cell.diverged ? 1 : 0;
      best = std::min(best, cell.mean_error);
    }
    std::cout << "problem=" << cfg.problem << " algo=" << cfg.algorithm
              << " cells=" << result.cells.size()
              << " diverged_cells=" << diverged
              << " best_error=" << adagain::format_double(best)
              << " out=" << dir.string() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vector step-size adaptation benchmark harness"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  CliState state;
  std::vector<std::string> grid_specs;
  std::string sweep_problem;

  CLI::App* tracking = app.add_subcommand(
      "tracking", "stateless drifting-Gaussian prediction");
  add_common_options(tracking, state);
  CLI::App* rosen = app.add_subcommand("rosenbrock", "valley optimization");
  add_common_options(rosen, state);
  CLI::App* baird = app.add_subcommand("baird", "off-policy TD counterexample");
  add_common_options(baird, state);
  CLI::App* series =
      app.add_subcommand("series", "discounted-return prediction over a CSV");
  add_common_options(series, state);

  CLI::App* sweep_cmd =
      app.add_subcommand("sweep", "Cartesian hyperparameter sweep");
  add_common_options(sweep_cmd, state);
  sweep_cmd->add_option("--problem", sweep_problem, "problem id")->required();
  sweep_cmd->add_option("--grid", grid_specs, "axis as key=v1,v2,... (repeat)")
      ->required();

  CLI::App* oracle = app.add_subcommand("oracle", "closed-form references");
  double sigma_y = 1.0, sigma_z = 1.0;
  CLI::App* optimal =
      oracle->add_subcommand("optimal-step", "steady-state tracking gain");
  optimal->add_option("--sigma-y", sigma_y, "observation noise")->required();
  optimal->add_option("--sigma-z", sigma_z, "drift noise")->required();
  std::string ret_csv, ret_column = "0";
  double ret_gamma = 0.9875, ret_tol = 1e-4;
  long ret_t = 0;
  CLI::App* ret =
      oracle->add_subcommand("ideal-return", "truncated discounted return");
  ret->add_option("--csv", ret_csv, "series file")->required();
  ret->add_option("--column", ret_column, "column name or index");
  ret->add_option("--gamma", ret_gamma, "discount");
  ret->add_option("--t", ret_t, "time index");
  ret->add_option("--tol", ret_tol, "truncation tolerance");
  oracle->require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp" ||
        e.get_name() == "CallForVersion") {
      return app.exit(e);
    }
    std::cerr << e.what() << "\n\n" << app.help() << std::flush;
    return 2;
  }

  try {
    if (tracking->parsed()) return run_experiment("tracking", state);
    if (rosen->parsed()) return run_experiment("rosenbrock", state);
    if (baird->parsed()) return run_experiment("baird", state);
    if (series->parsed()) return run_experiment("series", state);
    if (sweep_cmd->parsed()) return run_sweep(sweep_problem, state, grid_specs);
    if (oracle->parsed()) {
      if (optimal->parsed()) {
        std::printf("%.6f\n", adagain::optimal_constant_stepsize(sigma_y,
                                                                 sigma_z));
        return 0;
      }
      const adagain::SeriesSource src = adagain::load_series_csv(ret_csv);
      int column = -1;
      for (int j = 0; j < src.column_count(); ++j) {
        if (src.column_names()[std::size_t(j)] == ret_column) {
          column = j;
        }
      }
      if (column < 0) {
        column = std::stoi(ret_column);
      }
      const double value = adagain::ideal_discounted_return(
          src.column(column), ret_gamma, ret_t, ret_tol);
      std::cout << adagain::format_double(value) << "\n";
      return 0;
    }
  } catch (const adagain::DimensionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const adagain::NumericError& e) {
    // Run phases handle their own failures with exit 1; anything escaping to
    // here came from configuration handling.
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
