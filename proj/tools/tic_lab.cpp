// Copyright 2026 The TIC Lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// tic_lab: calibrate, run and compare learning experiments.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
// Set TIC_LOG (trace, debug, info, warn, error, off) for log output on stderr.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/chrono.h>
#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "tic/config.hpp"
#include "tic/harness.hpp"
#include "tic/io.hpp"
#include "tic/reactive.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

// Raised for problems the user must fix in the invocation or inputs.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  bool no_reactive = false;
};

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("tic");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("TIC_LOG")) {
    spdlog::set_level(spdlog::level::from_str(env));
  }
}

std::string utc_now() {
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}",
                     std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now()));
}

tic::ExperimentConfig load(const std::string& path, const Overrides& ov) {
  tic::ExperimentConfig cfg;
  try {
    cfg = tic::load_config(path);
    if (ov.seed) {
      cfg.master_seed = *ov.seed;
      cfg.seeds.clear();
    }
    if (ov.trials) {
      if (*ov.trials < 1) throw tic::ConfigError("--trials must be >= 1");
      cfg.n_trials = *ov.trials;
      cfg.seeds.clear();
    }
    // Without the reflex the synergy cost has nothing to measure; fall back
    // to the force-aware condition.
    if (ov.no_reactive && cfg.condition == tic::CostVariant::Synergy) {
      tic::apply_condition(cfg, tic::CostVariant::VisuoTactile);
    }
    cfg.validate();
  } catch (const tic::ConfigError& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

// A fresh directory: `requested` must not already hold files; without a
// request the first free `runs/<stem>-s<seed>[-k]` is used.
fs::path make_run_dir(const std::string& requested, const std::string& stem,
                      std::uint64_t seed) {
  if (!requested.empty()) {
    const fs::path p(requested);
    if (fs::exists(p) && !(fs::is_directory(p) && fs::is_empty(p))) {
      throw UsageError("output directory '" + requested + "' already exists and is not empty");
    }
    fs::create_directories(p);
    return p;
  }
  const std::string base = fmt::format("runs/{}-s{}", stem, seed);
  fs::path p(base);
  for (int k = 2; fs::exists(p); ++k) p = fmt::format("{}-{}", base, k);
  fs::create_directories(p);
  return p;
}

void write_manifest(const fs::path& dir, const std::string& command,
                    const std::vector<std::string>& configs, std::uint64_t seed,
                    const std::string& started, const std::string& finished,
                    const std::string& status) {
  nlohmann::ordered_json m;
  m["command"] = command;
  m["config_paths"] = configs;
  m["master_seed"] = seed;
  m["output_dir"] = dir.string();
  m["tool_version"] = TIC_VERSION;
  m["started_utc"] = started;
  m["finished_utc"] = finished;
  m["status"] = status;
  tic::io_detail::write_file((dir / "manifest.json").string(), m.dump(2) + "\n");
}

tic::RolloutObserver trace_writer(const fs::path& dir) {
  return [dir](int trial, int rollout, const tic::RolloutTrace& trace, const tic::Policy& policy) {
    const fs::path tdir = dir / fmt::format("trial_{:02}", trial + 1);
    fs::create_directories(tdir);
    tic::io_detail::write_file((tdir / fmt::format("rollout_{:02}.csv", rollout)).string(),
                               tic::trace_csv(trace));
    tic::io_detail::write_file((tdir / fmt::format("policy_{:02}.txt", rollout)).string(),
                               tic::format_policy(policy));
  };
}

void write_report(const fs::path& dir, const tic::ExperimentReport& rep) {
  tic::io_detail::write_file((dir / "cost_matrix.csv").string(), tic::cost_matrix_csv(rep));
  tic::io_detail::write_file((dir / "interventions.csv").string(), tic::interventions_csv(rep));
  tic::io_detail::write_file((dir / "summary.txt").string(), tic::summary_text(rep));
}

bool has_diagnostics(const tic::ExperimentReport& rep) {
  for (const auto& t : rep.trials) {
    if (!t.diagnostic.empty()) return true;
  }
  return false;
}

void print_diagnostics(const tic::ExperimentReport& rep) {
  for (std::size_t i = 0; i < rep.trials.size(); ++i) {
    const auto& d = rep.trials[i].diagnostic;
    if (!d.empty()) std::cerr << "trial " << i + 1 << ": " << d << "\n";
  }
}

int cmd_calibrate(const std::string& samples, const std::string& out, double force_scale) {
  std::vector<tic::LabeledForceSample> data;
  tic::SlipCalibration cal;
  try {
    data = tic::read_calibration_samples(samples);
    tic::CalibrationOptions opt;
    opt.force_scale = force_scale;
    cal = tic::calibrate(data, opt);
  } catch (const tic::Error& e) {
    throw UsageError(e.what());
  }
  if (!out.empty()) tic::write_calibration(out, cal);
  fmt::print("({:.2f}, {:.2f}), α_des={:.2f}\n", cal.firm_threshold, cal.slip_threshold,
             cal.alpha_des);
  return kExitOk;
}

int cmd_run(const std::string& config_path, const std::string& out, const Overrides& ov) {
  const tic::ExperimentConfig cfg = load(config_path, ov);
  const fs::path dir = make_run_dir(out, fs::path(config_path).stem().string(), cfg.master_seed);
  const std::string started = utc_now();
  write_manifest(dir, "run", {config_path}, cfg.master_seed, started, "", "running");
  tic::io_detail::write_file((dir / "config.cfg").string(), tic::serialize_config(cfg));
  spdlog::info("run {} -> {}", config_path, dir.string());

  const auto rep = tic::run_experiment(cfg, trace_writer(dir));
  write_report(dir, rep);
  const bool failed = has_diagnostics(rep);
  write_manifest(dir, "run", {config_path}, cfg.master_seed, started, utc_now(),
                 failed ? "trial_failures" : "ok");
  fmt::print("{}\n", tic::summary_line(rep));
  if (failed) {
    print_diagnostics(rep);
    return kExitRuntime;
  }
  return kExitOk;
}

int cmd_compare(const std::vector<std::string>& paths, const std::string& out,
                const Overrides& ov) {
  if (paths.size() < 2) throw UsageError("compare needs at least two configs");
  std::vector<tic::ExperimentConfig> configs;
  for (const auto& p : paths) configs.push_back(load(p, ov));
  for (std::size_t i = 1; i < configs.size(); ++i) {
    if (!tic::harness_detail::same_setup(configs[0], configs[i])) {
      throw UsageError("'" + paths[i] + "' uses a different task or plant than '" + paths[0] +
                       "'");
    }
  }
  const fs::path dir = make_run_dir(out, "compare", configs[0].master_seed);
  const std::string started = utc_now();
  write_manifest(dir, "compare", paths, configs[0].master_seed, started, "", "running");

  tic::Comparison cmp;
  bool failed = false;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const fs::path sub =
        dir / fmt::format("{}_{}", i + 1, tic::to_string(configs[i].condition));
    fs::create_directories(sub);
    tic::io_detail::write_file((sub / "config.cfg").string(), tic::serialize_config(configs[i]));
    spdlog::info("compare: {} -> {}", paths[i], sub.string());
    cmp.reports.push_back(tic::run_experiment(configs[i], trace_writer(sub)));
    write_report(sub, cmp.reports.back());
    cmp.rows.push_back(tic::summarize(cmp.reports.back()));
    failed |= has_diagnostics(cmp.reports.back());
  }
  tic::rank_rows(cmp.rows);
  tic::io_detail::write_file((dir / "comparison.csv").string(), tic::comparison_csv(cmp));
  write_manifest(dir, "compare", paths, configs[0].master_seed, started, utc_now(),
                 failed ? "trial_failures" : "ok");
  fmt::print("{}", tic::comparison_table(cmp));
  if (failed) {
    for (const auto& r : cmp.reports) print_diagnostics(r);
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Learning experiments for tactile-aware in-hand manipulation"};
  app.require_subcommand(1);

  Overrides ov;
  std::string out;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", ov.seed, "Override the master seed");
    sub->add_option("--out", out, "Output directory (must be new or empty)");
    sub->add_option("--trials", ov.trials, "Override the number of trials");
    sub->add_flag("--no-reactive", ov.no_reactive,
                  "Disable the reflex (synergy runs as visuo_tactile)");
  };

  std::string samples;
  std::string cal_out;
  double force_scale = 2.0;
  auto* calibrate = app.add_subcommand("calibrate", "Derive slip-class thresholds from samples");
  calibrate->add_option("samples", samples, "CSV with columns f1,f2,f3,label")->required();
  calibrate->add_option("output", cal_out, "Calibration file to write");
  calibrate->add_option("--force-scale", force_scale, "Force normalization in N")
      ->capture_default_str();

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run all trials of one condition");
  run->add_option("config", config_path, "Experiment config file")->required();
  add_common(run);

  std::vector<std::string> compare_paths;
  auto* compare = app.add_subcommand("compare", "Run several conditions on the same task");
  compare->add_option("configs", compare_paths, "Two or more config files")->required();
  add_common(compare);

  auto* version = app.add_subcommand("version", "Print the tool version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*version) {
      fmt::print("tic_lab {}\n", TIC_VERSION);
      return kExitOk;
    }
    if (*calibrate) return cmd_calibrate(samples, cal_out, force_scale);
    if (*run) return cmd_run(config_path, out, ov);
    if (*compare) return cmd_compare(compare_paths, out, ov);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
