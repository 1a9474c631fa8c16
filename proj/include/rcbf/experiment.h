#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rcbf/analysis.h"
#include "rcbf/config.h"
#include "rcbf/filters.h"
#include "rcbf/sim.h"
#include "rcbf/systems.h"
#include "rcbf/uncertainty.h"

namespace rcbf {

enum class Mode { kSimulate, kSweep, kCertify, kThresholds, kCompare };

std::string to_string(Mode mode);
/// Throws ConfigurationError for unknown names.
Mode parse_mode(const std::string& name);

/// Every field the config schema accepts, as dotted keys.
const std::set<std::string>& known_config_keys();

/// A fully resolved closed-loop setup.
struct Scenario {
  Plant plant;
  ClassKappaInfE alpha = ClassKappaInfE::linear(1.0);
  SafetyFilter filter{Unfiltered{}, ClassKappaInfE::linear(1.0)};
  Controller nominal;
  std::string nominal_label;
  EstimateModel estimate;
  DisturbanceModel disturbance;
  StateVec x0;
  SimConfig sim;
  /// Tolerance used for time-to-safe in the metrics.
  double metrics_tol = 1e-3;
  std::uint64_t seed = 0;
};

/// Builds the scenario described by a (variant-applied) config.
/// Throws ConfigurationError with field diagnostics.
Scenario resolve_scenario(const Config& cfg);

/// The robustness function a filter enforces, if it has one: rho for R-CBF,
/// the ISSf term, and the h <= 0 polynomial for the tunable filter.
std::optional<RobustnessFunction> filter_robustness(const SafetyFilter& filter);

struct SweepSpec {
  std::string key;
  std::vector<double> values;
};

struct ExperimentConfig {
  Config config;
  std::string name;
  Mode mode = Mode::kSimulate;
  std::uint64_t seed = 0;
  std::optional<SweepSpec> sweep;
  /// Variants to run; {""} means the base scenario only.
  std::vector<std::string> variants;
  std::filesystem::path out_dir;
  int workers = 1;
  bool write_runs = true;
  bool plot_states = true;

  /// Validates the schema and the mode specific requirements.
  static ExperimentConfig from_config(Config config);
};

struct RunRecord {
  std::size_t index = 0;
  std::string variant;
  std::optional<double> sweep_value;
  std::string label;
  std::string filter_name;
  /// Empty when the filter failed at the very first step.
  std::optional<Metrics> metrics;
  Outcome outcome;
  Trajectory trajectory;
  std::filesystem::path csv;
};

struct CertifySummary {
  std::string variant;
  BarrierReport barrier;
  RcbfCertificate rcbf;
  std::optional<MrcbfCertificate> mrcbf;
};

struct ThresholdSummary {
  std::string variant;
  Thresholds values;
  double epsilon = 0.0;
  std::size_t region_samples = 0;
};

struct ExperimentReport {
  Mode mode = Mode::kSimulate;
  std::vector<RunRecord> runs;
  std::vector<CertifySummary> certificates;
  std::vector<ThresholdSummary> thresholds;
  std::filesystem::path summary;

  bool any_infeasible() const;
};

/// Runs one simulation of a resolved scenario and computes its metrics,
/// including the predicted inflation when the config's analysis settings
/// allow one.
RunRecord run_scenario(const Scenario& scenario, const Config& cfg);

/// Executes the experiment. Simulations run on a bounded worker pool and are
/// reported in sweep order. Per-run CSV and metadata files, a summary CSV and
/// SVG overlays are written to the output directory. If some runs fail with a
/// configuration or I/O error the completed ones are still written before the
/// first error is rethrown.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

}  // namespace rcbf
