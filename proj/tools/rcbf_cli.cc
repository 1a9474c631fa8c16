// Command-line driver for safety-filter experiments.
//
//   rcbf_cli simulate|sweep|certify|thresholds|compare <config> [options]
//
// Exit codes: 0 success, 2 configuration error, 3 a run aborted because the
// filter was infeasible, 4 I/O error, 1 anything else.

#include <cstdint>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "rcbf/errors.h"
#include "rcbf/experiment.h"
#include "rcbf/output.h"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitIo = 4;

struct Options {
  std::string config;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<double> dt;
  std::optional<double> horizon;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Options& opt) {
  cmd->add_option("config", opt.config, "Experiment config file")->required();
  cmd->add_option("--out-dir", opt.out_dir, "Output directory (overrides output.dir)");
  cmd->add_option("--seed", opt.seed, "Base seed (overrides scenario.seed)");
  cmd->add_option("--dt", opt.dt, "Integration step in s (overrides sim.dt)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--horizon", opt.horizon, "Horizon in s (overrides sim.horizon)")
      ->check(CLI::PositiveNumber);
  cmd->add_flag("--quiet", opt.quiet, "Only report errors");
}

std::string text_or_dash(const std::optional<double>& v) {
  return v ? rcbf::format_double(*v) : "-";
}

void print_report(const rcbf::ExperimentReport& report, std::ostream& os) {
  for (const rcbf::RunRecord& r : report.runs) {
    os << "run " << std::setw(3) << r.index << "  " << std::left << std::setw(32) << r.label
       << std::right << "  " << rcbf::to_string(r.outcome.kind);
    if (r.outcome.kind != rcbf::OutcomeKind::kCompleted) {
      os << " at t=" << rcbf::format_double(r.outcome.time);
    }
    if (r.metrics) {
      os << "  min_h=" << rcbf::format_double(r.metrics->min_h)
         << "  final_h=" << rcbf::format_double(r.metrics->final_h)
         << "  predicted_inflation=" << text_or_dash(r.metrics->predicted_inflation)
         << "  observed_inflation=" << rcbf::format_double(r.metrics->observed_inflation);
    }
    os << '\n';
  }
  for (const rcbf::CertifySummary& c : report.certificates) {
    os << c.variant << ": " << c.rcbf.points << " points, " << c.rcbf.degenerate.size()
       << " degenerate, " << c.rcbf.violations.size()
       << " R-CBF violations, min degenerate margin "
       << rcbf::format_double(c.rcbf.min_margin) << ", gradient error "
       << rcbf::format_double(c.barrier.max_relative_gradient_error);
    if (c.mrcbf) {
      os << ", MR-CBF violations " << c.mrcbf->implication_violations.size() << "/"
         << c.mrcbf->extension_violations.size() << ", max uniform delta "
         << rcbf::format_double(c.mrcbf->max_uniform_delta);
    }
    os << '\n';
  }
  for (const rcbf::ThresholdSummary& t : report.thresholds) {
    os << t.variant << " (" << t.values.label << ", " << t.values.pairs << " pairs): eps1="
       << rcbf::format_double(t.values.eps1) << (t.values.eps1_out_of_range ? " (out of range)" : "")
       << " eps2=" << rcbf::format_double(t.values.eps2)
       << (t.values.eps2_out_of_range ? " (out of range)" : "") << " beta="
       << rcbf::format_double(t.values.beta) << '\n';
  }
  if (!report.summary.empty()) os << "wrote " << report.summary.string() << '\n';
}

int run(const std::string& mode, const Options& opt) {
  rcbf::Config cfg = rcbf::Config::load(opt.config);
  cfg.set("scenario.mode", mode);
  if (opt.out_dir) cfg.set("output.dir", *opt.out_dir);
  if (opt.seed) cfg.set("scenario.seed", std::to_string(*opt.seed));
  if (opt.dt) cfg.set("sim.dt", rcbf::format_double(*opt.dt));
  if (opt.horizon) cfg.set("sim.horizon", rcbf::format_double(*opt.horizon));
  const rcbf::ExperimentConfig exp = rcbf::ExperimentConfig::from_config(std::move(cfg));
  const rcbf::ExperimentReport report = rcbf::run_experiment(exp);
  if (!opt.quiet) print_report(report, std::cout);
  if (report.any_infeasible()) {
    std::cerr << "error: at least one run stopped because the safety filter was infeasible\n";
    return kExitInfeasible;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust control barrier function experiments"};
  app.require_subcommand(1);
  Options opt;
  const char* modes[][2] = {
      {"simulate", "Run every variant of the scenario once"},
      {"sweep", "Run every variant across the [sweep] values"},
      {"certify", "Check the barrier conditions on a grid"},
      {"thresholds", "Estimate the measurement error thresholds"},
      {"compare", "Run two or more variants and overlay them"},
  };
  for (const auto& m : modes) add_common(app.add_subcommand(m[0], m[1]), opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  const std::string mode = app.get_subcommands().front()->get_name();
  try {
    return run(mode, opt);
  } catch (const rcbf::ConfigurationError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const rcbf::IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const rcbf::InfeasibleAtState& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
