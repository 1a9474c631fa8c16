#include "rcbf/experiment.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

#include "rcbf/errors.h"
#include "rcbf/output.h"

namespace rcbf {
namespace {

std::uint64_t read_seed(const Config& cfg, const std::string& key, std::uint64_t fallback) {
  if (!cfg.has(key)) return fallback;
  const long v = cfg.get_int(key);
  if (v < 0) throw ConfigurationError(cfg.where(key) + "seed must be >= 0");
  return static_cast<std::uint64_t>(v);
}

double read_nonneg(const Config& cfg, const std::string& key, double fallback) {
  const double v = cfg.get_double(key, fallback);
  if (v < 0.0) throw ConfigurationError(cfg.where(key) + "must be >= 0");
  return v;
}

Eigen::VectorXd read_vector(const Config& cfg, const std::string& key, long size) {
  const std::vector<double> v = cfg.get_doubles(key);
  if (static_cast<long>(v.size()) != size) {
    throw ConfigurationError(cfg.where(key) + "expected " + std::to_string(size) +
                             " values, got " + std::to_string(v.size()));
  }
  return Eigen::Map<const Eigen::VectorXd>(v.data(), size);
}

// magnitude * direction / |direction|, with direction defaulting to e_1.
Eigen::VectorXd scaled_direction(const Config& cfg, const std::string& key, long size,
                                 double magnitude) {
  Eigen::VectorXd dir = Eigen::VectorXd::Unit(size, 0);
  if (cfg.has(key)) dir = read_vector(cfg, key, size);
  const double norm = dir.norm();
  if (norm == 0.0) throw ConfigurationError(cfg.where(key) + "direction must be nonzero");
  return (magnitude / norm) * dir;
}

Box read_box(const Config& cfg, const std::string& lo_key, const std::string& hi_key,
             long n) {
  Box box{read_vector(cfg, lo_key, n), read_vector(cfg, hi_key, n)};
  try {
    box.require_volume();
  } catch (const ConfigurationError& e) {
    throw ConfigurationError(cfg.where(lo_key) + e.what());
  }
  return box;
}

Plant resolve_plant(const Config& cfg) {
  const std::string kind = cfg.get_choice("system.kind", {"scalar", "segway"}, "scalar");
  if (kind == "scalar") return scalar_example();
  SegwayParams p;
  p.wheel_mass = cfg.get_double("system.wheel_mass", p.wheel_mass);
  p.body_mass = cfg.get_double("system.body_mass", p.body_mass);
  p.body_inertia = cfg.get_double("system.body_inertia", p.body_inertia);
  p.body_com_length = cfg.get_double("system.body_com_length", p.body_com_length);
  p.wheel_radius = cfg.get_double("system.wheel_radius", p.wheel_radius);
  p.gravity = cfg.get_double("system.gravity", p.gravity);
  p.viscous_friction = cfg.get_double("system.viscous_friction", p.viscous_friction);
  try {
    return segway(p);
  } catch (const ConfigurationError& e) {
    throw ConfigurationError(cfg.source() + ": [system]: " + e.what());
  }
}

ClassKappaInfE resolve_alpha(const Config& cfg) {
  const std::string kind = cfg.get_choice("alpha.kind", {"linear", "cubic"}, "linear");
  const double c = cfg.get_double("alpha.c", 1.0);
  try {
    return kind == "linear" ? ClassKappaInfE::linear(c) : ClassKappaInfE::cubic(c);
  } catch (const ConfigurationError& e) {
    throw ConfigurationError(cfg.where("alpha.c") + e.what());
  }
}

FilterKind resolve_filter_kind(const Config& cfg, const Plant& plant,
                               const ClassKappaInfE& alpha, std::uint64_t seed) {
  const std::string kind = cfg.get_choice(
      "filter.kind", {"none", "cbf", "rcbf", "issf", "tunable", "mrcbf"}, "rcbf");
  try {
    if (kind == "none") return Unfiltered{};
    if (kind == "cbf") return PlainCbf{};
    if (kind == "rcbf") {
      return Rcbf{RobustnessFunction::polynomial(cfg.get_double("filter.gamma1", 1.0),
                                                 cfg.get_double("filter.gamma2", 1.0))};
    }
    if (kind == "issf") {
      const double eps = cfg.get_double("filter.eps_issf", 1.0);
      if (!(eps > 0.0)) throw ConfigurationError("eps_issf must be positive");
      return Issf{eps};
    }
    if (kind == "tunable") {
      TunableParams p{cfg.get_double("filter.gamma1", 1.0), cfg.get_double("filter.gamma2", 1.0),
                      read_nonneg(cfg, "filter.c1", 0.0), read_nonneg(cfg, "filter.c2", 0.0)};
      if (!(p.gamma1 > 0.0) || !(p.gamma2 > 0.0)) {
        throw ConfigurationError("tunable filter needs gamma1, gamma2 > 0");
      }
      return TunableRcbf{p};
    }
  } catch (const ConfigurationError& e) {
    const std::string msg = e.what();
    if (msg.rfind(cfg.source(), 0) == 0) throw;
    throw ConfigurationError(cfg.where("filter.kind") + msg);
  }

  // MR-CBF with a constant design bound and fixed or estimated constants.
  const double delta = read_nonneg(cfg, "filter.delta", 0.0);
  MrcbfParams mr;
  mr.delta = [delta](const StateVec&) { return delta; };
  const bool any_auto = cfg.get_string("filter.lip_lfh", "auto") == "auto" ||
                        cfg.get_string("filter.lip_lgh", "auto") == "auto" ||
                        cfg.get_string("filter.lip_alpha_h", "auto") == "auto";
  if (any_auto) {
    const Box box =
        read_box(cfg, "filter.lipschitz_lo", "filter.lipschitz_hi", plant.system.n);
    const long samples = cfg.get_int("filter.lipschitz_samples", 100000);
    if (samples < 1) {
      throw ConfigurationError(cfg.where("filter.lipschitz_samples") + "must be >= 1");
    }
    mr = estimate_mrcbf_constants(plant.system, plant.barrier, alpha, mr.delta, box,
                                  static_cast<int>(samples), seed);
  }
  auto fixed = [&](const char* key, double& slot) {
    if (cfg.get_string(key, "auto") != "auto") slot = read_nonneg(cfg, key, 0.0);
  };
  fixed("filter.lip_lfh", mr.lip_lfh);
  fixed("filter.lip_lgh", mr.lip_lgh);
  fixed("filter.lip_alpha_h", mr.lip_alpha_h);
  return Mrcbf{mr};
}

struct Nominal {
  Controller fn;
  std::string label;
};

Nominal resolve_nominal(const Config& cfg, const Plant& plant) {
  const ControlAffineSystem& sys = plant.system;
  const std::string kind =
      cfg.get_choice("nominal.kind", {"zero", "linear", "constant", "segway_lqr"}, "zero");
  if (kind == "zero") return {nominal_zero(sys.m), "zero"};
  if (kind == "constant") {
    const InputVec u = read_vector(cfg, "nominal.u", sys.m);
    std::ostringstream os;
    os << "constant(u=[" << u.transpose() << "])";
    return {nominal_constant(u), os.str()};
  }
  Eigen::MatrixXd gain;
  if (kind == "segway_lqr") {
    if (sys.label != "segway") {
      throw ConfigurationError(cfg.where("nominal.kind") + "segway_lqr needs system.kind = segway");
    }
    gain = default_segway_gain();
  } else {
    const Eigen::VectorXd flat = read_vector(cfg, "nominal.gain", static_cast<long>(sys.m) * sys.n);
    gain = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                          Eigen::RowMajor>>(flat.data(), sys.m, sys.n);
  }
  std::ostringstream os;
  os << "linear(K=[" << gain.reshaped<Eigen::RowMajor>().transpose() << "])";
  return {nominal_linear(gain, sys), os.str()};
}

EstimateModel resolve_estimate(const Config& cfg, long n, std::uint64_t seed) {
  const std::string kind =
      cfg.get_choice("estimate.kind", {"exact", "offset", "inward", "random"}, "exact");
  if (kind == "exact") return ExactEstimate{};
  const double delta = read_nonneg(cfg, "estimate.delta", 0.0);
  if (kind == "offset") {
    return ConstantOffset{scaled_direction(cfg, "estimate.direction", n, delta)};
  }
  if (kind == "inward") return InwardGradient{delta};
  return RandomBoundedEstimate{delta, read_seed(cfg, "estimate.seed", seed)};
}

DisturbanceModel resolve_disturbance(const Config& cfg, long m, std::uint64_t seed) {
  const std::string kind = cfg.get_choice(
      "disturbance.kind", {"none", "constant", "worst_case", "random"}, "none");
  if (kind == "none") return NoDisturbance{};
  const double dbar = read_nonneg(cfg, "disturbance.dbar", 0.0);
  if (kind == "constant") {
    return ConstantDisturbance{scaled_direction(cfg, "disturbance.direction", m, dbar)};
  }
  if (kind == "worst_case") return WorstCaseAntiGradient{dbar};
  return RandomBoundedDisturbance{dbar, read_seed(cfg, "disturbance.seed", seed + 1)};
}

SimConfig resolve_sim(const Config& cfg, const Plant& plant) {
  SimConfig sim;
  sim.dt = cfg.get_double("sim.dt", sim.dt);
  sim.horizon = cfg.get_double("sim.horizon", sim.horizon);
  sim.escape_radius =
      cfg.get_double("sim.escape_radius", plant.system.label == "scalar" ? 10.0 : 1e3);
  sim.record_stride = static_cast<int>(cfg.get_int("sim.record_stride", 1));
  try {
    sim.validate();
  } catch (const ConfigurationError& e) {
    throw ConfigurationError(cfg.source() + ": [sim]: " + e.what());
  }
  return sim;
}

std::string describe_robustness(const SafetyFilter& filter) {
  const std::optional<RobustnessFunction> rho = filter_robustness(filter);
  return rho ? rho->describe() : "none";
}

std::string run_stem(std::size_t index) {
  std::ostringstream os;
  os << "run_";
  os.width(3);
  os.fill('0');
  os << index;
  return os.str();
}

std::string optional_text(const std::optional<double>& v) {
  return v ? format_double(*v) : "";
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

std::string meta_text(const ExperimentConfig& exp, const Config& cfg, const Scenario& sc,
                      const RunRecord& run) {
  std::ostringstream os;
  os << "experiment = " << exp.name << '\n'
     << "config = " << cfg.source() << '\n'
     << "variant = " << (run.variant.empty() ? "base" : run.variant) << '\n';
  if (exp.sweep && run.sweep_value) {
    os << "sweep_key = " << exp.sweep->key << '\n'
       << "sweep_value = " << format_double(*run.sweep_value) << '\n';
  }
  os << "system = " << sc.plant.system.label << '\n'
     << "seed = " << sc.seed << '\n'
     << "dt = " << format_double(sc.sim.dt) << '\n'
     << "horizon = " << format_double(sc.sim.horizon) << '\n'
     << "escape_radius = " << format_double(sc.sim.escape_radius) << '\n'
     << "record_stride = " << sc.sim.record_stride << '\n'
     << "alpha = " << sc.alpha.describe() << '\n'
     << "filter = " << sc.filter.describe() << '\n'
     << "rho = " << describe_robustness(sc.filter) << '\n'
     << "nominal = " << sc.nominal_label << '\n'
     << "estimate = " << describe(sc.estimate) << '\n'
     << "disturbance = " << describe(sc.disturbance) << '\n'
     << "x0 = " << sc.x0.transpose() << '\n'
     << "outcome = " << to_string(run.outcome.kind) << '\n'
     << "outcome_time = " << format_double(run.outcome.time) << '\n';
  if (!run.outcome.detail.empty()) os << "outcome_detail = " << run.outcome.detail << '\n';
  if (run.metrics) {
    os << "min_h = " << format_double(run.metrics->min_h) << '\n'
       << "final_h = " << format_double(run.metrics->final_h) << '\n'
       << "time_to_safe = " << optional_text(run.metrics->time_to_safe) << '\n'
       << "predicted_inflation = " << optional_text(run.metrics->predicted_inflation) << '\n'
       << "observed_inflation = " << format_double(run.metrics->observed_inflation) << '\n';
  }
  return os.str();
}

std::string summary_text(const ExperimentConfig& exp, const std::vector<RunRecord>& runs) {
  std::ostringstream os;
  os << "index,variant,sweep_key,sweep_value,filter,outcome,outcome_time,min_h,final_h,"
        "time_to_safe,predicted_inflation,observed_inflation,bounded,csv\n";
  for (const RunRecord& r : runs) {
    os << r.index << ',' << (r.variant.empty() ? "base" : r.variant) << ','
       << (exp.sweep && r.sweep_value ? exp.sweep->key : "") << ','
       << optional_text(r.sweep_value) << ',' << r.filter_name << ','
       << to_string(r.outcome.kind) << ',' << format_double(r.outcome.time) << ',';
    if (r.metrics) {
      os << format_double(r.metrics->min_h) << ',' << format_double(r.metrics->final_h) << ','
         << optional_text(r.metrics->time_to_safe) << ','
         << optional_text(r.metrics->predicted_inflation) << ','
         << format_double(r.metrics->observed_inflation) << ','
         << (r.metrics->bounded ? "true" : "false");
    } else {
      os << ",,,,," << (r.outcome.kind == OutcomeKind::kEscaped ? "false" : "true");
    }
    os << ',' << r.csv.filename().string() << '\n';
  }
  return os.str();
}

void write_plots(const ExperimentConfig& exp, const std::vector<RunRecord>& runs) {
  PlotSpec h_plot;
  h_plot.title = exp.name + ": h(x(t))";
  h_plot.y_label = "h";
  h_plot.zero_line = true;
  long n = 0;
  for (const RunRecord& r : runs) {
    if (r.trajectory.size() == 0) continue;
    h_plot.series.push_back({r.label, r.trajectory.times, r.trajectory.h_values});
    n = std::max<long>(n, r.trajectory.states.front().size());
  }
  emit_svg_plot(h_plot, exp.out_dir / "h.svg");
  if (!exp.plot_states) return;
  for (long i = 0; i < n; ++i) {
    PlotSpec plot;
    plot.title = exp.name + ": x_" + std::to_string(i + 1) + "(t)";
    plot.y_label = "x_" + std::to_string(i + 1);
    for (const RunRecord& r : runs) {
      if (r.trajectory.size() == 0) continue;
      PlotSeries s{r.label, r.trajectory.times, {}};
      for (const StateVec& x : r.trajectory.states) s.y.push_back(x[i]);
      plot.series.push_back(std::move(s));
    }
    emit_svg_plot(plot, exp.out_dir / ("x_" + std::to_string(i + 1) + ".svg"));
  }
}

// Runs `count` jobs on at most `workers` threads. Results stay in job order.
template <class Result, class Job>
void parallel_for(std::size_t count, int workers, std::vector<std::optional<Result>>& results,
                  std::vector<std::exception_ptr>& errors, Job job) {
  results.assign(count, std::nullopt);
  errors.assign(count, nullptr);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        results[i] = job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto threads = static_cast<std::size_t>(std::max(1, workers));
  std::vector<std::jthread> pool;
  for (std::size_t t = 1; t < std::min(threads, count); ++t) pool.emplace_back(worker);
  worker();
}

void rethrow_first(const std::vector<std::exception_ptr>& errors) {
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

Config variant_config(const ExperimentConfig& exp, const std::string& variant) {
  return variant.empty() ? exp.config.without_variants() : exp.config.with_variant(variant);
}

}  // namespace

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::kSimulate: return "simulate";
    case Mode::kSweep: return "sweep";
    case Mode::kCertify: return "certify";
    case Mode::kThresholds: return "thresholds";
    case Mode::kCompare: return "compare";
  }
  return "unknown";
}

Mode parse_mode(const std::string& name) {
  if (name == "simulate") return Mode::kSimulate;
  if (name == "sweep") return Mode::kSweep;
  if (name == "certify") return Mode::kCertify;
  if (name == "thresholds") return Mode::kThresholds;
  if (name == "compare") return Mode::kCompare;
  throw ConfigurationError("unknown mode '" + name +
                           "' (expected simulate, sweep, certify, thresholds or compare)");
}

const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys = {
      "scenario.name", "scenario.mode", "scenario.seed", "scenario.workers",
      "scenario.description",
      "system.kind", "system.wheel_mass", "system.body_mass", "system.body_inertia",
      "system.body_com_length", "system.wheel_radius", "system.gravity",
      "system.viscous_friction",
      "alpha.kind", "alpha.c",
      "filter.kind", "filter.gamma1", "filter.gamma2", "filter.eps_issf", "filter.c1",
      "filter.c2", "filter.delta", "filter.lip_lfh", "filter.lip_lgh", "filter.lip_alpha_h",
      "filter.lipschitz_lo", "filter.lipschitz_hi", "filter.lipschitz_samples",
      "nominal.kind", "nominal.gain", "nominal.u",
      "estimate.kind", "estimate.delta", "estimate.direction", "estimate.seed",
      "disturbance.kind", "disturbance.dbar", "disturbance.direction", "disturbance.seed",
      "sim.dt", "sim.horizon", "sim.escape_radius", "sim.record_stride", "sim.x0",
      "sweep.key", "sweep.values",
      "analysis.tol", "analysis.lipschitz_lo", "analysis.lipschitz_hi",
      "analysis.lipschitz_samples",
      "certify.lo", "certify.hi", "certify.step", "certify.zero_tol",
      "thresholds.beta", "thresholds.lo", "thresholds.hi", "thresholds.region_samples",
      "thresholds.pairs",
      "output.dir", "output.plot_states", "output.write_runs"};
  return keys;
}

std::optional<RobustnessFunction> filter_robustness(const SafetyFilter& filter) {
  const FilterKind& kind = filter.kind();
  if (const auto* k = std::get_if<Rcbf>(&kind)) return k->rho;
  if (const auto* k = std::get_if<Issf>(&kind)) return issf_term(k->eps_issf);
  if (const auto* k = std::get_if<TunableRcbf>(&kind)) {
    return RobustnessFunction::polynomial(k->params.gamma1, k->params.gamma2);
  }
  return std::nullopt;
}

Scenario resolve_scenario(const Config& cfg) {
  Scenario sc;
  sc.seed = read_seed(cfg, "scenario.seed", 0);
  sc.plant = resolve_plant(cfg);
  const ControlAffineSystem& sys = sc.plant.system;
  sc.alpha = resolve_alpha(cfg);
  sc.filter = SafetyFilter(resolve_filter_kind(cfg, sc.plant, sc.alpha, sc.seed), sc.alpha);
  Nominal nominal = resolve_nominal(cfg, sc.plant);
  sc.nominal = std::move(nominal.fn);
  sc.nominal_label = std::move(nominal.label);
  sc.estimate = resolve_estimate(cfg, sys.n, sc.seed);
  sc.disturbance = resolve_disturbance(cfg, sys.m, sc.seed);
  if (cfg.has("sim.x0")) {
    sc.x0 = read_vector(cfg, "sim.x0", sys.n);
  } else if (sys.label == "segway") {
    sc.x0 = segway_initial_state();
  } else {
    throw ConfigurationError(cfg.source() + ": missing required field 'sim.x0'");
  }
  sc.sim = resolve_sim(cfg, sc.plant);
  sc.metrics_tol = read_nonneg(cfg, "analysis.tol", 1e-3);
  return sc;
}

RunRecord run_scenario(const Scenario& sc, const Config& cfg) {
  RunRecord run;
  run.filter_name = sc.filter.name();
  run.trajectory = simulate(sc.plant.system, sc.plant.barrier, sc.filter, sc.nominal,
                            sc.estimate, sc.disturbance, sc.x0, sc.sim);
  run.outcome = run.trajectory.outcome;
  if (run.trajectory.size() == 0) return run;
  Metrics m = compute_metrics(run.trajectory, sc.plant.barrier, sc.metrics_tol);

  const std::optional<RobustnessFunction> rho = filter_robustness(sc.filter);
  const double dbar = disturbance_bound(sc.disturbance);
  const double delta = estimate_bound(sc.estimate);
  try {
    if (rho && delta == 0.0) {
      m.predicted_inflation = predicted_inflation_actuation(sc.alpha, *rho, dbar);
    } else if (rho && dbar == 0.0 && cfg.has("analysis.lipschitz_lo")) {
      const Box box = read_box(cfg, "analysis.lipschitz_lo", "analysis.lipschitz_hi",
                               sc.plant.system.n);
      const long samples = cfg.get_int("analysis.lipschitz_samples", 4000);
      const Controller k =
          filtered_controller(sc.plant.system, sc.plant.barrier, sc.filter, sc.nominal);
      const double lk = estimate_lipschitz(k, box, static_cast<int>(samples), sc.seed);
      m.predicted_inflation = predicted_inflation_measurement(sc.alpha, *rho, lk, delta);
    }
  } catch (const ConfigurationError&) {
    throw;
  } catch (const Error&) {
    // No prediction when the theory's quantities cannot be evaluated here.
    m.predicted_inflation.reset();
  }
  run.metrics = std::move(m);
  return run;
}

bool ExperimentReport::any_infeasible() const {
  return std::any_of(runs.begin(), runs.end(), [](const RunRecord& r) {
    return r.outcome.kind == OutcomeKind::kInfeasible;
  });
}

ExperimentConfig ExperimentConfig::from_config(Config config) {
  config.require_known(known_config_keys());
  ExperimentConfig exp;
  exp.name = config.get_string("scenario.name",
                               std::filesystem::path(config.source()).stem().string());
  try {
    exp.mode = parse_mode(config.get_string("scenario.mode", "simulate"));
  } catch (const ConfigurationError& e) {
    throw ConfigurationError(config.where("scenario.mode") + e.what());
  }
  exp.seed = read_seed(config, "scenario.seed", 0);
  const long workers = config.get_int(
      "scenario.workers", std::max(1u, std::thread::hardware_concurrency()));
  if (workers < 1) throw ConfigurationError(config.where("scenario.workers") + "must be >= 1");
  exp.workers = static_cast<int>(workers);
  exp.out_dir = config.get_string("output.dir", "out/" + exp.name);
  exp.write_runs = config.get_bool("output.write_runs", true);
  exp.plot_states = config.get_bool("output.plot_states", true);

  if (config.has("sweep.key") || config.has("sweep.values")) {
    SweepSpec sweep;
    sweep.key = config.get_string("sweep.key");
    if (sweep.key.rfind("sweep.", 0) == 0 || !known_config_keys().count(sweep.key)) {
      throw ConfigurationError(config.where("sweep.key") + "cannot sweep '" + sweep.key + "'");
    }
    sweep.values = config.get_doubles("sweep.values");
    if (!std::is_sorted(sweep.values.begin(), sweep.values.end())) {
      throw ConfigurationError(config.where("sweep.values") + "values must be sorted");
    }
    exp.sweep = std::move(sweep);
  }
  if (exp.mode == Mode::kSweep && !exp.sweep) {
    throw ConfigurationError(config.source() +
                             ": sweep mode needs [sweep] key and values (empty sweep)");
  }
  for (const Config::Variant& v : config.variants()) exp.variants.push_back(v.name);
  if (exp.variants.empty()) exp.variants.push_back("");
  if (exp.mode == Mode::kCompare && exp.variants.size() < 2) {
    throw ConfigurationError(config.source() +
                             ": compare mode needs at least two [variant NAME] sections");
  }
  exp.config = std::move(config);
  return exp;
}

namespace {

ExperimentReport run_simulations(const ExperimentConfig& exp) {
  struct Job {
    std::string variant;
    std::optional<double> value;
  };
  std::vector<Job> jobs;
  for (const std::string& v : exp.variants) {
    if (exp.mode == Mode::kSweep) {
      for (double value : exp.sweep->values) jobs.push_back({v, value});
    } else {
      jobs.push_back({v, std::nullopt});
    }
  }

  struct Done {
    RunRecord run;
    Scenario scenario;
    Config config;
  };
  std::vector<std::optional<Done>> results;
  std::vector<std::exception_ptr> errors;
  parallel_for(jobs.size(), exp.workers, results, errors, [&](std::size_t i) {
    Config cfg = variant_config(exp, jobs[i].variant);
    if (jobs[i].value) cfg.set(exp.sweep->key, format_double(*jobs[i].value));
    Scenario sc = resolve_scenario(cfg);
    RunRecord run = run_scenario(sc, cfg);
    run.index = i;
    run.variant = jobs[i].variant;
    run.sweep_value = jobs[i].value;
    run.label = jobs[i].variant.empty() ? sc.filter.name() : jobs[i].variant;
    if (jobs[i].value) run.label += " " + exp.sweep->key + "=" + format_double(*jobs[i].value);
    return Done{std::move(run), std::move(sc), std::move(cfg)};
  });

  ExperimentReport report;
  report.mode = exp.mode;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (!results[i]) continue;
    Done& done = *results[i];
    if (exp.write_runs) {
      done.run.csv = exp.out_dir / (run_stem(i) + ".csv");
      write_csv(done.run.trajectory, done.run.csv);
      write_text(exp.out_dir / (run_stem(i) + ".meta"),
                 meta_text(exp, done.config, done.scenario, done.run));
    }
    report.runs.push_back(std::move(done.run));
  }
  report.summary = exp.out_dir / "summary.csv";
  write_text(report.summary, summary_text(exp, report.runs));
  write_plots(exp, report.runs);
  rethrow_first(errors);
  return report;
}

ExperimentReport run_certify(const ExperimentConfig& exp) {
  ExperimentReport report;
  report.mode = exp.mode;
  std::ostringstream text;
  for (const std::string& v : exp.variants) {
    const Config cfg = variant_config(exp, v);
    const Scenario sc = resolve_scenario(cfg);
    const Box box = read_box(cfg, "certify.lo", "certify.hi", sc.plant.system.n);
    const double step = cfg.get_double("certify.step", 1e-2);
    if (!(step > 0.0)) throw ConfigurationError(cfg.where("certify.step") + "must be positive");
    const std::vector<StateVec> grid = tensor_grid(box, step);
    std::optional<double> zero_tol;
    if (cfg.has("certify.zero_tol")) zero_tol = read_nonneg(cfg, "certify.zero_tol", 0.0);

    CertifySummary s;
    s.variant = v.empty() ? "base" : v;
    s.barrier = validate_barrier(sc.plant.barrier, grid);
    const RobustnessFunction rho =
        filter_robustness(sc.filter).value_or(RobustnessFunction::polynomial(1.0, 1.0));
    s.rcbf = certify_rcbf(sc.plant.system, sc.plant.barrier, sc.alpha, rho, grid, zero_tol);
    if (const auto* mr = std::get_if<Mrcbf>(&sc.filter.kind())) {
      s.mrcbf = certify_mrcbf(sc.plant.system, sc.plant.barrier, sc.alpha, mr->params, grid);
    }

    text << "[" << s.variant << "]\n"
         << "points = " << grid.size() << '\n'
         << "alpha = " << sc.alpha.describe() << '\n'
         << "max_relative_gradient_error = "
         << format_double(s.barrier.max_relative_gradient_error) << '\n'
         << "regularity_violations = " << s.barrier.regularity_violations.size() << '\n'
         << "zero_tol = " << format_double(s.rcbf.zero_tol) << '\n'
         << "degenerate_points = " << s.rcbf.degenerate.size() << '\n'
         << "rcbf_violations = " << s.rcbf.violations.size() << '\n'
         << "min_degenerate_margin = " << format_double(s.rcbf.min_margin) << '\n';
    if (s.mrcbf) {
      text << "mrcbf_implication_violations = " << s.mrcbf->implication_violations.size()
           << '\n'
           << "mrcbf_extension_violations = " << s.mrcbf->extension_violations.size() << '\n'
           << "mrcbf_max_uniform_delta = " << format_double(s.mrcbf->max_uniform_delta)
           << '\n';
    }
    text << '\n';
    report.certificates.push_back(std::move(s));
  }
  report.summary = exp.out_dir / "certify.txt";
  write_text(report.summary, text.str());
  return report;
}

ExperimentReport run_thresholds(const ExperimentConfig& exp) {
  ExperimentReport report;
  report.mode = exp.mode;
  std::ostringstream csv;
  csv << "variant,label,beta,epsilon,eps1,eps1_out_of_range,eps2,eps2_out_of_range,bracket,"
         "pairs,region_samples\n";
  for (const std::string& v : exp.variants) {
    const Config cfg = variant_config(exp, v);
    const Scenario sc = resolve_scenario(cfg);
    const std::optional<RobustnessFunction> rho = filter_robustness(sc.filter);
    // Thresholds need a positive epsilon, which only R-CBF style terms have.
    if (!rho || std::holds_alternative<Issf>(sc.filter.kind())) continue;
    const double beta = cfg.get_double("thresholds.beta");
    if (!(beta > 0.0)) throw ConfigurationError(cfg.where("thresholds.beta") + "must be positive");
    const Box box = read_box(cfg, "thresholds.lo", "thresholds.hi", sc.plant.system.n);
    const long region_samples = cfg.get_int("thresholds.region_samples", 2000);
    const long pairs = cfg.get_int("thresholds.pairs", 4000);
    if (region_samples < 1 || pairs < 1) {
      throw ConfigurationError(cfg.where("thresholds.pairs") + "sample counts must be >= 1");
    }
    std::vector<StateVec> region;
    try {
      region = sample_superlevel_set(sc.plant.barrier, box, beta,
                                     static_cast<int>(region_samples), sc.seed);
    } catch (const DomainError& e) {
      throw ConfigurationError(cfg.where("thresholds.lo") + e.what());
    }
    const Controller k =
        filtered_controller(sc.plant.system, sc.plant.barrier, sc.filter, sc.nominal);
    ThresholdSummary s;
    s.variant = v.empty() ? "base" : v;
    s.values = thresholds(sc.alpha, *rho, k, beta, region, sc.seed + 7,
                          static_cast<int>(pairs));
    s.epsilon = rho->epsilon();
    s.region_samples = region.size();
    csv << s.variant << ',' << s.values.label << ',' << format_double(beta) << ','
        << format_double(s.epsilon) << ',' << format_double(s.values.eps1) << ','
        << (s.values.eps1_out_of_range ? "true" : "false") << ','
        << format_double(s.values.eps2) << ','
        << (s.values.eps2_out_of_range ? "true" : "false") << ','
        << format_double(s.values.bracket) << ',' << s.values.pairs << ',' << s.region_samples
        << '\n';
    report.thresholds.push_back(std::move(s));
  }
  if (report.thresholds.empty()) {
    throw ConfigurationError(exp.config.source() +
                             ": thresholds need at least one rcbf or tunable filter");
  }
  report.summary = exp.out_dir / "thresholds.csv";
  write_text(report.summary, csv.str());
  return report;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& exp) {
  std::error_code ec;
  std::filesystem::create_directories(exp.out_dir, ec);
  if (ec) {
    throw IoError("cannot create output directory '" + exp.out_dir.string() +
                  "': " + ec.message());
  }
  switch (exp.mode) {
    case Mode::kCertify:
      return run_certify(exp);
    case Mode::kThresholds:
      return run_thresholds(exp);
    default:
      return run_simulations(exp);
  }
}

}  // namespace rcbf
