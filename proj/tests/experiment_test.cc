#include "rcbf/experiment.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "rcbf/errors.h"
#include "rcbf/output.h"

namespace rcbf {
namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("rcbf_experiment_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::vector<std::string> lines_of(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

ExperimentConfig sweep_config(const fs::path& out, const std::string& values,
                              const std::string& extra = "") {
  Config cfg = Config::parse(
      "[scenario]\nname = t\nmode = sweep\nseed = 3\nworkers = 3\n"
      "[system]\nkind = scalar\n"
      "[filter]\nkind = rcbf\ngamma1 = 0.2\ngamma2 = 0.2\n"
      "[disturbance]\nkind = random\ndbar = 0\n"
      "[sim]\nx0 = 0.5\ndt = 1e-2\nhorizon = 2\n"
      "[sweep]\nkey = disturbance.dbar\nvalues = " +
          values + "\n" + extra,
      "sweep.cfg");
  cfg.set("output.dir", out.string());
  return ExperimentConfig::from_config(std::move(cfg));
}

TEST(RunExperimentTest, SummaryRowsAndMetadata) {
  const fs::path out = scratch_dir("summary");
  const ExperimentReport report = run_experiment(sweep_config(out, "0.1, 0.2, 0.5, 1"));
  ASSERT_EQ(report.runs.size(), 4u);
  for (std::size_t i = 0; i < report.runs.size(); ++i) {
    EXPECT_EQ(report.runs[i].index, i);
    ASSERT_TRUE(report.runs[i].sweep_value.has_value());
  }
  EXPECT_EQ(*report.runs[2].sweep_value, 0.5);
  const auto rows = lines_of(out / "summary.csv");
  EXPECT_EQ(rows.size(), 1u + 4u);
  const std::string meta = slurp(out / "run_002.meta");
  for (const char* field : {"seed = 3", "dt = 0.01", "alpha = ", "rho = ", "estimate = ",
                            "disturbance = ", "sweep_value = 0.5", "min_h = "}) {
    EXPECT_NE(meta.find(field), std::string::npos) << field;
  }
  EXPECT_TRUE(fs::exists(out / "run_003.csv"));
  EXPECT_TRUE(fs::exists(out / "h.svg"));
  EXPECT_TRUE(fs::exists(out / "x_1.svg"));
  EXPECT_FALSE(report.any_infeasible());
}

TEST(RunExperimentTest, DeterministicAcrossRunsAndWorkerCounts) {
  const ExperimentReport a = run_experiment(sweep_config(scratch_dir("det_a"), "0.3, 0.6"));
  ExperimentConfig single = sweep_config(scratch_dir("det_b"), "0.3, 0.6");
  single.workers = 1;
  const ExperimentReport b = run_experiment(single);
  ASSERT_EQ(a.runs.size(), b.runs.size());
  for (std::size_t i = 0; i < a.runs.size(); ++i) {
    const Trajectory& ta = a.runs[i].trajectory;
    const Trajectory& tb = b.runs[i].trajectory;
    ASSERT_EQ(ta.size(), tb.size());
    for (std::size_t k = 0; k < ta.size(); ++k) {
      EXPECT_EQ(ta.states[k], tb.states[k]);
      EXPECT_EQ(ta.disturbances[k], tb.disturbances[k]);
    }
  }
}

TEST(RunExperimentTest, PartialResultsFlushedBeforeError) {
  const fs::path out = scratch_dir("partial");
  Config cfg = Config::parse(
      "[scenario]\nmode = sweep\n[system]\nkind = scalar\n"
      "[filter]\nkind = rcbf\ngamma2 = 0.2\n"
      "[sim]\nx0 = 0.5\ndt = 1e-2\nhorizon = 1\n"
      "[sweep]\nkey = filter.gamma1\nvalues = -1, 0.5\n",
      "partial.cfg");
  cfg.set("output.dir", out.string());
  EXPECT_THROW(run_experiment(ExperimentConfig::from_config(std::move(cfg))), ConfigurationError);
  EXPECT_TRUE(fs::exists(out / "run_001.csv"));
  EXPECT_FALSE(fs::exists(out / "run_000.csv"));
  EXPECT_EQ(lines_of(out / "summary.csv").size(), 2u);
}

TEST(RunExperimentTest, UnwritableOutputIsIoError) {
  ExperimentConfig exp = sweep_config(scratch_dir("io"), "0.1");
  const fs::path blocker = scratch_dir("io_file");
  std::ofstream(blocker) << "x";
  exp.out_dir = blocker / "sub";
  EXPECT_THROW(run_experiment(exp), IoError);
}

TEST(RunExperimentTest, CertifyAndThresholds) {
  const fs::path out = scratch_dir("certify");
  Config cfg = Config::parse(
      "[scenario]\nmode = certify\nseed = 1\n[system]\nkind = scalar\n"
      "[filter]\nkind = rcbf\ngamma1 = 0.2\ngamma2 = 0.2\n"
      "[nominal]\nkind = linear\ngain = -1.5\n"
      "[sim]\nx0 = 0.5\n"
      "[certify]\nlo = -2\nhi = 2\nstep = 1e-3\n"
      "[thresholds]\nbeta = 0.1\nlo = -2\nhi = 2\nregion_samples = 500\npairs = 1000\n",
      "cert.cfg");
  cfg.set("output.dir", out.string());
  const ExperimentReport cert = run_experiment(ExperimentConfig::from_config(cfg));
  ASSERT_EQ(cert.certificates.size(), 1u);
  EXPECT_TRUE(cert.certificates[0].rcbf.violations.empty());
  EXPECT_EQ(cert.certificates[0].rcbf.points, 4001u);
  EXPECT_TRUE(fs::exists(out / "certify.txt"));

  cfg.set("scenario.mode", "thresholds");
  const ExperimentReport thr = run_experiment(ExperimentConfig::from_config(cfg));
  ASSERT_EQ(thr.thresholds.size(), 1u);
  EXPECT_EQ(thr.thresholds[0].epsilon, 0.2);
  EXPECT_EQ(thr.thresholds[0].values.label, "empirical");
  EXPECT_TRUE(fs::exists(out / "thresholds.csv"));
}

TEST(RunScenarioTest, ActuationPrediction) {
  const Config cfg = Config::parse(
      "[system]\nkind = scalar\n[filter]\nkind = rcbf\ngamma1 = 0.2\ngamma2 = 0.2\n"
      "[disturbance]\nkind = worst_case\ndbar = 1\n[sim]\nx0 = 0.5\nhorizon = 5\n");
  const RunRecord r = run_scenario(resolve_scenario(cfg), cfg);
  ASSERT_TRUE(r.metrics.has_value());
  ASSERT_TRUE(r.metrics->predicted_inflation.has_value());
  EXPECT_NEAR(*r.metrics->predicted_inflation, 0.8, 1e-12);
  EXPECT_LE(r.metrics->observed_inflation, 0.8 + 0.01);
}

}  // namespace
}  // namespace rcbf
