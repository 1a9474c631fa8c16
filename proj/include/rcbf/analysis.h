#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rcbf/core.h"
#include "rcbf/sim.h"

namespace rcbf {

struct Metrics {
  double min_h = 0.0;
  double final_h = 0.0;
  /// First recorded time with h >= -tol, for runs that start below -tol.
  std::optional<double> time_to_safe;
  /// Inflation level the theory predicts for this run, when one applies.
  std::optional<double> predicted_inflation;
  /// max(0, -min_h).
  double observed_inflation = 0.0;
  /// False exactly when the run escaped.
  bool bounded = true;
  Outcome outcome;
};

/// Summary metrics of a recorded run. Throws DomainError for an empty
/// trajectory. `bar` is used to recompute h where the record is missing it.
Metrics compute_metrics(const Trajectory& traj, const Barrier& bar, double tol);

/// -alpha^-1(-zeta(dbar)): the inflation level reached under actuation
/// disturbances bounded by dbar. Zero while zeta(dbar) = 0.
double predicted_inflation_actuation(const ClassKappaInfE& alpha,
                                     const RobustnessFunction& rho, double dbar);

/// -alpha^-1(-zeta(L_k delta)) for estimate errors bounded by delta and a
/// controller with Lipschitz constant L_k.
double predicted_inflation_measurement(const ClassKappaInfE& alpha,
                                       const RobustnessFunction& rho,
                                       double lipschitz_k, double delta);

/// Uniform samples of {x in box : h(x) >= -beta}, by rejection. Throws
/// DomainError when no sample lands in the set.
std::vector<StateVec> sample_superlevel_set(const Barrier& bar, const Box& box,
                                            double beta, int count,
                                            std::uint64_t seed);

/// Sampled estimate of
///   sigma(r) = sup_{|e| <= r} sup_{z in region} |k(z + e) - k(z)|.
///
/// A fixed pool of pairs (z_i, e_i) is drawn once: z_i from the region
/// samples, e_i = r_i v_i with v_i uniform on the sphere. Half of the radii
/// are uniform on [0, R] and half log-uniform on [1e-6 R, R], where
/// R = 10 max(region diameter, 1e-3). sigma(r) is the largest difference over
/// pool entries with r_i <= r, so the estimate is nondecreasing in r, zero at
/// r = 0 and a lower bound on the true supremum. Pairs where the controller
/// is infeasible are skipped.
class SigmaBetaEstimator {
 public:
  SigmaBetaEstimator(const std::function<InputVec(const StateVec&)>& controller,
                     const std::vector<StateVec>& region, int samples,
                     std::uint64_t seed);

  double operator()(double r) const;

  double max_radius() const { return max_radius_; }
  double region_diameter() const { return region_diameter_; }
  /// Pairs that produced a usable difference.
  std::size_t pairs() const { return radii_.size(); }
  std::size_t skipped() const { return skipped_; }

 private:
  std::vector<double> radii_;       // sorted ascending
  std::vector<double> prefix_max_;  // running max of the differences
  double max_radius_ = 0.0;
  double region_diameter_ = 0.0;
  std::size_t skipped_ = 0;
};

/// One-shot evaluation of the estimator at r.
double estimate_sigma_beta(const std::function<InputVec(const StateVec&)>& controller,
                           const std::vector<StateVec>& region, double r,
                           int samples, std::uint64_t seed);

struct Thresholds {
  /// Smallest delta with sigma(delta) >= epsilon.
  double eps1 = 0.0;
  /// Largest delta with zeta(sigma(delta)) <= -alpha(-beta).
  double eps2 = 0.0;
  /// The defining condition was never met inside [0, bracket]; the value is
  /// the bracket end.
  bool eps1_out_of_range = false;
  bool eps2_out_of_range = false;
  double bracket = 0.0;
  double beta = 0.0;
  std::size_t pairs = 0;
  /// Always "empirical": both values derive from the sampled sigma.
  std::string label = "empirical";
};

/// Threshold estimates for a controller over the sampled set {h >= -beta}.
/// Both are found by bisection on [0, 10 region diameter] to 1e-6.
Thresholds thresholds(const ClassKappaInfE& alpha, const RobustnessFunction& rho,
                      const std::function<InputVec(const StateVec&)>& controller,
                      double beta, const std::vector<StateVec>& region,
                      std::uint64_t seed, int samples = 4000);

}  // namespace rcbf
