#include "rcbf/analysis.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rcbf/errors.h"
#include "rcbf/uncertainty.h"

namespace rcbf {
namespace {

constexpr double kBisectionTol = 1e-6;

double inflation_from_zeta(const ClassKappaInfE& alpha, double zeta) {
  if (zeta <= 0.0) return 0.0;
  return std::max(0.0, -alpha.inverse(-zeta));
}

// Smallest x in [0, hi] where the nondecreasing predicate turns true, to
// within kBisectionTol. Assumes pred(hi) is true.
double bisect_first_true(const std::function<bool(double)>& pred, double hi) {
  double lo = 0.0;
  if (pred(lo)) return lo;
  while (hi - lo > kBisectionTol) {
    const double mid = 0.5 * (lo + hi);
    if (pred(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

double bounding_diameter(const std::vector<StateVec>& points) {
  StateVec lo = points.front();
  StateVec hi = points.front();
  for (const StateVec& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return (hi - lo).norm();
}

}  // namespace

Metrics compute_metrics(const Trajectory& traj, const Barrier& bar, double tol) {
  if (traj.size() == 0) throw DomainError("compute_metrics: empty trajectory");
  if (!(tol >= 0.0)) throw DomainError("compute_metrics: tol must be >= 0");
  std::vector<double> h = traj.h_values;
  if (h.size() != traj.size()) {
    h.clear();
    for (const StateVec& x : traj.states) h.push_back(bar.h(x));
  }
  Metrics m;
  m.min_h = *std::min_element(h.begin(), h.end());
  m.final_h = h.back();
  m.observed_inflation = std::max(0.0, -m.min_h);
  m.outcome = traj.outcome;
  m.bounded = traj.outcome.kind != OutcomeKind::kEscaped;
  if (h.front() < -tol) {
    for (std::size_t k = 0; k < h.size(); ++k) {
      if (h[k] >= -tol) {
        m.time_to_safe = traj.times[k];
        break;
      }
    }
  }
  return m;
}

double predicted_inflation_actuation(const ClassKappaInfE& alpha,
                                     const RobustnessFunction& rho, double dbar) {
  if (!(dbar >= 0.0)) throw DomainError("disturbance bound must be >= 0");
  return inflation_from_zeta(alpha, rho.zeta(dbar));
}

double predicted_inflation_measurement(const ClassKappaInfE& alpha,
                                       const RobustnessFunction& rho,
                                       double lipschitz_k, double delta) {
  if (!(lipschitz_k >= 0.0)) throw DomainError("Lipschitz constant must be >= 0");
  if (!(delta >= 0.0)) throw DomainError("estimate error bound must be >= 0");
  return inflation_from_zeta(alpha, rho.zeta(lipschitz_k * delta));
}

std::vector<StateVec> sample_superlevel_set(const Barrier& bar, const Box& box,
                                            double beta, int count,
                                            std::uint64_t seed) {
  box.require_volume();
  if (count <= 0) throw DomainError("sample_superlevel_set: count must be positive");
  if (!(beta >= 0.0)) throw DomainError("sample_superlevel_set: beta must be >= 0");
  std::mt19937_64 rng = counter_rng(seed, 0, 0x73626574);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<StateVec> out;
  out.reserve(static_cast<std::size_t>(count));
  const long max_attempts = 1000L * count;
  for (long attempt = 0; attempt < max_attempts && static_cast<int>(out.size()) < count;
       ++attempt) {
    StateVec x(box.dim());
    for (int i = 0; i < box.dim(); ++i) {
      x[i] = box.lo[i] + (box.hi[i] - box.lo[i]) * unit(rng);
    }
    if (bar.h(x) >= -beta) out.push_back(std::move(x));
  }
  if (out.empty()) {
    throw DomainError("sample_superlevel_set: no sample satisfied h >= -beta in the box");
  }
  return out;
}

SigmaBetaEstimator::SigmaBetaEstimator(
    const std::function<InputVec(const StateVec&)>& controller,
    const std::vector<StateVec>& region, int samples, std::uint64_t seed) {
  if (region.empty()) throw DomainError("sigma estimate needs a nonempty region sample");
  if (samples <= 0) throw DomainError("sigma estimate needs a positive sample count");
  region_diameter_ = bounding_diameter(region);
  max_radius_ = 10.0 * std::max(region_diameter_, 1e-3);
  const int dim = static_cast<int>(region.front().size());

  std::mt19937_64 rng = counter_rng(seed, 0, 0x7369676d61);
  std::uniform_int_distribution<std::size_t> pick(0, region.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double log_lo = std::log(1e-6 * max_radius_);
  const double log_hi = std::log(max_radius_);

  std::vector<std::pair<double, double>> pool;  // (radius, difference)
  pool.reserve(static_cast<std::size_t>(samples));
  for (int i = 0; i < samples; ++i) {
    const StateVec& z = region[pick(rng)];
    Eigen::VectorXd v(dim);
    do {
      for (int j = 0; j < dim; ++j) v[j] = normal(rng);
    } while (v.norm() == 0.0);
    v.normalize();
    const double radius = (i % 2 == 0)
                              ? max_radius_ * unit(rng)
                              : std::exp(log_lo + (log_hi - log_lo) * unit(rng));
    try {
      const double diff = (controller(z + radius * v) - controller(z)).norm();
      pool.emplace_back(radius, diff);
    } catch (const InfeasibleAtState&) {
      ++skipped_;
    }
  }
  std::sort(pool.begin(), pool.end());
  radii_.reserve(pool.size());
  prefix_max_.reserve(pool.size());
  double running = 0.0;
  for (const auto& [radius, diff] : pool) {
    running = std::max(running, diff);
    radii_.push_back(radius);
    prefix_max_.push_back(running);
  }
}

double SigmaBetaEstimator::operator()(double r) const {
  if (!(r >= 0.0)) throw DomainError("sigma estimate needs r >= 0");
  const auto it = std::upper_bound(radii_.begin(), radii_.end(), r);
  if (it == radii_.begin()) return 0.0;
  return prefix_max_[static_cast<std::size_t>(it - radii_.begin()) - 1];
}

double estimate_sigma_beta(const std::function<InputVec(const StateVec&)>& controller,
                           const std::vector<StateVec>& region, double r,
                           int samples, std::uint64_t seed) {
  return SigmaBetaEstimator(controller, region, samples, seed)(r);
}

Thresholds thresholds(const ClassKappaInfE& alpha, const RobustnessFunction& rho,
                      const std::function<InputVec(const StateVec&)>& controller,
                      double beta, const std::vector<StateVec>& region,
                      std::uint64_t seed, int samples) {
  if (!(beta > 0.0)) throw DomainError("thresholds: beta must be positive");
  const SigmaBetaEstimator sigma(controller, region, samples, seed);
  Thresholds out;
  out.beta = beta;
  out.pairs = sigma.pairs();
  out.bracket = 10.0 * std::max(sigma.region_diameter(), 1e-3);

  const double eps = rho.epsilon();
  auto reaches_eps = [&](double d) { return sigma(d) >= eps; };
  if (reaches_eps(out.bracket)) {
    out.eps1 = bisect_first_true(reaches_eps, out.bracket);
  } else {
    out.eps1 = out.bracket;
    out.eps1_out_of_range = true;
  }

  const double budget = -alpha(-beta);
  auto exceeds_budget = [&](double d) { return rho.zeta(sigma(d)) > budget; };
  if (exceeds_budget(out.bracket)) {
    out.eps2 = bisect_first_true(exceeds_budget, out.bracket);
  } else {
    out.eps2 = out.bracket;
    out.eps2_out_of_range = true;
  }
  return out;
}

}  // namespace rcbf
