#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rcbf/core.h"

namespace rcbf {

/// Output of a pointwise safety filter.
struct FilterResult {
  InputVec u;
  /// Constraint value at the returned input (>= 0 when feasible).
  double slack = 0.0;
  /// The nominal input violated the constraint.
  bool active = false;
  bool nominal_modified = false;
};

/// Single affine constraint a . u >= b.
struct AffineConstraint {
  InputVec a;
  double b = 0.0;
};

/// argmin |u - u_d|^2 s.t. a . u >= b, in closed form. Throws
/// InfeasibleAtState when a = 0 and b > 0.
InputVec halfspace_qp(const InputVec& u_d, const InputVec& a, double b);

/// Constraint L_fh + L_gh u + alpha(h) >= term at xhat, as a . u >= b.
AffineConstraint strengthened_constraint(const ControlAffineSystem& sys,
                                         const Barrier& bar,
                                         const ClassKappaInfE& alpha,
                                         const std::function<double(double)>& term,
                                         const StateVec& xhat);

/// Minimum-deviation input for L_fh + L_gh u + alpha(h) >= rho(|L_gh|).
FilterResult rcbf_filter(const ControlAffineSystem& sys, const Barrier& bar,
                         const ClassKappaInfE& alpha, const RobustnessFunction& rho,
                         const InputVec& u_d, const StateVec& xhat);

/// The classic CBF quadratic program (rho = 0).
FilterResult cbf_filter(const ControlAffineSystem& sys, const Barrier& bar,
                        const ClassKappaInfE& alpha, const InputVec& u_d,
                        const StateVec& xhat);

/// ISSf-style strengthening |L_gh|^2 / eps_issf. This term has rho(0) = 0 and
/// a finite conjugate but no positive linear lower bound.
FilterResult issf_filter(const ControlAffineSystem& sys, const Barrier& bar,
                         const ClassKappaInfE& alpha, double eps_issf,
                         const InputVec& u_d, const StateVec& xhat);

/// The ISSf term packaged as a (property-2 violating) robustness function, for
/// conjugate and inflation computations.
RobustnessFunction issf_term(double eps_issf);

/// gamma_i / eps_i(h) scaled polynomial term with eps_i(r) = 1 for r <= 0 and
/// 1 + c_i r for r > 0.
struct TunableParams {
  double gamma1 = 1.0;
  double gamma2 = 1.0;
  double c1 = 0.0;
  double c2 = 0.0;
};

AffineConstraint tunable_constraint(const ControlAffineSystem& sys,
                                    const Barrier& bar,
                                    const ClassKappaInfE& alpha,
                                    const TunableParams& params,
                                    const StateVec& xhat);

FilterResult tunable_rcbf_filter(const ControlAffineSystem& sys,
                                 const Barrier& bar, const ClassKappaInfE& alpha,
                                 const TunableParams& params, const InputVec& u_d,
                                 const StateVec& xhat);

/// Measurement-robust CBF data: the assumed error bound delta(xhat) and the
/// Lipschitz constants of L_fh, L_gh and alpha o h.
struct MrcbfParams {
  std::function<double(const StateVec&)> delta;
  double lip_lfh = 0.0;
  double lip_lgh = 0.0;
  double lip_alpha_h = 0.0;
};

/// Value of L_fh + L_gh u + alpha(h) - delta (L_lfh + L_alphah + L_lgh |u|).
double mrcbf_slack(const ControlAffineSystem& sys, const Barrier& bar,
                   const ClassKappaInfE& alpha, const MrcbfParams& mr,
                   const InputVec& u, const StateVec& xhat);

/// Projection of u_d onto the MR-CBF feasible set. m = 1 is solved exactly by
/// splitting on sign(u); m > 1 searches over the radius r = |u|.
FilterResult mrcbf_filter(const ControlAffineSystem& sys, const Barrier& bar,
                          const ClassKappaInfE& alpha, const MrcbfParams& mr,
                          const InputVec& u_d, const StateVec& xhat);

// --- filter configurations -------------------------------------------------

struct Unfiltered {};
struct PlainCbf {};
struct Rcbf {
  RobustnessFunction rho;
};
struct Issf {
  double eps_issf = 1.0;
};
struct TunableRcbf {
  TunableParams params;
};
struct Mrcbf {
  MrcbfParams params;
};

using FilterKind = std::variant<Unfiltered, PlainCbf, Rcbf, Issf, TunableRcbf, Mrcbf>;

/// A filter kind bound to its class-K function.
class SafetyFilter {
 public:
  SafetyFilter(FilterKind kind, ClassKappaInfE alpha)
      : kind_(std::move(kind)), alpha_(std::move(alpha)) {}

  /// Safe input at the estimate xhat. Unfiltered passes u_d through and
  /// reports the plain CBF constraint value as slack.
  FilterResult apply(const ControlAffineSystem& sys, const Barrier& bar,
                     const InputVec& u_d, const StateVec& xhat) const;

  const FilterKind& kind() const { return kind_; }
  const ClassKappaInfE& alpha() const { return alpha_; }
  bool filters() const { return !std::holds_alternative<Unfiltered>(kind_); }
  std::string name() const;
  std::string describe() const;

 private:
  FilterKind kind_;
  ClassKappaInfE alpha_;
};

// --- certification ---------------------------------------------------------

struct DegeneratePoint {
  StateVec x;
  double lgh_norm = 0.0;
  /// L_fh + alpha(h) at x.
  double margin = 0.0;
};

struct RcbfCertificate {
  std::vector<DegeneratePoint> degenerate;
  std::vector<DegeneratePoint> violations;
  /// Minimum margin over near-degenerate points (+inf when there are none).
  double min_margin = 0.0;
  double zero_tol = 0.0;
  std::size_t points = 0;
};

/// Checks L_gh(x) = 0 => L_fh(x) + alpha(h(x)) >= 0 over the grid. Points with
/// |L_gh| <= zero_tol count as degenerate; the default tolerance is
/// 1e-6 * max_grid |L_gh|.
RcbfCertificate certify_rcbf(const ControlAffineSystem& sys, const Barrier& bar,
                             const ClassKappaInfE& alpha,
                             const RobustnessFunction& rho,
                             const std::vector<StateVec>& grid,
                             std::optional<double> zero_tol = std::nullopt);

struct MrcbfCertificate {
  /// Points where |L_gh| <= delta L_lgh but L_fh + alpha(h) < delta (L_lfh + L_alphah).
  std::vector<StateVec> implication_violations;
  /// Points where delta(x) exceeds max{|L_gh|/L_lgh, (L_fh+alpha(h))/(L_lfh+L_alphah)}.
  std::vector<StateVec> extension_violations;
  /// Largest constant delta satisfying the extension bound at every grid point.
  double max_uniform_delta = 0.0;
  std::size_t points = 0;
};

MrcbfCertificate certify_mrcbf(const ControlAffineSystem& sys, const Barrier& bar,
                               const ClassKappaInfE& alpha, const MrcbfParams& mr,
                               const std::vector<StateVec>& grid);

/// max over sampled pairs of |fn(x) - fn(y)| / |x - y| in the box. A lower
/// estimate of the true Lipschitz constant; deterministic for a given seed.
double estimate_lipschitz(const std::function<Eigen::VectorXd(const StateVec&)>& fn,
                          const Box& region, int samples, std::uint64_t seed);

/// Lipschitz constants of L_fh, L_gh and alpha o h over the region.
MrcbfParams estimate_mrcbf_constants(const ControlAffineSystem& sys,
                                     const Barrier& bar,
                                     const ClassKappaInfE& alpha,
                                     std::function<double(const StateVec&)> delta,
                                     const Box& region, int samples,
                                     std::uint64_t seed);

}  // namespace rcbf
