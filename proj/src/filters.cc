#include "rcbf/filters.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "rcbf/errors.h"

namespace rcbf {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Tolerance on the radius search of the m > 1 MR-CBF projection.
constexpr double kRadiusTol = 1e-8;

FilterResult solve_affine(const AffineConstraint& c, const InputVec& u_d) {
  FilterResult out;
  out.active = c.a.dot(u_d) < c.b;
  out.u = halfspace_qp(u_d, c.a, c.b);
  out.nominal_modified = out.active;
  out.slack = c.a.dot(out.u) - c.b;
  return out;
}

// Feasible interval of coef * u >= rhs intersected with [lo, hi].
struct Interval {
  double lo;
  double hi;
  bool empty() const { return lo > hi; }
};

Interval intersect_scaled(double coef, double rhs, Interval base) {
  if (coef > 0.0) {
    base.lo = std::max(base.lo, rhs / coef);
  } else if (coef < 0.0) {
    base.hi = std::min(base.hi, rhs / coef);
  } else if (rhs > 0.0) {
    base.lo = 1.0;
    base.hi = 0.0;
  }
  return base;
}

// Projection of p onto {|u| <= r} intersected with {a . u >= beta}. The set
// must be nonempty.
InputVec project_ball_halfspace(const InputVec& p, double r, const InputVec& a,
                                double beta) {
  const double an2 = a.squaredNorm();
  if (p.norm() <= r && a.dot(p) >= beta) return p;
  if (an2 > 0.0) {
    const double ap = a.dot(p);
    InputVec q = p;
    if (ap < beta) q += ((beta - ap) / an2) * a;
    if (q.norm() <= r) return q;
  }
  {
    const double pn = p.norm();
    InputVec q = pn > r ? InputVec(p * (r / pn)) : p;
    if (a.dot(q) >= beta) return q;
  }
  // Both constraints bind: nearest point on the circle {|u| = r, a . u = beta}.
  const InputVec center = (beta / an2) * a;
  const double circle_r = std::sqrt(std::max(0.0, r * r - center.squaredNorm()));
  InputVec w = p - ((a.dot(p) - beta) / an2) * a - center;
  if (w.norm() <= 1e-300) {
    Eigen::Index k = 0;
    a.cwiseAbs().minCoeff(&k);
    w = InputVec::Unit(a.size(), k);
    w -= (w.dot(a) / an2) * a;
  }
  return center + circle_r * w.normalized();
}

FilterResult mrcbf_scalar(double lgh, double kappa, double rhs, double u_d) {
  FilterResult out;
  const Interval pos = intersect_scaled(lgh - kappa, rhs, {0.0, kInf});
  const Interval neg = intersect_scaled(lgh + kappa, rhs, {-kInf, 0.0});
  double best = std::numeric_limits<double>::quiet_NaN();
  for (const Interval& iv : {pos, neg}) {
    if (iv.empty()) continue;
    const double cand = std::clamp(u_d, iv.lo, iv.hi);
    if (std::isnan(best) || std::abs(cand - u_d) < std::abs(best - u_d)) best = cand;
  }
  if (std::isnan(best)) {
    std::ostringstream os;
    os << "MR-CBF constraint infeasible (L_gh = " << lgh << ", delta L_lgh = " << kappa
       << ", required margin " << rhs << ")";
    throw InfeasibleAtState(os.str());
  }
  out.u = InputVec::Constant(1, best);
  return out;
}

FilterResult mrcbf_vector(const InputVec& a, double kappa, double rhs,
                          const InputVec& u_d) {
  const double an = a.norm();
  double r_lo = 0.0;
  double r_hi = kInf;
  InputVec u_feasible = InputVec::Zero(a.size());
  if (an > kappa) {
    r_lo = std::max(0.0, rhs / (an - kappa));
    u_feasible = (r_lo / an) * a;
  } else if (rhs > 0.0) {
    std::ostringstream os;
    os << "MR-CBF constraint infeasible (|L_gh| = " << an << " <= delta L_lgh = " << kappa
       << ", required margin " << rhs << ")";
    throw InfeasibleAtState(os.str());
  } else if (an < kappa) {
    r_hi = -rhs / (kappa - an);
  }
  r_hi = std::min(r_hi, u_d.norm() + (u_d - u_feasible).norm());
  r_hi = std::max(r_hi, r_lo);

  auto project = [&](double r) {
    return project_ball_halfspace(u_d, r, a, rhs + kappa * r);
  };
  auto distance = [&](double r) { return (project(r) - u_d).norm(); };

  // The distance from u_d to {|u| <= r, a.u >= rhs + kappa r} is convex in r.
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = r_lo;
  double hi = r_hi;
  double c = hi - inv_phi * (hi - lo);
  double d = lo + inv_phi * (hi - lo);
  double fc = distance(c);
  double fd = distance(d);
  while (hi - lo > kRadiusTol * std::max(1.0, hi)) {
    if (fc < fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - inv_phi * (hi - lo);
      fc = distance(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + inv_phi * (hi - lo);
      fd = distance(d);
    }
  }
  double r_best = fc < fd ? c : d;
  for (double r : {r_lo, r_hi}) {
    if (distance(r) < distance(r_best)) r_best = r;
  }
  FilterResult out;
  out.u = project(r_best);
  return out;
}

}  // namespace

InputVec halfspace_qp(const InputVec& u_d, const InputVec& a, double b) {
  if (u_d.size() != a.size()) {
    throw ConfigurationError("halfspace_qp: u_d and a differ in length");
  }
  const double au = a.dot(u_d);
  if (au >= b) return u_d;
  const double an2 = a.squaredNorm();
  if (an2 == 0.0) {
    std::ostringstream os;
    os << "constraint 0 . u >= " << b << " cannot be satisfied";
    throw InfeasibleAtState(os.str());
  }
  return u_d + ((b - au) / an2) * a;
}

AffineConstraint strengthened_constraint(const ControlAffineSystem& sys,
                                         const Barrier& bar,
                                         const ClassKappaInfE& alpha,
                                         const std::function<double(double)>& term,
                                         const StateVec& xhat) {
  const LieDerivatives lie = lie_derivatives(sys, bar, xhat);
  AffineConstraint c;
  c.a = lie.lgh;
  c.b = term(lie.lgh.norm()) - lie.lfh - alpha(bar.h(xhat));
  return c;
}

FilterResult rcbf_filter(const ControlAffineSystem& sys, const Barrier& bar,
                         const ClassKappaInfE& alpha, const RobustnessFunction& rho,
                         const InputVec& u_d, const StateVec& xhat) {
  return solve_affine(
      strengthened_constraint(sys, bar, alpha, [&](double y) { return rho(y); }, xhat),
      u_d);
}

FilterResult cbf_filter(const ControlAffineSystem& sys, const Barrier& bar,
                        const ClassKappaInfE& alpha, const InputVec& u_d,
                        const StateVec& xhat) {
  return solve_affine(
      strengthened_constraint(sys, bar, alpha, [](double) { return 0.0; }, xhat), u_d);
}

FilterResult issf_filter(const ControlAffineSystem& sys, const Barrier& bar,
                         const ClassKappaInfE& alpha, double eps_issf,
                         const InputVec& u_d, const StateVec& xhat) {
  if (!(eps_issf > 0.0)) throw ConfigurationError("ISSf epsilon must be positive");
  return solve_affine(strengthened_constraint(
                          sys, bar, alpha,
                          [eps_issf](double y) { return y * y / eps_issf; }, xhat),
                      u_d);
}

RobustnessFunction issf_term(double eps_issf) {
  if (!(eps_issf > 0.0)) throw ConfigurationError("ISSf epsilon must be positive");
  // The minimizer of y^2/eps - y d is y = eps d / 2.
  return RobustnessFunction::generic(
      [eps_issf](double y) { return y * y / eps_issf; }, 1e4 * eps_issf, "issf");
}

AffineConstraint tunable_constraint(const ControlAffineSystem& sys,
                                    const Barrier& bar,
                                    const ClassKappaInfE& alpha,
                                    const TunableParams& p, const StateVec& xhat) {
  if (!(p.gamma1 > 0.0) || !(p.gamma2 > 0.0) || p.c1 < 0.0 || p.c2 < 0.0) {
    throw ConfigurationError("tunable R-CBF needs gamma1, gamma2 > 0 and c1, c2 >= 0");
  }
  const double hx = bar.h(xhat);
  const double eps1 = hx > 0.0 ? 1.0 + p.c1 * hx : 1.0;
  const double eps2 = hx > 0.0 ? 1.0 + p.c2 * hx : 1.0;
  const double g1 = p.gamma1 / eps1;
  const double g2 = p.gamma2 / eps2;
  return strengthened_constraint(
      sys, bar, alpha, [g1, g2](double y) { return polynomial_term(g1, g2, y); }, xhat);
}

FilterResult tunable_rcbf_filter(const ControlAffineSystem& sys,
                                 const Barrier& bar, const ClassKappaInfE& alpha,
                                 const TunableParams& params, const InputVec& u_d,
                                 const StateVec& xhat) {
  return solve_affine(tunable_constraint(sys, bar, alpha, params, xhat), u_d);
}

double mrcbf_slack(const ControlAffineSystem& sys, const Barrier& bar,
                   const ClassKappaInfE& alpha, const MrcbfParams& mr,
                   const InputVec& u, const StateVec& xhat) {
  const LieDerivatives lie = lie_derivatives(sys, bar, xhat);
  const double delta = mr.delta(xhat);
  return lie.lfh + lie.lgh.dot(u) + alpha(bar.h(xhat)) -
         delta * (mr.lip_lfh + mr.lip_alpha_h + mr.lip_lgh * u.norm());
}

FilterResult mrcbf_filter(const ControlAffineSystem& sys, const Barrier& bar,
                          const ClassKappaInfE& alpha, const MrcbfParams& mr,
                          const InputVec& u_d, const StateVec& xhat) {
  if (!mr.delta) throw ConfigurationError("MR-CBF requires a delta(xhat) function");
  const LieDerivatives lie = lie_derivatives(sys, bar, xhat);
  if (u_d.size() != lie.lgh.size()) {
    throw ConfigurationError("MR-CBF: nominal input has wrong length");
  }
  const double delta = mr.delta(xhat);
  if (!(delta >= 0.0)) throw ConfigurationError("MR-CBF delta(xhat) must be >= 0");
  const double kappa = delta * mr.lip_lgh;
  // L_gh u - kappa |u| >= rhs
  const double rhs =
      delta * (mr.lip_lfh + mr.lip_alpha_h) - lie.lfh - alpha(bar.h(xhat));

  auto slack_of = [&](const InputVec& u) { return lie.lgh.dot(u) - kappa * u.norm() - rhs; };

  FilterResult out;
  if (slack_of(u_d) >= 0.0) {
    out.u = u_d;
  } else if (u_d.size() == 1) {
    out = mrcbf_scalar(lie.lgh[0], kappa, rhs, u_d[0]);
    out.active = true;
  } else {
    out = mrcbf_vector(lie.lgh, kappa, rhs, u_d);
    out.active = true;
  }
  out.nominal_modified = out.active;
  out.slack = slack_of(out.u);
  return out;
}

// ---------------------------------------------------------------------------

FilterResult SafetyFilter::apply(const ControlAffineSystem& sys, const Barrier& bar,
                                 const InputVec& u_d, const StateVec& xhat) const {
  struct Visitor {
    const SafetyFilter& self;
    const ControlAffineSystem& sys;
    const Barrier& bar;
    const InputVec& u_d;
    const StateVec& xhat;

    FilterResult operator()(const Unfiltered&) const {
      const AffineConstraint c = strengthened_constraint(
          sys, bar, self.alpha_, [](double) { return 0.0; }, xhat);
      FilterResult out;
      out.u = u_d;
      out.slack = c.a.dot(u_d) - c.b;
      return out;
    }
    FilterResult operator()(const PlainCbf&) const {
      return cbf_filter(sys, bar, self.alpha_, u_d, xhat);
    }
    FilterResult operator()(const Rcbf& k) const {
      return rcbf_filter(sys, bar, self.alpha_, k.rho, u_d, xhat);
    }
    FilterResult operator()(const Issf& k) const {
      return issf_filter(sys, bar, self.alpha_, k.eps_issf, u_d, xhat);
    }
    FilterResult operator()(const TunableRcbf& k) const {
      return tunable_rcbf_filter(sys, bar, self.alpha_, k.params, u_d, xhat);
    }
    FilterResult operator()(const Mrcbf& k) const {
      return mrcbf_filter(sys, bar, self.alpha_, k.params, u_d, xhat);
    }
  };
  return std::visit(Visitor{*this, sys, bar, u_d, xhat}, kind_);
}

std::string SafetyFilter::name() const {
  struct Visitor {
    std::string operator()(const Unfiltered&) const { return "none"; }
    std::string operator()(const PlainCbf&) const { return "cbf"; }
    std::string operator()(const Rcbf&) const { return "rcbf"; }
    std::string operator()(const Issf&) const { return "issf"; }
    std::string operator()(const TunableRcbf&) const { return "tunable"; }
    std::string operator()(const Mrcbf&) const { return "mrcbf"; }
  };
  return std::visit(Visitor{}, kind_);
}

std::string SafetyFilter::describe() const {
  std::ostringstream os;
  os << name() << " alpha=" << alpha_.describe();
  if (const auto* k = std::get_if<Rcbf>(&kind_)) {
    os << " rho=" << k->rho.describe();
  } else if (const auto* k = std::get_if<Issf>(&kind_)) {
    os << " eps_issf=" << k->eps_issf;
  } else if (const auto* k = std::get_if<TunableRcbf>(&kind_)) {
    os << " gamma1=" << k->params.gamma1 << " gamma2=" << k->params.gamma2
       << " c1=" << k->params.c1 << " c2=" << k->params.c2;
  } else if (const auto* k = std::get_if<Mrcbf>(&kind_)) {
    os << " L_lfh=" << k->params.lip_lfh << " L_lgh=" << k->params.lip_lgh
       << " L_alphah=" << k->params.lip_alpha_h;
  }
  return os.str();
}

// ---------------------------------------------------------------------------

RcbfCertificate certify_rcbf(const ControlAffineSystem& sys, const Barrier& bar,
                             const ClassKappaInfE& alpha,
                             const RobustnessFunction& rho,
                             const std::vector<StateVec>& grid,
                             std::optional<double> zero_tol) {
  (void)rho;  // rho(0) = 0, so only the degenerate points matter.
  RcbfCertificate cert;
  cert.points = grid.size();
  cert.min_margin = kInf;
  if (grid.empty()) return cert;

  std::vector<double> norms;
  std::vector<double> margins;
  norms.reserve(grid.size());
  margins.reserve(grid.size());
  double max_norm = 0.0;
  for (const StateVec& x : grid) {
    const LieDerivatives lie = lie_derivatives(sys, bar, x);
    norms.push_back(lie.lgh.norm());
    margins.push_back(lie.lfh + alpha(bar.h(x)));
    max_norm = std::max(max_norm, norms.back());
  }
  cert.zero_tol = zero_tol.value_or(1e-6 * max_norm);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (norms[i] > cert.zero_tol) continue;
    DegeneratePoint p{grid[i], norms[i], margins[i]};
    cert.min_margin = std::min(cert.min_margin, p.margin);
    if (p.margin < 0.0) cert.violations.push_back(p);
    cert.degenerate.push_back(std::move(p));
  }
  return cert;
}

MrcbfCertificate certify_mrcbf(const ControlAffineSystem& sys, const Barrier& bar,
                               const ClassKappaInfE& alpha, const MrcbfParams& mr,
                               const std::vector<StateVec>& grid) {
  if (!mr.delta) throw ConfigurationError("MR-CBF requires a delta(xhat) function");
  MrcbfCertificate cert;
  cert.points = grid.size();
  double min_bound = kInf;
  const double drift_lip = mr.lip_lfh + mr.lip_alpha_h;
  auto ratio = [](double num, double den) {
    if (den > 0.0) return num / den;
    if (num > 0.0) return kInf;
    return num < 0.0 ? -kInf : 0.0;
  };
  for (const StateVec& x : grid) {
    const LieDerivatives lie = lie_derivatives(sys, bar, x);
    const double delta = mr.delta(x);
    const double lgh_norm = lie.lgh.norm();
    const double margin = lie.lfh + alpha(bar.h(x));
    if (lgh_norm <= delta * mr.lip_lgh && margin < delta * drift_lip) {
      cert.implication_violations.push_back(x);
    }
    const double bound = std::max(ratio(lgh_norm, mr.lip_lgh), ratio(margin, drift_lip));
    min_bound = std::min(min_bound, bound);
    if (delta > bound) cert.extension_violations.push_back(x);
  }
  cert.max_uniform_delta = grid.empty() ? 0.0 : std::max(0.0, min_bound);
  return cert;
}

double estimate_lipschitz(const std::function<Eigen::VectorXd(const StateVec&)>& fn,
                          const Box& region, int samples, std::uint64_t seed) {
  region.require_volume();
  if (samples < 1) throw ConfigurationError("estimate_lipschitz needs samples >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int n = region.dim();
  const double local_radius = 1e-3 * region.diameter();

  auto uniform_point = [&]() {
    StateVec x(n);
    for (int i = 0; i < n; ++i) x[i] = region.lo[i] + (region.hi[i] - region.lo[i]) * unit(rng);
    return x;
  };

  double best = 0.0;
  for (int s = 0; s < samples; ++s) {
    const StateVec x = uniform_point();
    StateVec y;
    if (s % 2 == 0) {
      y = uniform_point();
    } else {
      // Nearby partner, so the estimate also sees local slopes.
      StateVec dir(n);
      for (int i = 0; i < n; ++i) dir[i] = normal(rng);
      y = x + local_radius * unit(rng) * dir.normalized();
      y = y.cwiseMax(region.lo).cwiseMin(region.hi);
    }
    const double dist = (x - y).norm();
    if (dist < 1e-12) continue;
    best = std::max(best, (fn(x) - fn(y)).norm() / dist);
  }
  return best;
}

MrcbfParams estimate_mrcbf_constants(const ControlAffineSystem& sys,
                                     const Barrier& bar,
                                     const ClassKappaInfE& alpha,
                                     std::function<double(const StateVec&)> delta,
                                     const Box& region, int samples,
                                     std::uint64_t seed) {
  MrcbfParams mr;
  mr.delta = std::move(delta);
  mr.lip_lfh = estimate_lipschitz(
      [&](const StateVec& x) {
        return Eigen::VectorXd::Constant(1, lie_derivatives(sys, bar, x).lfh);
      },
      region, samples, seed);
  mr.lip_lgh = estimate_lipschitz(
      [&](const StateVec& x) { return lie_derivatives(sys, bar, x).lgh; }, region,
      samples, seed + 1);
  mr.lip_alpha_h = estimate_lipschitz(
      [&](const StateVec& x) { return Eigen::VectorXd::Constant(1, alpha(bar.h(x))); },
      region, samples, seed + 2);
  return mr;
}

}  // namespace rcbf
