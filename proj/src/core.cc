#include "rcbf/core.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "rcbf/errors.h"

namespace rcbf {
namespace {

constexpr int kConjugateGridPoints = 4001;
constexpr int kEpsilonGridPoints = 2401;
// Smallest y probed by numeric_epsilon, independent of the search bound.
constexpr double kEpsilonMinY = 1e-12;
// Estimates of inf rho(y)/y at or below this value are treated as zero.
constexpr double kEpsilonFloor = 1e-9;

// Minimizes a unimodal function on [lo, hi]; returns the minimizer.
template <typename F>
double golden_section(F&& fn, double lo, double hi, int iterations = 200) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = fn(c);
  double fd = fn(d);
  for (int i = 0; i < iterations && (b - a) > 1e-15 * std::max(1.0, std::abs(b)); ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = fn(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = fn(d);
    }
  }
  return fc < fd ? c : d;
}

std::string short_text(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

StateVec ControlAffineSystem::drift(const StateVec& x) const {
  if (x.size() != n) {
    throw ConfigurationError("state has length " + std::to_string(x.size()) +
                             " but system '" + label + "' has n = " +
                             std::to_string(n));
  }
  StateVec fx = f(x);
  if (fx.size() != n) {
    throw ConfigurationError("f(x) of system '" + label + "' has length " +
                             std::to_string(fx.size()));
  }
  return fx;
}

InputMatrix ControlAffineSystem::input_matrix(const StateVec& x) const {
  if (x.size() != n) {
    throw ConfigurationError("state has length " + std::to_string(x.size()) +
                             " but system '" + label + "' has n = " +
                             std::to_string(n));
  }
  InputMatrix gx = g(x);
  if (gx.rows() != n || gx.cols() != m) {
    throw ConfigurationError("g(x) of system '" + label + "' has shape " +
                             std::to_string(gx.rows()) + "x" +
                             std::to_string(gx.cols()));
  }
  return gx;
}

StateVec ControlAffineSystem::vector_field(const StateVec& x,
                                           const InputVec& u) const {
  if (u.size() != m) {
    throw ConfigurationError("input has length " + std::to_string(u.size()) +
                             " but system '" + label + "' has m = " +
                             std::to_string(m));
  }
  return drift(x) + input_matrix(x) * u;
}

// ---------------------------------------------------------------------------

ClassKappaInfE ClassKappaInfE::linear(double c) {
  if (!(c > 0.0) || !std::isfinite(c)) {
    throw ConfigurationError("linear alpha needs c > 0, got " + short_text(c));
  }
  ClassKappaInfE out;
  out.kind_ = Kind::kLinear;
  out.c_ = c;
  return out;
}

ClassKappaInfE ClassKappaInfE::cubic(double c) {
  if (!(c > 0.0) || !std::isfinite(c)) {
    throw ConfigurationError("cubic alpha needs c > 0, got " + short_text(c));
  }
  ClassKappaInfE out;
  out.kind_ = Kind::kCubic;
  out.c_ = c;
  return out;
}

ClassKappaInfE ClassKappaInfE::custom(std::function<double(double)> alpha,
                                      std::function<double(double)> alpha_inv,
                                      double bracket) {
  if (!alpha) throw ConfigurationError("custom alpha requires a function");
  if (!(bracket > 0.0)) throw ConfigurationError("custom alpha bracket must be positive");
  ClassKappaInfE out;
  out.kind_ = Kind::kCustom;
  out.alpha_ = std::move(alpha);
  out.alpha_inv_ = std::move(alpha_inv);
  out.bracket_ = bracket;
  return out;
}

double ClassKappaInfE::operator()(double r) const {
  switch (kind_) {
    case Kind::kLinear:
      return c_ * r;
    case Kind::kCubic:
      return c_ * r * r * r;
    case Kind::kCustom:
      return alpha_(r);
  }
  return 0.0;
}

double ClassKappaInfE::inverse(double s) const {
  switch (kind_) {
    case Kind::kLinear:
      return s / c_;
    case Kind::kCubic:
      return std::cbrt(s / c_);
    case Kind::kCustom:
      break;
  }
  if (alpha_inv_) return alpha_inv_(s);

  double lo = -bracket_;
  double hi = bracket_;
  const double f_lo = alpha_(lo) - s;
  const double f_hi = alpha_(hi) - s;
  if (f_lo > 0.0 || f_hi < 0.0) {
    throw InversionError("alpha^-1(" + short_text(s) +
                         ") is not bracketed by [" + short_text(lo) + ", " +
                         short_text(hi) + "]");
  }
  for (int i = 0; i < 400; ++i) {
    const double mid = std::midpoint(lo, hi);
    if (mid == lo || mid == hi) break;
    if (alpha_(mid) < s) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::midpoint(lo, hi);
}

std::string ClassKappaInfE::describe() const {
  switch (kind_) {
    case Kind::kLinear:
      return "linear(c=" + short_text(c_) + ")";
    case Kind::kCubic:
      return "cubic(c=" + short_text(c_) + ")";
    case Kind::kCustom:
      return "custom";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------

RobustnessFunction RobustnessFunction::polynomial(double gamma1, double gamma2) {
  if (!(gamma1 > 0.0) || !(gamma2 > 0.0) || !std::isfinite(gamma1) ||
      !std::isfinite(gamma2)) {
    throw ConfigurationError("polynomial robustness function needs gamma1, gamma2 > 0");
  }
  return RobustnessFunction(Polynomial{gamma1, gamma2});
}

RobustnessFunction RobustnessFunction::generic(std::function<double(double)> rho,
                                               double search_bound,
                                               std::string label) {
  if (!rho) throw ConfigurationError("generic robustness function requires rho");
  if (!(search_bound > 0.0) || !std::isfinite(search_bound)) {
    throw ConfigurationError("generic robustness function needs a positive search bound");
  }
  return RobustnessFunction(Generic{std::move(rho), search_bound, std::move(label)});
}

double RobustnessFunction::operator()(double y) const {
  if (!(y >= 0.0)) {
    throw DomainError("rho is defined on y >= 0, got " + short_text(y));
  }
  if (const auto* p = std::get_if<Polynomial>(&kind_)) {
    return polynomial_term(p->gamma1, p->gamma2, y);
  }
  return std::get<Generic>(kind_).rho(y);
}

double RobustnessFunction::epsilon() const {
  if (const auto* p = std::get_if<Polynomial>(&kind_)) return p->gamma1;
  const auto& g = std::get<Generic>(kind_);
  const double eps = numeric_epsilon(g.rho, g.search_bound);
  if (!(eps > kEpsilonFloor)) {
    throw InvalidRobustnessFunction("inf rho(y)/y of '" + g.label +
                                    "' is not positive (estimate " +
                                    short_text(eps) + ")");
  }
  return eps;
}

double RobustnessFunction::zeta(double d) const {
  if (!(d >= 0.0)) {
    throw DomainError("zeta is defined on d >= 0, got " + short_text(d));
  }
  if (const auto* p = std::get_if<Polynomial>(&kind_)) {
    const double excess = std::max(0.0, d - p->gamma1);
    return excess * excess / (4.0 * p->gamma2);
  }
  const auto& g = std::get<Generic>(kind_);
  return numeric_zeta(g.rho, d, g.search_bound);
}

bool RobustnessFunction::is_polynomial() const {
  return std::holds_alternative<Polynomial>(kind_);
}

double RobustnessFunction::gamma1() const {
  if (const auto* p = std::get_if<Polynomial>(&kind_)) return p->gamma1;
  return std::numeric_limits<double>::quiet_NaN();
}

double RobustnessFunction::gamma2() const {
  if (const auto* p = std::get_if<Polynomial>(&kind_)) return p->gamma2;
  return std::numeric_limits<double>::quiet_NaN();
}

double RobustnessFunction::search_bound() const {
  if (const auto* g = std::get_if<Generic>(&kind_)) return g->search_bound;
  return std::numeric_limits<double>::infinity();
}

std::string RobustnessFunction::describe() const {
  if (const auto* p = std::get_if<Polynomial>(&kind_)) {
    return "polynomial(gamma1=" + short_text(p->gamma1) +
           ",gamma2=" + short_text(p->gamma2) + ")";
  }
  const auto& g = std::get<Generic>(kind_);
  return g.label + "(search_bound=" + short_text(g.search_bound) + ")";
}

double numeric_zeta(const std::function<double(double)>& rho, double d,
                    double search_bound) {
  auto objective = [&](double y) { return rho(y) - y * d; };
  const int n = kConjugateGridPoints;
  int best_i = 0;
  double best = objective(0.0);
  for (int i = 1; i < n; ++i) {
    const double y = search_bound * static_cast<double>(i) / (n - 1);
    const double v = objective(y);
    if (v < best) {
      best = v;
      best_i = i;
    }
  }
  if (best_i == n - 1) {
    throw UnboundedConjugate("rho(y) - " + short_text(d) +
                             " y is still decreasing at the search bound " +
                             short_text(search_bound));
  }
  const double lo = search_bound * static_cast<double>(std::max(0, best_i - 1)) / (n - 1);
  const double hi = search_bound * static_cast<double>(best_i + 1) / (n - 1);
  const double y_star = golden_section(objective, lo, hi);
  best = std::min({best, objective(y_star), 0.0});
  return std::max(0.0, -best);
}

double numeric_epsilon(const std::function<double(double)>& rho,
                       double search_bound) {
  const int n = kEpsilonGridPoints;
  const double decades = std::max(1.0, std::log10(search_bound / kEpsilonMinY));
  auto y_at = [&](double s) { return search_bound * std::pow(10.0, -decades * (1.0 - s)); };
  auto ratio = [&](double s) {
    const double y = y_at(s);
    return rho(y) / y;
  };
  int best_i = 0;
  double best = ratio(0.0);
  for (int i = 1; i < n; ++i) {
    const double v = ratio(static_cast<double>(i) / (n - 1));
    if (v < best) {
      best = v;
      best_i = i;
    }
  }
  const double lo = static_cast<double>(std::max(0, best_i - 1)) / (n - 1);
  const double hi = static_cast<double>(std::min(n - 1, best_i + 1)) / (n - 1);
  return std::min(best, ratio(golden_section(ratio, lo, hi)));
}

// ---------------------------------------------------------------------------

LieDerivatives lie_derivatives(const ControlAffineSystem& sys,
                               const Barrier& bar, const StateVec& x) {
  const StateVec fx = sys.drift(x);
  const InputMatrix gx = sys.input_matrix(x);
  const StateVec grad = bar.grad_h(x);
  if (grad.size() != sys.n) {
    throw ConfigurationError("barrier gradient has length " +
                             std::to_string(grad.size()) + ", expected " +
                             std::to_string(sys.n));
  }
  LieDerivatives out;
  out.lfh = grad.dot(fx);
  out.lgh = gx.transpose() * grad;
  return out;
}

BarrierReport validate_barrier(const Barrier& bar,
                               const std::vector<StateVec>& grid,
                               double fd_step) {
  BarrierReport report;
  report.points = grid.size();
  for (const StateVec& x : grid) {
    const StateVec grad = bar.grad_h(x);
    StateVec fd(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double step = fd_step * std::max(1.0, std::abs(x[i]));
      StateVec xp = x;
      StateVec xm = x;
      xp[i] += step;
      xm[i] -= step;
      fd[i] = (bar.h(xp) - bar.h(xm)) / (xp[i] - xm[i]);
    }
    const double scale = std::max(1.0, fd.lpNorm<Eigen::Infinity>());
    const double err = (grad - fd).lpNorm<Eigen::Infinity>() / scale;
    report.max_relative_gradient_error = std::max(report.max_relative_gradient_error, err);
    if (bar.h(x) <= 0.0 && grad.norm() <= 1e-12) {
      report.regularity_violations.push_back(x);
    }
  }
  return report;
}

// ---------------------------------------------------------------------------

void Box::require_volume() const {
  if (lo.size() == 0 || lo.size() != hi.size()) {
    throw ConfigurationError("box bounds must be nonempty and of equal length");
  }
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    if (!(hi[i] > lo[i]) || !std::isfinite(lo[i]) || !std::isfinite(hi[i])) {
      throw ConfigurationError("box has zero volume along axis " + std::to_string(i));
    }
  }
}

std::vector<StateVec> tensor_grid(const Box& box, const std::vector<int>& per_dim) {
  const int n = box.dim();
  if (static_cast<int>(per_dim.size()) != n) {
    throw ConfigurationError("grid resolution has wrong dimension");
  }
  std::size_t total = 1;
  for (int k : per_dim) {
    if (k < 1) throw ConfigurationError("grid needs at least one point per axis");
    total *= static_cast<std::size_t>(k);
  }
  std::vector<StateVec> out;
  out.reserve(total);
  std::vector<int> idx(n, 0);
  for (std::size_t count = 0; count < total; ++count) {
    StateVec x(n);
    for (int i = 0; i < n; ++i) {
      x[i] = per_dim[i] == 1
                 ? box.lo[i]
                 : box.lo[i] + (box.hi[i] - box.lo[i]) * idx[i] / (per_dim[i] - 1);
    }
    out.push_back(std::move(x));
    for (int i = n - 1; i >= 0; --i) {
      if (++idx[i] < per_dim[i]) break;
      idx[i] = 0;
    }
  }
  return out;
}

std::vector<StateVec> tensor_grid(const Box& box, double step) {
  if (!(step > 0.0)) throw ConfigurationError("grid step must be positive");
  std::vector<int> per_dim;
  for (int i = 0; i < box.dim(); ++i) {
    per_dim.push_back(
        static_cast<int>(std::llround((box.hi[i] - box.lo[i]) / step)) + 1);
  }
  return tensor_grid(box, per_dim);
}

}  // namespace rcbf
