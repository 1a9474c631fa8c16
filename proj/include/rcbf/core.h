#pragma once

#include <functional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace rcbf {

using StateVec = Eigen::VectorXd;
using InputVec = Eigen::VectorXd;
/// n x m input matrix g(x).
using InputMatrix = Eigen::MatrixXd;

/// Control-affine dynamics xdot = f(x) + g(x) u with u unconstrained in R^m.
struct ControlAffineSystem {
  int n = 0;
  int m = 0;
  std::function<StateVec(const StateVec&)> f;
  std::function<InputMatrix(const StateVec&)> g;
  std::string label;

  /// f(x), checking that x and the result have length n.
  StateVec drift(const StateVec& x) const;
  /// g(x), checking the n x m shape.
  InputMatrix input_matrix(const StateVec& x) const;
  /// f(x) + g(x) u.
  StateVec vector_field(const StateVec& x, const InputVec& u) const;
};

/// Barrier h with its gradient. The safe set is {x : h(x) >= 0}.
struct Barrier {
  std::function<double(const StateVec&)> h;
  std::function<StateVec(const StateVec&)> grad_h;
};

/// Extended class-K-infinity function alpha together with its inverse.
class ClassKappaInfE {
 public:
  enum class Kind { kLinear, kCubic, kCustom };

  /// alpha(r) = c r.
  static ClassKappaInfE linear(double c = 1.0);
  /// alpha(r) = c r^3.
  static ClassKappaInfE cubic(double c = 1.0);
  /// User supplied alpha. Without an explicit inverse, alpha^-1 is computed by
  /// bisection on [-bracket, bracket].
  static ClassKappaInfE custom(std::function<double(double)> alpha,
                               std::function<double(double)> alpha_inv = {},
                               double bracket = 1e6);

  double operator()(double r) const;
  double inverse(double s) const;

  Kind kind() const { return kind_; }
  double coefficient() const { return c_; }
  std::string describe() const;

 private:
  ClassKappaInfE() = default;

  Kind kind_ = Kind::kLinear;
  double c_ = 1.0;
  double bracket_ = 1e6;
  std::function<double(double)> alpha_;
  std::function<double(double)> alpha_inv_;
};

/// Robustness function rho: R>=0 -> R>=0 with rho(0) = 0, a positive linear
/// lower bound slope epsilon = inf rho(y)/y, and a finite conjugate
/// zeta(d) = -inf_y (rho(y) - y d).
class RobustnessFunction {
 public:
  /// rho(y) = gamma1 y + gamma2 y^2, both coefficients strictly positive.
  static RobustnessFunction polynomial(double gamma1, double gamma2);
  /// Arbitrary rho. epsilon and zeta are computed numerically over
  /// (0, search_bound].
  static RobustnessFunction generic(std::function<double(double)> rho,
                                    double search_bound,
                                    std::string label = "generic");

  /// rho(y). Throws DomainError for y < 0.
  double operator()(double y) const;
  /// inf_{y>0} rho(y)/y. Throws InvalidRobustnessFunction when the estimate
  /// is not positive.
  double epsilon() const;
  /// -inf_{y>=0} (rho(y) - y d), always >= 0. Throws DomainError for d < 0.
  double zeta(double d) const;

  bool is_polynomial() const;
  double gamma1() const;
  double gamma2() const;
  double search_bound() const;
  std::string describe() const;

 private:
  struct Polynomial {
    double gamma1;
    double gamma2;
  };
  struct Generic {
    std::function<double(double)> rho;
    double search_bound;
    std::string label;
  };

  explicit RobustnessFunction(std::variant<Polynomial, Generic> kind)
      : kind_(std::move(kind)) {}

  std::variant<Polynomial, Generic> kind_;
};

/// gamma1 y + gamma2 y^2, evaluated in a fixed order so that every filter
/// using the polynomial term produces identical coefficients.
inline double polynomial_term(double gamma1, double gamma2, double y) {
  return gamma1 * y + gamma2 * y * y;
}

/// -min_{0<=y<=search_bound} (rho(y) - y d) by a coarse grid followed by
/// golden-section refinement. Throws UnboundedConjugate when the minimum sits
/// on the search bound.
double numeric_zeta(const std::function<double(double)>& rho, double d,
                    double search_bound);

/// inf_{0<y<=search_bound} rho(y)/y over a log-spaced grid with local
/// refinement. Returns the raw estimate (may be <= 0).
double numeric_epsilon(const std::function<double(double)>& rho,
                       double search_bound);

struct LieDerivatives {
  double lfh = 0.0;
  /// grad_h(x)^T g(x) as an m-vector.
  InputVec lgh;
};

/// L_f h(x) and L_g h(x). Throws ConfigurationError on dimension mismatch.
LieDerivatives lie_derivatives(const ControlAffineSystem& sys,
                               const Barrier& bar, const StateVec& x);

struct BarrierReport {
  /// max over the grid of |grad_h - fd|_inf / max(1, |fd|_inf).
  double max_relative_gradient_error = 0.0;
  /// Grid points with h(x) <= 0 and a vanishing gradient.
  std::vector<StateVec> regularity_violations;
  std::size_t points = 0;
};

/// Compares grad_h against central differences (step fd_step * max(1, |x_i|))
/// and spot checks that every sampled point with h <= 0 is regular.
BarrierReport validate_barrier(const Barrier& bar,
                               const std::vector<StateVec>& grid,
                               double fd_step = 1e-5);

/// Axis-aligned box [lo, hi].
struct Box {
  StateVec lo;
  StateVec hi;

  int dim() const { return static_cast<int>(lo.size()); }
  double diameter() const { return (hi - lo).norm(); }
  /// Throws ConfigurationError unless lo < hi componentwise.
  void require_volume() const;
};

/// Tensor grid over the box with `per_dim` evenly spaced points along each
/// axis (endpoints included).
std::vector<StateVec> tensor_grid(const Box& box, const std::vector<int>& per_dim);
/// Tensor grid with (approximately) the given spacing along every axis.
std::vector<StateVec> tensor_grid(const Box& box, double step);

}  // namespace rcbf
