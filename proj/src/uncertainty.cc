#include "rcbf/uncertainty.h"

#include <sstream>

#include "rcbf/errors.h"

namespace rcbf {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

constexpr std::uint64_t kEstimateStream = 0x657374;
constexpr std::uint64_t kDisturbanceStream = 0x647374;

}  // namespace

std::mt19937_64 counter_rng(std::uint64_t seed, std::uint64_t step,
                            std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

Eigen::VectorXd bounded_sample(std::mt19937_64& rng, int dim, double radius) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::VectorXd v(dim);
  double norm = 0.0;
  do {
    for (int i = 0; i < dim; ++i) v[i] = normal(rng);
    norm = v.norm();
  } while (norm == 0.0);
  const double w = unit(rng);
  // Scale first and rescale if rounding pushed the norm past the radius.
  Eigen::VectorXd out = (radius * w / norm) * v;
  if (out.norm() > radius) out *= radius / out.norm();
  return out;
}

StateVec corrupt_estimate(const EstimateModel& model, const StateVec& x,
                          const Barrier& bar, std::uint64_t step) {
  return std::visit(
      Overloaded{
          [&](const ExactEstimate&) -> StateVec { return x; },
          [&](const ConstantOffset& m) -> StateVec {
            if (m.offset.size() != x.size()) {
              throw ConfigurationError("estimate offset has wrong dimension");
            }
            return x + m.offset;
          },
          [&](const InwardGradient& m) -> StateVec {
            const StateVec grad = bar.grad_h(x);
            const double norm = grad.norm();
            if (norm == 0.0) return x + m.delta * StateVec::Unit(x.size(), 0);
            return x + (m.delta / norm) * grad;
          },
          [&](const RandomBoundedEstimate& m) -> StateVec {
            auto rng = counter_rng(m.seed, step, kEstimateStream);
            return x + bounded_sample(rng, static_cast<int>(x.size()), m.delta);
          },
      },
      model);
}

double estimate_bound(const EstimateModel& model) {
  return std::visit(Overloaded{
                        [](const ExactEstimate&) { return 0.0; },
                        [](const ConstantOffset& m) { return m.offset.norm(); },
                        [](const InwardGradient& m) { return m.delta; },
                        [](const RandomBoundedEstimate& m) { return m.delta; },
                    },
                    model);
}

std::string describe(const EstimateModel& model) {
  std::ostringstream os;
  std::visit(Overloaded{
                 [&](const ExactEstimate&) { os << "exact"; },
                 [&](const ConstantOffset& m) {
                   os << "offset(e=[" << m.offset.transpose() << "])";
                 },
                 [&](const InwardGradient& m) { os << "inward(delta=" << m.delta << ")"; },
                 [&](const RandomBoundedEstimate& m) {
                   os << "random(delta=" << m.delta << ",seed=" << m.seed << ")";
                 },
             },
             model);
  return os.str();
}

InputVec sample_disturbance(const DisturbanceModel& model,
                            const ControlAffineSystem& sys, const Barrier& bar,
                            const StateVec& x, std::uint64_t step) {
  return std::visit(
      Overloaded{
          [&](const NoDisturbance&) -> InputVec { return InputVec::Zero(sys.m); },
          [&](const ConstantDisturbance& m) -> InputVec {
            if (m.d.size() != sys.m) {
              throw ConfigurationError("constant disturbance has wrong dimension");
            }
            return m.d;
          },
          [&](const WorstCaseAntiGradient& m) -> InputVec {
            const InputVec lgh = lie_derivatives(sys, bar, x).lgh;
            const double norm = lgh.norm();
            if (norm == 0.0) return InputVec::Zero(sys.m);
            return (-m.dbar / norm) * lgh;
          },
          [&](const RandomBoundedDisturbance& m) -> InputVec {
            auto rng = counter_rng(m.seed, step, kDisturbanceStream);
            return bounded_sample(rng, sys.m, m.dbar);
          },
      },
      model);
}

double disturbance_bound(const DisturbanceModel& model) {
  return std::visit(Overloaded{
                        [](const NoDisturbance&) { return 0.0; },
                        [](const ConstantDisturbance& m) { return m.d.norm(); },
                        [](const WorstCaseAntiGradient& m) { return m.dbar; },
                        [](const RandomBoundedDisturbance& m) { return m.dbar; },
                    },
                    model);
}

std::string describe(const DisturbanceModel& model) {
  std::ostringstream os;
  std::visit(Overloaded{
                 [&](const NoDisturbance&) { os << "none"; },
                 [&](const ConstantDisturbance& m) {
                   os << "constant(d=[" << m.d.transpose() << "])";
                 },
                 [&](const WorstCaseAntiGradient& m) {
                   os << "worst_case(dbar=" << m.dbar << ")";
                 },
                 [&](const RandomBoundedDisturbance& m) {
                   os << "random(dbar=" << m.dbar << ",seed=" << m.seed << ")";
                 },
             },
             model);
  return os.str();
}

}  // namespace rcbf
