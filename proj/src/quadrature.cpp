#include "lbp/quadrature.h"

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <numbers>

#include "lbp/error.h"

namespace lbp {

namespace {
constexpr double kRuleHalfWidth = 6.0;
}

auto tanh_sinh_rule(std::size_t node_count) -> UnitRule {
  if (node_count < 3 || node_count % 2 == 0) {
    throw InvalidArgument("tanh_sinh_rule: node count must be odd and at least 3");
  }
  auto half = static_cast<long>(node_count / 2);
  auto h = kRuleHalfWidth / static_cast<double>(half);
  auto rule = UnitRule{};
  rule.nodes.reserve(node_count);
  rule.complements.reserve(node_count);
  rule.weights.reserve(node_count);
  for (auto j = -half; j <= half; ++j) {
    auto t = static_cast<double>(j) * h;
    auto u = 0.5 * std::numbers::pi * std::sinh(t);
    auto e = std::exp(-2.0 * std::abs(u));
    auto small = e / (1.0 + e);
    auto large = 1.0 / (1.0 + e);
    rule.nodes.push_back(u >= 0.0 ? large : small);
    rule.complements.push_back(u >= 0.0 ? small : large);
    auto jacobian = 0.5 * std::numbers::pi * std::cosh(t) * 2.0 * e / ((1.0 + e) * (1.0 + e));
    rule.weights.push_back(h * jacobian);
  }
  return rule;
}

auto integrate(const std::function<double(double)>& f, double a, double b, double tol) -> double {
  thread_local auto integrator = boost::math::quadrature::tanh_sinh<double>{};
  auto error = 0.0;
  auto l1 = 0.0;
  auto wrapped = [&f](double x) { return f(x); };
  auto value = integrator.integrate(wrapped, a, b, tol, &error, &l1);
  if (!std::isfinite(value)) throw NumericalFailure("integrate: non-finite result");
  return value;
}

}  // namespace lbp
