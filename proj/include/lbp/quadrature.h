#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace lbp {

// Fixed tanh-sinh rule on (0, 1). complements[i] = 1 - nodes[i], computed
// without cancellation so integrands singular at 1 stay accurate.
struct UnitRule {
  std::vector<double> nodes;
  std::vector<double> complements;
  std::vector<double> weights;
};

// node_count odd, >= 3. Abscissae span t in [-6, 6], where the smallest
// complement is about 1e-275.
auto tanh_sinh_rule(std::size_t node_count) -> UnitRule;

// Adaptive tanh-sinh on a finite interval with relative tolerance `tol`.
auto integrate(const std::function<double(double)>& f, double a, double b, double tol = 1e-12)
    -> double;

}  // namespace lbp
