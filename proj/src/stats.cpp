#include "lbp/stats.h"

#include <algorithm>
#include <boost/math/statistics/univariate_statistics.hpp>
#include <cmath>

#include "lbp/error.h"

namespace lbp {

auto mean_se(std::span<const double> xs) -> MeanSe {
  if (xs.empty()) return {};
  auto [mean, variance] = boost::math::statistics::mean_and_sample_variance(xs.begin(), xs.end());
  auto se = xs.size() > 1 ? std::sqrt(variance / static_cast<double>(xs.size())) : 0.0;
  return {mean, se, xs.size()};
}

auto kolmogorov_tail(double lambda) -> double {
  if (lambda < 0.2) return 1.0;
  auto sum = 0.0;
  for (int j = 1; j <= 100; ++j) {
    auto term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += (j % 2 == 1 ? term : -term);
    if (term < 1e-18) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

namespace {

auto ks_p_value(double d, double n_eff) -> double {
  auto root = std::sqrt(n_eff);
  return kolmogorov_tail((root + 0.12 + 0.11 / root) * d);
}

}  // namespace

auto ks_two_sample(std::vector<double> a, std::vector<double> b) -> KsResult {
  if (a.empty() || b.empty()) throw InvalidArgument("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  auto na = static_cast<double>(a.size());
  auto nb = static_cast<double>(b.size());
  auto i = std::size_t{0};
  auto j = std::size_t{0};
  auto d = 0.0;
  while (i < a.size() && j < b.size()) {
    auto x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return {d, ks_p_value(d, na * nb / (na + nb))};
}

auto ks_one_sample(std::vector<double> a, const std::function<double(double)>& cdf) -> KsResult {
  if (a.empty()) throw InvalidArgument("ks_one_sample: empty sample");
  std::sort(a.begin(), a.end());
  auto n = static_cast<double>(a.size());
  auto d = 0.0;
  for (auto i = std::size_t{0}; i < a.size(); ++i) {
    auto f = cdf(a[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return {d, ks_p_value(d, n)};
}

auto wasserstein1(std::vector<double> a, std::vector<double> b) -> double {
  if (a.empty() || b.empty()) throw InvalidArgument("wasserstein1: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  auto na = static_cast<double>(a.size());
  auto nb = static_cast<double>(b.size());
  // Integrate |F_a - F_b| over the merged breakpoints.
  auto i = std::size_t{0};
  auto j = std::size_t{0};
  auto x = std::min(a[0], b[0]);
  auto total = 0.0;
  while (i < a.size() || j < b.size()) {
    auto next = std::min(i < a.size() ? a[i] : b[j], j < b.size() ? b[j] : a[i]);
    total += std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb) * (next - x);
    x = next;
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
  }
  return total;
}

auto total_variation(std::span<const double> p, std::span<const double> q) -> double {
  auto n = std::max(p.size(), q.size());
  auto sum = 0.0;
  for (auto k = std::size_t{0}; k < n; ++k) {
    auto pk = k < p.size() ? p[k] : 0.0;
    auto qk = k < q.size() ? q[k] : 0.0;
    sum += std::abs(pk - qk);
  }
  return 0.5 * sum;
}

auto pmf_skewness(std::span<const double> pmf, int offset) -> double {
  auto m0 = 0.0, m1 = 0.0;
  for (auto k = std::size_t{0}; k < pmf.size(); ++k) {
    m0 += pmf[k];
    m1 += pmf[k] * (static_cast<double>(k) + offset);
  }
  auto mean = m1 / m0;
  auto m2 = 0.0, m3 = 0.0;
  for (auto k = std::size_t{0}; k < pmf.size(); ++k) {
    auto dev = static_cast<double>(k) + offset - mean;
    m2 += pmf[k] * dev * dev;
    m3 += pmf[k] * dev * dev * dev;
  }
  m2 /= m0;
  m3 /= m0;
  return m3 / std::pow(m2, 1.5);
}

}  // namespace lbp
