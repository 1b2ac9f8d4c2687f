#pragma once

#include <functional>
#include <span>
#include <vector>

namespace lbp {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

// Sample mean with standard error sqrt(var/n); se is 0 when n < 2.
auto mean_se(std::span<const double> xs) -> MeanSe;

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// Asymptotic Kolmogorov tail probability P(K > lambda).
auto kolmogorov_tail(double lambda) -> double;

auto ks_two_sample(std::vector<double> a, std::vector<double> b) -> KsResult;
auto ks_one_sample(std::vector<double> a, const std::function<double(double)>& cdf) -> KsResult;

// Wasserstein-1 distance between the empirical laws of a and b.
auto wasserstein1(std::vector<double> a, std::vector<double> b) -> double;

// Total variation distance between pmfs on a common support; missing entries count as 0.
auto total_variation(std::span<const double> p, std::span<const double> q) -> double;

// Moment skewness of a pmf indexed from `offset`.
auto pmf_skewness(std::span<const double> pmf, int offset) -> double;

}  // namespace lbp
