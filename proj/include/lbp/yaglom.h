#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lbp/model.h"

namespace lbp {

// Quasi-stationary law pi on {1..K} with decay rate a = d pi(1), solving
//   b_{k-1} pi(k-1) + d_{k+1} pi(k+1) = (b_k + d_k - a) pi(k),
// b_k = b k, d_k = d k + c k (k-1).
struct YaglomSolution {
  ModelParams params;
  double a = 0.0;
  int cap = 0;
  std::vector<double> pmf;  // pmf[k - 1]
  double tail = 0.0;
  std::string method = "recursion";
  int iterations = 0;
  // Largest relative residual of the three-term relation over k <= K,
  // skipping rows that involve entries below the smallest normal double.
  double residual = 0.0;
};

struct YaglomOptions {
  int cap = 400;
  double tol = 1e-10;
  int max_iterations = 200;
  // Bracket for pi(1); default [0, min(1, (b + d) / d)].
  std::optional<std::pair<double, double>> bracket;
};

auto yaglom_recursion(const ModelParams& p, const YaglomOptions& options = {}) -> YaglomSolution;

// G(theta) = sum_k pi(k) theta^k.
auto yaglom_pgf(const YaglomSolution& sol, double theta) -> double;

struct FkEstimate {
  double theta = 0.0;
  double g = 0.0;
  double se = 0.0;
  std::size_t paths = 0;
  std::size_t censored = 0;
  // Censored fraction times exp(a * budget time): the weight censored paths could carry.
  double censored_weight_bound = 0.0;
};

struct FkOptions {
  std::size_t paths = 20000;
  double dt = 1e-3;
  std::size_t step_budget = 10'000'000;
};

// G(theta) = 1 - E_theta[exp(a T_0) 1{T_0 < T_1}] for
// dX = (d - b X)(1 - X) dt + sqrt(2 c X (1 - X)) dW, by Euler paths.
auto yaglom_feynman_kac(const ModelParams& p, double a, std::span<const double> thetas,
                        const FkOptions& options, std::uint64_t seed) -> std::vector<FkEstimate>;

enum class ConditioningMethod {
  rejection,  // independent runs, keep those alive at T
  staged,     // T split into stages; survivors resampled to full size after each,
              // and the last stage repeated until `replicates` particles survive
};

struct EmpiricalPmf {
  std::vector<double> probs;  // probs[k - 1]
  std::vector<double> se;
  std::vector<std::int64_t> samples;
  std::size_t accepted = 0;
  std::size_t attempts = 0;
  // Estimated P(Z_T > 0): accepted / attempts, or the product of stage survival fractions.
  double acceptance_rate = 0.0;
  ConditioningMethod method = ConditioningMethod::rejection;
  bool impractical = false;
};

struct EmpiricalOptions {
  ConditioningMethod method = ConditioningMethod::rejection;
  std::size_t stages = 50;
  // Rejection stops early once this many attempts show an acceptance rate below 1e-4.
  std::size_t pilot_attempts = 100000;
};

auto yaglom_empirical(const ModelParams& p, double horizon, std::int64_t z0, std::size_t replicates,
                      std::uint64_t seed, const EmpiricalOptions& options = {}) -> EmpiricalPmf;

void write_yaglom_json(std::ostream& out, const YaglomSolution& sol);
void write_empirical_csv(std::ostream& out, const EmpiricalPmf& pmf);
void write_fk_csv(std::ostream& out, std::span<const FkEstimate> estimates);

}  // namespace lbp
