#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lbp/dual.h"
#include "lbp/model.h"
#include "lbp/stats.h"

namespace lbp {

// Monte Carlo estimates of E[1 - (1 - p_t)^k], k = 1..kmax, for the
// unconditioned diffusion started at p_0 = 1.
//
// Particles run in independent batches. Inside a batch, particles absorbed at 0
// are replaced by copies of surviving ones after every step and the running
// product of surviving fractions estimates P(p_t > 0); the estimate is exact in
// expectation. Standard errors come from the spread over batches.
struct SurvivalMoments {
  double t = 0.0;
  std::vector<double> values;  // values[k - 1]
  std::vector<double> se;
  double survival = 1.0;  // P(p_t > 0)
  double survival_se = 0.0;
  // batch_values[b][k - 1]: the estimate from batch b alone.
  std::vector<std::vector<double>> batch_values;
  // Some standard error exceeds 1% of its estimate.
  bool flagged = false;
};

struct MomentOptions {
  std::size_t paths = 20000;
  std::size_t batches = 10;
  double dt = 0.0;  // 0 selects default_sde_dt
};

auto survival_moments(const WfParams& wf, double t, int kmax, const MomentOptions& options,
                      std::uint64_t seed) -> SurvivalMoments;

// Same estimator read out at several times along one set of paths. Times are
// rounded to the step grid.
auto survival_moments_at(const WfParams& wf, std::span<const double> times, int kmax,
                         const MomentOptions& options, std::uint64_t seed)
    -> std::vector<SurvivalMoments>;

// Second route: the type-a count of the n-individual Moran model, a birth-death
// chain on [0, n] started at n, with P_t = X_t / n in place of p_t.
auto survival_moments_moran(const WfParams& wf, std::int32_t n, double t, int kmax,
                            std::size_t paths, std::size_t batches, std::uint64_t seed)
    -> SurvivalMoments;

// Ratio values[i-1] / values[j-1] with a delta-method standard error.
auto moment_ratio(const SurvivalMoments& m, int i, int j) -> MeanSe;

enum class RateTableKind { fixed_horizon, q_process };

// Conditioned rates up(k) for k in [1, K-1] and down(k) for k in [2, K].
// Vectors are indexed by k and sized K + 1; unused slots hold 0.
struct RateTable {
  ModelParams params;
  RateTableKind kind = RateTableKind::q_process;
  int cap = 0;
  double horizon = 0.0;  // T for fixed-horizon tables
  double time = 0.0;     // t for fixed-horizon tables
  std::vector<double> up;
  std::vector<double> down;
  std::vector<double> up_se;
  std::vector<double> down_se;
  std::map<std::string, double> diagnostics;
  bool flagged = false;

  // up(k) with up(K) = 0: the cap is reflecting.
  auto up_rate(std::int64_t k) const -> double;
  auto down_rate(std::int64_t k) const -> double;
};

auto rate_table_T(const ModelParams& p, double horizon, double t, int cap,
                  const MomentOptions& options, std::uint64_t seed) -> RateTable;
// Fixed-horizon table built from precomputed moments at remaining time T - t.
auto rate_table_from_moments(const ModelParams& p, double horizon, double t, int cap,
                             const SurvivalMoments& moments) -> RateTable;

auto rate_table_Q(const ModelParams& p, int cap, std::size_t grid_size = 1025) -> RateTable;

// r*_{k+1,k} for k = 1..kmax from a density grid; element k - 1 holds k.
auto rstar_ratios(const DensityGrid& grid, int kmax) -> std::vector<double>;

// Throws NumericalFailure if 1 <= r <= (k+1)/k fails beyond slack for any k.
void check_sandwich(std::span<const double> ratios, double slack = 1e-9);

struct StationaryPmf {
  std::vector<double> probs;  // probs[k - 1]
  double tail_bound = 0.0;
  double balance_residual = 0.0;
};

auto q_stationary(const RateTable& table) -> StationaryPmf;

// Long-run occupation fractions of the chain driven by table rates, from z0,
// over `events` jumps. Element k - 1 holds state k.
auto q_process_occupation(const RateTable& table, std::int64_t z0, std::size_t events, Rng& rng)
    -> std::vector<double>;

enum class AlphaConvention {
  two_growth,     // 2 (s - mu) / nu
  scaled_growth,  // s (s - mu) / nu
  linearised,     // (s - mu) / nu, from the linearised diffusion's variance
};

auto alpha_value(const WfParams& wf, AlphaConvention convention) -> double;

// Beta(2 alpha pbar, 2 alpha (1 - pbar)) with pbar = 1 - mu / s.
struct BetaApproximation {
  double shape_a = 0.0;
  double shape_b = 0.0;
  auto pdf(double x) const -> double;
  auto cdf(double x) const -> double;
};

auto beta_approximation(const WfParams& wf, AlphaConvention convention) -> BetaApproximation;

// r*_{k+1,k} under the beta approximation. Requires s > mu and nu > 0.
auto r_star_weak(const WfParams& wf, int k, AlphaConvention convention) -> double;
// The nu -> 0 limit (1 - rho^(k+1)) / (1 - rho^k), rho = mu / s.
auto r_star_weak_limit(const WfParams& wf, int k) -> double;

struct ScalingRow {
  int cap = 0;
  double wasserstein = 0.0;
  MeanSe branching_mean;
  MeanSe diffusion_mean;
};

struct ScalingOptions {
  double x0 = 1.0;
  std::size_t paths = 4000;
  double dt = 1e-3;
};

// For each K: Z/K at time K * horizon for b' = 1/2, c' = c / K^2,
// d' = 1/2 - b / K started from round(x0 K), against Euler paths of
// dX = (b X - c X^2) dt + sqrt(X) dW at time horizon.
auto scaling_check(double b, double c, std::span<const int> caps, double horizon,
                   const ScalingOptions& options, std::uint64_t seed) -> std::vector<ScalingRow>;

void write_rate_table_json(std::ostream& out, const RateTable& table);
void write_stationary_csv(std::ostream& out, const StationaryPmf& pmf);

}  // namespace lbp
