#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "lbp/model.h"
#include "lbp/quadrature.h"
#include "lbp/rng.h"
#include "lbp/stats.h"

namespace lbp {

// Wright-Fisher diffusion dp = (-mu p + s p (1-p)) dt + sqrt(nu p (1-p)) dW.
struct WfParams {
  double s = 1.0;
  double nu = 1.0;
  double mu = 1.0;

  // Throws InvalidArgument unless all rates are finite and nonnegative.
  void validate() const;
};

// The lineage count of the dual graph is a logistic branching process with
// b = s, c = nu / 2, d = mu: resampling hits each ordered pair at rate nu / 2.
auto dual_wf_params(const ModelParams& p) -> WfParams;
auto dual_model_params(const WfParams& wf) -> ModelParams;

enum class MoranEventKind : std::uint8_t { mutation, resampling, selection };

// Resampling: i takes the type of j. Selection: i becomes type a if it is A
// and j is a. Mutation: i becomes A; j is unused.
struct MoranEvent {
  double time = 0.0;
  MoranEventKind kind = MoranEventKind::mutation;
  std::int32_t i = 0;
  std::int32_t j = 0;
};

struct MoranRealization {
  std::int32_t n = 0;
  double horizon = 0.0;
  std::vector<MoranEvent> events;
};

auto moran_simulate(std::int32_t n, const WfParams& wf, double t, Rng& rng) -> MoranRealization;

// Forward pass from the all-a state: true marks type a at the horizon.
auto moran_types(const MoranRealization& real) -> std::vector<bool>;
// Fraction of type a at the horizon.
auto moran_frequency(const MoranRealization& real) -> double;

struct AsgTrace {
  bool survived = true;
  // Backward times u (horizon minus Moran time) at which kappa changed, with
  // kappa after the change; entry 0 is (0, sample size).
  std::vector<double> times;
  std::vector<std::int32_t> kappa;
};

// Replays the event log backwards. A mutation on a traced lineage prunes it;
// a resampling i <- j moves a traced i onto j, merging if j is traced; a
// selection on traced i adds j.
auto asg_trace(const MoranRealization& real, std::span<const std::int32_t> sample) -> AsgTrace;

// Runs (Z, kappa) on a common probability space from kappa0, with Z the dual
// branching process and kappa the lineage count for population n. Returns the
// first time they differ, or nullopt if they agree up to t_max.
auto coupled_divergence_time(const WfParams& wf, std::int32_t n, std::int32_t kappa0, double t_max,
                             Rng& rng) -> std::optional<double>;

struct DualityRow {
  std::int32_t sample_size = 0;
  std::size_t realizations = 0;
  // Coupled realizations where asg_trace disagrees with the forward types.
  std::size_t violations = 0;
  // P(kappa_t > 0) from the coupled realizations.
  MeanSe lineage_survival;
  // E[1 - (1 - P_t)^k] from an independent set of forward runs.
  MeanSe frequency_moment;
};

// For k = 1..max_sample: replays each realization (seed, r, lane 0) backwards
// from a uniform k-subset (lane 1) and compares with the forward types, and
// estimates both sides of the duality from independent runs (lane 2).
auto duality_check(const WfParams& wf, std::int32_t n, double t, std::int32_t max_sample,
                   std::size_t realizations, std::uint64_t seed) -> std::vector<DualityRow>;

struct CouplingRow {
  std::int32_t n = 0;
  std::size_t runs = 0;
  // Fraction of runs whose (Z, kappa) pair separates before t_max.
  MeanSe diverged;
};

auto coupling_check(const WfParams& wf, std::span<const std::int32_t> sizes, std::int32_t kappa0,
                    double t_max, std::size_t runs, std::uint64_t seed) -> std::vector<CouplingRow>;

struct DiffusionPath {
  double dt = 0.0;
  std::vector<double> values;

  auto time(std::size_t i) const -> double { return dt * static_cast<double>(i); }
};

// Speed and scale of the Wright-Fisher diffusion:
//   s(x) = exp(-2 s x / nu) (1 - x)^(-2 mu / nu),  S(x) = int_0^x s,
//   m(x) = 1 / (s(x) nu x (1 - x)).
// Functions taking (x, xc) expect xc = 1 - x supplied without cancellation.
class ScaleFunctions {
 public:
  explicit ScaleFunctions(const WfParams& wf);

  auto params() const -> const WfParams& { return wf_; }
  auto log_scale_density(double x, double xc) const -> double;
  auto scale_density(double x) const -> double;
  auto log_scale(double x, double xc) const -> double;
  auto scale(double x) const -> double;
  auto log_speed(double x, double xc) const -> double;
  auto speed(double x) const -> double;
  // S(1) < infinity exactly when mu < nu / 2.
  auto scale_finite_at_one() const -> bool;
  auto scale_at_one() const -> double;
  // q(x) = x (1 - x) s(x) / S(x); the conditioned drift is beta + nu q.
  auto repulsion(double x, double xc) const -> double;

 private:
  WfParams wf_;
  double two_s_over_nu_;
  double two_mu_over_nu_;
};

// Conditioned drift beta*(x) = beta(x) + nu q(x), with q tabulated on a grid
// clustered at both ends and interpolated linearly. q(0) = 1 and
// q(1) = max(2 mu / nu - 1, 0).
class ConditionedDrift {
 public:
  explicit ConditionedDrift(const WfParams& wf, std::size_t table_size = 8193);

  auto operator()(double x) const -> double;
  auto repulsion(double x) const -> double;

 private:
  WfParams wf_;
  std::vector<double> q_;
};

// Euler-Maruyama paths. n = ceil(t / dt) steps of size t / n.
auto sde_simulate(const WfParams& wf, double p0, double t, double dt, Rng& rng) -> DiffusionPath;
auto sde_simulate_conditioned(const WfParams& wf, double p0, double t, double dt, Rng& rng)
    -> DiffusionPath;
auto sde_simulate_conditioned(const WfParams& wf, const ConditionedDrift& drift, double p0, double t,
                              double dt, Rng& rng) -> DiffusionPath;

// One Euler step of the unconditioned diffusion from x, clamped to [0, 1].
auto sde_step(const WfParams& wf, double x, double dt, Rng& rng) -> double;

// Default step: 1e-3 over the fastest rate.
auto default_sde_dt(const WfParams& wf) -> double;

enum class PiStarForm { speed_times_scale, speed_times_scale_squared };

// m S^2 is integrable near 1 only when mu < nu; for mu >= nu the density is m S.
auto pi_star_form(const WfParams& wf) -> PiStarForm;

struct DensityGrid {
  std::vector<double> nodes;
  std::vector<double> complements;
  std::vector<double> weights;
  std::vector<double> values;
  bool normalized = false;
  PiStarForm form = PiStarForm::speed_times_scale;
  // log of the integral of the unnormalized density.
  double log_normalizer = 0.0;
  // Largest share of the integral carried by an outermost node.
  double edge_share = 0.0;
};

auto pi_star(const WfParams& wf, std::size_t grid_size = 1025) -> DensityGrid;
auto pi_star(const WfParams& wf, PiStarForm form, std::size_t grid_size) -> DensityGrid;

// Integral of 1 - (1 - x)^k against the grid density.
auto grid_survival_moment(const DensityGrid& grid, int k) -> double;

void write_density_csv(std::ostream& out, const DensityGrid& grid);
void write_diffusion_csv(std::ostream& out, const DiffusionPath& path);
void write_duality_csv(std::ostream& out, std::span<const DualityRow> rows);
void write_coupling_csv(std::ostream& out, std::span<const CouplingRow> rows);

}  // namespace lbp
