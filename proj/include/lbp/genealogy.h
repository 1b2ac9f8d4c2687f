#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lbp/conditioning.h"
#include "lbp/model.h"
#include "lbp/rng.h"

namespace lbp {

// Backward state: population size z of the reversed Q-process and the number
// n <= z of ancestral lineages of the sample.
struct CoalescentState {
  std::int64_t z = 1;
  std::int64_t n = 1;
  auto operator==(const CoalescentState&) const -> bool = default;
};

struct CoalescentTransition {
  CoalescentState next;
  double rate = 0.0;
};

// Transitions out of st using q*_{z,z-1} = down(z) and q*_{z,z+1} = up(z):
// a down-move coalesces a pair with probability n(n-1) / (z(z-1)).
auto coalescent_step_rates(const CoalescentState& st, const RateTable& table)
    -> std::vector<CoalescentTransition>;

struct CoalescentRun {
  double tmrca = 0.0;
  // durations[n] is the time spent with n lineages, for n = 2..n0.
  std::vector<double> durations;
  std::vector<double> times;
  std::vector<CoalescentState> states;
};

auto simulate_coalescent(std::int64_t z0, std::int64_t n0, const RateTable& table, Rng& rng)
    -> CoalescentRun;

struct TreeNode {
  double time = 0.0;
  std::vector<int> children;
  std::optional<std::int64_t> individual;  // set on tips
};

struct ReconstructedTree {
  double sample_time = 0.0;
  std::vector<std::int64_t> tips;
  std::vector<TreeNode> nodes;
  std::vector<int> roots;
  // Branching times, increasing.
  std::vector<double> node_times;
  // g_2..g_n, stored from g_2; empty unless the tree has a single root.
  std::vector<double> durations;

  auto single_root() const -> bool { return roots.size() == 1; }
  auto tip_count() const -> std::size_t { return tips.size(); }
};

inline constexpr double kAlwaysDetectable = std::numeric_limits<double>::infinity();

// One Exp(1) clock per individual, in id order. A species with clock e is
// detectable at rate lambda once its age exceeds e / lambda.
auto detection_clocks(const GenealogyLog& log, Rng& rng) -> std::vector<double>;

// Tips are individuals alive at sample_time whose age exceeds their delay;
// lineages without a tip among their descendants are pruned.
// Returns nullopt when no tip is detectable.
auto reconstruct_tree(const GenealogyLog& log, double sample_time, double lambda,
                      std::span<const double> clocks) -> std::optional<ReconstructedTree>;
auto reconstruct_tree(const GenealogyLog& log, double sample_time, double lambda, Rng& rng)
    -> std::optional<ReconstructedTree>;

auto to_newick(const ReconstructedTree& tree) -> std::string;

// Pybus-Harvey gamma from g_2..g_n (g[0] = g_2); needs n >= 3.
auto gamma_statistic(std::span<const double> g) -> double;

// Internode durations of a pure-birth tree with n tips: g_k ~ Exp(k * rate).
auto yule_durations(int n, double rate, Rng& rng) -> std::vector<double>;

// Default starting size for survival-conditioned runs: max(ceil((b - d) / c), 1).
auto burn_in_start(const ModelParams& p) -> std::int64_t;

struct GammaRow {
  double lambda = 0.0;
  double mean_gamma = 0.0;
  double se = 0.0;
  std::size_t used = 0;
  std::size_t skipped = 0;
};

struct SurvivalRunOptions {
  std::optional<std::int64_t> z0;  // default burn_in_start
  std::size_t max_attempts = 100000;  // per replicate
};

// Each replicate is a genealogy-recording run conditioned on Z(sample_time) > 0
// by rejection; one set of detection clocks per replicate is shared by all lambda.
// Replicates with fewer than 3 tips or several roots are skipped.
auto gamma_scan(const ModelParams& p, std::span<const double> lambdas, double sample_time,
                std::size_t replicates, std::uint64_t seed, const SurvivalRunOptions& options = {})
    -> std::vector<GammaRow>;

enum class MrcaStatus { resolved, single_extant, several_founders };

struct MrcaSample {
  std::int64_t z_present = 0;
  std::int64_t z_before_mrca = 0;
  double mrca_depth = 0.0;
  MrcaStatus status = MrcaStatus::resolved;
};

// MRCA of all extant individuals. z_before_mrca is the population size just
// before the MRCA's branching event. With one extant individual the sample is
// flagged single_extant, with z_before_mrca = z_present and depth 0; when the
// extant individuals descend from several founders it is flagged
// several_founders, with z_before_mrca = z0 and depth = sample_time.
auto mrca_of_run(const GenealogyRun& run, double sample_time) -> MrcaSample;

auto mrca_experiment(const ModelParams& p, double sample_time, std::size_t replicates,
                     std::uint64_t seed, const SurvivalRunOptions& options = {})
    -> std::vector<MrcaSample>;

// Time back from sample_time to the MRCA of the given extant individuals.
auto sample_tmrca(const GenealogyLog& log, std::span<const std::int64_t> sample, double sample_time)
    -> std::optional<double>;

void write_gamma_csv(std::ostream& out, std::span<const GammaRow> rows);
void write_mrca_csv(std::ostream& out, std::span<const MrcaSample> samples);

}  // namespace lbp
