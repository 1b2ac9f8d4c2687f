#include "lbp/genealogy.h"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "lbp/error.h"
#include "lbp/format.h"
#include "lbp/parallel.h"
#include "lbp/stats.h"

namespace lbp {

auto coalescent_step_rates(const CoalescentState& st, const RateTable& table)
    -> std::vector<CoalescentTransition> {
  if (st.z < 1 || st.n < 1 || st.n > st.z) throw InvalidArgument("coalescent state needs 1 <= n <= z");
  if (st.z > table.cap) throw InvalidArgument("coalescent state beyond the rate table cap");
  auto moves = std::vector<CoalescentTransition>{};
  if (st.z >= 2) {
    auto z = static_cast<double>(st.z);
    auto n = static_cast<double>(st.n);
    auto down = table.down_rate(st.z);
    auto merge = n * (n - 1.0) / (z * (z - 1.0));
    if (st.n < st.z) moves.push_back({{st.z - 1, st.n}, (1.0 - merge) * down});
    if (st.n >= 2) moves.push_back({{st.z - 1, st.n - 1}, merge * down});
  }
  moves.push_back({{st.z + 1, st.n}, table.up_rate(st.z)});
  return moves;
}

auto simulate_coalescent(std::int64_t z0, std::int64_t n0, const RateTable& table, Rng& rng)
    -> CoalescentRun {
  if (n0 < 1 || n0 > z0) throw InvalidArgument("simulate_coalescent needs 1 <= n0 <= z0");
  auto run = CoalescentRun{};
  run.durations.assign(static_cast<std::size_t>(n0) + 1, 0.0);
  auto st = CoalescentState{z0, n0};
  auto t = 0.0;
  run.times.push_back(t);
  run.states.push_back(st);
  while (st.n > 1) {
    auto moves = coalescent_step_rates(st, table);
    auto total = 0.0;
    for (const auto& m : moves) total += m.rate;
    if (!(total > 0.0)) throw NumericalFailure("simulate_coalescent: state with no outgoing rate");
    auto hold = rng.exponential(total);
    run.durations[static_cast<std::size_t>(st.n)] += hold;
    t += hold;
    auto u = rng.uniform() * total;
    auto chosen = moves.back().next;
    for (const auto& m : moves) {
      if (u < m.rate) {
        chosen = m.next;
        break;
      }
      u -= m.rate;
    }
    st = chosen;
    run.times.push_back(t);
    run.states.push_back(st);
  }
  run.tmrca = t;
  return run;
}

namespace {

// Builds the pruned tree over individuals flagged in `tip`.
auto build_tree(const GenealogyLog& log, double sample_time, const std::vector<char>& tip)
    -> std::optional<ReconstructedTree> {
  const auto& records = log.individuals;
  auto count = records.size();
  auto marked = tip;
  for (auto i = count; i-- > 0;) {
    if (marked[i] && records[i].parent) marked[static_cast<std::size_t>(*records[i].parent)] = 1;
  }
  auto children = std::vector<std::vector<std::size_t>>(count);
  auto tree = ReconstructedTree{};
  tree.sample_time = sample_time;
  for (auto i = std::size_t{0}; i < count; ++i) {
    if (!marked[i]) continue;
    if (tip[i]) tree.tips.push_back(records[i].id);
    if (records[i].parent) children[static_cast<std::size_t>(*records[i].parent)].push_back(i);
  }
  if (tree.tips.empty()) return std::nullopt;

  // Lineage i from just after its pos-th marked child. A child's birth is a
  // node when lineage i still has sampled descendants afterwards.
  auto build = [&](auto&& self, std::size_t i, std::size_t pos) -> int {
    while (true) {
      if (pos == children[i].size()) {
        tree.nodes.push_back({sample_time, {}, records[i].id});
        return static_cast<int>(tree.nodes.size() - 1);
      }
      auto c = children[i][pos];
      auto continues = tip[i] || pos + 1 < children[i].size();
      if (!continues) {
        i = c;
        pos = 0;
        continue;
      }
      auto left = self(self, i, pos + 1);
      auto right = self(self, c, 0);
      tree.nodes.push_back({records[c].birth, {left, right}, std::nullopt});
      tree.node_times.push_back(records[c].birth);
      return static_cast<int>(tree.nodes.size() - 1);
    }
  };
  for (auto i = std::size_t{0}; i < count; ++i) {
    if (marked[i] && !records[i].parent) tree.roots.push_back(build(build, i, 0));
  }
  std::sort(tree.node_times.begin(), tree.node_times.end());
  if (tree.single_root() && !tree.node_times.empty()) {
    for (auto j = std::size_t{1}; j < tree.node_times.size(); ++j) {
      tree.durations.push_back(tree.node_times[j] - tree.node_times[j - 1]);
    }
    tree.durations.push_back(sample_time - tree.node_times.back());
  }
  return tree;
}

auto alive_at(const IndividualRecord& r, double t) -> bool {
  return r.birth <= t && (!r.death || *r.death > t);
}

}  // namespace

auto detection_clocks(const GenealogyLog& log, Rng& rng) -> std::vector<double> {
  auto clocks = std::vector<double>(log.individuals.size());
  for (auto& c : clocks) c = rng.exponential(1.0);
  return clocks;
}

auto reconstruct_tree(const GenealogyLog& log, double sample_time, double lambda,
                      std::span<const double> clocks) -> std::optional<ReconstructedTree> {
  if (!(lambda > 0.0)) throw InvalidArgument("reconstruct_tree needs lambda > 0");
  if (clocks.size() != log.individuals.size()) throw InvalidArgument("reconstruct_tree: one clock per individual");
  auto tip = std::vector<char>(log.individuals.size(), 0);
  auto any_alive = false;
  for (auto i = std::size_t{0}; i < tip.size(); ++i) {
    const auto& r = log.individuals[i];
    if (!alive_at(r, sample_time)) continue;
    any_alive = true;
    auto delay = std::isinf(lambda) ? 0.0 : clocks[i] / lambda;
    tip[i] = sample_time - r.birth >= delay;
  }
  if (!any_alive) throw InvalidArgument("reconstruct_tree: nobody alive at the sample time");
  return build_tree(log, sample_time, tip);
}

auto reconstruct_tree(const GenealogyLog& log, double sample_time, double lambda, Rng& rng)
    -> std::optional<ReconstructedTree> {
  auto clocks = detection_clocks(log, rng);
  return reconstruct_tree(log, sample_time, lambda, clocks);
}

auto to_newick(const ReconstructedTree& tree) -> std::string {
  auto out = std::ostringstream{};
  auto write = [&](auto&& self, int index, double parent_time, bool is_root) -> void {
    const auto& node = tree.nodes[static_cast<std::size_t>(index)];
    if (node.children.empty()) {
      out << 'i' << *node.individual;
    } else {
      out << '(';
      for (auto k = std::size_t{0}; k < node.children.size(); ++k) {
        if (k > 0) out << ',';
        self(self, node.children[k], node.time, false);
      }
      out << ')';
    }
    if (!is_root) out << ':' << format_double(node.time - parent_time);
  };
  for (auto r : tree.roots) {
    write(write, r, 0.0, true);
    out << ";\n";
  }
  return out.str();
}

auto gamma_statistic(std::span<const double> g) -> double {
  auto n = static_cast<int>(g.size()) + 1;
  if (n < 3) throw InvalidArgument("gamma_statistic needs n >= 3 tips");
  auto total = 0.0;     // sum_{j=2}^n j g_j
  auto nested = 0.0;    // sum_{i=2}^{n-1} sum_{k=2}^i k g_k
  for (int j = 2; j <= n; ++j) {
    total += j * g[static_cast<std::size_t>(j - 2)];
    if (j <= n - 1) nested += total;
  }
  auto numerator = nested / (n - 2) - 0.5 * total;
  return numerator / (total * std::sqrt(1.0 / (12.0 * (n - 2))));
}

auto yule_durations(int n, double rate, Rng& rng) -> std::vector<double> {
  if (n < 2 || !(rate > 0.0)) throw InvalidArgument("yule_durations needs n >= 2 and rate > 0");
  auto g = std::vector<double>{};
  for (int k = 2; k <= n; ++k) g.push_back(rng.exponential(k * rate));
  return g;
}

auto burn_in_start(const ModelParams& p) -> std::int64_t {
  if (p.c <= 0.0) return 1;
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil((p.b - p.d) / p.c)));
}

namespace {

// Genealogy run for replicate r conditioned on Z(sample_time) > 0. Returns
// the run and the attempt index that produced it.
auto surviving_run(const ModelParams& p, std::int64_t z0, double sample_time, std::uint64_t seed,
                   std::uint64_t replicate, std::size_t max_attempts) -> std::pair<GenealogyRun, std::uint64_t> {
  for (auto attempt = std::uint64_t{0}; attempt < max_attempts; ++attempt) {
    auto probe = Rng{seed, replicate, 4 * attempt};
    if (simulate_final_state(p, z0, sample_time, probe) == 0) continue;
    auto events = Rng{seed, replicate, 4 * attempt};
    auto choices = Rng{seed, replicate, 4 * attempt + 1};
    return {simulate_with_genealogy(p, z0, sample_time, events, choices), attempt};
  }
  throw ImpracticalSampling("no surviving run within " + std::to_string(max_attempts) + " attempts");
}

}  // namespace

auto gamma_scan(const ModelParams& p, std::span<const double> lambdas, double sample_time,
                std::size_t replicates, std::uint64_t seed, const SurvivalRunOptions& options)
    -> std::vector<GammaRow> {
  p.validate();
  if (lambdas.empty()) throw InvalidArgument("gamma_scan needs at least one lambda");
  for (auto l : lambdas) {
    if (!(l > 0.0)) throw InvalidArgument("gamma_scan needs lambda > 0");
  }
  auto z0 = options.z0.value_or(burn_in_start(p));
  // gammas[r][l]; NaN marks a skipped replicate.
  auto gammas = std::vector<std::vector<double>>(replicates, std::vector<double>(lambdas.size()));
  parallel_for(replicates, [&](std::size_t r) {
    auto [run, attempt] = surviving_run(p, z0, sample_time, seed, r, options.max_attempts);
    auto clock_rng = Rng{seed, r, 4 * attempt + 2};
    auto clocks = detection_clocks(run.log, clock_rng);
    for (auto l = std::size_t{0}; l < lambdas.size(); ++l) {
      auto tree = reconstruct_tree(run.log, sample_time, lambdas[l], clocks);
      gammas[r][l] = (tree && tree->single_root() && tree->tip_count() >= 3)
                         ? gamma_statistic(tree->durations)
                         : std::nan("");
    }
  });
  auto rows = std::vector<GammaRow>{};
  for (auto l = std::size_t{0}; l < lambdas.size(); ++l) {
    auto used = std::vector<double>{};
    for (const auto& row : gammas) {
      if (!std::isnan(row[l])) used.push_back(row[l]);
    }
    auto stat = mean_se(used);
    rows.push_back({lambdas[l], stat.mean, stat.se, used.size(), replicates - used.size()});
  }
  return rows;
}

auto mrca_of_run(const GenealogyRun& run, double sample_time) -> MrcaSample {
  const auto& traj = run.trajectory;
  auto sample = MrcaSample{};
  sample.z_present = traj.state_at(sample_time);
  if (sample.z_present < 1) throw InvalidArgument("mrca_of_run: population extinct at the sample time");
  auto clocks = std::vector<double>(run.log.individuals.size(), 0.0);
  auto tree = reconstruct_tree(run.log, sample_time, kAlwaysDetectable, clocks);
  if (!tree->single_root()) {
    sample.status = MrcaStatus::several_founders;
    sample.z_before_mrca = traj.states.front();
    sample.mrca_depth = sample_time;
    return sample;
  }
  if (tree->node_times.empty()) {
    sample.status = MrcaStatus::single_extant;
    sample.z_before_mrca = sample.z_present;
    sample.mrca_depth = 0.0;
    return sample;
  }
  auto t_mrca = tree->node_times.front();
  auto it = std::lower_bound(traj.times.begin(), traj.times.end(), t_mrca);
  auto event = static_cast<std::size_t>(it - traj.times.begin());
  sample.z_before_mrca = traj.states[event - 1];
  sample.mrca_depth = sample_time - t_mrca;
  return sample;
}

auto mrca_experiment(const ModelParams& p, double sample_time, std::size_t replicates,
                     std::uint64_t seed, const SurvivalRunOptions& options) -> std::vector<MrcaSample> {
  p.validate();
  auto z0 = options.z0.value_or(burn_in_start(p));
  auto samples = std::vector<MrcaSample>(replicates);
  parallel_for(replicates, [&](std::size_t r) {
    auto run = surviving_run(p, z0, sample_time, seed, r, options.max_attempts).first;
    samples[r] = mrca_of_run(run, sample_time);
  });
  return samples;
}

auto sample_tmrca(const GenealogyLog& log, std::span<const std::int64_t> sample, double sample_time)
    -> std::optional<double> {
  auto tip = std::vector<char>(log.individuals.size(), 0);
  for (auto id : sample) {
    if (id < 0 || static_cast<std::size_t>(id) >= tip.size() ||
        !alive_at(log.individuals[static_cast<std::size_t>(id)], sample_time)) {
      throw InvalidArgument("sample_tmrca: sample must be alive at the sample time");
    }
    tip[static_cast<std::size_t>(id)] = 1;
  }
  auto tree = build_tree(log, sample_time, tip);
  if (!tree || !tree->single_root()) return std::nullopt;
  if (tree->node_times.empty()) return 0.0;
  return sample_time - tree->node_times.front();
}

void write_gamma_csv(std::ostream& out, std::span<const GammaRow> rows) {
  out << "lambda,mean_gamma,se,n_used,n_skipped\n";
  for (const auto& r : rows) {
    out << format_double(r.lambda) << ',' << format_double(r.mean_gamma) << ',' << format_double(r.se) << ','
        << r.used << ',' << r.skipped << '\n';
  }
}

void write_mrca_csv(std::ostream& out, std::span<const MrcaSample> samples) {
  out << "z_present,z_before_mrca,mrca_depth\n";
  for (const auto& s : samples) {
    out << s.z_present << ',' << s.z_before_mrca << ',' << format_double(s.mrca_depth) << '\n';
  }
}

}  // namespace lbp
