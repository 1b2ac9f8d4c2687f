// Acceptance criteria 1-12. Each criterion prints indented detail lines and
// then exactly one line "criterion N: PASS|FAIL ...". Exit status is nonzero
// when any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lbp/conditioning.h"
#include "lbp/dual.h"
#include "lbp/error.h"
#include "lbp/genealogy.h"
#include "lbp/model.h"
#include "lbp/parallel.h"
#include "lbp/rng.h"
#include "lbp/stats.h"
#include "lbp/yaglom.h"

namespace {

using namespace lbp;

struct Outcome {
  bool pass = false;
  std::string summary;
};

auto fmt(double v) -> std::string {
  auto out = std::ostringstream();
  out.precision(6);
  out << v;
  return out.str();
}

void detail(const std::string& line) { std::cout << "  " << line << '\n'; }

// 1. Every coupled Moran/ancestral-graph realization satisfies the event identity.
auto criterion_1(std::uint64_t seed) -> Outcome {
  auto wf = WfParams{0.5, 1.0, 0.3};
  auto rows = duality_check(wf, 50, 5.0, 5, 10000, seed);
  auto violations = std::size_t{0};
  auto total = std::size_t{0};
  for (const auto& row : rows) {
    detail("n=" + std::to_string(row.sample_size) + " realizations=" + std::to_string(row.realizations) +
           " violations=" + std::to_string(row.violations) + " lineage_survival=" + fmt(row.lineage_survival.mean) +
           " frequency_moment=" + fmt(row.frequency_moment.mean));
    violations += row.violations;
    total += row.realizations;
  }
  return {violations == 0 && rows.size() == 5,
          std::to_string(violations) + " violations over " + std::to_string(total) + " sample checks"};
}

// 2. Sandwich bounds 1 <= r*_{k+1,k} <= (k+1)/k for k <= 200 on a 3x3x3 grid.
auto criterion_2(std::uint64_t) -> Outcome {
  constexpr int kMax = 200;
  constexpr double kSlack = 1e-9;
  auto checked = 0;
  auto worst = 0.0;
  auto failures = std::vector<std::string>();
  for (double b : {0.5, 1.0, 2.0}) {
    for (double c : {0.01, 0.1, 1.0}) {
      for (double d : {0.5, 1.0, 2.0}) {
        auto p = ModelParams{b, c, d};
        auto label = "(b,c,d)=(" + fmt(b) + "," + fmt(c) + "," + fmt(d) + ")";
        try {
          auto ratios = rstar_ratios(pi_star(dual_wf_params(p)), kMax);
          for (int k = 1; k <= kMax; ++k) {
            auto r = ratios[static_cast<std::size_t>(k - 1)];
            auto upper = (k + 1.0) / k;
            auto excess = std::max(1.0 - r, r - upper);
            worst = std::max(worst, excess);
            if (!(excess <= kSlack)) failures.push_back(label + " k=" + std::to_string(k) + " r=" + fmt(r));
            ++checked;
          }
          auto table = rate_table_Q(p, kMax + 1);
          detail(label + " r*_{2,1}=" + fmt(ratios[0]) + " r*_{201,200}-1=" + fmt(ratios.back() - 1.0) +
                 " table_cap=" + std::to_string(table.cap));
        } catch (const std::exception& e) {
          failures.push_back(label + " " + e.what());
        }
      }
    }
  }
  for (const auto& f : failures) detail("violation " + f);
  return {failures.empty(), std::to_string(checked) + " ratios checked, " + std::to_string(failures.size()) +
                                " violations, largest excess " + fmt(worst)};
}

// 3. Jump intensities of Z given survival to T against the fixed-horizon table.
auto criterion_3(std::uint64_t seed) -> Outcome {
  const auto p = ModelParams{1.0, 0.3, 1.0};
  constexpr double kHorizon = 3.0;
  constexpr std::int64_t kStart = 3;
  constexpr int kStates = 8;
  constexpr int kCap = kStates + 2;
  constexpr std::size_t kAccepted = 20000;
  constexpr double kBin = 0.025;
  const auto bins = static_cast<std::size_t>(std::llround(kHorizon / kBin));

  // occupation[bin][k], jump counts by state.
  auto occupation = std::vector<std::vector<double>>(bins, std::vector<double>(kCap + 1, 0.0));
  auto ups = std::vector<double>(kCap + 1, 0.0);
  auto downs = std::vector<double>(kCap + 1, 0.0);
  auto accepted = std::size_t{0};
  auto attempts = std::uint64_t{0};
  while (accepted < kAccepted) {
    auto traj = simulate(p, kStart, kHorizon, seed, attempts++);
    if (traj.final_state() == 0) continue;
    ++accepted;
    for (std::size_t i = 0; i < traj.states.size(); ++i) {
      auto k = traj.states[i];
      auto from = traj.times[i];
      auto to = i + 1 < traj.states.size() ? traj.times[i + 1] : kHorizon;
      if (k <= kCap) {
        // Walk bins by index so edges stay exact multiples of kBin.
        auto bin = std::min(bins - 1, static_cast<std::size_t>(from / kBin));
        for (auto t = from; t < to; ++bin) {
          auto edge = bin + 1 == bins ? to : std::min(to, kBin * static_cast<double>(bin + 1));
          occupation[bin][static_cast<std::size_t>(k)] += std::max(0.0, edge - t);
          t = std::max(t, edge);
        }
      }
      if (i + 1 < traj.states.size() && k <= kCap) {
        (traj.states[i + 1] > k ? ups : downs)[static_cast<std::size_t>(k)] += 1.0;
      }
    }
  }
  detail("accepted " + std::to_string(accepted) + " of " + std::to_string(attempts) + " runs");

  auto remaining = std::vector<double>(bins);
  for (std::size_t j = 0; j < bins; ++j) remaining[j] = kHorizon - kBin * (static_cast<double>(j) + 0.5);
  auto moments = survival_moments_at(dual_wf_params(p), remaining, kCap, {40000, 10, 0.0}, seed + 1);

  auto worst = 0.0;
  auto all_ok = true;
  for (int k = 1; k <= kStates; ++k) {
    auto idx = static_cast<std::size_t>(k);
    auto occ = 0.0, up_th = 0.0, up_th_se = 0.0, down_th = 0.0, down_th_se = 0.0;
    for (std::size_t j = 0; j < bins; ++j) {
      auto table = rate_table_from_moments(p, kHorizon, kHorizon - remaining[j], kCap, moments[j]);
      auto w = occupation[j][idx];
      occ += w;
      up_th += w * table.up[idx];
      up_th_se += w * table.up_se[idx];
      down_th += w * table.down[idx];
      down_th_se += w * table.down_se[idx];
    }
    auto check = [&](const char* name, double count, double theory, double theory_se) {
      auto empirical = count / occ;
      auto se = std::hypot(std::sqrt(count) / occ, theory_se / occ);
      auto z = std::abs(empirical - theory / occ) / se;
      worst = std::max(worst, z);
      all_ok = all_ok && z <= 3.0;
      detail("k=" + std::to_string(k) + " " + name + " empirical=" + fmt(empirical) + " table=" + fmt(theory / occ) +
             " combined_se=" + fmt(se) + " z=" + fmt(z));
    };
    check("up", ups[idx], up_th, up_th_se);
    if (k >= 2) check("down", downs[idx], down_th, down_th_se);
  }
  return {all_ok, "largest deviation " + fmt(worst) + " combined SE (limit 3) over states k <= 8"};
}

// 4. Fixed-horizon ratios approach r* monotonically; gap below 5% at T = 160.
auto criterion_4(std::uint64_t seed) -> Outcome {
  const auto p = ModelParams{1.0, 0.3, 1.0};
  constexpr int kMax = 20;
  auto horizons = std::vector<double>{10.0, 40.0, 160.0};
  auto target = rstar_ratios(pi_star(dual_wf_params(p)), kMax);
  auto moments = survival_moments_at(dual_wf_params(p), horizons, kMax + 1, {20000, 10, 5e-3}, seed);
  auto monotone = true;
  auto final_gap = 0.0;
  auto final_k = 0;
  auto gaps = std::vector<std::vector<MeanSe>>(horizons.size());
  for (std::size_t h = 0; h < horizons.size(); ++h) {
    for (int k = 1; k <= kMax; ++k) {
      auto r = moment_ratio(moments[h], k + 1, k);
      auto rstar = target[static_cast<std::size_t>(k - 1)];
      gaps[h].push_back({std::abs(r.mean - rstar) / rstar, r.se / rstar, 0});
    }
  }
  for (int k = 1; k <= kMax; ++k) {
    auto idx = static_cast<std::size_t>(k - 1);
    auto line = "k=" + std::to_string(k) + " r*=" + fmt(target[idx]);
    for (std::size_t h = 0; h < horizons.size(); ++h) {
      line += " gap(T=" + fmt(horizons[h]) + ")=" + fmt(gaps[h][idx].mean);
      if (h > 0) {
        auto slack = 2.0 * std::hypot(gaps[h][idx].se, gaps[h - 1][idx].se);
        if (gaps[h][idx].mean > gaps[h - 1][idx].mean + slack) monotone = false;
      }
    }
    detail(line);
    if (gaps.back()[idx].mean > final_gap) {
      final_gap = gaps.back()[idx].mean;
      final_k = k;
    }
  }
  auto pass = monotone && final_gap < 0.05;
  return {pass, std::string(monotone ? "monotone" : "not monotone") + ", largest relative gap at T=160 " +
                    fmt(final_gap) + " at k=" + std::to_string(final_k) + " (limit 0.05)"};
}

// 5. Occupation of the simulated Q-process against its balance PMF.
auto criterion_5(std::uint64_t seed) -> Outcome {
  auto table = rate_table_Q({1.0, 0.3, 1.0}, 200);
  auto stationary = q_stationary(table);
  auto rng = Rng(seed);
  auto occupation = q_process_occupation(table, 1, 1'000'000, rng);
  auto tv = total_variation(stationary.probs, occupation);
  for (int k = 1; k <= 6; ++k) {
    auto idx = static_cast<std::size_t>(k - 1);
    detail("k=" + std::to_string(k) + " balance=" + fmt(stationary.probs[idx]) + " occupation=" + fmt(occupation[idx]));
  }
  return {tv < 0.02, "total variation " + fmt(tv) + " (limit 0.02) at 1e6 events"};
}

// 6. Recursion, Feynman-Kac and empirical routes to the Yaglom law.
auto criterion_6(std::uint64_t seed) -> Outcome {
  const auto p = ModelParams{1.0, 0.3, 1.0};
  auto sol = yaglom_recursion(p);
  auto identity = std::abs(sol.a - p.d * sol.pmf[0]) <= 1e-15 * sol.a;
  detail("a=" + fmt(sol.a) + " d*pi(1)=" + fmt(p.d * sol.pmf[0]) + " residual=" + fmt(sol.residual));

  auto thetas = std::vector<double>{0.2, 0.5, 0.8};
  auto fk = yaglom_feynman_kac(p, sol.a, thetas, {20000, 1e-3, 10'000'000}, seed);
  auto fk_ok = true;
  for (const auto& e : fk) {
    auto exact = yaglom_pgf(sol, e.theta);
    auto z = std::abs(e.g - exact) / e.se;
    fk_ok = fk_ok && z <= 3.0;
    detail("theta=" + fmt(e.theta) + " recursion=" + fmt(exact) + " feynman_kac=" + fmt(e.g) + " se=" + fmt(e.se) +
           " z=" + fmt(z) + " censored=" + std::to_string(e.censored));
  }

  auto empirical = yaglom_empirical(p, 50.0, 1, 10000, seed + 1, {ConditioningMethod::staged, 50, 100000});
  auto tv = total_variation(sol.pmf, empirical.probs);
  detail("empirical T=50: accepted=" + std::to_string(empirical.accepted) + " survival=" +
         fmt(empirical.acceptance_rate) + " total_variation=" + fmt(tv));
  auto pass = identity && fk_ok && tv < 0.05;
  return {pass, std::string("a = d pi(1) ") + (identity ? "holds" : "fails") + ", Feynman-Kac " +
                    (fk_ok ? "within" : "outside") + " 3 SE, empirical total variation " + fmt(tv) +
                    " (limit 0.05)"};
}

// 7. Shape of the conditioned law at T = 500 in a near-critical and a weak-competition regime.
auto criterion_7(std::uint64_t seed) -> Outcome {
  constexpr std::size_t kSamples = 10000;
  auto near_critical = yaglom_empirical({0.995, 0.0, 1.0}, 500.0, 1, kSamples, seed,
                                        {ConditioningMethod::staged, 100, 100000});
  // Monotone decreasing: no adjacent increase beyond 3 SE.
  auto decreasing = true;
  for (std::size_t k = 1; k < near_critical.probs.size(); ++k) {
    auto rise = near_critical.probs[k] - near_critical.probs[k - 1];
    if (rise > 3.0 * std::hypot(near_critical.se[k], near_critical.se[k - 1])) decreasing = false;
  }
  detail("b=0.995 c=0: survival=" + fmt(near_critical.acceptance_rate) + " P(1)=" + fmt(near_critical.probs[0]) +
         " P(2)=" + fmt(near_critical.probs.size() > 1 ? near_critical.probs[1] : 0.0) + " support=" +
         std::to_string(near_critical.probs.size()));

  auto start = burn_in_start({1.15, 0.001, 1.0});
  auto weak = yaglom_empirical({1.15, 0.001, 1.0}, 500.0, start, kSamples, seed + 1,
                               {ConditioningMethod::staged, 20, 100000});
  // Unimodality on bins of width 10: nondecreasing to the mode, nonincreasing after, 3 SE slack.
  constexpr std::size_t kWidth = 10;
  auto binned = std::vector<double>((weak.probs.size() + kWidth - 1) / kWidth, 0.0);
  for (std::size_t k = 0; k < weak.probs.size(); ++k) binned[k / kWidth] += weak.probs[k];
  auto mode = static_cast<std::size_t>(std::max_element(binned.begin(), binned.end()) - binned.begin());
  auto unimodal = mode > 0 && mode + 1 < binned.size();
  auto n = static_cast<double>(weak.accepted);
  for (std::size_t j = 1; j < binned.size(); ++j) {
    auto se = std::sqrt((binned[j] * (1.0 - binned[j]) + binned[j - 1] * (1.0 - binned[j - 1])) / n);
    auto step = binned[j] - binned[j - 1];
    if (j <= mode && step < -3.0 * se) unimodal = false;
    if (j > mode && step > 3.0 * se) unimodal = false;
  }
  auto skew = pmf_skewness(weak.probs, 1);
  detail("b=1.15 c=0.001: survival=" + fmt(weak.acceptance_rate) + " mode_bin=[" + std::to_string(mode * kWidth + 1) +
         "," + std::to_string((mode + 1) * kWidth) + "] skewness=" + fmt(skew));
  auto pass = decreasing && unimodal && std::abs(skew) < 0.5;
  return {pass, std::string("near-critical ") + (decreasing ? "decreasing" : "not decreasing") +
                    ", weak competition " + (unimodal ? "unimodal with interior mode" : "not unimodal") +
                    ", skewness " + fmt(skew) + " (limit 0.5)"};
}

// 8. Gamma statistic: formula, Yule null, and the empirical band for slow detection.
auto criterion_8(std::uint64_t seed) -> Outcome {
  auto hand = std::vector<double>{1.0, 1.0};
  auto g = gamma_statistic(hand);
  auto formula_ok = std::abs(g - (-0.34641)) <= 1e-5;
  detail("gamma(1,1)=" + fmt(g));

  auto yule = std::vector<double>(1000);
  for (std::size_t r = 0; r < yule.size(); ++r) {
    auto rng = Rng(seed, r);
    yule[r] = gamma_statistic(yule_durations(30, 1.0, rng));
  }
  auto ym = mean_se(yule);
  auto yule_ok = std::abs(ym.mean) <= 3.0 * ym.se;
  detail("Yule mean gamma=" + fmt(ym.mean) + " se=" + fmt(ym.se));

  auto lambdas = std::vector<double>{0.01, 0.02, 0.05, 1.0, 1000.0};
  auto rows = gamma_scan({1.0, 0.01, 0.5}, lambdas, 200.0, 200, seed + 1);
  auto band_ok = true;
  for (const auto& row : rows) {
    detail("lambda=" + fmt(row.lambda) + " mean_gamma=" + fmt(row.mean_gamma) + " se=" + fmt(row.se) +
           " used=" + std::to_string(row.used));
    if (row.lambda < 0.1 && !(row.used > 0 && row.mean_gamma >= -3.26 && row.mean_gamma <= 1.85)) band_ok = false;
  }
  return {formula_ok && yule_ok && band_ok,
          "gamma(1,1)=" + fmt(g) + ", Yule mean " + fmt(ym.mean) + " (3 SE " + fmt(3.0 * ym.se) + "), band " +
              (band_ok ? "held" : "violated") + " for lambda < 0.1"};
}

// 9. The mean gap z_present - z_before_mrca is positive without competition and shrinks as c grows.
auto criterion_9(std::uint64_t seed) -> Outcome {
  constexpr double kSampleTime = 20.0;
  auto pass = true;
  auto summary = std::string();
  auto stream = std::uint64_t{0};
  for (double b : {0.8, 0.9, 1.0}) {
    auto gaps = std::vector<MeanSe>();
    for (double c : {0.0, 0.01, 0.05}) {
      auto samples = mrca_experiment({b, c, 1.0}, kSampleTime, 1000, seed + stream++, {std::nullopt, 10'000'000});
      auto values = std::vector<double>();
      for (const auto& s : samples) values.push_back(static_cast<double>(s.z_present - s.z_before_mrca));
      gaps.push_back(mean_se(values));
      detail("b=" + fmt(b) + " c=" + fmt(c) + " mean_gap=" + fmt(gaps.back().mean) + " se=" + fmt(gaps.back().se) +
             " replicates=" + std::to_string(samples.size()));
    }
    auto positive = gaps[0].mean > 2.0 * gaps[0].se;
    auto shrinking = gaps.back().mean < gaps.front().mean;
    for (std::size_t i = 1; i < gaps.size(); ++i) {
      if (gaps[i].mean > gaps[i - 1].mean + 2.0 * std::hypot(gaps[i].se, gaps[i - 1].se)) shrinking = false;
    }
    pass = pass && positive && shrinking;
    summary += "b=" + fmt(b) + (positive ? " positive" : " not positive") + (shrinking ? "/shrinking; " : "/not shrinking; ");
  }
  return {pass, summary + "sample time " + fmt(kSampleTime)};
}

// 10. TMRCA of three sampled lineages: backward chain against conditioned forward genealogies.
auto criterion_10(std::uint64_t seed) -> Outcome {
  const auto p = ModelParams{1.0, 0.3, 1.0};
  constexpr std::int64_t kSample = 3;
  constexpr std::size_t kReplicates = 2000;
  // Sample at kSampleTime after one founder; survival is required up to kSampleTime + kFuture.
  constexpr double kSampleTime = 8.0;
  constexpr double kFuture = 4.0;

  auto table = rate_table_Q(p, 80);
  auto stationary = q_stationary(table);
  auto weights = std::vector<double>(stationary.probs.begin() + (kSample - 1), stationary.probs.end());
  auto cumulative = std::vector<double>(weights.size());
  std::partial_sum(weights.begin(), weights.end(), cumulative.begin());
  auto backward = std::vector<double>(kReplicates);
  for (std::size_t r = 0; r < kReplicates; ++r) {
    auto rng = Rng(seed, r);
    auto u = rng.uniform() * cumulative.back();
    auto z = kSample + static_cast<std::int64_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) -
                                                 cumulative.begin());
    backward[r] = simulate_coalescent(z, kSample, table, rng).tmrca;
  }

  auto forward = std::vector<double>();
  auto attempts = std::uint64_t{0};
  while (forward.size() < kReplicates) {
    auto index = attempts++;
    auto probe = Rng(seed + 1, index, 0);
    if (simulate_final_state(p, 1, kSampleTime + kFuture, probe) == 0) continue;
    auto events = Rng(seed + 1, index, 0);
    auto choices = Rng(seed + 1, index, 1);
    auto run = simulate_with_genealogy(p, 1, kSampleTime + kFuture, events, choices);
    auto alive = std::vector<std::int64_t>();
    for (const auto& ind : run.log.individuals) {
      if (ind.birth <= kSampleTime && (!ind.death || *ind.death > kSampleTime)) alive.push_back(ind.id);
    }
    if (static_cast<std::int64_t>(alive.size()) < kSample) continue;
    auto pick = Rng(seed + 1, index, 2);
    for (std::int64_t i = 0; i < kSample; ++i) {
      auto j = static_cast<std::size_t>(i) + static_cast<std::size_t>(pick.index(alive.size() - static_cast<std::size_t>(i)));
      std::swap(alive[static_cast<std::size_t>(i)], alive[j]);
    }
    alive.resize(kSample);
    if (auto t = sample_tmrca(run.log, alive, kSampleTime)) forward.push_back(*t);
  }
  auto ks = ks_two_sample(backward, forward);
  detail("backward mean tmrca=" + fmt(mean_se(backward).mean) + " forward mean tmrca=" + fmt(mean_se(forward).mean) +
         " forward attempts=" + std::to_string(attempts));
  return {ks.p_value >= 0.01, "two-sample KS statistic " + fmt(ks.statistic) + ", p-value " + fmt(ks.p_value) +
                                  " (reject below 0.01)"};
}

// 11. Wasserstein distance to the logistic Feller diffusion decreases in K.
auto criterion_11(std::uint64_t seed) -> Outcome {
  auto caps = std::vector<int>{20, 50, 100};
  auto rows = scaling_check(1.0, 0.5, caps, 2.0, {1.0, 20000, 1e-3}, seed);
  auto decreasing = true;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    detail("K=" + std::to_string(rows[i].cap) + " W1=" + fmt(rows[i].wasserstein) + " branching_mean=" +
           fmt(rows[i].branching_mean.mean) + " diffusion_mean=" + fmt(rows[i].diffusion_mean.mean));
    if (i > 0 && !(rows[i].wasserstein < rows[i - 1].wasserstein)) decreasing = false;
  }
  auto summary = std::string("W1 ");
  for (const auto& row : rows) summary += fmt(row.wasserstein) + " ";
  return {decreasing, summary + (decreasing ? "is decreasing" : "is not decreasing")};
}

// 12. Weak-competition beta approximation: histogram, ratios and the vanishing-noise limit.
auto criterion_12(std::uint64_t seed) -> Outcome {
  const auto wf = WfParams{1.1, 1e-4, 1.0};
  constexpr std::size_t kPaths = 2000;
  constexpr double kTime = 80.0;
  auto drift = ConditionedDrift(wf);
  auto dt = default_sde_dt(wf);
  auto finals = std::vector<double>(kPaths);
  // Diagnostic only: unconditioned paths restricted to those alive at kTime.
  auto survivor_finals = std::vector<double>(kPaths);
  parallel_for(kPaths, [&](std::size_t i) {
    auto rng = Rng(seed, i);
    finals[i] = sde_simulate_conditioned(wf, drift, 0.5, kTime, dt, rng).values.back();
    auto plain = Rng(seed, i, 1);
    survivor_finals[i] = sde_simulate(wf, 0.5, kTime, dt, plain).values.back();
  });
  std::erase(survivor_finals, 0.0);
  detail("conditioned SDE: mean final value " + fmt(mean_se(finals).mean) + "; surviving unconditioned paths " +
         std::to_string(survivor_finals.size()) + " of " + std::to_string(kPaths) + ", mean " +
         fmt(mean_se(survivor_finals).mean));
  struct Named {
    const char* name;
    AlphaConvention convention;
  };
  auto conventions = std::vector<Named>{{"two_growth", AlphaConvention::two_growth},
                                        {"scaled_growth", AlphaConvention::scaled_growth},
                                        {"linearised", AlphaConvention::linearised}};
  auto best = std::numeric_limits<double>::infinity();
  auto best_name = std::string();
  auto best_convention = AlphaConvention::two_growth;
  for (const auto& c : conventions) {
    auto beta = beta_approximation(wf, c.convention);
    auto ks = ks_one_sample(finals, [&](double x) { return beta.cdf(x); });
    auto survivor_ks = ks_one_sample(survivor_finals, [&](double x) { return beta.cdf(x); });
    detail(std::string(c.name) + " alpha=" + fmt(alpha_value(wf, c.convention)) + " KS(conditioned SDE)=" +
           fmt(ks.statistic) + " KS(surviving unconditioned paths, diagnostic)=" + fmt(survivor_ks.statistic));
    if (ks.statistic < best) {
      best = ks.statistic;
      best_name = c.name;
      best_convention = c.convention;
    }
  }

  constexpr int kMax = 20;
  auto q = rate_table_Q(dual_model_params(wf), kMax + 1);
  auto worst_ratio = 0.0;
  for (int k = 1; k <= kMax; ++k) {
    auto idx = static_cast<std::size_t>(k);
    auto rq = q.up[idx] / jump_rates(k, q.params).up;
    auto rw = r_star_weak(wf, k, best_convention);
    worst_ratio = std::max(worst_ratio, std::abs(rw - rq) / rq);
    if (k <= 3 || k == kMax) detail("k=" + std::to_string(k) + " rate_table_Q=" + fmt(rq) + " weak=" + fmt(rw));
  }

  auto tiny = WfParams{1.1, 1e-9, 1.0};
  auto worst_limit = 0.0;
  for (int k = 1; k <= kMax; ++k) {
    for (const auto& c : conventions) {
      worst_limit = std::max(worst_limit, std::abs(r_star_weak(tiny, k, c.convention) - r_star_weak_limit(tiny, k)));
    }
  }
  detail("largest |weak - limit| at nu=1e-9: " + fmt(worst_limit));
  auto pass = best < 0.05 && worst_ratio < 0.02 && worst_limit < 1e-6;
  return {pass, "best convention " + best_name + " KS " + fmt(best) + " (limit 0.05), ratio gap " + fmt(worst_ratio) +
                    " (limit 0.02), limit gap " + fmt(worst_limit) + " (limit 1e-6)"};
}

}  // namespace

auto main(int argc, char** argv) -> int {
  auto app = CLI::App("Acceptance criteria", "acceptance");
  auto only = std::vector<int>();
  auto seed = std::uint64_t{20260101};
  auto threads = 0U;
  app.add_option("--only", only, "criteria to run (default all)")->check(CLI::Range(1, 12));
  app.add_option("--seed", seed, "base seed");
  app.add_option("--threads", threads, "worker thread cap (0 = machine parallelism)");
  CLI11_PARSE(app, argc, argv);
  lbp::set_max_threads(threads);

  const auto checks = std::vector<std::function<Outcome(std::uint64_t)>>{
      criterion_1, criterion_2, criterion_3, criterion_4,  criterion_5,  criterion_6,
      criterion_7, criterion_8, criterion_9, criterion_10, criterion_11, criterion_12};
  if (only.empty()) {
    only.resize(checks.size());
    std::iota(only.begin(), only.end(), 1);
  }
  auto failed = 0;
  for (int n : only) {
    auto start = std::chrono::steady_clock::now();
    auto outcome = Outcome{};
    try {
      outcome = checks[static_cast<std::size_t>(n - 1)](seed + 1000 * static_cast<std::uint64_t>(n));
    } catch (const std::exception& e) {
      outcome = {false, std::string("error: ") + e.what()};
    }
    auto seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << "criterion " << n << ": " << (outcome.pass ? "PASS" : "FAIL") << " " << outcome.summary << " ["
              << fmt(seconds) << " s]" << std::endl;
    if (!outcome.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
