#include "lbp/yaglom.h"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <limits>
#include <ostream>

#include "lbp/error.h"
#include "lbp/format.h"
#include "lbp/parallel.h"
#include "lbp/stats.h"

namespace lbp {

namespace {

constexpr double kRescale = 1e200;

struct Coefficients {
  const ModelParams& p;
  auto birth(int k) const -> double { return p.b * k; }
  auto death(int k) const -> double { return p.d * k + p.c * k * (k - 1.0); }
};

// Forward recursion from pi(0) = 0, pi(1) = 1: true when some pi(k), k <= K,
// turns negative, which happens exactly when a exceeds the decay rate.
auto forward_turns_negative(const Coefficients& co, double a, int cap) -> bool {
  auto prev = 0.0;
  auto cur = 1.0;
  for (int k = 1; k < cap; ++k) {
    auto next = ((co.birth(k) + co.death(k) - a) * cur - co.birth(k - 1) * prev) / co.death(k + 1);
    if (next < 0.0) return true;
    prev = cur;
    cur = next;
    if (cur > kRescale) {
      prev /= kRescale;
      cur /= kRescale;
    }
  }
  return false;
}

// Backward recursion from pi(K + 1) = 0, pi(K) = 1, normalized to sum 1.
auto backward_pmf(const Coefficients& co, double a, int cap) -> std::vector<double> {
  auto pi = std::vector<double>(static_cast<std::size_t>(cap) + 2, 0.0);
  pi[static_cast<std::size_t>(cap)] = 1.0;
  for (int k = cap; k >= 2; --k) {
    auto idx = static_cast<std::size_t>(k);
    pi[idx - 1] = ((co.birth(k) + co.death(k) - a) * pi[idx] - co.death(k + 1) * pi[idx + 1]) / co.birth(k - 1);
    if (std::abs(pi[idx - 1]) > kRescale) {
      for (auto j = idx - 1; j <= static_cast<std::size_t>(cap); ++j) pi[j] /= kRescale;
    }
  }
  auto total = 0.0;
  for (int k = 1; k <= cap; ++k) total += pi[static_cast<std::size_t>(k)];
  auto pmf = std::vector<double>(static_cast<std::size_t>(cap));
  for (int k = 1; k <= cap; ++k) pmf[static_cast<std::size_t>(k - 1)] = pi[static_cast<std::size_t>(k)] / total;
  return pmf;
}

auto relation_residual(const Coefficients& co, const std::vector<double>& pmf, double a) -> double {
  auto cap = static_cast<int>(pmf.size());
  auto at = [&](int k) { return k >= 1 && k <= cap ? pmf[static_cast<std::size_t>(k - 1)] : 0.0; };
  auto worst = 0.0;
  auto underflowed = [&](int k) { return k >= 1 && k <= cap && at(k) < std::numeric_limits<double>::min(); };
  for (int k = 1; k <= cap; ++k) {
    // Rows touching underflowed tail entries carry no information.
    if (underflowed(k - 1) || underflowed(k) || underflowed(k + 1)) continue;
    auto lhs = co.birth(k - 1) * at(k - 1) + co.death(k + 1) * at(k + 1);
    auto rhs = (co.birth(k) + co.death(k) - a) * at(k);
    auto scale = std::abs(co.birth(k - 1) * at(k - 1)) + std::abs(co.death(k + 1) * at(k + 1)) +
                 std::abs((co.birth(k) + co.death(k)) * at(k)) + std::abs(a * at(k));
    if (scale > 0.0) worst = std::max(worst, std::abs(lhs - rhs) / scale);
  }
  return worst;
}

}  // namespace

auto yaglom_recursion(const ModelParams& p, const YaglomOptions& options) -> YaglomSolution {
  if (!(p.c > 0.0)) {
    throw UnsupportedRegime("yaglom_recursion needs c > 0; without competition the tail is not controlled");
  }
  p.validate();
  if (options.cap < 2) throw InvalidArgument("yaglom_recursion needs K >= 2");
  auto co = Coefficients{p};
  auto sol = YaglomSolution{};
  sol.params = p;
  sol.cap = options.cap;
  auto [lo, hi] = options.bracket.value_or(std::pair{0.0, std::min(1.0, (p.b + p.d) / p.d)});
  if (!(lo >= 0.0 && hi > lo)) throw InvalidArgument("yaglom_recursion: bad bracket");
  if (forward_turns_negative(co, p.d * lo, options.cap) || !forward_turns_negative(co, p.d * hi, options.cap)) {
    throw BracketFailure("yaglom_recursion: no sign change of the nonnegativity criterion in [" +
                         format_double(lo) + ", " + format_double(hi) + "]");
  }
  auto iterations = 0;
  while (iterations < options.max_iterations) {
    auto mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    ++iterations;
    if (forward_turns_negative(co, p.d * mid, options.cap)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  if (!(hi - lo <= options.tol)) {
    throw NumericalFailure("yaglom_recursion: bisection did not reach the tolerance");
  }
  sol.iterations = iterations;
  sol.pmf = backward_pmf(co, p.d * lo, options.cap);
  if (std::any_of(sol.pmf.begin(), sol.pmf.end(), [](double v) { return !(v >= 0.0); })) {
    throw NumericalFailure("yaglom_recursion: negative or non-finite probability");
  }
  sol.a = p.d * sol.pmf.front();
  sol.residual = relation_residual(co, sol.pmf, sol.a);
  auto rho = co.birth(options.cap) / co.death(options.cap + 1);
  sol.tail = rho < 1.0 ? sol.pmf.back() * rho / (1.0 - rho) : std::numeric_limits<double>::infinity();
  if (!(sol.tail <= options.tol)) {
    throw CapTooSmall("yaglom_recursion: tail bound " + format_double(sol.tail) + " exceeds tol; increase K");
  }
  return sol;
}

auto yaglom_pgf(const YaglomSolution& sol, double theta) -> double {
  auto sum = 0.0;
  auto power = theta;
  for (auto v : sol.pmf) {
    sum += v * power;
    power *= theta;
  }
  return sum;
}

auto yaglom_feynman_kac(const ModelParams& p, double a, std::span<const double> thetas,
                        const FkOptions& options, std::uint64_t seed) -> std::vector<FkEstimate> {
  p.validate();
  if (!(options.dt > 0.0) || options.paths < 2) throw InvalidArgument("yaglom_feynman_kac needs dt > 0 and 2 paths");
  auto results = std::vector<FkEstimate>{};
  auto sqrt_dt = std::sqrt(options.dt);
  for (auto index = std::size_t{0}; index < thetas.size(); ++index) {
    auto theta = thetas[index];
    if (!(theta >= 0.0 && theta <= 1.0)) throw InvalidArgument("yaglom_feynman_kac needs theta in [0, 1]");
    auto est = FkEstimate{theta, 0.0, 0.0, options.paths, 0, 0.0};
    if (theta == 0.0 || theta == 1.0) {
      est.g = theta;
      results.push_back(est);
      continue;
    }
    // weight per path; NaN marks a censored path.
    auto weights = std::vector<double>(options.paths);
    parallel_for(options.paths, [&](std::size_t r) {
      auto rng = Rng{seed, r, index};
      auto x = theta;
      for (auto step = std::size_t{0}; step < options.step_budget; ++step) {
        auto drift = (p.d - p.b * x) * (1.0 - x);
        auto noise = std::sqrt(std::max(0.0, 2.0 * p.c * x * (1.0 - x)));
        auto next = x + drift * options.dt + noise * sqrt_dt * rng.normal();
        if (next <= 0.0) {
          // Linear interpolation of the crossing inside the step.
          auto t0 = (static_cast<double>(step) + x / (x - next)) * options.dt;
          weights[r] = std::exp(a * t0);
          return;
        }
        if (next >= 1.0) {
          weights[r] = 0.0;
          return;
        }
        x = next;
      }
      weights[r] = std::nan("");
    });
    auto kept = std::vector<double>{};
    for (auto w : weights) {
      if (std::isnan(w)) {
        ++est.censored;
      } else {
        kept.push_back(w);
      }
    }
    if (kept.size() < 2) throw NumericalFailure("yaglom_feynman_kac: every path exceeded the step budget");
    auto stat = mean_se(kept);
    est.g = 1.0 - stat.mean;
    est.se = stat.se;
    est.censored_weight_bound = static_cast<double>(est.censored) / static_cast<double>(options.paths) *
                                std::exp(a * static_cast<double>(options.step_budget) * options.dt);
    results.push_back(est);
  }
  return results;
}

namespace {

auto pmf_from_samples(EmpiricalPmf& out) {
  auto top = std::int64_t{0};
  for (auto z : out.samples) top = std::max(top, z);
  out.probs.assign(static_cast<std::size_t>(top), 0.0);
  for (auto z : out.samples) out.probs[static_cast<std::size_t>(z - 1)] += 1.0;
  auto n = static_cast<double>(out.samples.size());
  out.se.resize(out.probs.size());
  for (auto i = std::size_t{0}; i < out.probs.size(); ++i) {
    out.probs[i] /= n;
    out.se[i] = std::sqrt(out.probs[i] * (1.0 - out.probs[i]) / n);
  }
}

}  // namespace

auto yaglom_empirical(const ModelParams& p, double horizon, std::int64_t z0, std::size_t replicates,
                      std::uint64_t seed, const EmpiricalOptions& options) -> EmpiricalPmf {
  p.validate();
  if (z0 < 1) throw InvalidArgument("yaglom_empirical needs z0 >= 1");
  if (!(horizon > 0.0)) throw InvalidArgument("yaglom_empirical needs T > 0");
  if (replicates < 1) throw InvalidArgument("yaglom_empirical needs at least one replicate");
  auto out = EmpiricalPmf{};
  out.method = options.method;
  if (options.method == ConditioningMethod::rejection) {
    constexpr std::size_t kChunk = 4096;
    auto finals = std::vector<std::int64_t>(kChunk);
    while (out.samples.size() < replicates) {
      auto base = out.attempts;
      parallel_for(kChunk, [&](std::size_t i) {
        auto rng = Rng{seed, base + i, 0};
        finals[i] = simulate_final_state(p, z0, horizon, rng);
      });
      for (auto i = std::size_t{0}; i < kChunk && out.samples.size() < replicates; ++i) {
        ++out.attempts;
        if (finals[i] > 0) out.samples.push_back(finals[i]);
      }
      auto rate = static_cast<double>(out.samples.size()) / static_cast<double>(out.attempts);
      if (out.attempts >= options.pilot_attempts && rate < 1e-4) {
        out.impractical = true;
        break;
      }
    }
    out.accepted = out.samples.size();
    out.acceptance_rate = static_cast<double>(out.accepted) / static_cast<double>(out.attempts);
    if (out.accepted > 0) pmf_from_samples(out);
    return out;
  }

  if (options.stages < 1) throw InvalidArgument("staged conditioning needs at least one stage");
  auto stage_length = horizon / static_cast<double>(options.stages);
  auto particles = std::vector<std::int64_t>(replicates, z0);
  auto next = std::vector<std::int64_t>(replicates);
  auto log_acceptance = 0.0;
  auto survivors = std::vector<std::int64_t>{};
  for (auto stage = std::size_t{0}; stage + 1 < options.stages; ++stage) {
    parallel_for(replicates, [&](std::size_t i) {
      auto rng = Rng{seed, i, 100 + stage};
      next[i] = simulate_final_state(p, particles[i], stage_length, rng);
    });
    out.attempts += replicates;
    survivors.clear();
    for (auto z : next) {
      if (z > 0) survivors.push_back(z);
    }
    if (survivors.empty()) throw NumericalFailure("staged conditioning: every particle went extinct in one stage");
    log_acceptance += std::log(static_cast<double>(survivors.size()) / static_cast<double>(replicates));
    auto rng = Rng{seed, stage, 99};
    for (auto& z : particles) z = survivors[rng.index(survivors.size())];
  }
  // Last stage: propagate particles cyclically until `replicates` survive.
  auto last = options.stages - 1;
  survivors.clear();
  auto tries = std::size_t{0};
  while (survivors.size() < replicates) {
    if (tries >= options.pilot_attempts && survivors.empty()) {
      throw NumericalFailure("staged conditioning: no survivor in the last stage");
    }
    auto rng = Rng{seed, tries, 100 + last};
    auto z = simulate_final_state(p, particles[tries % replicates], stage_length, rng);
    ++tries;
    if (z > 0) survivors.push_back(z);
  }
  out.attempts += tries;
  log_acceptance += std::log(static_cast<double>(survivors.size()) / static_cast<double>(tries));
  out.samples = survivors;
  out.accepted = survivors.size();
  out.acceptance_rate = std::exp(log_acceptance);
  pmf_from_samples(out);
  return out;
}

void write_yaglom_json(std::ostream& out, const YaglomSolution& sol) {
  auto j = nlohmann::ordered_json{};
  j["params"] = {{"b", sol.params.b}, {"c", sol.params.c}, {"d", sol.params.d}};
  j["a"] = sol.a;
  j["K"] = sol.cap;
  j["pmf"] = sol.pmf;
  j["tail"] = sol.tail;
  j["method"] = sol.method;
  out << j.dump(2) << '\n';
}

void write_empirical_csv(std::ostream& out, const EmpiricalPmf& pmf) {
  out << "k,prob,se\n";
  for (auto i = std::size_t{0}; i < pmf.probs.size(); ++i) {
    out << i + 1 << ',' << format_double(pmf.probs[i]) << ',' << format_double(pmf.se[i]) << '\n';
  }
}

void write_fk_csv(std::ostream& out, std::span<const FkEstimate> estimates) {
  out << "theta,g,se,paths,censored\n";
  for (const auto& e : estimates) {
    out << format_double(e.theta) << ',' << format_double(e.g) << ',' << format_double(e.se) << ',' << e.paths
        << ',' << e.censored << '\n';
  }
}

}  // namespace lbp
