#include "lbp/conditioning.h"

#include <algorithm>
#include <array>
#include <boost/math/distributions/beta.hpp>
#include <cmath>
#include <json.hpp>
#include <limits>
#include <ostream>

#include "lbp/error.h"
#include "lbp/format.h"
#include "lbp/parallel.h"

namespace lbp {

namespace {

// 1 - (1 - x)^k for k = 1..kmax, accumulated into out.
void add_survival_terms(double x, int kmax, double scale, std::vector<double>& out) {
  auto log_q = std::log1p(-x);
  for (int k = 1; k <= kmax; ++k) out[static_cast<std::size_t>(k - 1)] += scale * -std::expm1(k * log_q);
}

auto summarize(double t, int kmax, std::vector<std::vector<double>> batch_values,
               std::span<const double> batch_survival) -> SurvivalMoments {
  auto m = SurvivalMoments{};
  m.t = t;
  m.values.resize(static_cast<std::size_t>(kmax));
  m.se.resize(static_cast<std::size_t>(kmax));
  auto column = std::vector<double>(batch_values.size());
  for (auto k = std::size_t{0}; k < static_cast<std::size_t>(kmax); ++k) {
    for (auto b = std::size_t{0}; b < batch_values.size(); ++b) column[b] = batch_values[b][k];
    auto stat = mean_se(column);
    m.values[k] = stat.mean;
    m.se[k] = stat.se;
    if (!(stat.se <= 0.01 * stat.mean)) m.flagged = true;
  }
  auto surv = mean_se(batch_survival);
  m.survival = surv.mean;
  m.survival_se = surv.se;
  m.batch_values = std::move(batch_values);
  return m;
}

void check_moment_inputs(const WfParams& wf, int kmax, const MomentOptions& options) {
  wf.validate();
  if (kmax < 1) throw InvalidArgument("survival moments need kmax >= 1");
  if (options.batches < 2) throw InvalidArgument("survival moments need at least 2 batches");
  if (options.paths < 2 * options.batches) {
    throw InvalidArgument("survival moments need at least 2 paths per batch");
  }
}

}  // namespace

auto survival_moments_at(const WfParams& wf, std::span<const double> times, int kmax,
                         const MomentOptions& options, std::uint64_t seed)
    -> std::vector<SurvivalMoments> {
  check_moment_inputs(wf, kmax, options);
  if (times.empty()) throw InvalidArgument("survival_moments_at: no times requested");
  auto dt = options.dt > 0.0 ? options.dt : default_sde_dt(wf);
  auto checkpoints = std::vector<std::size_t>{};
  for (auto t : times) {
    if (!(t > 0.0) || !std::isfinite(t)) throw InvalidArgument("survival moments need t > 0");
  }
  if (times.size() == 1) {
    auto steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(times[0] / dt - 1e-9)));
    dt = times[0] / static_cast<double>(steps);
    checkpoints.push_back(steps);
  } else {
    for (auto t : times) {
      checkpoints.push_back(std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(t / dt))));
    }
  }
  auto last = *std::max_element(checkpoints.begin(), checkpoints.end());
  auto batches = options.batches;
  auto per_batch = options.paths / batches;
  auto k_count = static_cast<std::size_t>(kmax);
  // estimates[b][checkpoint] -> values; survival[b][checkpoint]
  auto estimates = std::vector<std::vector<std::vector<double>>>(
      batches, std::vector<std::vector<double>>(times.size(), std::vector<double>(k_count, 0.0)));
  auto survival = std::vector<std::vector<double>>(batches, std::vector<double>(times.size(), 0.0));

  parallel_for(batches, [&](std::size_t b) {
    auto rng = Rng{seed, b, 0};
    auto x = std::vector<double>(per_batch, 1.0);
    auto dead = std::vector<std::size_t>{};
    auto living = std::vector<std::size_t>{};
    auto log_survival = 0.0;
    auto extinct = false;
    for (auto step = std::size_t{1}; step <= last && !extinct; ++step) {
      dead.clear();
      for (auto i = std::size_t{0}; i < per_batch; ++i) {
        x[i] = sde_step(wf, x[i], dt, rng);
        if (x[i] <= 0.0) dead.push_back(i);
      }
      if (!dead.empty()) {
        if (dead.size() == per_batch) {
          extinct = true;
          break;
        }
        log_survival += std::log(static_cast<double>(per_batch - dead.size()) /
                                 static_cast<double>(per_batch));
        living.clear();
        for (auto i = std::size_t{0}; i < per_batch; ++i) {
          if (x[i] > 0.0) living.push_back(i);
        }
        for (auto i : dead) x[i] = x[living[rng.index(living.size())]];
      }
      for (auto c = std::size_t{0}; c < checkpoints.size(); ++c) {
        if (checkpoints[c] != step) continue;
        auto weight = std::exp(log_survival);
        survival[b][c] = weight;
        auto scale = weight / static_cast<double>(per_batch);
        for (auto xi : x) add_survival_terms(xi, kmax, scale, estimates[b][c]);
      }
    }
  });

  auto result = std::vector<SurvivalMoments>{};
  for (auto c = std::size_t{0}; c < times.size(); ++c) {
    auto batch_values = std::vector<std::vector<double>>(batches);
    auto batch_survival = std::vector<double>(batches);
    for (auto b = std::size_t{0}; b < batches; ++b) {
      batch_values[b] = estimates[b][c];
      batch_survival[b] = survival[b][c];
    }
    result.push_back(summarize(static_cast<double>(checkpoints[c]) * dt, kmax, std::move(batch_values),
                               batch_survival));
  }
  return result;
}

auto survival_moments(const WfParams& wf, double t, int kmax, const MomentOptions& options,
                      std::uint64_t seed) -> SurvivalMoments {
  auto times = std::array<double, 1>{t};
  auto result = survival_moments_at(wf, times, kmax, options, seed);
  result.front().t = t;
  return std::move(result.front());
}

auto survival_moments_moran(const WfParams& wf, std::int32_t n, double t, int kmax,
                            std::size_t paths, std::size_t batches, std::uint64_t seed)
    -> SurvivalMoments {
  wf.validate();
  if (n < 2) throw InvalidArgument("survival_moments_moran: n must be at least 2");
  if (!(t > 0.0)) throw InvalidArgument("survival_moments_moran: t must be positive");
  if (kmax < 1 || batches < 2 || paths < 2 * batches) {
    throw InvalidArgument("survival_moments_moran: need kmax >= 1 and 2 paths per batch");
  }
  auto size = static_cast<double>(n);
  auto per_batch = paths / batches;
  auto batch_values = std::vector<std::vector<double>>(batches, std::vector<double>(static_cast<std::size_t>(kmax), 0.0));
  auto batch_survival = std::vector<double>(batches, 0.0);
  parallel_for(batches, [&](std::size_t b) {
    for (auto r = std::size_t{0}; r < per_batch; ++r) {
      auto rng = Rng{seed, b * per_batch + r, 2};
      auto x = size;
      auto time = 0.0;
      while (x > 0.0) {
        auto mixed = x * (size - x);
        auto up = (0.5 * wf.nu + wf.s / size) * mixed;
        auto down = 0.5 * wf.nu * mixed + wf.mu * x;
        auto total = up + down;
        if (total <= 0.0) break;
        time += rng.exponential(total);
        if (time > t) break;
        x += rng.uniform() * total < up ? 1.0 : -1.0;
      }
      auto scale = 1.0 / static_cast<double>(per_batch);
      if (x > 0.0) {
        batch_survival[b] += scale;
        add_survival_terms(x / size, kmax, scale, batch_values[b]);
      }
    }
  });
  return summarize(t, kmax, std::move(batch_values), batch_survival);
}

auto moment_ratio(const SurvivalMoments& m, int i, int j) -> MeanSe {
  auto vi = m.values.at(static_cast<std::size_t>(i - 1));
  auto vj = m.values.at(static_cast<std::size_t>(j - 1));
  if (!(vj > 0.0)) throw NumericalFailure("moment_ratio: zero denominator (no surviving paths)");
  auto ratio = vi / vj;
  auto residuals = std::vector<double>{};
  for (const auto& batch : m.batch_values) {
    residuals.push_back(batch[static_cast<std::size_t>(i - 1)] - ratio * batch[static_cast<std::size_t>(j - 1)]);
  }
  return {ratio, mean_se(residuals).se / vj, m.batch_values.size()};
}

auto RateTable::up_rate(std::int64_t k) const -> double {
  if (k < 1 || k >= cap) return 0.0;
  return up[static_cast<std::size_t>(k)];
}

auto RateTable::down_rate(std::int64_t k) const -> double {
  if (k < 2 || k > cap) return 0.0;
  return down[static_cast<std::size_t>(k)];
}

auto rate_table_from_moments(const ModelParams& p, double horizon, double t, int cap,
                             const SurvivalMoments& moments) -> RateTable {
  p.validate();
  if (cap < 2) throw InvalidArgument("rate table needs K >= 2");
  if (static_cast<int>(moments.values.size()) < cap) {
    throw InvalidArgument("rate table needs survival moments up to K");
  }
  auto table = RateTable{};
  table.params = p;
  table.kind = RateTableKind::fixed_horizon;
  table.cap = cap;
  table.horizon = horizon;
  table.time = t;
  auto size = static_cast<std::size_t>(cap) + 1;
  table.up.assign(size, 0.0);
  table.down.assign(size, 0.0);
  table.up_se.assign(size, 0.0);
  table.down_se.assign(size, 0.0);
  for (int k = 1; k <= cap; ++k) {
    auto rates = jump_rates(k, p);
    auto idx = static_cast<std::size_t>(k);
    if (k < cap) {
      auto r = moment_ratio(moments, k + 1, k);
      table.up[idx] = rates.up * r.mean;
      table.up_se[idx] = rates.up * r.se;
    }
    if (k >= 2) {
      auto r = moment_ratio(moments, k - 1, k);
      table.down[idx] = rates.down * r.mean;
      table.down_se[idx] = rates.down * r.se;
    }
  }
  auto worst = 0.0;
  for (auto k = std::size_t{0}; k < moments.values.size(); ++k) {
    worst = std::max(worst, moments.se[k] / moments.values[k]);
  }
  table.flagged = moments.flagged;
  table.diagnostics = {{"survival_probability", moments.survival},
                       {"survival_probability_se", moments.survival_se},
                       {"remaining_time", moments.t},
                       {"max_relative_se", worst},
                       {"batches", static_cast<double>(moments.batch_values.size())}};
  return table;
}

auto rate_table_T(const ModelParams& p, double horizon, double t, int cap,
                  const MomentOptions& options, std::uint64_t seed) -> RateTable {
  p.validate();
  if (!(t >= 0.0 && t < horizon)) throw InvalidArgument("rate_table_T needs 0 <= t < T");
  auto moments = survival_moments(dual_wf_params(p), horizon - t, cap, options, seed);
  auto table = rate_table_from_moments(p, horizon, t, cap, moments);
  table.diagnostics["paths"] = static_cast<double>(options.paths);
  table.diagnostics["dt"] = options.dt > 0.0 ? options.dt : default_sde_dt(dual_wf_params(p));
  return table;
}

auto rstar_ratios(const DensityGrid& grid, int kmax) -> std::vector<double> {
  auto moments = std::vector<double>(static_cast<std::size_t>(kmax) + 1);
  for (int k = 1; k <= kmax + 1; ++k) moments[static_cast<std::size_t>(k - 1)] = grid_survival_moment(grid, k);
  auto ratios = std::vector<double>(static_cast<std::size_t>(kmax));
  for (int k = 1; k <= kmax; ++k) {
    ratios[static_cast<std::size_t>(k - 1)] = moments[static_cast<std::size_t>(k)] / moments[static_cast<std::size_t>(k - 1)];
  }
  return ratios;
}

void check_sandwich(std::span<const double> ratios, double slack) {
  for (auto i = std::size_t{0}; i < ratios.size(); ++i) {
    auto k = static_cast<double>(i + 1);
    auto upper = (k + 1.0) / k;
    if (!(ratios[i] >= 1.0 - slack && ratios[i] <= upper + slack)) {
      throw NumericalFailure("r*_{k+1,k} outside [1, (k+1)/k] at k = " + std::to_string(i + 1) +
                             ": " + format_double(ratios[i]));
    }
  }
}

auto rate_table_Q(const ModelParams& p, int cap, std::size_t grid_size) -> RateTable {
  p.validate();
  if (cap < 2) throw InvalidArgument("rate table needs K >= 2");
  auto grid = pi_star(dual_wf_params(p), grid_size);
  auto ratios = rstar_ratios(grid, cap);
  check_sandwich(ratios);
  auto table = RateTable{};
  table.params = p;
  table.kind = RateTableKind::q_process;
  table.cap = cap;
  auto size = static_cast<std::size_t>(cap) + 1;
  table.up.assign(size, 0.0);
  table.down.assign(size, 0.0);
  table.up_se.assign(size, 0.0);
  table.down_se.assign(size, 0.0);
  for (int k = 1; k <= cap; ++k) {
    auto rates = jump_rates(k, p);
    auto idx = static_cast<std::size_t>(k);
    if (k < cap) table.up[idx] = rates.up * ratios[idx - 1];
    if (k >= 2) table.down[idx] = rates.down / ratios[idx - 2];
  }
  table.diagnostics = {{"grid_size", static_cast<double>(grid_size)},
                       {"log_normalizer", grid.log_normalizer},
                       {"edge_share", grid.edge_share},
                       {"density_uses_scale_squared", grid.form == PiStarForm::speed_times_scale_squared ? 1.0 : 0.0}};
  return table;
}

auto q_stationary(const RateTable& table) -> StationaryPmf {
  if (table.kind != RateTableKind::q_process) {
    throw InvalidArgument("q_stationary needs a Q-process rate table");
  }
  auto cap = table.cap;
  auto logs = std::vector<double>(static_cast<std::size_t>(cap));
  for (int k = 1; k < cap; ++k) {
    logs[static_cast<std::size_t>(k)] =
        logs[static_cast<std::size_t>(k - 1)] + std::log(table.up_rate(k)) - std::log(table.down_rate(k + 1));
  }
  auto top = *std::max_element(logs.begin(), logs.end());
  auto pmf = StationaryPmf{};
  pmf.probs.resize(logs.size());
  auto total = 0.0;
  for (auto i = std::size_t{0}; i < logs.size(); ++i) {
    pmf.probs[i] = std::exp(logs[i] - top);
    total += pmf.probs[i];
  }
  for (auto& v : pmf.probs) v /= total;
  for (int k = 1; k < cap; ++k) {
    auto lhs = pmf.probs[static_cast<std::size_t>(k - 1)] * table.up_rate(k);
    auto rhs = pmf.probs[static_cast<std::size_t>(k)] * table.down_rate(k + 1);
    auto scale = std::max(std::abs(lhs), std::abs(rhs));
    if (scale > 0.0) pmf.balance_residual = std::max(pmf.balance_residual, std::abs(lhs - rhs) / scale);
  }
  // Beyond K, up(k) / down(k+1) <= b (k+1) / (k (d + c k)), which decreases in k.
  const auto& p = table.params;
  auto k = static_cast<double>(cap);
  auto rho = p.b * (k + 1.0) / (k * (p.d + p.c * k));
  pmf.tail_bound = rho < 1.0 ? pmf.probs.back() * rho / (1.0 - rho) : std::numeric_limits<double>::infinity();
  if (!(pmf.tail_bound <= 1e-6)) {
    throw CapTooSmall("q_stationary: tail mass bound " + format_double(pmf.tail_bound) +
                      " exceeds 1e-6; increase K");
  }
  return pmf;
}

auto q_process_occupation(const RateTable& table, std::int64_t z0, std::size_t events, Rng& rng)
    -> std::vector<double> {
  if (z0 < 1 || z0 > table.cap) throw InvalidArgument("q_process_occupation: z0 outside [1, K]");
  auto occupation = std::vector<double>(static_cast<std::size_t>(table.cap), 0.0);
  auto z = z0;
  auto total_time = 0.0;
  for (auto e = std::size_t{0}; e < events; ++e) {
    auto up = table.up_rate(z);
    auto down = table.down_rate(z);
    auto hold = rng.exponential(up + down);
    occupation[static_cast<std::size_t>(z - 1)] += hold;
    total_time += hold;
    z += rng.uniform() * (up + down) < up ? 1 : -1;
  }
  for (auto& v : occupation) v /= total_time;
  return occupation;
}

auto alpha_value(const WfParams& wf, AlphaConvention convention) -> double {
  auto growth = wf.s - wf.mu;
  switch (convention) {
    case AlphaConvention::two_growth:
      return 2.0 * growth / wf.nu;
    case AlphaConvention::scaled_growth:
      return wf.s * growth / wf.nu;
    case AlphaConvention::linearised:
      return growth / wf.nu;
  }
  return 0.0;
}

namespace {

void check_weak_regime(const WfParams& wf) {
  wf.validate();
  if (!(wf.nu > 0.0)) throw InvalidArgument("weak-competition approximation needs nu > 0");
  if (!(wf.s > wf.mu)) throw UnsupportedRegime("weak-competition approximation needs s > mu");
}

}  // namespace

auto beta_approximation(const WfParams& wf, AlphaConvention convention) -> BetaApproximation {
  check_weak_regime(wf);
  auto alpha = alpha_value(wf, convention);
  auto pbar = 1.0 - wf.mu / wf.s;
  return {2.0 * alpha * pbar, 2.0 * alpha * (1.0 - pbar)};
}

auto BetaApproximation::pdf(double x) const -> double {
  return boost::math::pdf(boost::math::beta_distribution<double>{shape_a, shape_b}, x);
}

auto BetaApproximation::cdf(double x) const -> double {
  return boost::math::cdf(boost::math::beta_distribution<double>{shape_a, shape_b}, std::clamp(x, 0.0, 1.0));
}

auto r_star_weak(const WfParams& wf, int k, AlphaConvention convention) -> double {
  if (k < 1) throw InvalidArgument("r_star_weak needs k >= 1");
  auto beta = beta_approximation(wf, convention);
  // E[(1 - p)^k] = prod_{j<k} (B + j) / (A + B + j), summed in log space.
  auto log_tail = [&](int m) {
    auto sum = 0.0;
    for (int j = 0; j < m; ++j) sum += std::log1p(-beta.shape_a / (beta.shape_a + beta.shape_b + j));
    return sum;
  };
  auto numerator = -std::expm1(log_tail(k + 1));
  auto denominator = -std::expm1(log_tail(k));
  auto ratio = numerator / denominator;
  if (!std::isfinite(ratio)) throw NumericalFailure("r_star_weak: non-finite ratio");
  return ratio;
}

auto r_star_weak_limit(const WfParams& wf, int k) -> double {
  check_weak_regime(wf);
  if (k < 1) throw InvalidArgument("r_star_weak_limit needs k >= 1");
  auto log_rho = std::log(wf.mu / wf.s);
  return std::expm1((k + 1) * log_rho) / std::expm1(k * log_rho);
}

auto scaling_check(double b, double c, std::span<const int> caps, double horizon,
                   const ScalingOptions& options, std::uint64_t seed) -> std::vector<ScalingRow> {
  if (!(b >= 0.0) || !(c >= 0.0)) throw InvalidArgument("scaling_check needs b >= 0 and c >= 0");
  if (!(horizon >= 0.0)) throw InvalidArgument("scaling_check needs horizon >= 0");
  if (options.paths < 2 || !(options.x0 > 0.0)) throw InvalidArgument("scaling_check needs paths >= 2 and x0 > 0");
  for (auto i = std::size_t{1}; i < caps.size(); ++i) {
    if (caps[i] <= caps[i - 1]) throw InvalidArgument("scaling_check needs an increasing K sequence");
  }
  auto rows = std::vector<ScalingRow>{};
  for (auto index = std::size_t{0}; index < caps.size(); ++index) {
    auto cap = caps[index];
    auto k = static_cast<double>(cap);
    auto p = ModelParams{0.5, c / (k * k), 0.5 - b / k};
    if (!(p.d > 0.0)) throw InvalidArgument("scaling_check needs K > 2 b");
    auto z0 = static_cast<std::int64_t>(std::llround(options.x0 * k));
    auto branching = std::vector<double>(options.paths);
    auto diffusion = std::vector<double>(options.paths);
    auto lane = 2 * index + 10;
    parallel_for(options.paths, [&](std::size_t r) {
      if (horizon == 0.0) {
        branching[r] = static_cast<double>(z0) / k;
        diffusion[r] = static_cast<double>(z0) / k;
        return;
      }
      auto rng = Rng{seed, r, lane};
      branching[r] = static_cast<double>(simulate_final_state(p, z0, horizon * k, rng)) / k;
      auto sde_rng = Rng{seed, r, lane + 1};
      auto steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(horizon / options.dt - 1e-9)));
      auto h = horizon / static_cast<double>(steps);
      auto x = static_cast<double>(z0) / k;
      for (auto s = std::size_t{0}; s < steps && x > 0.0; ++s) {
        x = std::max(0.0, x + (b * x - c * x * x) * h + std::sqrt(x * h) * sde_rng.normal());
      }
      diffusion[r] = x;
    });
    rows.push_back({cap, wasserstein1(branching, diffusion), mean_se(branching), mean_se(diffusion)});
  }
  return rows;
}

void write_rate_table_json(std::ostream& out, const RateTable& table) {
  auto j = nlohmann::ordered_json{};
  j["params"] = {{"b", table.params.b}, {"c", table.params.c}, {"d", table.params.d}};
  if (table.kind == RateTableKind::q_process) {
    j["kind"] = "q_process";
  } else {
    j["kind"] = {{"type", "fixed_horizon"}, {"T", table.horizon}, {"t", table.time}};
  }
  j["K"] = table.cap;
  auto up = std::vector<double>(table.up.begin() + 1, table.up.begin() + table.cap);
  auto down = std::vector<double>(table.down.begin() + 2, table.down.end());
  j["up"] = up;
  j["down"] = down;
  auto diagnostics = nlohmann::ordered_json::object();
  for (const auto& [key, value] : table.diagnostics) diagnostics[key] = value;
  diagnostics["flagged"] = table.flagged;
  if (table.kind == RateTableKind::fixed_horizon) {
    diagnostics["up_se"] = std::vector<double>(table.up_se.begin() + 1, table.up_se.begin() + table.cap);
    diagnostics["down_se"] = std::vector<double>(table.down_se.begin() + 2, table.down_se.end());
  }
  j["diagnostics"] = diagnostics;
  out << j.dump(2) << '\n';
}

void write_stationary_csv(std::ostream& out, const StationaryPmf& pmf) {
  out << "k,prob\n";
  for (auto i = std::size_t{0}; i < pmf.probs.size(); ++i) {
    out << i + 1 << ',' << format_double(pmf.probs[i]) << '\n';
  }
}

}  // namespace lbp
