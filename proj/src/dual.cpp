#include "lbp/dual.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

#include "lbp/error.h"
#include "lbp/format.h"
#include "lbp/parallel.h"

namespace lbp {

void WfParams::validate() const {
  auto ok = [](double v) { return std::isfinite(v) && v >= 0.0; };
  if (!ok(s) || !ok(nu) || !ok(mu)) throw InvalidArgument("diffusion rates must be finite and >= 0");
}

auto dual_wf_params(const ModelParams& p) -> WfParams { return {p.b, 2.0 * p.c, p.d}; }

auto dual_model_params(const WfParams& wf) -> ModelParams { return {wf.s, 0.5 * wf.nu, wf.mu}; }

auto moran_simulate(std::int32_t n, const WfParams& wf, double t, Rng& rng) -> MoranRealization {
  wf.validate();
  if (n < 2) throw InvalidArgument("moran_simulate: population size must be at least 2");
  if (!(t > 0.0)) throw InvalidArgument("moran_simulate: horizon must be positive");
  auto size = static_cast<double>(n);
  auto mutation_total = size * wf.mu;
  auto resampling_total = size * (size - 1.0) * 0.5 * wf.nu;
  auto selection_total = (size - 1.0) * wf.s;
  auto total = mutation_total + resampling_total + selection_total;
  auto real = MoranRealization{n, t, {}};
  if (total <= 0.0) return real;
  auto draw_pair = [&](MoranEvent& e) {
    e.i = static_cast<std::int32_t>(rng.index(static_cast<std::uint64_t>(n)));
    e.j = static_cast<std::int32_t>(rng.index(static_cast<std::uint64_t>(n - 1)));
    if (e.j >= e.i) ++e.j;
  };
  for (auto time = rng.exponential(total); time <= t; time += rng.exponential(total)) {
    auto e = MoranEvent{};
    e.time = time;
    auto u = rng.uniform() * total;
    if (u < mutation_total) {
      e.kind = MoranEventKind::mutation;
      e.i = static_cast<std::int32_t>(rng.index(static_cast<std::uint64_t>(n)));
      e.j = e.i;
    } else if (u < mutation_total + resampling_total) {
      e.kind = MoranEventKind::resampling;
      draw_pair(e);
    } else {
      e.kind = MoranEventKind::selection;
      draw_pair(e);
    }
    real.events.push_back(e);
  }
  return real;
}

auto moran_types(const MoranRealization& real) -> std::vector<bool> {
  auto type_a = std::vector<bool>(static_cast<std::size_t>(real.n), true);
  for (const auto& e : real.events) {
    auto i = static_cast<std::size_t>(e.i);
    auto j = static_cast<std::size_t>(e.j);
    switch (e.kind) {
      case MoranEventKind::mutation:
        type_a[i] = false;
        break;
      case MoranEventKind::resampling:
        type_a[i] = type_a[j];
        break;
      case MoranEventKind::selection:
        if (!type_a[i] && type_a[j]) type_a[i] = true;
        break;
    }
  }
  return type_a;
}

auto moran_frequency(const MoranRealization& real) -> double {
  auto types = moran_types(real);
  return static_cast<double>(std::count(types.begin(), types.end(), true)) /
         static_cast<double>(real.n);
}

auto asg_trace(const MoranRealization& real, std::span<const std::int32_t> sample) -> AsgTrace {
  if (sample.empty()) throw InvalidArgument("asg_trace: sample must be nonempty");
  auto traced = std::vector<char>(static_cast<std::size_t>(real.n), 0);
  for (auto i : sample) {
    if (i < 0 || i >= real.n) throw InvalidArgument("asg_trace: sample index out of range");
    if (traced[static_cast<std::size_t>(i)]) throw InvalidArgument("asg_trace: repeated sample index");
    traced[static_cast<std::size_t>(i)] = 1;
  }
  auto kappa = static_cast<std::int32_t>(sample.size());
  auto trace = AsgTrace{true, {0.0}, {kappa}};
  for (auto it = real.events.rbegin(); it != real.events.rend() && kappa > 0; ++it) {
    auto i = static_cast<std::size_t>(it->i);
    auto j = static_cast<std::size_t>(it->j);
    if (!traced[i]) continue;
    auto before = kappa;
    switch (it->kind) {
      case MoranEventKind::mutation:
        traced[i] = 0;
        --kappa;
        break;
      case MoranEventKind::resampling:
        traced[i] = 0;
        if (traced[j]) {
          --kappa;
        } else {
          traced[j] = 1;
        }
        break;
      case MoranEventKind::selection:
        if (!traced[j]) {
          traced[j] = 1;
          ++kappa;
        }
        break;
    }
    if (kappa != before) {
      trace.times.push_back(real.horizon - it->time);
      trace.kappa.push_back(kappa);
    }
  }
  trace.survived = kappa > 0;
  return trace;
}

auto coupled_divergence_time(const WfParams& wf, std::int32_t n, std::int32_t kappa0, double t_max,
                             Rng& rng) -> std::optional<double> {
  wf.validate();
  if (n < 2 || kappa0 < 1 || kappa0 > n) {
    throw InvalidArgument("coupled_divergence_time: need n >= 2 and 1 <= kappa0 <= n");
  }
  auto size = static_cast<double>(n);
  auto i = static_cast<double>(kappa0);
  auto t = 0.0;
  while (i > 0.0) {
    auto up_branching = wf.s * i;
    auto up_lineages = wf.s * i * (size - i) / size;
    auto down = wf.mu * i + 0.5 * wf.nu * i * (i - 1.0);
    auto total = up_branching + down;
    if (total <= 0.0) return std::nullopt;
    t += rng.exponential(total);
    if (t > t_max) return std::nullopt;
    auto u = rng.uniform() * total;
    if (u < up_lineages) {
      i += 1.0;
    } else if (u < up_branching) {
      return t;
    } else {
      i -= 1.0;
    }
  }
  return std::nullopt;
}

auto duality_check(const WfParams& wf, std::int32_t n, double t, std::int32_t max_sample,
                   std::size_t realizations, std::uint64_t seed) -> std::vector<DualityRow> {
  if (max_sample < 1 || max_sample > n) {
    throw InvalidArgument("duality_check: need 1 <= max_sample <= n");
  }
  auto sizes = static_cast<std::size_t>(max_sample);
  // Per realization and sample size: violation flag, lineage survival, moment.
  auto violated = std::vector<char>(realizations * sizes, 0);
  auto survived = std::vector<double>(realizations * sizes, 0.0);
  auto moment = std::vector<double>(realizations * sizes, 0.0);
  parallel_for(realizations, [&](std::size_t r) {
    auto event_rng = Rng(seed, r, 0);
    auto real = moran_simulate(n, wf, t, event_rng);
    auto types = moran_types(real);
    auto pick_rng = Rng(seed, r, 1);
    auto independent_rng = Rng(seed, r, 2);
    auto freq = moran_frequency(moran_simulate(n, wf, t, independent_rng));
    auto order = std::vector<std::int32_t>(static_cast<std::size_t>(n));
    for (std::int32_t i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    for (std::size_t k = 1; k <= sizes; ++k) {
      // Partial Fisher-Yates: order[0..k) is a uniform k-subset.
      auto swap_with = k - 1 + pick_rng.index(static_cast<std::uint64_t>(n) - (k - 1));
      std::swap(order[k - 1], order[swap_with]);
      auto sample = std::span<const std::int32_t>(order.data(), k);
      auto forward = std::any_of(sample.begin(), sample.end(),
                                 [&](std::int32_t i) { return types[static_cast<std::size_t>(i)]; });
      auto trace = asg_trace(real, sample);
      auto slot = r * sizes + (k - 1);
      violated[slot] = trace.survived != forward;
      survived[slot] = trace.survived ? 1.0 : 0.0;
      moment[slot] = 1.0 - std::pow(1.0 - freq, static_cast<double>(k));
    }
  });
  auto rows = std::vector<DualityRow>(sizes);
  auto column = std::vector<double>(realizations);
  for (std::size_t k = 0; k < sizes; ++k) {
    auto& row = rows[k];
    row.sample_size = static_cast<std::int32_t>(k + 1);
    row.realizations = realizations;
    for (std::size_t r = 0; r < realizations; ++r) row.violations += violated[r * sizes + k] ? 1 : 0;
    for (std::size_t r = 0; r < realizations; ++r) column[r] = survived[r * sizes + k];
    row.lineage_survival = mean_se(column);
    for (std::size_t r = 0; r < realizations; ++r) column[r] = moment[r * sizes + k];
    row.frequency_moment = mean_se(column);
  }
  return rows;
}

auto coupling_check(const WfParams& wf, std::span<const std::int32_t> sizes, std::int32_t kappa0,
                    double t_max, std::size_t runs, std::uint64_t seed) -> std::vector<CouplingRow> {
  auto rows = std::vector<CouplingRow>();
  for (std::size_t idx = 0; idx < sizes.size(); ++idx) {
    auto flags = std::vector<double>(runs, 0.0);
    parallel_for(runs, [&](std::size_t r) {
      auto rng = Rng(seed, r, 3 + idx);
      flags[r] = coupled_divergence_time(wf, sizes[idx], kappa0, t_max, rng) ? 1.0 : 0.0;
    });
    rows.push_back({sizes[idx], runs, mean_se(flags)});
  }
  return rows;
}

namespace {

constexpr double kMaxIncrement = 0.1;
constexpr int kMaxHalvings = 30;

// Euler step driven by Brownian increment dw. Increments above kMaxIncrement,
// or proposals rejected by `accept`, are split in two with a Brownian bridge
// draw so the driving path is preserved.
template <class Drift, class Noise, class Accept, class Fix>
auto euler_substep(double x, double dt, double dw, const Drift& drift, const Noise& noise,
                   const Accept& accept, const Fix& fix, Rng& rng, int depth) -> double {
  auto dx = drift(x) * dt + noise(x) * dw;
  if ((std::abs(dx) > kMaxIncrement || !accept(x + dx)) && depth < kMaxHalvings) {
    auto w1 = 0.5 * dw + std::sqrt(0.25 * dt) * rng.normal();
    auto mid = euler_substep(x, 0.5 * dt, w1, drift, noise, accept, fix, rng, depth + 1);
    return euler_substep(mid, 0.5 * dt, dw - w1, drift, noise, accept, fix, rng, depth + 1);
  }
  return fix(x, x + dx);
}

auto wf_drift(const WfParams& wf, double x) -> double { return -wf.mu * x + wf.s * x * (1.0 - x); }

auto wf_noise(const WfParams& wf, double x) -> double {
  return std::sqrt(std::max(0.0, wf.nu * x * (1.0 - x)));
}

auto step_count(double t, double dt) -> std::size_t {
  if (!(dt > 0.0)) throw InvalidArgument("step size must be positive");
  if (!(t > dt)) throw InvalidArgument("step size must be smaller than the horizon");
  return static_cast<std::size_t>(std::ceil(t / dt - 1e-9));
}

auto conditioned_step(const WfParams& wf, const ConditionedDrift& drift, double x, double dt,
                      Rng& rng) -> double {
  auto dw = std::sqrt(dt) * rng.normal();
  return euler_substep(
      x, dt, dw, [&](double y) { return drift(y); }, [&](double y) { return wf_noise(wf, y); },
      [](double y) { return y > 0.0; },
      [](double from, double to) {
        if (to > 0.0) return std::min(to, 1.0);
        // Reflect; an exact zero falls back to halving the distance.
        return -to > 0.0 ? std::min(-to, 1.0) : 0.5 * from;
      },
      rng, 0);
}

}  // namespace

auto sde_step(const WfParams& wf, double x, double dt, Rng& rng) -> double {
  if (x <= 0.0) return 0.0;
  auto dw = std::sqrt(dt) * rng.normal();
  return euler_substep(
      x, dt, dw, [&](double y) { return wf_drift(wf, y); }, [&](double y) { return wf_noise(wf, y); },
      [](double) { return true; }, [](double, double to) { return std::clamp(to, 0.0, 1.0); },
      rng, 0);
}

auto default_sde_dt(const WfParams& wf) -> double {
  auto fastest = std::max({wf.s, wf.mu, wf.nu});
  return fastest > 0.0 ? 1e-3 / fastest : 1e-3;
}

auto sde_simulate(const WfParams& wf, double p0, double t, double dt, Rng& rng) -> DiffusionPath {
  wf.validate();
  if (!(p0 >= 0.0 && p0 <= 1.0)) throw InvalidArgument("sde_simulate: p0 must lie in [0, 1]");
  auto n = step_count(t, dt);
  auto path = DiffusionPath{t / static_cast<double>(n), {}};
  path.values.reserve(n + 1);
  auto x = p0;
  path.values.push_back(x);
  for (auto i = std::size_t{0}; i < n; ++i) {
    x = sde_step(wf, x, path.dt, rng);
    path.values.push_back(x);
  }
  return path;
}

auto sde_simulate_conditioned(const WfParams& wf, const ConditionedDrift& drift, double p0, double t,
                              double dt, Rng& rng) -> DiffusionPath {
  wf.validate();
  if (!(p0 > 0.0 && p0 <= 1.0)) {
    throw InvalidArgument("sde_simulate_conditioned: p0 must lie in (0, 1]");
  }
  auto n = step_count(t, dt);
  auto path = DiffusionPath{t / static_cast<double>(n), {}};
  path.values.reserve(n + 1);
  auto x = p0;
  path.values.push_back(x);
  for (auto i = std::size_t{0}; i < n; ++i) {
    x = conditioned_step(wf, drift, x, path.dt, rng);
    path.values.push_back(x);
  }
  return path;
}

auto sde_simulate_conditioned(const WfParams& wf, double p0, double t, double dt, Rng& rng)
    -> DiffusionPath {
  if (!(p0 > 0.0 && p0 <= 1.0)) {
    throw InvalidArgument("sde_simulate_conditioned: p0 must lie in (0, 1]");
  }
  auto drift = ConditionedDrift{wf};
  return sde_simulate_conditioned(wf, drift, p0, t, dt, rng);
}

ScaleFunctions::ScaleFunctions(const WfParams& wf) : wf_{wf} {
  wf.validate();
  if (!(wf.nu > 0.0)) throw InvalidArgument("speed and scale need nu > 0");
  two_s_over_nu_ = 2.0 * wf.s / wf.nu;
  two_mu_over_nu_ = 2.0 * wf.mu / wf.nu;
}

auto ScaleFunctions::log_scale_density(double x, double xc) const -> double {
  return -two_s_over_nu_ * x - two_mu_over_nu_ * std::log(xc);
}

auto ScaleFunctions::scale_density(double x) const -> double {
  return std::exp(log_scale_density(x, 1.0 - x));
}

auto ScaleFunctions::log_scale(double x, double xc) const -> double {
  if (x <= 0.0) return -std::numeric_limits<double>::infinity();
  if (xc <= 0.0) return std::log(scale_at_one());
  // Near 0, log s(z) = slope z + O(a z^2) with a = 2 mu / nu.
  auto slope = two_mu_over_nu_ - two_s_over_nu_;
  if (x <= std::min(1e-3, 1e-6 / std::sqrt(std::max(two_mu_over_nu_, 1.0)))) {
    auto linear = slope * x;
    auto ratio = linear == 0.0 ? 1.0 : std::expm1(linear) / linear;
    return std::log(x) + std::log(ratio);
  }
  if (x <= 0.5) {
    // log s is convex with log s(0) = 0, so its maximum on [0, x] sits at an end.
    auto lmax = std::max(0.0, log_scale_density(x, xc));
    auto near_zero = [&](double z) { return std::exp(log_scale_density(z, 1.0 - z) - lmax); };
    return lmax + std::log(integrate(near_zero, 0.0, x));
  }
  auto lmax_half = std::max(0.0, log_scale_density(0.5, 0.5));
  auto log_first = lmax_half + std::log(integrate(
                                   [&](double z) { return std::exp(log_scale_density(z, 1.0 - z) - lmax_half); },
                                   0.0, 0.5));
  // On [xc, 1/2] substitute w = xc e^v; the exponent E(v) relative to log s(x)
  // is convex with E(0) = 0.
  auto upper = std::log(0.5 / xc);
  auto exponent = [&](double v) {
    return (1.0 - two_mu_over_nu_) * v + two_s_over_nu_ * xc * std::expm1(v);
  };
  auto emax = std::max(0.0, exponent(upper));
  auto inner = integrate([&](double v) { return std::exp(exponent(v) - emax); }, 0.0, upper);
  auto log_second = log_scale_density(x, xc) + std::log(xc) + emax + std::log(inner);
  auto hi = std::max(log_first, log_second);
  return hi + std::log(std::exp(log_first - hi) + std::exp(log_second - hi));
}

auto ScaleFunctions::scale(double x) const -> double { return std::exp(log_scale(x, 1.0 - x)); }

auto ScaleFunctions::log_speed(double x, double xc) const -> double {
  if (!(x > 0.0 && xc > 0.0)) throw InvalidArgument("speed density defined on (0, 1) only");
  return -log_scale_density(x, xc) - std::log(wf_.nu * x * xc);
}

auto ScaleFunctions::speed(double x) const -> double {
  if (!(x > 0.0 && x < 1.0)) throw InvalidArgument("speed density defined on (0, 1) only");
  return std::exp(log_speed(x, 1.0 - x));
}

auto ScaleFunctions::scale_finite_at_one() const -> bool { return two_mu_over_nu_ < 1.0; }

auto ScaleFunctions::scale_at_one() const -> double {
  if (!scale_finite_at_one()) return std::numeric_limits<double>::infinity();
  auto near_zero = [&](double z) { return std::exp(log_scale_density(z, 1.0 - z)); };
  auto near_one = [&](double w) { return std::exp(log_scale_density(1.0 - w, w)); };
  return integrate(near_zero, 0.0, 0.5) + integrate(near_one, 0.0, 0.5);
}

auto ScaleFunctions::repulsion(double x, double xc) const -> double {
  if (x <= 0.0) return 1.0;
  if (xc <= 0.0) return std::max(two_mu_over_nu_ - 1.0, 0.0);
  return std::exp(std::log(x) + std::log(xc) + log_scale_density(x, xc) - log_scale(x, xc));
}

ConditionedDrift::ConditionedDrift(const WfParams& wf, std::size_t table_size) : wf_{wf} {
  if (table_size < 3) throw InvalidArgument("ConditionedDrift: table too small");
  auto scale = ScaleFunctions{wf};
  q_.resize(table_size);
  for (auto i = std::size_t{0}; i < table_size; ++i) {
    auto angle = 0.5 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(table_size - 1);
    auto x = std::sin(angle) * std::sin(angle);
    auto xc = std::cos(angle) * std::cos(angle);
    if (i == 0) x = 0.0;
    if (i + 1 == table_size) xc = 0.0;
    q_[i] = scale.repulsion(x, xc);
  }
}

auto ConditionedDrift::repulsion(double x) const -> double {
  x = std::clamp(x, 0.0, 1.0);
  auto position = 2.0 / std::numbers::pi * std::asin(std::sqrt(x)) * static_cast<double>(q_.size() - 1);
  auto lo = std::min(static_cast<std::size_t>(position), q_.size() - 2);
  auto frac = position - static_cast<double>(lo);
  return q_[lo] + frac * (q_[lo + 1] - q_[lo]);
}

auto ConditionedDrift::operator()(double x) const -> double {
  return wf_drift(wf_, x) + wf_.nu * repulsion(x);
}

auto pi_star_form(const WfParams& wf) -> PiStarForm {
  return wf.mu >= wf.nu ? PiStarForm::speed_times_scale : PiStarForm::speed_times_scale_squared;
}

auto pi_star(const WfParams& wf, std::size_t grid_size) -> DensityGrid {
  return pi_star(wf, pi_star_form(wf), grid_size);
}

auto pi_star(const WfParams& wf, PiStarForm form, std::size_t grid_size) -> DensityGrid {
  wf.validate();
  if (!(wf.nu > 0.0) || !(wf.mu > 0.0)) throw InvalidArgument("pi_star needs nu > 0 and mu > 0");
  auto scale = ScaleFunctions{wf};
  auto rule = tanh_sinh_rule(grid_size);
  auto power = form == PiStarForm::speed_times_scale ? 1.0 : 2.0;
  auto grid = DensityGrid{};
  grid.form = form;
  auto logs = std::vector<double>(rule.nodes.size());
  auto top = -std::numeric_limits<double>::infinity();
  for (auto i = std::size_t{0}; i < rule.nodes.size(); ++i) {
    auto x = rule.nodes[i];
    auto xc = rule.complements[i];
    logs[i] = scale.log_speed(x, xc) + power * scale.log_scale(x, xc);
    if (!std::isfinite(logs[i])) throw NumericalFailure("pi_star: non-finite log density");
    top = std::max(top, logs[i]);
  }
  auto values = std::vector<double>(logs.size());
  auto integral = 0.0;
  for (auto i = std::size_t{0}; i < logs.size(); ++i) {
    values[i] = std::exp(logs[i] - top);
    integral += rule.weights[i] * values[i];
  }
  for (auto& v : values) v /= integral;
  auto edge_share = std::max(rule.weights.front() * values.front(), rule.weights.back() * values.back());
  if (!(edge_share < 1e-10)) {
    throw NumericalFailure("pi_star: normalizer not converged at the boundary (outermost node carries " +
                           format_double(edge_share) + " of the mass)");
  }
  grid.nodes = std::move(rule.nodes);
  grid.complements = std::move(rule.complements);
  grid.weights = std::move(rule.weights);
  grid.values = std::move(values);
  grid.normalized = true;
  grid.log_normalizer = top + std::log(integral);
  grid.edge_share = edge_share;
  return grid;
}

auto grid_survival_moment(const DensityGrid& grid, int k) -> double {
  auto sum = 0.0;
  for (auto i = std::size_t{0}; i < grid.nodes.size(); ++i) {
    sum += grid.weights[i] * grid.values[i] * -std::expm1(k * std::log(grid.complements[i]));
  }
  return sum;
}

void write_density_csv(std::ostream& out, const DensityGrid& grid) {
  out << "x,weight,value\n";
  for (auto i = std::size_t{0}; i < grid.nodes.size(); ++i) {
    out << format_double(grid.nodes[i]) << ',' << format_double(grid.weights[i]) << ','
        << format_double(grid.values[i]) << '\n';
  }
}

void write_diffusion_csv(std::ostream& out, const DiffusionPath& path) {
  out << "time,p\n";
  for (auto i = std::size_t{0}; i < path.values.size(); ++i) {
    out << format_double(path.time(i)) << ',' << format_double(path.values[i]) << '\n';
  }
}

void write_duality_csv(std::ostream& out, std::span<const DualityRow> rows) {
  out << "sample_size,realizations,violations,lineage_survival,lineage_survival_se,"
         "frequency_moment,frequency_moment_se\n";
  for (const auto& row : rows) {
    out << row.sample_size << ',' << row.realizations << ',' << row.violations << ','
        << format_double(row.lineage_survival.mean) << ',' << format_double(row.lineage_survival.se)
        << ',' << format_double(row.frequency_moment.mean) << ','
        << format_double(row.frequency_moment.se) << '\n';
  }
}

void write_coupling_csv(std::ostream& out, std::span<const CouplingRow> rows) {
  out << "n,runs,diverged,diverged_se\n";
  for (const auto& row : rows) {
    out << row.n << ',' << row.runs << ',' << format_double(row.diverged.mean) << ','
        << format_double(row.diverged.se) << '\n';
  }
}

}  // namespace lbp
