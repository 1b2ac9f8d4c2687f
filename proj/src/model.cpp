#include "lbp/model.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "lbp/error.h"
#include "lbp/format.h"

namespace lbp {

void ModelParams::validate() const {
  if (!(b > 0.0) || !(c >= 0.0) || !(d > 0.0) || !std::isfinite(b) || !std::isfinite(c) ||
      !std::isfinite(d)) {
    throw InvalidArgument("model parameters require b > 0, c >= 0, d > 0");
  }
}

auto jump_rates(std::int64_t i, const ModelParams& p) -> JumpRates {
  if (i < 0) throw InvalidArgument("jump_rates: negative population size");
  auto x = static_cast<double>(i);
  return {p.b * x, p.d * x + p.c * x * (x - 1.0)};
}

auto Trajectory::state_at(double t) const -> std::int64_t {
  auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return states.front();
  return states[static_cast<std::size_t>(it - times.begin()) - 1];
}

auto GenealogyLog::alive_at(double t) const -> std::int64_t {
  auto count = std::int64_t{0};
  for (const auto& r : individuals) {
    if (r.birth <= t && (!r.death || *r.death > t)) ++count;
  }
  return count;
}

namespace {

void check_inputs(std::int64_t z0, double horizon) {
  if (z0 < 0) throw InvalidArgument("simulate: z0 must be nonnegative");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw InvalidArgument("simulate: horizon must be positive and finite");
  }
}

// One Gillespie step from state z at time t; nullopt when the next event
// would fall beyond the horizon.
struct Step {
  double time;
  bool up;
};

inline auto next_event(const ModelParams& p, std::int64_t z, double t, double horizon, Rng& rng,
                       JumpRates& rates) -> std::optional<Step> {
  rates = jump_rates(z, p);
  auto total = rates.total();
  auto next = t + rng.exponential(total);
  if (next > horizon) return std::nullopt;
  auto up = rng.uniform() * total < rates.up;
  return Step{next, up};
}

}  // namespace

auto simulate(const ModelParams& p, std::int64_t z0, double horizon, Rng& rng,
              const EventObserver& observer) -> Trajectory {
  p.validate();
  check_inputs(z0, horizon);
  auto traj = Trajectory{{0.0}, {z0}, z0 == 0, horizon};
  auto z = z0;
  auto t = 0.0;
  auto rates = JumpRates{};
  while (z > 0) {
    auto step = next_event(p, z, t, horizon, rng, rates);
    if (!step) break;
    auto before = z;
    t = step->time;
    z += step->up ? 1 : -1;
    if (observer) observer(t, before, rates, z);
    traj.times.push_back(t);
    traj.states.push_back(z);
  }
  traj.absorbed = z == 0;
  return traj;
}

auto simulate(const ModelParams& p, std::int64_t z0, double horizon, std::uint64_t seed,
              std::uint64_t replicate) -> Trajectory {
  auto rng = Rng{seed, replicate, 0};
  return simulate(p, z0, horizon, rng);
}

auto simulate_final_state(const ModelParams& p, std::int64_t z0, double horizon, Rng& rng)
    -> std::int64_t {
  p.validate();
  check_inputs(z0, horizon);
  auto z = z0;
  auto t = 0.0;
  auto rates = JumpRates{};
  while (z > 0) {
    auto step = next_event(p, z, t, horizon, rng, rates);
    if (!step) break;
    t = step->time;
    z += step->up ? 1 : -1;
  }
  return z;
}

auto simulate_with_genealogy(const ModelParams& p, std::int64_t z0, double horizon, Rng& event_rng,
                             Rng& choice_rng) -> GenealogyRun {
  p.validate();
  check_inputs(z0, horizon);
  auto run = GenealogyRun{Trajectory{{0.0}, {z0}, z0 == 0, horizon}, GenealogyLog{{}, horizon}};
  auto& records = run.log.individuals;
  // Ids of living individuals; order is irrelevant, removal swaps with the back.
  auto alive = std::vector<std::int64_t>{};
  for (auto i = std::int64_t{0}; i < z0; ++i) {
    records.push_back({i, std::nullopt, 0.0, std::nullopt});
    alive.push_back(i);
  }
  auto z = z0;
  auto t = 0.0;
  auto rates = JumpRates{};
  while (z > 0) {
    auto step = next_event(p, z, t, horizon, event_rng, rates);
    if (!step) break;
    t = step->time;
    auto slot = choice_rng.index(alive.size());
    if (step->up) {
      auto id = static_cast<std::int64_t>(records.size());
      records.push_back({id, alive[slot], t, std::nullopt});
      alive.push_back(id);
      ++z;
    } else {
      records[static_cast<std::size_t>(alive[slot])].death = t;
      alive[slot] = alive.back();
      alive.pop_back();
      --z;
    }
    run.trajectory.times.push_back(t);
    run.trajectory.states.push_back(z);
  }
  run.trajectory.absorbed = z == 0;
  return run;
}

auto simulate_with_genealogy(const ModelParams& p, std::int64_t z0, double horizon,
                             std::uint64_t seed, std::uint64_t replicate) -> GenealogyRun {
  auto event_rng = Rng{seed, replicate, 0};
  auto choice_rng = Rng{seed, replicate, 1};
  return simulate_with_genealogy(p, z0, horizon, event_rng, choice_rng);
}

auto extinction_time(const Trajectory& traj) -> std::optional<double> {
  if (!traj.absorbed) return std::nullopt;
  return traj.times.back();
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  out << "time,state\n";
  for (auto i = std::size_t{0}; i < traj.times.size(); ++i) {
    out << format_double(traj.times[i]) << ',' << traj.states[i] << '\n';
  }
}

void write_genealogy_csv(std::ostream& out, const GenealogyLog& log) {
  out << "id,parent,birth,death\n";
  for (const auto& r : log.individuals) {
    out << r.id << ',' << (r.parent ? std::to_string(*r.parent) : std::string{}) << ','
        << format_double(r.birth) << ',' << format_optional(r.death) << '\n';
  }
}

}  // namespace lbp
