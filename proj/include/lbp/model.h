#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "lbp/rng.h"

namespace lbp {

// Logistic branching process: births b*i, deaths d*i + c*i*(i-1).
struct ModelParams {
  double b = 1.0;
  double c = 0.0;
  double d = 1.0;

  // Throws InvalidArgument unless b > 0, c >= 0, d > 0.
  void validate() const;
};

struct JumpRates {
  double up = 0.0;
  double down = 0.0;
  auto total() const -> double { return up + down; }
};

auto jump_rates(std::int64_t i, const ModelParams& p) -> JumpRates;

// Piecewise-constant path; times[0] = 0 holds the initial state.
struct Trajectory {
  std::vector<double> times;
  std::vector<std::int64_t> states;
  bool absorbed = false;
  double horizon = 0.0;

  auto final_state() const -> std::int64_t { return states.back(); }
  // State in force at time t (right-continuous).
  auto state_at(double t) const -> std::int64_t;
};

struct IndividualRecord {
  std::int64_t id = 0;
  std::optional<std::int64_t> parent;
  double birth = 0.0;
  std::optional<double> death;
};

// Records are stored in id order, which is also birth order.
struct GenealogyLog {
  std::vector<IndividualRecord> individuals;
  double horizon = 0.0;

  auto alive_at(double t) const -> std::int64_t;
};

// Called once per jump with the pre-jump state and the rates used to draw it.
using EventObserver =
    std::function<void(double time, std::int64_t before, const JumpRates& rates, std::int64_t after)>;

auto simulate(const ModelParams& p, std::int64_t z0, double horizon, Rng& rng,
              const EventObserver& observer = {}) -> Trajectory;
auto simulate(const ModelParams& p, std::int64_t z0, double horizon, std::uint64_t seed,
              std::uint64_t replicate = 0) -> Trajectory;

// State at the horizon only; consumes random numbers exactly like simulate.
auto simulate_final_state(const ModelParams& p, std::int64_t z0, double horizon, Rng& rng)
    -> std::int64_t;

struct GenealogyRun {
  Trajectory trajectory;
  GenealogyLog log;
};

// Event times and jump directions come from event_rng, consuming it exactly as
// simulate does; parent and victim choices come from choice_rng.
auto simulate_with_genealogy(const ModelParams& p, std::int64_t z0, double horizon, Rng& event_rng,
                             Rng& choice_rng) -> GenealogyRun;
// Uses lanes 0 and 1 of (seed, replicate); the trajectory equals simulate(p, z0, horizon, seed, replicate).
auto simulate_with_genealogy(const ModelParams& p, std::int64_t z0, double horizon,
                             std::uint64_t seed, std::uint64_t replicate = 0) -> GenealogyRun;

auto extinction_time(const Trajectory& traj) -> std::optional<double>;

void write_trajectory_csv(std::ostream& out, const Trajectory& traj);
void write_genealogy_csv(std::ostream& out, const GenealogyLog& log);

}  // namespace lbp
