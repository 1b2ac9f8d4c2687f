#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "lbp/error.h"
#include "lbp/model.h"
#include "lbp/stats.h"
#include "oracles.h"

namespace lbp {
namespace {

TEST(JumpRates, CompetitionExample) {
  auto r = jump_rates(3, {1.0, 0.5, 1.0});
  EXPECT_DOUBLE_EQ(r.up, 3.0);
  EXPECT_DOUBLE_EQ(r.down, 6.0);
}

TEST(JumpRates, ZeroIsAbsorbing) {
  auto r = jump_rates(0, {2.0, 0.7, 1.3});
  EXPECT_EQ(r.up, 0.0);
  EXPECT_EQ(r.down, 0.0);
}

TEST(JumpRates, LinearBirthDeath) {
  auto r = jump_rates(5, {2.0, 0.0, 1.0});
  EXPECT_DOUBLE_EQ(r.up, 10.0);
  EXPECT_DOUBLE_EQ(r.down, 5.0);
}

TEST(ModelParams, RejectsInvalid) {
  EXPECT_THROW((ModelParams{0.0, 0.1, 1.0}.validate()), InvalidArgument);
  EXPECT_THROW((ModelParams{1.0, -0.1, 1.0}.validate()), InvalidArgument);
  EXPECT_THROW((ModelParams{1.0, 0.1, 0.0}.validate()), InvalidArgument);
  EXPECT_NO_THROW((ModelParams{1.0, 0.0, 1.0}.validate()));
}

TEST(Simulate, ZeroStartIsAbsorbed) {
  auto traj = simulate({1.0, 0.1, 1.0}, 0, 10.0, 1);
  EXPECT_TRUE(traj.absorbed);
  EXPECT_EQ(traj.times.size(), 1u);
  EXPECT_EQ(extinction_time(traj), 0.0);
}

TEST(Simulate, RejectsNonPositiveHorizon) {
  EXPECT_THROW(simulate({1.0, 0.1, 1.0}, 3, 0.0, 1), InvalidArgument);
  EXPECT_THROW(simulate({1.0, 0.1, 1.0}, 3, -1.0, 1), InvalidArgument);
}

TEST(Simulate, Deterministic) {
  auto a = simulate({1.0, 0.1, 1.0}, 10, 20.0, 99, 3);
  auto b = simulate({1.0, 0.1, 1.0}, 10, 20.0, 99, 3);
  EXPECT_EQ(a.times, b.times);
  EXPECT_EQ(a.states, b.states);
}

TEST(Simulate, EventReplayMatchesRates) {
  auto p = ModelParams{1.3, 0.2, 0.9};
  auto rng = Rng(5);
  auto events = 0;
  auto traj = simulate(p, 4, 30.0, rng, [&](double, std::int64_t before, const JumpRates& rates, std::int64_t after) {
    ++events;
    auto expected = jump_rates(before, p);
    EXPECT_DOUBLE_EQ(rates.up, expected.up);
    EXPECT_DOUBLE_EQ(rates.down, expected.down);
    EXPECT_EQ(std::abs(after - before), 1);
  });
  EXPECT_EQ(static_cast<std::size_t>(events) + 1, traj.times.size());
  for (std::size_t i = 1; i < traj.states.size(); ++i) {
    EXPECT_EQ(std::abs(traj.states[i] - traj.states[i - 1]), 1);
    EXPECT_GT(traj.times[i], traj.times[i - 1]);
  }
  if (traj.absorbed) EXPECT_EQ(traj.states.back(), 0);
}

TEST(Simulate, SubcriticalDiesOut) {
  auto p = ModelParams{0.8, 0.0, 1.0};
  auto extinct = std::vector<double>(10000);
  for (std::size_t r = 0; r < extinct.size(); ++r) extinct[r] = simulate(p, 1, 200.0, 7, r).absorbed ? 1.0 : 0.0;
  auto m = mean_se(extinct);
  // Survival to time 200 is below 1e-15, so every run dies.
  EXPECT_EQ(m.mean, 1.0);
}

TEST(Simulate, CompetitionEventuallyExtinct) {
  auto p = ModelParams{1.0, 0.1, 1.0};
  auto extinct = 0;
  for (std::uint64_t r = 0; r < 200; ++r) extinct += simulate(p, 10, 2000.0, 8, r).absorbed ? 1 : 0;
  EXPECT_EQ(extinct, 200);
}

TEST(Simulate, SupercriticalSurvivalMatchesBranchingOracle) {
  auto p = ModelParams{2.0, 0.0, 1.0};
  auto alive = std::vector<double>(20000);
  auto rng = Rng(12);
  constexpr double kHorizon = 6.0;
  for (auto& a : alive) a = simulate(p, 1, kHorizon, rng).absorbed ? 0.0 : 1.0;
  auto m = mean_se(alive);
  // Linear birth-death: P(extinct by t) = d (e^{rt} - 1) / (b e^{rt} - d), r = b - d,
  // which tends to d / b.
  auto growth = std::exp((p.b - p.d) * kHorizon);
  auto survival = 1.0 - p.d * (growth - 1.0) / (p.b * growth - p.d);
  EXPECT_NEAR(survival, 1.0 - p.d / p.b, 2e-3);
  EXPECT_NEAR(m.mean, survival, 3.0 * m.se);
}

TEST(Simulate, HoldingTimesMatchTotalRate) {
  auto p = ModelParams{1.0, 0.3, 1.0};
  auto holds = std::vector<std::vector<double>>(6);
  for (std::uint64_t r = 0; r < 400; ++r) {
    auto traj = simulate(p, 3, 50.0, 13, r);
    for (std::size_t i = 0; i + 1 < traj.times.size(); ++i) {
      auto state = traj.states[i];
      if (state >= 1 && state <= 5) holds[static_cast<std::size_t>(state)].push_back(traj.times[i + 1] - traj.times[i]);
    }
  }
  for (int i = 1; i <= 5; ++i) {
    auto m = mean_se(holds[static_cast<std::size_t>(i)]);
    ASSERT_GT(m.n, 100u);
    EXPECT_NEAR(m.mean, 1.0 / jump_rates(i, p).total(), 3.0 * m.se) << "state " << i;
  }
}

TEST(Simulate, MarginalMatchesKolmogorovForwardEquation) {
  auto p = ModelParams{1.0, 0.5, 1.0};
  auto pmf = oracle::transition_pmf(p, 3, 1.5, 60);
  constexpr std::size_t kRuns = 40000;
  auto counts = std::vector<double>(8, 0.0);
  for (std::size_t r = 0; r < kRuns; ++r) {
    auto z = simulate(p, 3, 1.5, 14, r).final_state();
    if (z < 8) counts[static_cast<std::size_t>(z)] += 1.0;
  }
  for (std::size_t j = 0; j < counts.size(); ++j) {
    auto phat = counts[j] / kRuns;
    auto se = std::sqrt(pmf[j] * (1.0 - pmf[j]) / kRuns);
    EXPECT_NEAR(phat, pmf[j], 3.5 * se + 1e-12) << "state " << j;
  }
}

TEST(Genealogy, SingleRootWithoutEvents) {
  auto run = simulate_with_genealogy({1.0, 0.1, 1.0}, 1, 1e-9, 1);
  ASSERT_EQ(run.log.individuals.size(), 1u);
  EXPECT_FALSE(run.log.individuals[0].parent.has_value());
  EXPECT_FALSE(run.log.individuals[0].death.has_value());
}

TEST(Genealogy, LogReproducesTrajectory) {
  for (std::uint64_t r = 0; r < 50; ++r) {
    auto run = simulate_with_genealogy({1.2, 0.05, 1.0}, 5, 20.0, 21, r);
    const auto& traj = run.trajectory;
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
      ASSERT_EQ(run.log.alive_at(traj.times[i]), traj.states[i]);
    }
    for (const auto& rec : run.log.individuals) {
      if (!rec.parent) continue;
      const auto& parent = run.log.individuals[static_cast<std::size_t>(*rec.parent)];
      EXPECT_LT(parent.birth, rec.birth);
      if (parent.death) EXPECT_LT(rec.birth, *parent.death);
    }
  }
}

TEST(Genealogy, TrajectoryEqualsPlainSimulation) {
  auto p = ModelParams{1.1, 0.1, 1.0};
  auto run = simulate_with_genealogy(p, 4, 15.0, 31, 2);
  auto traj = simulate(p, 4, 15.0, 31, 2);
  EXPECT_EQ(run.trajectory.times, traj.times);
  EXPECT_EQ(run.trajectory.states, traj.states);
}

TEST(Genealogy, FirstEventDeath) {
  // Find a run from two individuals whose first event is a death.
  auto p = ModelParams{0.1, 0.0, 1.0};
  for (std::uint64_t r = 0; r < 100; ++r) {
    auto run = simulate_with_genealogy(p, 2, 10.0, 41, r);
    const auto& traj = run.trajectory;
    if (traj.states.size() < 2 || traj.states[1] != 1) continue;
    auto died = 0;
    for (const auto& rec : run.log.individuals) {
      if (rec.death && *rec.death == traj.times[1]) ++died;
    }
    EXPECT_EQ(died, 1);
    EXPECT_EQ(run.log.alive_at(traj.times[1]), 1);
    return;
  }
  FAIL() << "no run started with a death";
}

TEST(ExtinctionTime, Cases) {
  auto absorbed = Trajectory{{0.0, 1.0, 2.5}, {2, 1, 0}, true, 5.0};
  EXPECT_EQ(extinction_time(absorbed), 2.5);
  auto alive = Trajectory{{0.0, 1.0}, {2, 3}, false, 5.0};
  EXPECT_FALSE(extinction_time(alive).has_value());
}

TEST(Csv, Headers) {
  auto traj = Trajectory{{0.0, 0.5}, {1, 0}, true, 1.0};
  auto out = std::ostringstream();
  write_trajectory_csv(out, traj);
  EXPECT_EQ(out.str(), "time,state\n0,1\n0.5,0\n");
  auto log = GenealogyLog{{{0, std::nullopt, 0.0, 0.5}, {1, 0, 0.25, std::nullopt}}, 1.0};
  auto g = std::ostringstream();
  write_genealogy_csv(g, log);
  EXPECT_EQ(g.str(), "id,parent,birth,death\n0,,0,0.5\n1,0,0.25,\n");
}

}  // namespace
}  // namespace lbp
