#include "cli_app.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <boost/version.hpp>
#include <json.hpp>

#include "lbp/conditioning.h"
#include "lbp/dual.h"
#include "lbp/error.h"
#include "lbp/format.h"
#include "lbp/genealogy.h"
#include "lbp/model.h"
#include "lbp/parallel.h"
#include "lbp/yaglom.h"

#ifndef LBP_VERSION
#define LBP_VERSION "0.0.0"
#endif

namespace lbp::cli {

namespace {

using Violations = std::vector<std::string>;

auto number_key(std::string name, std::string value, std::string help) -> KeySpec {
  return {std::move(name), KeyType::number, std::move(value), std::move(help), {}};
}
auto integer_key(std::string name, std::string value, std::string help) -> KeySpec {
  return {std::move(name), KeyType::integer, std::move(value), std::move(help), {}};
}

auto model_keys(std::string b, std::string c, std::string d) -> std::vector<KeySpec> {
  return {number_key("b", std::move(b), "birth rate per individual"),
          number_key("c", std::move(c), "competition death rate per ordered pair"),
          number_key("d", std::move(d), "natural death rate per individual")};
}

auto diffusion_keys(std::string s, std::string nu, std::string mu) -> std::vector<KeySpec> {
  return {number_key("s", std::move(s), "selection rate"),
          number_key("nu", std::move(nu), "resampling rate"),
          number_key("mu", std::move(mu), "mutation rate")};
}

auto common_keys() -> std::vector<KeySpec> {
  return {integer_key("seed", "1", "random seed"),
          {"output", KeyType::text, "", "output directory (default lbp-out/<experiment>)", {}}};
}

auto make_spec(std::string name, std::string summary, std::vector<std::vector<KeySpec>> groups)
    -> ExperimentSpec {
  auto spec = ExperimentSpec{std::move(name), std::move(summary), {}};
  for (auto& group : groups) {
    for (auto& key : group) spec.keys.push_back(std::move(key));
  }
  for (auto& key : common_keys()) spec.keys.push_back(std::move(key));
  return spec;
}

auto build_experiments() -> std::vector<ExperimentSpec> {
  auto specs = std::vector<ExperimentSpec>();
  specs.push_back(make_spec(
      "simulate", "exact simulation of the logistic branching process",
      {model_keys("1", "0.1", "1"),
       {integer_key("z0", "10", "initial population"), number_key("horizon", "10", "time horizon"),
        integer_key("replicate", "0", "replicate index within the seed"),
        {"genealogy", KeyType::flag, "false", "also record and write the genealogy", {}}}}));
  specs.push_back(make_spec(
      "rates-T", "conditioned rates on survival to a fixed horizon",
      {model_keys("1", "0.3", "1"),
       {number_key("T", "3", "conditioning horizon"), number_key("t", "0", "current time, 0 <= t < T"),
        integer_key("K", "20", "state cap"), integer_key("paths", "20000", "diffusion paths"),
        integer_key("batches", "10", "independent batches for standard errors"),
        number_key("dt", "0", "Euler step, 0 selects the default")}}));
  specs.push_back(make_spec("rates-Q", "Q-process rates from the conditioned stationary density",
                            {model_keys("1", "0.3", "1"),
                             {integer_key("K", "200", "state cap"),
                              integer_key("grid_size", "1025", "quadrature nodes, odd")}}));
  specs.push_back(make_spec(
      "q-stationary", "stationary law of the Q-process",
      {model_keys("1", "0.3", "1"),
       {integer_key("K", "200", "state cap"), integer_key("grid_size", "1025", "quadrature nodes, odd"),
        integer_key("occupation_events", "0", "if positive, also simulate this many Q-process jumps"),
        integer_key("z0", "1", "start of the occupation run")}}));
  specs.push_back(make_spec(
      "pi-star", "stationary density of the conditioned diffusion",
      {diffusion_keys("1", "0.6", "1"),
       {integer_key("grid_size", "1025", "quadrature nodes, odd"),
        {"form", KeyType::choice, "auto", "density form", {"auto", "m_s", "m_s2"}},
        integer_key("weak_k", "0", "if positive, compare weak-competition ratios up to this k")}}));
  specs.push_back(make_spec(
      "yaglom", "quasi-stationary (Yaglom) law",
      {model_keys("1", "0.3", "1"),
       {integer_key("K", "400", "state cap"), number_key("tol", "1e-10", "bisection and tail tolerance"),
        integer_key("max_iterations", "200", "bisection iterations"),
        {"fk_thetas", KeyType::numbers, "", "Feynman-Kac evaluation points in [0, 1]", {}},
        integer_key("fk_paths", "20000", "Feynman-Kac paths per point"),
        number_key("fk_dt", "1e-3", "Feynman-Kac Euler step"),
        number_key("empirical_T", "0", "if positive, also sample Z_T given survival"),
        integer_key("z0", "1", "initial population of the empirical runs"),
        integer_key("replicates", "10000", "accepted empirical samples"),
        {"conditioning", KeyType::choice, "rejection", "empirical conditioning method",
         {"rejection", "staged"}},
        integer_key("stages", "50", "stages for staged conditioning")}}));
  specs.push_back(make_spec(
      "gamma-scan", "gamma statistic of reconstructed trees against detectability rate",
      {model_keys("1", "0.01", "0.5"),
       {{"lambdas", KeyType::numbers, "0.01,0.02,0.05,0.1,1,1000", "detectability rates", {}},
        number_key("sample_time", "50", "sampling time"),
        integer_key("replicates", "200", "surviving runs"),
        integer_key("z0", "0", "initial population, 0 selects max(ceil((b - d) / c), 1)"),
        integer_key("max_attempts", "100000", "rejection attempts per replicate")}}));
  specs.push_back(make_spec(
      "mrca", "population size at the most recent common ancestor",
      {model_keys("0.9", "0.01", "1"),
       {number_key("sample_time", "50", "sampling time"),
        integer_key("replicates", "1000", "surviving runs"),
        integer_key("z0", "0", "initial population, 0 selects max(ceil((b - d) / c), 1)"),
        integer_key("max_attempts", "100000", "rejection attempts per replicate")}}));
  specs.push_back(make_spec(
      "dual-check", "Moran model against its ancestral graph",
      {diffusion_keys("0.5", "1", "0.3"),
       {integer_key("N", "50", "Moran population size"), number_key("t", "5", "time horizon"),
        integer_key("realizations", "10000", "coupled realizations"),
        integer_key("max_sample", "5", "largest sample size"),
        {"coupling_sizes", KeyType::integers, "50,200,800", "population sizes for the coupling check", {}},
        integer_key("coupling_kappa0", "1", "initial lineage count of the coupling check"),
        number_key("coupling_T", "5", "coupling horizon"),
        integer_key("coupling_runs", "2000", "coupled runs per population size")}}));
  specs.push_back(make_spec(
      "scaling-check", "rescaled branching process against the logistic Feller diffusion",
      {{number_key("b", "1", "drift coefficient of the limit"),
        number_key("c", "0.5", "quadratic coefficient of the limit"),
        {"caps", KeyType::integers, "20,50,100", "scaling parameters K, increasing", {}},
        number_key("horizon", "2", "time of comparison"), number_key("x0", "1", "initial value"),
        integer_key("paths", "4000", "samples per side"), number_key("dt", "1e-3", "Euler step")}}));
  return specs;
}

auto type_violation(const KeySpec& key, const Config& config) -> std::optional<std::string> {
  try {
    switch (key.type) {
      case KeyType::number:
        if (!std::isfinite(config.number(key.name))) return "key '" + key.name + "' must be finite";
        break;
      case KeyType::integer:
        config.integer(key.name);
        break;
      case KeyType::flag:
        config.flag(key.name);
        break;
      case KeyType::numbers:
        config.numbers(key.name);
        break;
      case KeyType::integers:
        config.integers(key.name);
        break;
      case KeyType::choice:
        if (std::find(key.choices.begin(), key.choices.end(), config.text(key.name)) == key.choices.end()) {
          return "key '" + key.name + "' must be one of: " + [&] {
            auto joined = std::string();
            for (const auto& c : key.choices) joined += (joined.empty() ? "" : ", ") + c;
            return joined;
          }();
        }
        break;
      case KeyType::text:
        break;
    }
  } catch (const ConfigError& e) {
    return std::string(e.what());
  }
  return std::nullopt;
}

void require(Violations& out, bool ok, const std::string& message) {
  if (!ok) out.push_back(message);
}

void check_model(const Config& cfg, Violations& out) {
  require(out, cfg.number("b") > 0.0, "b must be > 0");
  require(out, cfg.number("c") >= 0.0, "c must be >= 0");
  require(out, cfg.number("d") > 0.0, "d must be > 0");
}

void check_diffusion(const Config& cfg, Violations& out) {
  require(out, cfg.number("s") >= 0.0, "s must be >= 0");
  require(out, cfg.number("nu") >= 0.0, "nu must be >= 0");
  require(out, cfg.number("mu") >= 0.0, "mu must be >= 0");
}

void check_grid(const Config& cfg, Violations& out) {
  auto n = cfg.integer("grid_size");
  require(out, n >= 3 && n % 2 == 1, "grid_size must be odd and >= 3");
}

void check_regime(const std::string& name, const Config& cfg, Violations& out) {
  if (name == "simulate") {
    check_model(cfg, out);
    require(out, cfg.integer("z0") >= 0, "z0 must be >= 0");
    require(out, cfg.number("horizon") > 0.0, "horizon must be > 0");
    require(out, cfg.integer("replicate") >= 0, "replicate must be >= 0");
  } else if (name == "rates-T") {
    check_model(cfg, out);
    require(out, cfg.number("t") >= 0.0 && cfg.number("t") < cfg.number("T"), "need 0 <= t < T");
    require(out, cfg.integer("K") >= 2, "K must be >= 2");
    require(out, cfg.integer("batches") >= 2, "batches must be >= 2");
    require(out, cfg.integer("paths") >= 2 * std::max<std::int64_t>(cfg.integer("batches"), 1),
            "paths must be at least 2 per batch");
    require(out, cfg.number("dt") >= 0.0, "dt must be >= 0");
  } else if (name == "rates-Q" || name == "q-stationary") {
    check_model(cfg, out);
    require(out, cfg.integer("K") >= 2, "K must be >= 2");
    check_grid(cfg, out);
    if (name == "q-stationary") {
      require(out, cfg.integer("occupation_events") >= 0, "occupation_events must be >= 0");
      require(out, cfg.integer("z0") >= 1 && cfg.integer("z0") <= cfg.integer("K"), "z0 must lie in [1, K]");
    }
  } else if (name == "pi-star") {
    check_diffusion(cfg, out);
    require(out, cfg.number("nu") > 0.0, "pi-star needs nu > 0");
    require(out, cfg.number("mu") > 0.0, "pi-star needs mu > 0");
    check_grid(cfg, out);
    require(out, cfg.integer("weak_k") >= 0, "weak_k must be >= 0");
    if (cfg.integer("weak_k") > 0) {
      require(out, cfg.number("s") > cfg.number("mu"),
              "unsupported regime: the weak-competition approximation needs s > mu");
    }
  } else if (name == "yaglom") {
    check_model(cfg, out);
    require(out, cfg.number("c") > 0.0, "unsupported regime: the Yaglom recursion needs c > 0");
    require(out, cfg.integer("K") >= 2, "K must be >= 2");
    require(out, cfg.number("tol") > 0.0, "tol must be > 0");
    require(out, cfg.integer("max_iterations") >= 1, "max_iterations must be >= 1");
    for (auto theta : cfg.numbers("fk_thetas")) {
      require(out, theta >= 0.0 && theta <= 1.0, "fk_thetas must lie in [0, 1]");
    }
    require(out, cfg.integer("fk_paths") >= 2, "fk_paths must be >= 2");
    require(out, cfg.number("fk_dt") > 0.0, "fk_dt must be > 0");
    require(out, cfg.number("empirical_T") >= 0.0, "empirical_T must be >= 0");
    require(out, cfg.integer("z0") >= 1, "z0 must be >= 1");
    require(out, cfg.integer("replicates") >= 1, "replicates must be >= 1");
    require(out, cfg.integer("stages") >= 1, "stages must be >= 1");
  } else if (name == "gamma-scan" || name == "mrca") {
    check_model(cfg, out);
    require(out, cfg.number("sample_time") > 0.0, "sample_time must be > 0");
    require(out, cfg.integer("replicates") >= 1, "replicates must be >= 1");
    require(out, cfg.integer("z0") >= 0, "z0 must be >= 0");
    require(out, cfg.integer("max_attempts") >= 1, "max_attempts must be >= 1");
    if (name == "gamma-scan") {
      auto lambdas = cfg.numbers("lambdas");
      require(out, !lambdas.empty(), "lambdas must not be empty");
      for (auto l : lambdas) require(out, l > 0.0, "lambdas must be > 0");
    }
  } else if (name == "dual-check") {
    check_diffusion(cfg, out);
    auto n = cfg.integer("N");
    require(out, n >= 2, "N must be >= 2");
    require(out, cfg.number("t") > 0.0, "t must be > 0");
    require(out, cfg.integer("realizations") >= 2, "realizations must be >= 2");
    require(out, cfg.integer("max_sample") >= 1 && cfg.integer("max_sample") <= n,
            "max_sample must lie in [1, N]");
    auto kappa0 = cfg.integer("coupling_kappa0");
    for (auto size : cfg.integers("coupling_sizes")) {
      require(out, size >= 2 && kappa0 >= 1 && kappa0 <= size,
              "coupling_sizes must be >= 2 and >= coupling_kappa0 >= 1");
    }
    require(out, cfg.number("coupling_T") > 0.0, "coupling_T must be > 0");
    require(out, cfg.integer("coupling_runs") >= 2, "coupling_runs must be >= 2");
  } else if (name == "scaling-check") {
    require(out, cfg.number("c") >= 0.0, "c must be >= 0");
    auto caps = cfg.integers("caps");
    require(out, !caps.empty(), "caps must not be empty");
    for (std::size_t i = 0; i < caps.size(); ++i) {
      require(out, caps[i] >= 1, "caps must be >= 1");
      if (i > 0) require(out, caps[i] > caps[i - 1], "caps must be increasing");
    }
    require(out, cfg.number("horizon") > 0.0, "horizon must be > 0");
    require(out, cfg.number("x0") > 0.0, "x0 must be > 0");
    require(out, cfg.integer("paths") >= 2, "paths must be >= 2");
    require(out, cfg.number("dt") > 0.0, "dt must be > 0");
  }
}

// Writes files into one directory and remembers their names for the manifest.
class Artifacts {
 public:
  explicit Artifacts(std::filesystem::path dir) : dir_(std::move(dir)) {}

  void write(const std::string& name, const std::function<void(std::ostream&)>& body) {
    auto out = std::ofstream(dir_ / name, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + (dir_ / name).string());
    body(out);
    if (!out) throw std::runtime_error("write failed for " + (dir_ / name).string());
    files_.push_back(name);
  }
  auto files() const -> const std::vector<std::string>& { return files_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::string> files_;
};

auto model_of(const Config& cfg) -> ModelParams {
  return {cfg.number("b"), cfg.number("c"), cfg.number("d")};
}
auto diffusion_of(const Config& cfg) -> WfParams {
  return {cfg.number("s"), cfg.number("nu"), cfg.number("mu")};
}
auto seed_of(const Config& cfg) -> std::uint64_t { return static_cast<std::uint64_t>(cfg.integer("seed")); }
auto size_of(const Config& cfg, const std::string& key) -> std::size_t {
  return static_cast<std::size_t>(cfg.integer(key));
}

auto survival_options(const Config& cfg) -> SurvivalRunOptions {
  auto options = SurvivalRunOptions{};
  if (cfg.integer("z0") > 0) options.z0 = cfg.integer("z0");
  options.max_attempts = size_of(cfg, "max_attempts");
  return options;
}

auto run_simulate(const Config& cfg, Artifacts& art, std::ostream& log) -> int {
  auto p = model_of(cfg);
  auto z0 = cfg.integer("z0");
  auto horizon = cfg.number("horizon");
  auto replicate = static_cast<std::uint64_t>(cfg.integer("replicate"));
  auto traj = Trajectory{};
  if (cfg.flag("genealogy")) {
    auto run = simulate_with_genealogy(p, z0, horizon, seed_of(cfg), replicate);
    traj = std::move(run.trajectory);
    art.write("genealogy.csv", [&](std::ostream& out) { write_genealogy_csv(out, run.log); });
  } else {
    traj = simulate(p, z0, horizon, seed_of(cfg), replicate);
  }
  art.write("trajectory.csv", [&](std::ostream& out) { write_trajectory_csv(out, traj); });
  log << "events " << traj.times.size() - 1 << ", final state " << traj.final_state()
      << ", extinction time " << format_optional(extinction_time(traj)) << '\n';
  return kOk;
}

auto run_rates_t(const Config& cfg, Artifacts& art, std::ostream& log) -> int {
  auto options = MomentOptions{size_of(cfg, "paths"), size_of(cfg, "batches"), cfg.number("dt")};
  auto table = rate_table_T(model_of(cfg), cfg.number("T"), cfg.number("t"),
                            static_cast<int>(cfg.integer("K")), options, seed_of(cfg));
  art.write("rate_table.json", [&](std::ostream& out) { write_rate_table_json(out, table); });
  if (table.flagged) log << "warning: some standard error exceeds 1% of its estimate; raise paths\n";
  return kOk;
}

auto run_rates_q(const Config& cfg, Artifacts& art, std::ostream& log) -> int {
  auto table = rate_table_Q(model_of(cfg), static_cast<int>(cfg.integer("K")), size_of(cfg, "grid_size"));
  art.write("rate_table.json", [&](std::ostream& out) { write_rate_table_json(out, table); });
  log << "sandwich bounds hold for k < " << table.cap << '\n';
  return kOk;
}

auto run_q_stationary(const Config& cfg, Artifacts& art, std::ostream& log) -> int {
  auto table = rate_table_Q(model_of(cfg), static_cast<int>(cfg.integer("K")), size_of(cfg, "grid_size"));
  auto pmf = q_stationary(table);
  art.write("rate_table.json", [&](std::ostream& out) { write_rate_table_json(out, table); });
  art.write("stationary.csv", [&](std::ostream& out) { write_stationary_csv(out, pmf); });
  log << "tail bound " << format_double(pmf.tail_bound) << ", balance residual "
      << format_double(pmf.balance_residual) << '\n';
  if (auto events = size_of(cfg, "occupation_events"); events > 0) {
    auto rng = Rng(seed_of(cfg));
    auto occupation = q_process_occupation(table, cfg.integer("z0"), events, rng);
    art.write("occupation.csv", [&](std::ostream& out) {
      out << "k,prob,occupation\n";
      for (std::size_t k = 0; k < pmf.probs.size(); ++k) {
        out << k + 1 << ',' << format_double(pmf.probs[k]) << ',' << format_double(occupation[k]) << '\n';
      }
    });
    log << "occupation total variation " << format_double(total_variation(pmf.probs, occupation)) << '\n';
  }
  return kOk;
}

auto run_pi_star(const Config& cfg, Artifacts& art, std::ostream& log) -> int {
  auto wf = diffusion_of(cfg);
  const auto& form_name = cfg.text("form");
  auto form = form_name == "auto"   ? pi_star_form(wf)
              : form_name == "m_s" ? PiStarForm::speed_times_scale
                                    : PiStarForm::speed_times_scale_squared;
  auto grid = pi_star(wf, form, size_of(cfg, "grid_size"));
  art.write("pi_star.csv", [&](std::ostream& out) { write_density_csv(out, grid); });
  log << "form " << (grid.form == PiStarForm::speed_times_scale ? "m_s" : "m_s2") << ", log normalizer "
      << format_double(grid.log_normalizer) << '\n';
  if (auto kmax = static_cast<int>(cfg.integer("weak_k")); kmax > 0) {
    auto ratios = rstar_ratios(grid, kmax);
    art.write("weak.csv", [&](std::ostream& out) {
      out << "k,quadrature,two_growth,scaled_growth,linearised,nu_to_zero_limit\n";
      for (int k = 1; k <= kmax; ++k) {
        out << k << ',' << format_double(ratios[static_cast<std::size_t>(k - 1)]) << ','
            << format_double(r_star_weak(wf, k, AlphaConvention::two_growth)) << ','
            << format_double(r_star_weak(wf, k, AlphaConvention::scaled_growth)) << ','
            << format_double(r_star_weak(wf, k, AlphaConvention::linearised)) << ','
            << format_double(r_star_weak_limit(wf, k)) << '\n';
      }
    });
  }
  return kOk;
}

auto run_yaglom(const Config& cfg, Artifacts& art, std::ostream& log) -> int {
  auto p = model_of(cfg);
  auto options = YaglomOptions{};
  options.cap = static_cast<int>(cfg.integer("K"));
  options.tol = cfg.number("tol");
  options.max_iterations = static_cast<int>(cfg.integer("max_iterations"));
  auto sol = yaglom_recursion(p, options);
  art.write("yaglom.json", [&](std::ostream& out) { write_yaglom_json(out, sol); });
  log << "a " << format_double(sol.a) << ", tail " << format_double(sol.tail) << '\n';
  if (auto thetas = cfg.numbers("fk_thetas"); !thetas.empty()) {
    auto fk = FkOptions{size_of(cfg, "fk_paths"), cfg.number("fk_dt")};
    auto estimates = yaglom_feynman_kac(p, sol.a, thetas, fk, seed_of(cfg));
    art.write("fk.csv", [&](std::ostream& out) { write_fk_csv(out, estimates); });
  }
  if (auto horizon = cfg.number("empirical_T"); horizon > 0.0) {
    auto empirical = EmpiricalOptions{};
    empirical.method =
        cfg.text("conditioning") == "staged" ? ConditioningMethod::staged : ConditioningMethod::rejection;
    empirical.stages = size_of(cfg, "stages");
    auto pmf = yaglom_empirical(p, horizon, cfg.integer("z0"), size_of(cfg, "replicates"), seed_of(cfg),
                                empirical);
    art.write("empirical.csv", [&](std::ostream& out) { write_empirical_csv(out, pmf); });
    log << "acceptance rate " << format_double(pmf.acceptance_rate) << '\n';
    if (pmf.impractical) {
      log << "acceptance rate below 1e-4; use conditioning = staged\n";
      return kImpractical;
    }
    if (!pmf.probs.empty()) {
      log << "total variation to recursion " << format_double(total_variation(sol.pmf, pmf.probs)) << '\n';
    }
  }
  return kOk;
}

auto run_gamma_scan(const Config& cfg, Artifacts& art, std::ostream& log) -> int {
  auto lambdas = cfg.numbers("lambdas");
  auto rows = gamma_scan(model_of(cfg), lambdas, cfg.number("sample_time"), size_of(cfg, "replicates"),
                         seed_of(cfg), survival_options(cfg));
  art.write("gamma.csv", [&](std::ostream& out) { write_gamma_csv(out, rows); });
  for (const auto& row : rows) {
    log << "lambda " << format_double(row.lambda) << ": mean gamma " << format_double(row.mean_gamma)
        << " (se " << format_double(row.se) << ", used " << row.used << ")\n";
  }
  return kOk;
}

auto run_mrca(const Config& cfg, Artifacts& art, std::ostream& log) -> int {
  auto samples = mrca_experiment(model_of(cfg), cfg.number("sample_time"), size_of(cfg, "replicates"),
                                 seed_of(cfg), survival_options(cfg));
  art.write("mrca.csv", [&](std::ostream& out) { write_mrca_csv(out, samples); });
  auto gaps = std::vector<double>();
  for (const auto& s : samples) gaps.push_back(static_cast<double>(s.z_present - s.z_before_mrca));
  auto gap = mean_se(gaps);
  log << "mean gap z_present - z_before_mrca " << format_double(gap.mean) << " (se " << format_double(gap.se)
      << ")\n";
  return kOk;
}

auto run_dual_check(const Config& cfg, Artifacts& art, std::ostream& log) -> int {
  auto wf = diffusion_of(cfg);
  auto rows = duality_check(wf, static_cast<std::int32_t>(cfg.integer("N")), cfg.number("t"),
                            static_cast<std::int32_t>(cfg.integer("max_sample")), size_of(cfg, "realizations"),
                            seed_of(cfg));
  art.write("duality.csv", [&](std::ostream& out) { write_duality_csv(out, rows); });
  auto violations = std::size_t{0};
  for (const auto& row : rows) violations += row.violations;
  log << "duality violations " << violations << '\n';
  auto sizes = std::vector<std::int32_t>();
  for (auto n : cfg.integers("coupling_sizes")) sizes.push_back(static_cast<std::int32_t>(n));
  if (!sizes.empty()) {
    auto coupling = coupling_check(wf, sizes, static_cast<std::int32_t>(cfg.integer("coupling_kappa0")),
                                   cfg.number("coupling_T"), size_of(cfg, "coupling_runs"), seed_of(cfg));
    art.write("coupling.csv", [&](std::ostream& out) { write_coupling_csv(out, coupling); });
  }
  return kOk;
}

auto run_scaling_check(const Config& cfg, Artifacts& art, std::ostream& log) -> int {
  auto caps = std::vector<int>();
  for (auto k : cfg.integers("caps")) caps.push_back(static_cast<int>(k));
  auto options = ScalingOptions{cfg.number("x0"), size_of(cfg, "paths"), cfg.number("dt")};
  auto rows = scaling_check(cfg.number("b"), cfg.number("c"), caps, cfg.number("horizon"), options, seed_of(cfg));
  art.write("scaling.csv", [&](std::ostream& out) {
    out << "K,wasserstein,branching_mean,branching_se,diffusion_mean,diffusion_se\n";
    for (const auto& row : rows) {
      out << row.cap << ',' << format_double(row.wasserstein) << ',' << format_double(row.branching_mean.mean)
          << ',' << format_double(row.branching_mean.se) << ',' << format_double(row.diffusion_mean.mean) << ','
          << format_double(row.diffusion_mean.se) << '\n';
    }
  });
  for (const auto& row : rows) log << "K " << row.cap << ": W1 " << format_double(row.wasserstein) << '\n';
  return kOk;
}

using Runner = std::function<int(const Config&, Artifacts&, std::ostream&)>;

auto runner_for(const std::string& name) -> Runner {
  static const auto runners = std::map<std::string, Runner>{
      {"simulate", run_simulate},     {"rates-T", run_rates_t},          {"rates-Q", run_rates_q},
      {"q-stationary", run_q_stationary}, {"pi-star", run_pi_star},      {"yaglom", run_yaglom},
      {"gamma-scan", run_gamma_scan}, {"mrca", run_mrca},                {"dual-check", run_dual_check},
      {"scaling-check", run_scaling_check}};
  return runners.at(name);
}

void write_manifest(const std::filesystem::path& dir, const ExperimentSpec& spec, const Config& config,
                    const std::vector<std::string>& files, int exit_code, const std::string& message,
                    double wall_seconds) {
  auto manifest = nlohmann::ordered_json();
  manifest["experiment"] = spec.name;
  auto echo = nlohmann::ordered_json::object();
  for (const auto& [key, value] : config.values()) echo[key] = value;
  manifest["config"] = echo;
  if (config.has("seed")) manifest["seed"] = config.integer("seed");
  manifest["versions"] = {{"lbp", LBP_VERSION},
                          {"compiler", __VERSION__},
                          {"boost", BOOST_LIB_VERSION},
                          {"cplusplus", __cplusplus}};
  manifest["threads"] = max_threads();
  manifest["wall_time_seconds"] = wall_seconds;
  manifest["files"] = files;
  manifest["exit_code"] = exit_code;
  manifest["message"] = message;
  auto out = std::ofstream(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  out << manifest.dump(2) << '\n';
}

}  // namespace

auto ExperimentSpec::find_key(std::string_view key) const -> const KeySpec* {
  auto it = std::find_if(keys.begin(), keys.end(), [&](const KeySpec& k) { return k.name == key; });
  return it == keys.end() ? nullptr : &*it;
}

auto experiments() -> const std::vector<ExperimentSpec>& {
  static const auto specs = build_experiments();
  return specs;
}

auto find_experiment(std::string_view name) -> const ExperimentSpec* {
  const auto& specs = experiments();
  auto it = std::find_if(specs.begin(), specs.end(), [&](const ExperimentSpec& s) { return s.name == name; });
  return it == specs.end() ? nullptr : &*it;
}

auto resolve_config(const ExperimentSpec& spec, const ConfigEntries& file, const ConfigEntries& overrides)
    -> Config {
  auto config = Config();
  for (const auto& key : spec.keys) config.set(key.name, key.default_value);
  for (const auto* entries : {&file, &overrides}) {
    for (const auto& [key, value] : *entries) {
      if (key == "experiment") {
        if (value != spec.name) {
          throw ConfigError("config names experiment '" + value + "' but '" + spec.name + "' was requested");
        }
        continue;
      }
      if (spec.find_key(key) == nullptr) {
        throw ConfigError("unknown key '" + key + "' for experiment '" + spec.name + "'");
      }
      config.set(key, value);
    }
  }
  return config;
}

auto check_config(const ExperimentSpec& spec, const Config& config) -> std::vector<std::string> {
  auto out = Violations();
  for (const auto& key : spec.keys) {
    if (auto problem = type_violation(key, config)) out.push_back(*problem);
  }
  if (out.empty()) check_regime(spec.name, config, out);
  return out;
}

auto validate_entries(std::string experiment, const ConfigEntries& entries) -> std::vector<std::string> {
  if (experiment.empty()) {
    for (const auto& [key, value] : entries) {
      if (key == "experiment") experiment = value;
    }
  }
  if (experiment.empty()) return {"no experiment named; set experiment = <name>"};
  const auto* spec = find_experiment(experiment);
  if (spec == nullptr) return {"unknown experiment '" + experiment + "'"};
  auto out = Violations();
  auto known = ConfigEntries();
  for (const auto& entry : entries) {
    if (entry.first == "experiment") {
      if (entry.second != experiment) out.push_back("experiment entry '" + entry.second + "' conflicts");
    } else if (spec->find_key(entry.first) == nullptr) {
      out.push_back("unknown key '" + entry.first + "'");
    } else {
      known.push_back(entry);
    }
  }
  auto more = check_config(*spec, resolve_config(*spec, known, {}));
  out.insert(out.end(), more.begin(), more.end());
  return out;
}

auto output_directory(const ExperimentSpec& spec, const Config& config) -> std::filesystem::path {
  if (const char* env = std::getenv(kOutputDirEnv); env != nullptr && *env != '\0') return env;
  if (config.has("output") && !config.text("output").empty()) return config.text("output");
  return std::filesystem::path("lbp-out") / spec.name;
}

auto run_experiment(const ExperimentSpec& spec, const Config& config, std::ostream& log) -> int {
  if (auto problems = check_config(spec, config); !problems.empty()) {
    for (const auto& p : problems) log << "config error: " << p << '\n';
    return kConfigError;
  }
  auto dir = output_directory(spec, config);
  std::filesystem::create_directories(dir);
  auto artifacts = Artifacts(dir);
  auto start = std::chrono::steady_clock::now();
  auto code = int{kOk};
  auto message = std::string();
  try {
    code = runner_for(spec.name)(config, artifacts, log);
  } catch (const ConfigError& e) {
    code = kConfigError;
    message = e.what();
  } catch (const InvalidArgument& e) {
    code = kConfigError;
    message = e.what();
  } catch (const UnsupportedRegime& e) {
    code = kConfigError;
    message = e.what();
  } catch (const NumericalFailure& e) {
    code = kNumericalFailure;
    message = e.what();
  } catch (const ImpracticalSampling& e) {
    code = kImpractical;
    message = e.what();
  }
  if (!message.empty()) log << "error: " << message << '\n';
  auto seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_manifest(dir, spec, config, artifacts.files(), code, message, seconds);
  log << "wrote " << artifacts.files().size() << " file(s) to " << dir.string() << '\n';
  return code;
}

auto main_entry(int argc, const char* const* argv) -> int {
  auto app = CLI::App("Logistic branching process toolkit", "lbp");
  app.require_subcommand(1);
  app.fallthrough();
  auto threads = 0U;
  app.add_option("--threads", threads, "worker thread cap (0 = machine parallelism)");

  struct Invocation {
    std::string config_path;
    std::vector<std::string> sets;
    std::map<std::string, std::string> flags;
  };
  auto invocations = std::map<std::string, Invocation>();
  for (const auto& spec : experiments()) {
    auto* sub = app.add_subcommand(spec.name, spec.summary);
    auto& inv = invocations[spec.name];
    sub->add_option("--config", inv.config_path, "key = value config file");
    sub->add_option("--set", inv.sets, "override as key=value (repeatable)");
    for (const auto& key : spec.keys) {
      sub->add_option("--" + key.name, inv.flags[key.name], key.help);
    }
  }
  auto validate_experiment = std::string();
  auto& validate_inv = invocations["validate"];
  auto* validate = app.add_subcommand("validate", "check a config without running it");
  validate->add_option("--experiment", validate_experiment, "experiment to check against");
  validate->add_option("--config", validate_inv.config_path, "key = value config file");
  validate->add_option("--set", validate_inv.sets, "override as key=value (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    auto code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }
  set_max_threads(threads);

  try {
    auto* chosen = app.get_subcommands().front();
    const auto& inv = invocations.at(chosen->get_name());
    auto file = inv.config_path.empty() ? ConfigEntries{} : load_config_file(inv.config_path);
    auto overrides = ConfigEntries();
    for (const auto& item : inv.sets) {
      auto parsed = parse_config_text(item, "--set");
      if (parsed.size() != 1) throw ConfigError("--set expects exactly one key=value, got '" + item + "'");
      overrides.push_back(parsed.front());
    }
    if (chosen == validate) {
      auto entries = file;
      entries.insert(entries.end(), overrides.begin(), overrides.end());
      auto problems = validate_entries(validate_experiment, entries);
      for (const auto& p : problems) std::cout << "violation: " << p << '\n';
      std::cout << (problems.empty() ? "valid" : std::to_string(problems.size()) + " violation(s)") << '\n';
      return kOk;
    }
    const auto& spec = *find_experiment(chosen->get_name());
    for (const auto& key : spec.keys) {
      if (chosen->count("--" + key.name) > 0) overrides.emplace_back(key.name, inv.flags.at(key.name));
    }
    auto config = resolve_config(spec, file, overrides);
    return run_experiment(spec, config, std::cerr);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }
}

}  // namespace lbp::cli
