#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "oracle.hpp"
#include "scenario.hpp"

namespace penqvi::acceptance {

struct Criterion {
  std::string id;
  std::string title;
  //! Wall-clock budget in seconds.
  double time_limit = 0.0;
  bool values_pass = false;
  Json values;
  double seconds = 0.0;

  bool pass() const { return values_pass && seconds < time_limit; }
};

namespace detail {

inline double slope_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(x[i]) / n;
    my += std::log(y[i]) / n;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return sxy / sxx;
}

inline ScenarioConfig vi_standard(const Json& patch = Json::object()) {
  Json j = Json{{"scenario", "vi-standard"}};
  j.merge_patch(patch);
  return parse_config(j);
}

inline ConstraintOperator constant_bound(double g) { return ConstraintOperator::constant(g); }

inline SpaceTimeFunction constant_source(double f) {
  return [f](const Point&, double) { return f; };
}

//! The bounds along the trajectory of a Given-constraint problem.
inline std::vector<ConstraintField> given_bounds(const ProblemSpec& spec) {
  return constraint_along(spec.constraint, spec.make_operator(), constant_trajectory(spec).fields, spec.time);
}

}  // namespace detail

//! Monotonicity of xi -> a(xi) + penalty stress on random pairs.
inline Criterion ac1(std::uint64_t seed) {
  Criterion c{"AC-1", "penalised operator is monotone", 1.0};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> xi_d(-2.0, 2.0), g_d(0.5, 1.5), eps_d(0.05, 0.95), delta_d(0.0, 0.5);
  const std::vector<double> ps{1.5, 2.0, 3.0};
  const std::vector<PenaltyVariant> variants{PenaltyVariant::MagnitudeGap, PenaltyVariant::PowerGap};
  constexpr int samples = 10000;
  double worst = std::numeric_limits<double>::infinity();
  Json per = Json::array();
  for (double p : ps) {
    const MaterialLaw law = MaterialLaw::power_law(p, 1.0);
    for (auto variant : variants) {
      double local = std::numeric_limits<double>::infinity();
      for (int s = 0; s < samples; ++s) {
        EdgeField a(1, 2), b(1, 2);
        for (int k = 0; k < 2; ++k) {
          a.values[static_cast<std::size_t>(k)] = xi_d(rng);
          b.values[static_cast<std::size_t>(k)] = xi_d(rng);
        }
        const ConstraintField g{{g_d(rng)}, 0.5, 1.5};
        PenaltyParams params;
        params.epsilon = eps_d(rng);
        params.delta = delta_d(rng);
        params.variant = variant;
        auto total = [&](const EdgeField& xi) {
          auto sigma = penalty_stress(xi, g, params, law);
          const auto ax = eval_a(law, Point{0.0, 0.0}, 0.0, xi.at(0));
          for (std::size_t k = 0; k < 2; ++k) sigma.values[k] += ax[k];
          return sigma;
        };
        const auto ta = total(a), tb = total(b);
        double ip = 0.0;
        for (std::size_t k = 0; k < 2; ++k) ip += (ta.values[k] - tb.values[k]) * (a.values[k] - b.values[k]);
        local = std::min(local, ip);
      }
      worst = std::min(worst, local);
      per.push_back({{"p", p}, {"variant", variant == PenaltyVariant::MagnitudeGap ? "magnitude" : "power"},
                     {"min_inner_product", local}});
    }
  }
  c.values["samples_per_case"] = samples;
  c.values["cases"] = per;
  c.values["min_inner_product"] = worst;
  c.values["threshold"] = -1e-12;
  c.values_pass = worst >= -1e-12;
  return c;
}

namespace detail {

//! The standard VI run with epsilons {0.4, 0.2, 0.1, 0.05} at delta = 1e-4.
inline QviResult epsilon_ladder(const ScenarioConfig& cfg) {
  return qvi_solve(cfg.spec, cfg.schedule, cfg.solver, cfg.outer);
}

inline ScenarioConfig epsilon_ladder_config() {
  return vi_standard(Json::parse(R"({"schedule": {"epsilons": [0.4, 0.2, 0.1, 0.05], "deltas": [0.0001]}})"));
}

}  // namespace detail

//! Violation shrinks over the epsilon stages and ends below 1e-3 g_* |Q_T|.
inline Criterion ac2() {
  Criterion c{"AC-2", "constraint satisfaction as epsilon decreases", 30.0};
  const auto cfg = detail::epsilon_ladder_config();
  const auto res = detail::epsilon_ladder(cfg);
  Json eps = Json::array(), viol = Json::array();
  bool monotone = true;
  for (std::size_t s = 0; s < res.stages.size(); ++s) {
    eps.push_back(res.stages[s].epsilon);
    viol.push_back(res.stages[s].violation);
    if (s > 0 && res.stages[s].violation > res.stages[s - 1].violation) monotone = false;
  }
  const double threshold = 1e-3 * cfg.spec.constraint.lower() * cfg.spec.time.final_time() * cfg.spec.grid.measure();
  const double final = res.stages.empty() ? std::numeric_limits<double>::infinity() : res.stages.back().violation;
  c.values["epsilons"] = eps;
  c.values["violations"] = viol;
  c.values["nonincreasing"] = monotone;
  c.values["final_violation"] = final;
  c.values["threshold"] = threshold;
  c.values["failure"] = res.failure;
  c.values_pass = res.failure.empty() && monotone && final <= threshold;
  return c;
}

//! One implicit step of the continuation solver against the projected-gradient oracle.
inline Criterion ac3() {
  Criterion c{"AC-3", "penalised step agrees with the variational inequality oracle", 120.0};
  const double dt = 0.01;
  ProblemSpec spec{Grid::line(1.0, 16),
                   TimeGrid(dt, 1),
                   OperatorKind::Gradient1D,
                   MaterialLaw::power_law(2.0, 0.1),
                   detail::constant_bound(1.0),
                   detail::constant_source(10.0),
                   Field(16)};
  const auto g = detail::given_bounds(spec);
  const auto cont = continuation_solve(spec, g, ContinuationSchedule{}, NewtonOptions{});
  const auto oracle = oracle_vi_step(spec.initial, g[1], spec, dt, dt);
  const double gap = max_abs_difference(cont.trajectory.final(), oracle.solution);
  const auto lu = spec.make_operator().apply(oracle.solution);
  double max_grad = 0.0;
  for (std::size_t j = 0; j < lu.points(); ++j) max_grad = std::max(max_grad, lu.magnitude(j));
  c.values["dt"] = dt;
  c.values["max_norm_gap"] = gap;
  c.values["oracle_kkt_residual"] = oracle.kkt_residual;
  c.values["oracle_iterations"] = oracle.iterations;
  c.values["oracle_max_gradient"] = max_grad;
  c.values["constraint_active"] = max_grad >= 1.0 - 1e-6;
  c.values_pass = gap <= 1e-3 && oracle.kkt_residual <= 1e-8 && max_grad >= 1.0 - 1e-6;
  return c;
}

//! Two solves from nearby initial data stay within the Gronwall envelope.
inline Criterion ac4() {
  Criterion c{"AC-4", "solutions depend contractively on the initial datum", 60.0};
  const auto cfg = detail::vi_standard();
  const ProblemSpec& first = cfg.spec;
  ProblemSpec second = first;
  Field bump(first.grid.size());
  for (std::size_t i = 0; i < bump.size(); ++i)
    bump[i] = first.grid.is_boundary(i) ? 0.0 : std::sin(std::numbers::pi * first.grid.coord(i)[0]);
  const double scale = 1e-2 / norm_l2(bump, first.grid);
  for (std::size_t i = 0; i < bump.size(); ++i) second.initial[i] = first.initial[i] + scale * bump[i];

  const auto perturbed = stability_experiment(first, second, cfg.schedule, cfg.solver);
  const auto identical = stability_experiment(first, first, cfg.schedule, cfg.solver);
  const double envelope = std::exp(first.time.final_time()) * perturbed.initial_term;
  const double same = std::sqrt(identical.lhs);
  c.values["initial_distance"] = std::sqrt(perturbed.initial_term);
  c.values["max_squared_distance"] = perturbed.lhs;
  c.values["envelope"] = envelope;
  c.values["identical_data_distance"] = same;
  c.values_pass = perturbed.lhs <= envelope && same <= 1e-9;
  return c;
}

//! Log-log slopes of the stability left-hand side under g and f perturbations.
inline Criterion ac5() {
  Criterion c{"AC-5", "continuous dependence on the bound and the source", 300.0};
  const auto cfg = detail::vi_standard();
  const ProblemSpec& base = cfg.spec;
  const std::vector<double> g_steps{0.02, 0.04, 0.08};
  const std::vector<double> f_steps{0.2, 0.4, 0.8};
  std::vector<double> g_lhs, f_lhs, f_norm;
  for (double d : g_steps) {
    ProblemSpec other = base;
    other.constraint = detail::constant_bound(1.0 + d);
    g_lhs.push_back(stability_experiment(base, other, cfg.schedule, cfg.solver).lhs);
  }
  for (double d : f_steps) {
    ProblemSpec other = base;
    other.source = detail::constant_source(10.0 + d);
    const auto rep = stability_experiment(base, other, cfg.schedule, cfg.solver);
    f_lhs.push_back(rep.lhs);
    f_norm.push_back(std::sqrt(rep.source_term));
  }
  const double g_slope = detail::slope_loglog(g_steps, g_lhs);
  const double f_slope = detail::slope_loglog(f_norm, f_lhs);
  c.values["g_perturbations"] = g_steps;
  c.values["g_lhs"] = g_lhs;
  c.values["g_slope"] = g_slope;
  c.values["f_perturbations"] = f_steps;
  c.values["f_norms"] = f_norm;
  c.values["f_lhs"] = f_lhs;
  c.values["f_slope"] = f_slope;
  c.values_pass = g_slope >= 0.9 && f_slope >= 1.8;
  return c;
}

//! Degenerate sandpile run to T = 5 against the oracle's stagnated profile.
inline Criterion ac6() {
  Criterion c{"AC-6", "sandpile reaches the steady profile", 60.0};
  const auto cfg = parse_config(Json{{"scenario", "sandpile-1d"}});
  const auto& spec = cfg.spec;
  const auto res = qvi_solve(spec, cfg.schedule, cfg.solver, cfg.outer);
  const double T = spec.time.final_time();
  const auto g = constraint_at_start(spec.constraint, spec.make_operator(), spec.initial);
  const auto ref = oracle_steady_state(spec, g, T, 1.0, 200, 1e-10);
  const Field& u = res.trajectory.final();
  double ref_max = 0.0, tent_gap = 0.0, ref_tent = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double x = spec.grid.coord(i)[0];
    const double tent = std::min(x, 1.0 - x);
    ref_max = std::max(ref_max, std::abs(ref.profile[i]));
    tent_gap = std::max(tent_gap, std::abs(u[i] - tent));
    ref_tent = std::max(ref_tent, std::abs(ref.profile[i] - tent));
  }
  const double gap = max_abs_difference(u, ref.profile);
  c.values["relative_gap_to_reference"] = gap / ref_max;
  c.values["relative_gap_to_tent"] = tent_gap / 0.5;
  c.values["reference_to_tent"] = ref_tent;
  c.values["reference_steps"] = ref.steps;
  c.values["reference_converged"] = ref.converged;
  c.values["failure"] = res.failure;
  c.values_pass = res.failure.empty() && ref.converged && gap <= 0.02 * ref_max;
  return c;
}

//! delta^(1/p) |Lu|_{L^p} over the delta stages at the smallest epsilon.
inline Criterion ac7() {
  Criterion c{"AC-7", "scaled L^p bound is uniform in delta", 120.0};
  const auto cfg = detail::vi_standard();
  const auto res = qvi_solve(cfg.spec, cfg.schedule, cfg.solver, cfg.outer);
  const double eps = cfg.schedule.epsilons.back();
  std::vector<double> deltas, scaled;
  for (const auto& s : res.stages)
    if (s.epsilon == eps) {
      deltas.push_back(s.delta);
      scaled.push_back(s.scaled_lp_norm);
    }
  double spread = std::numeric_limits<double>::infinity();
  if (!scaled.empty()) {
    const auto [lo, hi] = std::minmax_element(scaled.begin(), scaled.end());
    spread = (*hi - *lo) / *hi;
  }
  c.values["epsilon"] = eps;
  c.values["deltas"] = deltas;
  c.values["scaled_lp_norms"] = scaled;
  c.values["relative_spread"] = spread;
  c.values["failure"] = res.failure;
  c.values_pass = res.failure.empty() && deltas.size() == cfg.schedule.deltas.size() && spread < 0.1;
  return c;
}

//! Picard iteration on the contractive memory scenario.
inline Criterion ac8() {
  Criterion c{"AC-8", "fixed-point iteration converges geometrically", 300.0};
  const auto cfg = parse_config(Json{{"scenario", "qvi-memory"}});
  const auto& spec = cfg.spec;
  Trajectory phi = constant_trajectory(spec);
  bool geometric = true, converged = true;
  double worst_ratio = 0.0, worst_final = 0.0, worst_verify = 0.0;
  Json stages = Json::array();
  bool first = true;
  for (const auto& params : cfg.schedule.stages()) {
    auto fp = qvi_fixed_point(spec, params, cfg.solver, cfg.outer, phi, !first);
    first = false;
    double ratio = 0.0;
    for (std::size_t k = 1; k < fp.residuals.size(); ++k)
      ratio = std::max(ratio, fp.residuals[k] / fp.residuals[k - 1]);
    geometric = geometric && ratio < 1.0;
    converged = converged && fp.converged;
    const double last = fp.residuals.empty() ? 0.0 : fp.residuals.back();
    worst_ratio = std::max(worst_ratio, ratio);
    worst_final = std::max(worst_final, last);
    worst_verify = std::max(worst_verify, fp.verification_residual);
    stages.push_back({{"epsilon", params.epsilon}, {"delta", params.delta}, {"residuals", fp.residuals},
                      {"max_ratio", ratio}, {"verification_residual", fp.verification_residual}});
    phi = std::move(fp.trajectory);
  }
  c.values["stages"] = stages;
  c.values["max_ratio"] = worst_ratio;
  c.values["max_final_residual"] = worst_final;
  c.values["max_verification_residual"] = worst_verify;
  c.values_pass = geometric && converged && worst_final <= 1e-8 && worst_verify <= 2e-8;
  return c;
}

//! Exponential averages v_n of the AC-2 solution and of its bound.
inline Criterion ac9() {
  Criterion c{"AC-9", "regularizing sequence approaches the solution inside the averaged bound", 30.0};
  const auto cfg = detail::epsilon_ladder_config();
  const auto res = detail::epsilon_ladder(cfg);
  const auto& spec = cfg.spec;
  const auto op = spec.make_operator();
  const double dt = spec.time.dt();
  const std::vector<double> ns{4.0, 16.0, 64.0};
  std::vector<double> dist, gdist, excess;
  for (double n : ns) {
    const auto vn = regularizing_sequence(res.trajectory, spec.initial, n, dt);
    const auto gn = constraint_transfer(res.constraints, n, dt);
    dist.push_back(distance_spacetime(vn, res.trajectory, spec));
    double gd = 0.0;
    for (std::size_t k = 0; k < gn.size(); ++k)
      for (std::size_t j = 0; j < gn[k].size(); ++j) gd = std::max(gd, std::abs(gn[k][j] - res.constraints[k][j]));
    gdist.push_back(gd);
    excess.push_back(transfer_excess(vn, gn, op));
  }
  bool v_decreasing = true, g_nonincreasing = true;
  for (std::size_t i = 1; i < ns.size(); ++i) {
    v_decreasing = v_decreasing && dist[i] < dist[i - 1];
    g_nonincreasing = g_nonincreasing && gdist[i] <= gdist[i - 1];
  }
  const double worst_excess = *std::max_element(excess.begin(), excess.end());
  c.values["n"] = ns;
  c.values["solution_distances"] = dist;
  c.values["bound_distances"] = gdist;
  c.values["max_excess"] = excess;
  c.values["solution_distances_decrease"] = v_decreasing;
  c.values["bound_distances_nonincreasing"] = g_nonincreasing;
  c.values_pass = res.failure.empty() && v_decreasing && g_nonincreasing && worst_excess <= 1e-9;
  return c;
}

inline const std::vector<std::string>& criterion_ids() {
  static const std::vector<std::string> ids{"AC-1", "AC-2", "AC-3", "AC-4", "AC-5",
                                            "AC-6", "AC-7", "AC-8", "AC-9", "AC-10"};
  return ids;
}

inline Criterion run_one(const std::string& id, std::uint64_t seed) {
  const std::map<std::string, std::function<Criterion()>> table{
      {"AC-1", [seed] { return ac1(seed); }}, {"AC-2", ac2}, {"AC-3", ac3}, {"AC-4", ac4}, {"AC-5", ac5},
      {"AC-6", ac6},                          {"AC-7", ac7}, {"AC-8", ac8}, {"AC-9", ac9}};
  const auto it = table.find(id);
  if (it == table.end()) throw ConfigError("criterion: unknown id '" + id + "'");
  const auto t0 = std::chrono::steady_clock::now();
  Criterion c;
  try {
    c = it->second();
  } catch (const std::exception& e) {
    c.id = id;
    c.values = Json{{"error", e.what()}};
    c.values_pass = false;
    c.time_limit = 0.0;
  }
  c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return c;
}

//! Timing is left out so that reruns are byte-identical.
inline Json summary_json(const std::vector<Criterion>& results, std::uint64_t seed) {
  Json j;
  j["seed"] = seed;
  Json arr = Json::array();
  for (const auto& c : results)
    arr.push_back({{"id", c.id}, {"title", c.title}, {"values_pass", c.values_pass}, {"values", c.values}});
  j["criteria"] = arr;
  return j;
}

inline std::string console_line(const Criterion& c) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-5s %s  %.2fs (limit %.0fs)  ", c.id.c_str(), c.pass() ? "PASS" : "FAIL",
                c.seconds, c.time_limit);
  std::string line = buf + c.title;
  if (!c.values_pass) line += "  [values out of tolerance]";
  else if (!c.pass()) line += "  [over time budget]";
  return line;
}

/// Runs the requested criteria (all when `ids` is empty), printing one line
/// each through `report`, and writes summary.json into `outdir`. AC-10
/// repeats AC-1..AC-9 and compares the serialized summaries byte for byte.
inline std::vector<Criterion> run(const std::vector<std::string>& ids, std::uint64_t seed,
                                  const std::filesystem::path& outdir,
                                  const std::function<void(const Criterion&)>& report = {}) {
  const auto& all = criterion_ids();
  std::vector<std::string> wanted = ids.empty() ? all : ids;
  for (const auto& id : wanted)
    if (std::find(all.begin(), all.end(), id) == all.end()) throw ConfigError("criterion: unknown id '" + id + "'");
  const bool determinism = std::find(wanted.begin(), wanted.end(), "AC-10") != wanted.end();

  std::vector<Criterion> results;
  for (const auto& id : all) {
    if (id == "AC-10" || std::find(wanted.begin(), wanted.end(), id) == wanted.end()) continue;
    results.push_back(run_one(id, seed));
    if (report) report(results.back());
  }
  if (determinism) {
    Criterion c{"AC-10", "repeated verification is byte-identical", 600.0};
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::string> inner;
    for (const auto& id : all)
      if (id != "AC-10") inner.push_back(id);
    std::vector<Criterion> first = results, second;
    if (first.size() != inner.size()) {
      first.clear();
      for (const auto& id : inner) first.push_back(run_one(id, seed));
    }
    for (const auto& id : inner) second.push_back(run_one(id, seed));
    const std::string a = summary_json(first, seed).dump(2);
    const std::string b = summary_json(second, seed).dump(2);
    c.values["bytes"] = a.size();
    c.values["identical"] = a == b;
    c.values_pass = a == b;
    c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    results.push_back(c);
    if (report) report(c);
  }
  write_text(outdir / "summary.json", summary_json(results, seed).dump(2) + "\n");
  return results;
}

}  // namespace penqvi::acceptance
