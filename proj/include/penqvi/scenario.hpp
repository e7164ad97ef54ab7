#pragma once

#include <json.hpp>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "problem.hpp"
#include "qvi.hpp"

namespace penqvi {

using Json = nlohmann::ordered_json;

//! Malformed or out-of-range configuration; the message starts with the dotted key.
class ConfigError : public Error {
public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Formatting
// ---------------------------------------------------------------------------

//! 17 significant digits, enough to round-trip a double.
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// ---------------------------------------------------------------------------
// Config access by dotted key
// ---------------------------------------------------------------------------

namespace config {

inline const Json* find(const Json& root, const std::string& path) {
  const Json* node = &root;
  std::size_t start = 0;
  while (start <= path.size()) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(key)) return nullptr;
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  return node;
}

inline const Json& require(const Json& root, const std::string& path) {
  const Json* n = find(root, path);
  if (!n) throw ConfigError(path + ": missing key");
  return *n;
}

inline double number(const Json& root, const std::string& path) {
  const Json& n = require(root, path);
  if (!n.is_number()) throw ConfigError(path + ": expected a number");
  return n.get<double>();
}

inline double number_or(const Json& root, const std::string& path, double fallback) {
  return find(root, path) ? number(root, path) : fallback;
}

inline int integer(const Json& root, const std::string& path) {
  const Json& n = require(root, path);
  if (!n.is_number_integer()) throw ConfigError(path + ": expected an integer");
  return n.get<int>();
}

inline int integer_or(const Json& root, const std::string& path, int fallback) {
  return find(root, path) ? integer(root, path) : fallback;
}

inline std::string text(const Json& root, const std::string& path) {
  const Json& n = require(root, path);
  if (!n.is_string()) throw ConfigError(path + ": expected a string");
  return n.get<std::string>();
}

inline std::string text_or(const Json& root, const std::string& path, const std::string& fallback) {
  return find(root, path) ? text(root, path) : fallback;
}

inline bool boolean_or(const Json& root, const std::string& path, bool fallback) {
  const Json* n = find(root, path);
  if (!n) return fallback;
  if (!n->is_boolean()) throw ConfigError(path + ": expected true or false");
  return n->get<bool>();
}

inline std::vector<double> numbers(const Json& root, const std::string& path) {
  const Json& n = require(root, path);
  if (!n.is_array()) throw ConfigError(path + ": expected an array of numbers");
  std::vector<double> out;
  for (const auto& v : n) {
    if (!v.is_number()) throw ConfigError(path + ": expected an array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

inline std::vector<int> integers(const Json& root, const std::string& path) {
  const Json& n = require(root, path);
  if (!n.is_array()) throw ConfigError(path + ": expected an array of integers");
  std::vector<int> out;
  for (const auto& v : n) {
    if (!v.is_number_integer()) throw ConfigError(path + ": expected an array of integers");
    out.push_back(v.get<int>());
  }
  return out;
}

//! Sets a numeric leaf; an array-valued leaf becomes the one-element array [value].
inline void set_number(Json& root, const std::string& path, double value) {
  const Json* existing = find(root, path);
  if (!existing) throw ConfigError(path + ": axis does not name a key of the configuration");
  if (!existing->is_number() && !existing->is_array())
    throw ConfigError(path + ": axis must name a numeric parameter");
  if (existing->is_array())
    for (const auto& v : *existing)
      if (!v.is_number()) throw ConfigError(path + ": axis must name a numeric parameter");
  Json* node = &root;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  const bool integral = node->is_number_integer() && value == std::floor(value) && std::abs(value) < 1e9;
  Json leaf = integral ? Json(static_cast<long long>(value)) : Json(value);
  if (node->is_array())
    *node = Json::array({leaf});
  else
    *node = leaf;
}

}  // namespace config

// ---------------------------------------------------------------------------
// Function catalog
// ---------------------------------------------------------------------------

namespace catalog {

inline std::vector<double> coefficients(const Json& spec, const std::string& path, std::size_t count,
                                        const std::string& id) {
  std::vector<double> c;
  if (config::find(spec, "c")) c = config::numbers(spec, "c");
  if (c.size() != count)
    throw ConfigError(path + ".c: '" + id + "' takes " + std::to_string(count) + " coefficient" +
                      (count == 1 ? "" : "s"));
  for (double v : c)
    if (!std::isfinite(v)) throw ConfigError(path + ".c: coefficients must be finite");
  return c;
}

//! Distance to the boundary of the box [0, ex] x [0, ey] (the x-interval in 1D).
inline double box_distance(const Point& x, const Grid& grid) {
  double d = std::min(x[0], grid.extent(0) - x[0]);
  if (grid.dim() == 2) d = std::min({d, x[1], grid.extent(1) - x[1]});
  return d;
}

/// Space-time functions selected by id:
///   constant [a]          a
///   linear_time [a, b]    a + b t
///   linear_x [a, b]       a + b x
///   sine_x [a, b, k]      a + b sin(k pi x / X)      (X the x-extent)
///   sine_time [a, b, w]   a + b sin(w t)
///   tent [a]              a * distance to the boundary
///   bump [a]              a * prod sin(pi x_i / X_i)
inline SpaceTimeFunction space_time(const Json& root, const std::string& path, const Grid& grid) {
  const Json& spec = config::require(root, path);
  if (!spec.is_object()) throw ConfigError(path + ": expected an object with 'id' and 'c'");
  const std::string id = config::text(spec, "id");
  const double X = grid.extent(0);
  if (id == "constant") {
    const auto c = coefficients(spec, path, 1, id);
    return [a = c[0]](const Point&, double) { return a; };
  }
  if (id == "linear_time") {
    const auto c = coefficients(spec, path, 2, id);
    return [a = c[0], b = c[1]](const Point&, double t) { return a + b * t; };
  }
  if (id == "linear_x") {
    const auto c = coefficients(spec, path, 2, id);
    return [a = c[0], b = c[1]](const Point& x, double) { return a + b * x[0]; };
  }
  if (id == "sine_x") {
    const auto c = coefficients(spec, path, 3, id);
    return [a = c[0], b = c[1], k = c[2], X](const Point& x, double) {
      return a + b * std::sin(k * std::numbers::pi * x[0] / X);
    };
  }
  if (id == "sine_time") {
    const auto c = coefficients(spec, path, 3, id);
    return [a = c[0], b = c[1], w = c[2]](const Point&, double t) { return a + b * std::sin(w * t); };
  }
  if (id == "tent") {
    const auto c = coefficients(spec, path, 1, id);
    return [a = c[0], grid](const Point& x, double) { return a * box_distance(x, grid); };
  }
  if (id == "bump") {
    const auto c = coefficients(spec, path, 1, id);
    return [a = c[0], grid](const Point& x, double) {
      double v = a;
      for (int axis = 0; axis < grid.dim(); ++axis)
        v *= std::sin(std::numbers::pi * x[static_cast<std::size_t>(axis)] / grid.extent(axis));
      return v;
    };
  }
  throw ConfigError(path + ".id: unknown function '" + id +
                    "' (known: constant, linear_time, linear_x, sine_x, sine_time, tent, bump)");
}

/// Memory kernels K(t, s):
///   constant [k]           k
///   exponential [k, r]     k exp(-r (t - s))
inline std::function<double(double, double)> kernel(const Json& root, const std::string& path) {
  const Json& spec = config::require(root, path);
  const std::string id = config::text(spec, "id");
  if (id == "constant") {
    const auto c = coefficients(spec, path, 1, id);
    return [k = c[0]](double, double) { return k; };
  }
  if (id == "exponential") {
    const auto c = coefficients(spec, path, 2, id);
    return [k = c[0], r = c[1]](double t, double s) { return k * std::exp(-r * (t - s)); };
  }
  throw ConfigError(path + ".id: unknown kernel '" + id + "' (known: constant, exponential)");
}

/// Composition rules zeta -> g:
///   affine [a, b]       a + b zeta
///   quadratic [a, b]    a + b zeta^2
inline std::function<double(double)> composition(const Json& root, const std::string& path) {
  const Json& spec = config::require(root, path);
  const std::string id = config::text(spec, "id");
  if (id == "affine") {
    const auto c = coefficients(spec, path, 2, id);
    return [a = c[0], b = c[1]](double z) { return a + b * z; };
  }
  if (id == "quadratic") {
    const auto c = coefficients(spec, path, 2, id);
    return [a = c[0], b = c[1]](double z) { return a + b * z * z; };
  }
  throw ConfigError(path + ".id: unknown composition '" + id + "' (known: affine, quadratic)");
}

}  // namespace catalog

// ---------------------------------------------------------------------------
// Built-in scenarios
// ---------------------------------------------------------------------------

namespace detail {

inline Json base_vi() {
  return Json::parse(R"({
    "grid": {"nodes": [33], "extent": [1.0]},
    "time": {"final": 0.5, "steps": 50},
    "operator": "gradient",
    "material": {"p": 2.0, "alpha": 1.0, "mu": 0.0, "b": "zero", "lambda": 0.0},
    "constraint": {"kind": "given", "g": {"id": "constant", "c": [1.0]}, "lower": 1.0, "upper": 1.0},
    "source": {"id": "constant", "c": [10.0]},
    "initial": {"id": "constant", "c": [0.0]},
    "schedule": {"epsilons": [0.4, 0.2, 0.1, 0.05], "deltas": [0.01, 0.0001, 0.000001],
                 "variant": "magnitude", "allow_small_epsilon": false, "saturation": 1e12},
    "solver": {"max_iterations": 50, "relative_tolerance": 1e-10, "absolute_tolerance": 1e-12,
               "max_halvings": 8},
    "outer": {"max_iterations": 60, "tolerance": 1e-8, "relaxation": 1.0},
    "output": {"fields": false},
    "seed": 20240917
  })");
}

}  // namespace detail

inline const std::map<std::string, std::string>& builtin_descriptions() {
  static const std::map<std::string, std::string> d{
      {"vi-standard", "1D gradient-constrained heat flow, f = 10, |u'| <= 1"},
      {"vi-heat-unconstrained", "same data with g = 1000: the constraint never binds"},
      {"vi-moving-obstacle", "1D, bound g(t) = 1 + 0.5 sin(2 pi t / T) moving in time"},
      {"vi-laplacian", "1D, bound on |u''| with a sine source"},
      {"vi-2d", "2D gradient-constrained flow on the unit square"},
      {"vi-plaplacian", "1D, p = 3 law with a linear reaction term"},
      {"sandpile-1d", "degenerate law alpha = 0, f = 1, |u'| <= 1, run to T = 5"},
      {"qvi-memory", "bound 1 + 0.5 zeta with zeta the time integral of u (contractive)"},
      {"qvi-heat-coupled", "bound driven by an auxiliary heat equation sourced by u and |u'|"},
      {"qvi-sandpile-memory", "degenerate sandpile with a memory-dependent bound"},
  };
  return d;
}

inline Json builtin_scenario(const std::string& name) {
  Json j = detail::base_vi();
  j["scenario"] = name;
  if (name == "vi-standard") return j;
  if (name == "vi-heat-unconstrained") {
    j["constraint"] = Json::parse(R"({"kind": "given", "g": {"id": "constant", "c": [1000.0]},
                                      "lower": 1000.0, "upper": 1000.0})");
    return j;
  }
  if (name == "vi-moving-obstacle") {
    j["constraint"] = Json::parse(R"({"kind": "given", "g": {"id": "sine_time", "c": [1.0, 0.5, 12.566370614359172]},
                                      "lower": 0.5, "upper": 1.5})");
    return j;
  }
  if (name == "vi-laplacian") {
    j["operator"] = "laplacian";
    j["source"] = Json::parse(R"({"id": "sine_x", "c": [0.0, 100.0, 1.0]})");
    j["constraint"] = Json::parse(R"({"kind": "given", "g": {"id": "constant", "c": [5.0]}, "lower": 5.0, "upper": 5.0})");
    return j;
  }
  if (name == "vi-2d") {
    j["grid"] = Json::parse(R"({"nodes": [13, 13], "extent": [1.0, 1.0]})");
    j["time"] = Json::parse(R"({"final": 0.2, "steps": 20})");
    j["source"] = Json::parse(R"({"id": "constant", "c": [20.0]})");
    return j;
  }
  if (name == "vi-plaplacian") {
    j["material"] = Json::parse(R"({"p": 3.0, "alpha": 1.0, "mu": 0.0, "b": "linear", "lambda": 1.0})");
    return j;
  }
  if (name == "sandpile-1d") {
    j["material"]["alpha"] = 0.0;
    j["source"] = Json::parse(R"({"id": "constant", "c": [1.0]})");
    j["time"] = Json::parse(R"({"final": 5.0, "steps": 50})");
    return j;
  }
  if (name == "qvi-memory") {
    j["constraint"] = Json::parse(R"({"kind": "memory", "kernel": {"id": "constant", "c": [1.0]},
                                      "compose": {"id": "affine", "c": [1.0, 0.5]}, "lower": 0.5, "upper": 2.0})");
    return j;
  }
  if (name == "qvi-heat-coupled") {
    j["constraint"] = Json::parse(R"({"kind": "heat", "diffusivity": 1.0, "psi": 1.0, "eta": 0.2,
                                      "source": {"id": "constant", "c": [0.0]},
                                      "compose": {"id": "affine", "c": [1.0, 0.5]}, "lower": 0.5, "upper": 2.0})");
    return j;
  }
  if (name == "qvi-sandpile-memory") {
    j["material"]["alpha"] = 0.0;
    j["source"] = Json::parse(R"({"id": "constant", "c": [1.0]})");
    j["time"] = Json::parse(R"({"final": 2.0, "steps": 40})");
    j["constraint"] = Json::parse(R"({"kind": "memory", "kernel": {"id": "exponential", "c": [1.0, 1.0]},
                                      "compose": {"id": "affine", "c": [1.0, 0.5]}, "lower": 0.5, "upper": 2.0})");
    return j;
  }
  throw ConfigError("scenario: unknown built-in '" + name + "'");
}

// ---------------------------------------------------------------------------
// Resolved configuration
// ---------------------------------------------------------------------------

struct ScenarioConfig {
  std::string name;
  //! The merged configuration the run used.
  Json resolved;
  ProblemSpec spec;
  ContinuationSchedule schedule;
  NewtonOptions solver;
  OuterOptions outer;
  bool dump_fields = false;
  std::string output_directory;
  std::uint64_t seed = 0;
};

namespace detail {

inline Grid parse_grid(const Json& j) {
  const auto nodes = config::integers(j, "grid.nodes");
  const auto extent = config::numbers(j, "grid.extent");
  if (nodes.empty() || nodes.size() > 2) throw ConfigError("grid.nodes: expected one or two node counts");
  if (extent.size() != nodes.size()) throw ConfigError("grid.extent: needs one entry per axis of grid.nodes");
  for (int n : nodes)
    if (n < 3) throw ConfigError("grid.nodes: every axis needs at least 3 nodes");
  for (double e : extent)
    if (!(e > 0.0) || !std::isfinite(e)) throw ConfigError("grid.extent: extents must be positive");
  return nodes.size() == 1 ? Grid::line(extent[0], nodes[0]) : Grid::rectangle(extent[0], extent[1], nodes[0], nodes[1]);
}

inline MaterialLaw parse_material(const Json& j) {
  MaterialLaw law;
  law.p = config::number(j, "material.p");
  const double alpha = config::number(j, "material.alpha");
  law.mu = config::number_or(j, "material.mu", 0.0);
  const std::string b = config::text_or(j, "material.b", "zero");
  law.lambda = config::number_or(j, "material.lambda", 0.0);
  if (!(law.p > 1.0) || !std::isfinite(law.p)) throw ConfigError("material.p: must lie in (1, inf)");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("material.alpha: must be nonnegative");
  if (!(law.mu >= 0.0)) throw ConfigError("material.mu: must be nonnegative");
  if (!(law.lambda >= 0.0)) throw ConfigError("material.lambda: must be nonnegative");
  if (b == "zero")
    law.b_kind = BKind::Zero;
  else if (b == "linear")
    law.b_kind = BKind::Linear;
  else
    throw ConfigError("material.b: expected 'zero' or 'linear'");
  law.alpha = [alpha](const Point&, double) { return alpha; };
  law.alpha_sup = alpha;
  return law;
}

inline ConstraintOperator parse_constraint(const Json& j, const Grid& grid) {
  const std::string kind = config::text(j, "constraint.kind");
  const double lower = config::number(j, "constraint.lower");
  const double upper = config::number(j, "constraint.upper");
  if (!(lower > 0.0)) throw ConfigError("constraint.lower: must be positive");
  if (!(upper >= lower)) throw ConfigError("constraint.upper: must be >= constraint.lower");
  if (kind == "given") return {GivenConstraint{catalog::space_time(j, "constraint.g", grid)}, lower, upper};
  if (kind == "memory") {
    auto compose = catalog::composition(j, "constraint.compose");
    return {MemoryKernelConstraint{catalog::kernel(j, "constraint.kernel"),
                                   [compose](const Point&, double, double z) { return compose(z); }},
            lower, upper};
  }
  if (kind == "heat") {
    CoupledHeatConstraint heat;
    heat.diffusivity = config::number_or(j, "constraint.diffusivity", 1.0);
    heat.psi = config::number_or(j, "constraint.psi", 0.0);
    heat.eta = config::number_or(j, "constraint.eta", 0.0);
    if (!(heat.diffusivity > 0.0)) throw ConfigError("constraint.diffusivity: must be positive");
    if (config::find(j, "constraint.source")) heat.source = catalog::space_time(j, "constraint.source", grid);
    heat.compose = catalog::composition(j, "constraint.compose");
    return {heat, lower, upper};
  }
  throw ConfigError("constraint.kind: expected 'given', 'memory' or 'heat'");
}

inline ContinuationSchedule parse_schedule(const Json& j) {
  ContinuationSchedule s;
  s.epsilons = config::numbers(j, "schedule.epsilons");
  s.deltas = config::numbers(j, "schedule.deltas");
  const std::string variant = config::text_or(j, "schedule.variant", "magnitude");
  if (variant == "magnitude")
    s.variant = PenaltyVariant::MagnitudeGap;
  else if (variant == "power")
    s.variant = PenaltyVariant::PowerGap;
  else
    throw ConfigError("schedule.variant: expected 'magnitude' or 'power'");
  s.allow_small_epsilon = config::boolean_or(j, "schedule.allow_small_epsilon", false);
  s.saturation = config::number_or(j, "schedule.saturation", 1e12);
  if (s.epsilons.empty()) throw ConfigError("schedule.epsilons: must be nonempty");
  if (s.deltas.empty()) throw ConfigError("schedule.deltas: must be nonempty");
  for (double e : s.epsilons) {
    if (!(e > 0.0 && e < 1.0)) throw ConfigError("schedule.epsilons: values must lie in (0, 1)");
    if (e < PenaltyParams{}.min_epsilon && !s.allow_small_epsilon)
      throw ConfigError("schedule.epsilons: " + fmt17(e) +
                        " is below the overflow guard 0.05; set schedule.allow_small_epsilon");
  }
  for (double d : s.deltas)
    if (!(d >= 0.0 && d < 1.0)) throw ConfigError("schedule.deltas: values must lie in [0, 1)");
  for (std::size_t i = 1; i < s.epsilons.size(); ++i)
    if (!(s.epsilons[i] < s.epsilons[i - 1])) throw ConfigError("schedule.epsilons: must be strictly decreasing");
  for (std::size_t i = 1; i < s.deltas.size(); ++i)
    if (!(s.deltas[i] < s.deltas[i - 1])) throw ConfigError("schedule.deltas: must be strictly decreasing");
  if (s.allow_small_epsilon && !(s.saturation > 0.0)) throw ConfigError("schedule.saturation: must be positive");
  return s;
}

inline NewtonOptions parse_solver(const Json& j) {
  NewtonOptions o;
  o.max_iterations = config::integer_or(j, "solver.max_iterations", o.max_iterations);
  o.relative_tolerance = config::number_or(j, "solver.relative_tolerance", o.relative_tolerance);
  o.absolute_tolerance = config::number_or(j, "solver.absolute_tolerance", o.absolute_tolerance);
  o.max_halvings = config::integer_or(j, "solver.max_halvings", o.max_halvings);
  if (o.max_iterations < 1) throw ConfigError("solver.max_iterations: must be >= 1");
  if (!(o.relative_tolerance > 0.0)) throw ConfigError("solver.relative_tolerance: must be positive");
  if (!(o.absolute_tolerance > 0.0)) throw ConfigError("solver.absolute_tolerance: must be positive");
  if (o.max_halvings < 0) throw ConfigError("solver.max_halvings: must be >= 0");
  return o;
}

inline OuterOptions parse_outer(const Json& j) {
  OuterOptions o;
  o.max_iterations = config::integer_or(j, "outer.max_iterations", o.max_iterations);
  o.tolerance = config::number_or(j, "outer.tolerance", o.tolerance);
  o.relaxation = config::number_or(j, "outer.relaxation", o.relaxation);
  if (o.max_iterations < 1) throw ConfigError("outer.max_iterations: must be >= 1");
  if (!(o.tolerance > 0.0)) throw ConfigError("outer.tolerance: must be positive");
  if (!(o.relaxation > 0.0 && o.relaxation <= 1.0)) throw ConfigError("outer.relaxation: must lie in (0, 1]");
  return o;
}

}  // namespace detail

/// Merges `user` (a JSON merge patch) over the built-in scenario it names, or
/// over the standard VI scenario, and builds every solver input from it.
inline ScenarioConfig parse_config(const Json& user) {
  if (!user.is_object()) throw ConfigError("config: expected a JSON object");
  const std::string name = config::text_or(user, "scenario", "vi-standard");
  Json merged = builtin_scenario(name);
  merged.merge_patch(user);
  merged["scenario"] = name;

  const Grid grid = detail::parse_grid(merged);
  const double final_time = config::number(merged, "time.final");
  const int steps = config::integer(merged, "time.steps");
  if (!(final_time > 0.0) || !std::isfinite(final_time)) throw ConfigError("time.final: must be positive");
  if (steps < 0) throw ConfigError("time.steps: must be nonnegative");

  const std::string op_name = config::text(merged, "operator");
  OperatorKind kind;
  if (op_name == "gradient")
    kind = grid.dim() == 1 ? OperatorKind::Gradient1D : OperatorKind::Gradient2D;
  else if (op_name == "laplacian") {
    if (grid.dim() != 1) throw ConfigError("operator: 'laplacian' is available on 1D grids only");
    kind = OperatorKind::Laplacian1D;
  } else
    throw ConfigError("operator: expected 'gradient' or 'laplacian'");

  const MaterialLaw law = detail::parse_material(merged);
  ConstraintOperator constraint = detail::parse_constraint(merged, grid);
  const SpaceTimeFunction source = catalog::space_time(merged, "source", grid);
  const SpaceTimeFunction initial = catalog::space_time(merged, "initial", grid);
  Field u0(grid.size());
  for (std::size_t i = 0; i < u0.size(); ++i) u0[i] = grid.is_boundary(i) ? 0.0 : initial(grid.coord(i), 0.0);

  ProblemSpec spec{grid, TimeGrid(final_time, steps), kind, law, std::move(constraint), source, std::move(u0)};
  try {
    spec.validate();
  } catch (const ConstraintBoundsError& e) {
    throw ConfigError(std::string("constraint.g: ") + e.what());
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("initial: ") + e.what());
  }
  ScenarioConfig cfg{name,
                     Json(),
                     std::move(spec),
                     detail::parse_schedule(merged),
                     detail::parse_solver(merged),
                     detail::parse_outer(merged)};
  cfg.dump_fields = config::boolean_or(merged, "output.fields", false);
  cfg.output_directory = config::text_or(merged, "output.directory", name);
  const Json* seed = config::find(merged, "seed");
  if (seed) {
    if (!seed->is_number_unsigned() && !seed->is_number_integer()) throw ConfigError("seed: expected an integer");
    cfg.seed = seed->get<std::uint64_t>();
  }
  cfg.resolved = std::move(merged);
  return cfg;
}

inline ScenarioConfig load_config(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_text(path));
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return parse_config(j);
}

// ---------------------------------------------------------------------------
// Running a scenario
// ---------------------------------------------------------------------------

struct ScenarioOutcome {
  int exit_code = 0;
  std::string message;
  QviResult result;
  Json summary;
};

namespace detail {

inline Json stage_json(const StageSummary& s) {
  Json j;
  j["epsilon"] = s.epsilon;
  j["delta"] = s.delta;
  j["violation"] = s.violation;
  j["penalty_mass"] = s.penalty_mass;
  j["final_l2"] = s.final_l2;
  j["max_l2"] = s.max_l2;
  j["lp_norm"] = s.lp_norm;
  j["scaled_lp_norm"] = s.scaled_lp_norm;
  j["newton_iterations"] = s.newton_iterations;
  j["max_halvings"] = s.max_halvings;
  j["outer_iterations"] = s.outer_iterations;
  j["outer_converged"] = s.outer_converged;
  j["outer_residuals"] = s.outer_residuals;
  return j;
}

//! Node indices along the line y = middle row (all nodes in 1D).
inline std::vector<std::size_t> profile_nodes(const Grid& grid) {
  std::vector<std::size_t> out;
  const int row = grid.dim() == 2 ? grid.nodes(1) / 2 : 0;
  for (int i = 0; i < grid.nodes(0); ++i) out.push_back(grid.index(i, row));
  return out;
}

inline std::string csv_line(const std::vector<std::string>& cells) {
  std::string s;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) s += ',';
    s += cells[i];
  }
  return s + '\n';
}

}  // namespace detail

/// Solves the configured problem and writes into `outdir`:
///   summary.json     final norms, violations and per-stage diagnostics
///   timeseries.csv   per time node: |u|_L2, violation, penalty mass, Newton data
///   profile.csv      the solution along x at t = 0, T/2 and T
///   residuals.csv    per stage: Newton residual per step and outer residuals
///   fields/u_K.csv   every field, when output.fields is set
/// The files are written on solver failure too; the exit code is then 2.
inline ScenarioOutcome run_scenario(const ScenarioConfig& cfg, const std::filesystem::path& outdir) {
  namespace fs = std::filesystem;
  ScenarioOutcome out;
  const auto& spec = cfg.spec;
  out.result = qvi_solve(spec, cfg.schedule, cfg.solver, cfg.outer);
  const auto& res = out.result;
  const bool complete = res.failure.empty();
  out.exit_code = complete ? 0 : 2;
  out.message = res.failure;

  const auto op = spec.make_operator();
  const auto stages = cfg.schedule.stages();
  const PenaltyParams last = res.stages.empty() ? stages.front() : stages[res.stages.size() - 1];
  const int n = res.trajectory.steps();

  // time series
  std::string ts = detail::csv_line({"k", "t", "l2_norm", "violation", "penalty_mass", "max_excess",
                                     "newton_iterations", "halvings"});
  double max_excess = -std::numeric_limits<double>::infinity();
  for (int k = 0; k <= n; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    const auto lu = op.apply(res.trajectory.fields[kk]);
    const auto& g = res.constraints[kk];
    double excess = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < lu.points(); ++j) excess = std::max(excess, lu.magnitude(j) - g[j]);
    if (k > 0) max_excess = std::max(max_excess, excess);
    const bool has_diag = k > 0 && kk - 1 < res.trajectory.diagnostics.size();
    ts += detail::csv_line({std::to_string(k), fmt17(spec.time.time(k)),
                            fmt17(norm_l2(res.trajectory.fields[kk], spec.grid)),
                            fmt17(violation_positive_part(lu, g, spec.grid)),
                            fmt17(penalty_mass(lu, g, last, spec.law.p, spec.grid)), fmt17(excess),
                            std::to_string(has_diag ? res.trajectory.diagnostics[kk - 1].newton_iterations : 0),
                            std::to_string(has_diag ? res.trajectory.diagnostics[kk - 1].halvings : 0)});
  }
  write_text(outdir / "timeseries.csv", ts);

  // profile at t = 0, T/2, T
  {
    const std::vector<int> ks{0, n / 2, n};
    std::vector<std::string> head{"x"};
    for (int k : ks) head.push_back("u(t=" + fmt17(spec.time.time(k)) + ")");
    std::string prof = detail::csv_line(head);
    for (std::size_t i : detail::profile_nodes(spec.grid)) {
      std::vector<std::string> row{fmt17(spec.grid.coord(i)[0])};
      for (int k : ks) row.push_back(fmt17(res.trajectory.fields[static_cast<std::size_t>(k)][i]));
      prof += detail::csv_line(row);
    }
    write_text(outdir / "profile.csv", prof);
  }

  // residual histories
  {
    std::string r = detail::csv_line({"stage", "epsilon", "delta", "kind", "index", "residual"});
    for (std::size_t s = 0; s < res.stages.size(); ++s) {
      const auto& st = res.stages[s];
      for (std::size_t k = 0; k < st.step_residuals.size(); ++k)
        r += detail::csv_line({std::to_string(s), fmt17(st.epsilon), fmt17(st.delta), "step", std::to_string(k + 1),
                               fmt17(st.step_residuals[k])});
      for (std::size_t k = 0; k < st.outer_residuals.size(); ++k)
        r += detail::csv_line({std::to_string(s), fmt17(st.epsilon), fmt17(st.delta), "outer", std::to_string(k + 1),
                               fmt17(st.outer_residuals[k])});
    }
    write_text(outdir / "residuals.csv", r);
  }

  if (cfg.dump_fields) {
    for (int k = 0; k <= n; ++k) {
      std::string f = spec.grid.dim() == 2 ? "x,y,u\n" : "x,u\n";
      const auto& u = res.trajectory.fields[static_cast<std::size_t>(k)];
      for (std::size_t i = 0; i < u.size(); ++i) {
        const auto x = spec.grid.coord(i);
        std::vector<std::string> row{fmt17(x[0])};
        if (spec.grid.dim() == 2) row.push_back(fmt17(x[1]));
        row.push_back(fmt17(u[i]));
        f += detail::csv_line(row);
      }
      write_text(outdir / "fields" / ("u_" + std::to_string(k) + ".csv"), f);
    }
  }

  Json summary;
  summary["scenario"] = cfg.name;
  summary["status"] = complete ? (res.converged ? "ok" : "outer-not-converged") : "failed";
  summary["failure"] = res.failure;
  Json fin;
  fin["final_l2"] = norm_l2(res.trajectory.final(), spec.grid);
  fin["max_excess"] = n > 0 ? max_excess : 0.0;
  if (!res.stages.empty()) {
    const auto& st = res.stages.back();
    fin["violation"] = st.violation;
    fin["penalty_mass"] = st.penalty_mass;
    fin["max_l2"] = st.max_l2;
    fin["lp_norm"] = st.lp_norm;
    fin["scaled_lp_norm"] = st.scaled_lp_norm;
  }
  summary["final"] = fin;
  summary["space_time_measure"] = spec.time.final_time() * spec.grid.measure();
  Json st = Json::array();
  for (const auto& s : res.stages) st.push_back(detail::stage_json(s));
  summary["stages"] = st;
  summary["config"] = cfg.resolved;
  write_text(outdir / "summary.json", summary.dump(2) + "\n");
  out.summary = std::move(summary);
  if (!complete) out.message = "solver failure in " + res.failure;
  return out;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

struct SweepRow {
  double value = 0.0;
  bool ok = false;
  std::string message;
  Json final;
  int stages = 0;
  bool outer_converged = false;
};

inline const std::vector<std::string>& sweep_columns() {
  static const std::vector<std::string> cols{
      "value",   "status",      "violation",     "penalty_mass",   "final_l2",          "max_l2",
      "lp_norm", "scaled_lp_norm", "max_excess", "outer_converged", "newton_iterations"};
  return cols;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string s = detail::csv_line(sweep_columns());
  for (const auto& r : rows) {
    auto num = [&](const char* key) {
      return r.ok && r.final.contains(key) ? fmt17(r.final[key].get<double>()) : std::string("nan");
    };
    s += detail::csv_line({fmt17(r.value), r.ok ? "ok" : "failed", num("violation"), num("penalty_mass"),
                           num("final_l2"), num("max_l2"), num("lp_norm"), num("scaled_lp_norm"), num("max_excess"),
                           r.ok ? (r.outer_converged ? "1" : "0") : "nan",
                           r.ok ? std::to_string(r.final.value("newton_iterations", 0)) : "nan"});
  }
  return s;
}

/// Runs the base configuration once per value of the numeric parameter at
/// `axis` (array-valued parameters become [value]). Rows run on up to
/// `threads` workers; sweep.csv lists them in input order. A failed row is
/// flagged and the sweep continues.
inline std::vector<SweepRow> run_sweep(const Json& base, const std::string& axis, const std::vector<double>& values,
                                       const std::filesystem::path& outdir, int threads = 1) {
  {
    // Validates the axis and the base configuration before any work starts.
    const auto probe = parse_config(base);
    Json copy = probe.resolved;
    config::set_number(copy, axis, values.empty() ? 0.0 : values.front());
  }
  std::vector<SweepRow> rows(values.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < values.size(); i = next++) {
      SweepRow& row = rows[i];
      row.value = values[i];
      try {
        Json j = parse_config(base).resolved;
        config::set_number(j, axis, values[i]);
        const auto cfg = parse_config(j);
        const auto outcome = run_scenario(cfg, outdir / "rows" / std::to_string(i));
        row.ok = outcome.exit_code == 0;
        row.message = outcome.message;
        row.final = outcome.summary["final"];
        int newton = 0;
        for (const auto& s : outcome.result.stages) newton += s.newton_iterations;
        row.final["newton_iterations"] = newton;
        row.outer_converged = outcome.result.converged;
        row.stages = static_cast<int>(outcome.result.stages.size());
      } catch (const std::exception& e) {
        row.ok = false;
        row.message = e.what();
      }
    }
  };
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(values.size())));
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  write_text(outdir / "sweep.csv", sweep_csv(rows));
  return rows;
}

// ---------------------------------------------------------------------------
// Plot data
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(read_text(path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

//! Column pairs (index, residual) per stage, padded with nan.
inline std::string residual_columns(const std::vector<std::vector<std::string>>& csv, const std::string& kind) {
  std::map<int, std::vector<std::pair<std::string, std::string>>> curves;
  std::map<int, std::string> labels;
  for (std::size_t r = 1; r < csv.size(); ++r) {
    const auto& row = csv[r];
    if (row.size() < 6 || row[3] != kind) continue;
    const int stage = std::stoi(row[0]);
    curves[stage].emplace_back(row[4], row[5]);
    labels[stage] = "eps=" + row[1] + ",delta=" + row[2];
  }
  std::string out = "#";
  std::size_t length = 0;
  for (const auto& [s, c] : curves) {
    out += " index[" + labels[s] + "] " + kind + "_residual[" + labels[s] + "]";
    length = std::max(length, c.size());
  }
  out += '\n';
  for (std::size_t k = 0; k < length; ++k) {
    std::string line;
    for (const auto& [s, c] : curves) {
      if (!line.empty()) line += ' ';
      line += k < c.size() ? c[k].first + ' ' + c[k].second : std::string("nan nan");
    }
    out += line + '\n';
  }
  return out;
}

}  // namespace detail

inline const std::vector<std::string>& plot_kinds() {
  static const std::vector<std::string> k{"profile", "residual", "outer", "sweep"};
  return k;
}

/// Whitespace-delimited columns for a plotting tool, written to
/// <bundle>/plot_<kind>.dat and returned:
///   profile    x u pairs at t = 0, T/2, T
///   residual   (step, Newton residual) per continuation stage
///   outer      (iteration, outer residual) per continuation stage
///   sweep      the columns of sweep.csv unchanged
inline std::string emit_plot_data(const std::filesystem::path& bundle, const std::string& kind) {
  namespace fs = std::filesystem;
  std::string out;
  if (kind == "profile") {
    const auto csv = detail::read_csv(bundle / "profile.csv");
    if (csv.empty()) throw Error("profile.csv is empty");
    out = "#";
    for (std::size_t c = 1; c < csv[0].size(); ++c) out += " x " + csv[0][c];
    out += '\n';
    for (std::size_t r = 1; r < csv.size(); ++r) {
      std::string line;
      for (std::size_t c = 1; c < csv[r].size(); ++c) line += (c > 1 ? " " : "") + csv[r][0] + ' ' + csv[r][c];
      out += line + '\n';
    }
  } else if (kind == "residual" || kind == "outer") {
    out = detail::residual_columns(detail::read_csv(bundle / "residuals.csv"), kind == "residual" ? "step" : "outer");
  } else if (kind == "sweep") {
    const auto csv = detail::read_csv(bundle / "sweep.csv");
    for (std::size_t r = 0; r < csv.size(); ++r) {
      std::string line = r == 0 ? "# " : "";
      for (std::size_t c = 0; c < csv[r].size(); ++c) line += (c ? " " : "") + csv[r][c];
      out += line + '\n';
    }
  } else {
    std::string known;
    for (const auto& k : plot_kinds()) known += (known.empty() ? "" : ", ") + k;
    throw ConfigError("kind: unknown plot kind '" + kind + "' (known: " + known + ")");
  }
  write_text(bundle / ("plot_" + kind + ".dat"), out);
  return out;
}

}  // namespace penqvi
