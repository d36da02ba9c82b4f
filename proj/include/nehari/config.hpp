#pragma once

// Run configuration: a JSON document with the blocks lattice, potential,
// nonlinearity, solver, output and sweep. Parsing is strict: unknown keys,
// wrong types and inconsistent values raise ConfigError naming the field
// as a JSON pointer (or the line and column for syntax errors).

#include <nlohmann/json.hpp>

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "nehari/errors.hpp"
#include "nehari/lattice.hpp"
#include "nehari/nonlinearity.hpp"
#include "nehari/solver.hpp"
#include "nehari/spectral.hpp"
#include "nehari/variational.hpp"

namespace nehari {

using json = nlohmann::json;

struct LatticeConfig {
  int dim = 1;
  std::vector<int> sides{16};
  int period = 1;
  bool operator==(const LatticeConfig&) const = default;
};

/// kind "constant": V = value. kind "staggered": V(x) = amplitude
/// (-1)^{x_1+...+x_N} + shift (needs an even period). kind "table": one
/// value per cell vertex in row-major order.
struct PotentialConfig {
  std::string kind = "constant";
  double value = 1.0;
  double amplitude = 1.0;
  double shift = -2.0;
  std::vector<double> cell;
  bool operator==(const PotentialConfig&) const = default;
};

/// kind "power": f = w|u|^{p-2}u. kind "table": f = w sum c_k |u|^{p_k-2}u.
/// weight has one entry (constant) or one per cell vertex.
struct NonlinearityConfig {
  std::string kind = "power";
  double p = 4.0;
  std::vector<PowerTerm> terms;
  std::vector<double> weight{1.0};
  bool operator==(const NonlinearityConfig&) const = default;
};

struct SolverConfig {
  SolveOptions options;
  double gap_tol = 1e-8;
  bool operator==(const SolverConfig&) const = default;
};

struct OutputConfig {
  std::string dir = ".";
  bool emit_plot_data = false;
  bool operator==(const OutputConfig&) const = default;
};

struct SweepConfig {
  std::vector<int> sides;
  bool operator==(const SweepConfig&) const = default;
};

struct RunConfig {
  LatticeConfig lattice;
  PotentialConfig potential;
  NonlinearityConfig nonlinearity;
  SolverConfig solver;
  OutputConfig output;
  SweepConfig sweep;
  bool operator==(const RunConfig&) const = default;
};

// ---------------------------------------------------------------------------
// Serialization.

inline json to_json_value(const RunConfig& c) {
  json j;
  j["lattice"] = {{"dim", c.lattice.dim},
                  {"sides", c.lattice.sides},
                  {"period", c.lattice.period}};
  const PotentialConfig& p = c.potential;
  json pot{{"kind", p.kind}};
  if (p.kind == "constant") {
    pot["value"] = p.value;
  } else if (p.kind == "staggered") {
    pot["amplitude"] = p.amplitude;
    pot["shift"] = p.shift;
  } else {
    pot["cell"] = p.cell;
  }
  j["potential"] = pot;
  const NonlinearityConfig& n = c.nonlinearity;
  json nl{{"kind", n.kind}};
  if (n.kind == "power") {
    nl["p"] = n.p;
  } else {
    json terms = json::array();
    for (const PowerTerm& t : n.terms)
      terms.push_back({{"coefficient", t.coefficient}, {"p", t.exponent}});
    nl["terms"] = terms;
  }
  if (n.weight.size() == 1)
    nl["weight"] = n.weight.front();
  else
    nl["weight"] = n.weight;
  j["nonlinearity"] = nl;
  const SolveOptions& o = c.solver.options;
  j["solver"] = {{"tol_grad", o.tol_grad},
                 {"max_iters", o.max_iters},
                 {"n_starts", o.n_starts},
                 {"seed", o.seed},
                 {"flow_step", o.flow_step},
                 {"orbit_tol", o.orbit_tol},
                 {"sign_orbits", o.sign_orbits},
                 {"polish_threshold", o.polish_threshold},
                 {"residual_tol", o.residual_tol},
                 {"threads", o.threads},
                 {"inner_tol", o.inner.tol},
                 {"inner_max_iters", o.inner.max_iters},
                 {"gap_tol", c.solver.gap_tol}};
  j["output"] = {{"dir", c.output.dir},
                 {"emit_plot_data", c.output.emit_plot_data}};
  j["sweep"] = {{"sides", c.sweep.sides}};
  return j;
}

inline std::string serialize_config(const RunConfig& c) {
  return to_json_value(c).dump(2) + "\n";
}

namespace detail {

/// Strict view of one JSON object: every key must be consumed.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object())
      throw ConfigError(where() + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  template <class T>
  void read(const std::string& key, T& out) {
    if (!has(key)) return;
    const json& v = raw(key);
    try {
      check_type<T>(v, key);
      out = v.get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(field(key) + ": " + e.what());
    }
  }

  template <class T>
  void require(const std::string& key, T& out) {
    if (!has(key)) throw ConfigError(field(key) + ": required key missing");
    read(key, out);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key()))
        throw ConfigError(field(it.key()) + ": unknown key");
  }

  std::string field(const std::string& key) const { return path_ + "/" + key; }
  std::string where() const { return path_.empty() ? "/" : path_; }

 private:
  template <class T>
  void check_type(const json& v, const std::string& key) const {
    auto bad = [&](const char* what) {
      throw ConfigError(field(key) + ": expected " + what + ", got " +
                        std::string(v.type_name()));
    };
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) bad("a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) bad("an integer");
      if constexpr (std::is_unsigned_v<T>)
        if (v.is_number_integer() && !v.is_number_unsigned())
          bad("a non-negative integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) bad("a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) bad("a string");
    } else {
      if (!v.is_array()) bad("an array");
      for (std::size_t i = 0; i < v.size(); ++i) {
        using E = typename T::value_type;
        if constexpr (std::is_integral_v<E>) {
          if (!v[i].is_number_integer())
            throw ConfigError(field(key) + "/" + std::to_string(i) +
                              ": expected an integer");
        } else if (!v[i].is_number()) {
          throw ConfigError(field(key) + "/" + std::to_string(i) +
                            ": expected a number");
        }
      }
    }
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline void check(bool ok, const std::string& field, const std::string& msg) {
  if (!ok) throw ConfigError(field + ": " + msg);
}

inline std::size_t cell_size(const LatticeConfig& l) {
  std::size_t n = 1;
  for (int i = 0; i < l.dim; ++i) n *= static_cast<std::size_t>(l.period);
  return n;
}

}  // namespace detail

/// Consistency checks that do not depend on how the config was produced.
inline void validate(const RunConfig& c) {
  using detail::check;
  const LatticeConfig& l = c.lattice;
  check(l.dim >= 1, "/lattice/dim", "must be >= 1");
  check(l.period >= 1, "/lattice/period", "must be >= 1");
  check(static_cast<int>(l.sides.size()) == l.dim, "/lattice/sides",
        "must have dim entries");
  for (std::size_t i = 0; i < l.sides.size(); ++i) {
    const std::string f = "/lattice/sides/" + std::to_string(i);
    check(l.sides[i] >= 3, f, "side must be >= 3");
    check(l.sides[i] % l.period == 0, f,
          "side " + std::to_string(l.sides[i]) + " is not divisible by period " +
              std::to_string(l.period));
  }
  const std::size_t cell = detail::cell_size(l);

  const PotentialConfig& p = c.potential;
  if (p.kind == "constant") {
    check(std::isfinite(p.value), "/potential/value", "must be finite");
  } else if (p.kind == "staggered") {
    check(l.period % 2 == 0, "/potential/kind",
          "staggered potential needs an even period");
    check(std::isfinite(p.amplitude) && std::isfinite(p.shift), "/potential",
          "amplitude and shift must be finite");
  } else if (p.kind == "table") {
    check(p.cell.size() == cell, "/potential/cell",
          "expected period^dim = " + std::to_string(cell) + " values, got " +
              std::to_string(p.cell.size()));
  } else {
    throw ConfigError("/potential/kind: unknown kind '" + p.kind +
                      "' (constant | staggered | table)");
  }

  const NonlinearityConfig& n = c.nonlinearity;
  if (n.kind == "power") {
    check(n.p > 2.0, "/nonlinearity/p", "must be > 2");
  } else if (n.kind == "table") {
    check(!n.terms.empty(), "/nonlinearity/terms", "must not be empty");
  } else {
    throw ConfigError("/nonlinearity/kind: unknown kind '" + n.kind +
                      "' (power | table)");
  }
  check(n.weight.size() == 1 || n.weight.size() == cell, "/nonlinearity/weight",
        "expected a number or " + std::to_string(cell) + " values");

  const SolveOptions& o = c.solver.options;
  check(o.tol_grad > 0.0, "/solver/tol_grad", "must be > 0");
  check(o.max_iters >= 1, "/solver/max_iters", "must be >= 1");
  check(o.n_starts >= 1, "/solver/n_starts", "must be >= 1");
  check(o.flow_step > 0.0, "/solver/flow_step", "must be > 0");
  check(o.orbit_tol > 0.0, "/solver/orbit_tol", "must be > 0");
  check(o.polish_threshold > 0.0, "/solver/polish_threshold", "must be > 0");
  check(o.residual_tol > 0.0, "/solver/residual_tol", "must be > 0");
  check(o.threads >= 1, "/solver/threads", "must be >= 1");
  check(o.inner.tol > 0.0, "/solver/inner_tol", "must be > 0");
  check(o.inner.max_iters >= 1, "/solver/inner_max_iters", "must be >= 1");
  check(c.solver.gap_tol > 0.0, "/solver/gap_tol", "must be > 0");

  for (std::size_t i = 0; i < c.sweep.sides.size(); ++i) {
    const std::string f = "/sweep/sides/" + std::to_string(i);
    check(c.sweep.sides[i] >= 3, f, "side must be >= 3");
    check(c.sweep.sides[i] % l.period == 0, f, "not divisible by period");
  }
}

inline RunConfig parse_config(const json& j) {
  RunConfig c;
  detail::ObjectReader root(j, "");

  if (!root.has("lattice")) throw ConfigError("/lattice: required block missing");
  {
    detail::ObjectReader r(root.raw("lattice"), "/lattice");
    r.require("dim", c.lattice.dim);
    r.require("sides", c.lattice.sides);
    r.read("period", c.lattice.period);
    r.finish();
  }
  if (!root.has("potential"))
    throw ConfigError("/potential: required block missing");
  {
    detail::ObjectReader r(root.raw("potential"), "/potential");
    PotentialConfig& p = c.potential;
    r.require("kind", p.kind);
    if (p.kind == "constant") {
      r.require("value", p.value);
    } else if (p.kind == "staggered") {
      r.require("amplitude", p.amplitude);
      r.read("shift", p.shift);
    } else if (p.kind == "table") {
      r.require("cell", p.cell);
    }
    r.finish();
  }
  if (!root.has("nonlinearity"))
    throw ConfigError("/nonlinearity: required block missing");
  {
    detail::ObjectReader r(root.raw("nonlinearity"), "/nonlinearity");
    NonlinearityConfig& n = c.nonlinearity;
    r.require("kind", n.kind);
    if (n.kind == "power") {
      r.require("p", n.p);
    } else if (n.kind == "table") {
      if (!r.has("terms"))
        throw ConfigError("/nonlinearity/terms: required key missing");
      const json& terms = r.raw("terms");
      if (!terms.is_array())
        throw ConfigError("/nonlinearity/terms: expected an array");
      for (std::size_t i = 0; i < terms.size(); ++i) {
        detail::ObjectReader t(terms[i],
                               "/nonlinearity/terms/" + std::to_string(i));
        PowerTerm term;
        t.require("coefficient", term.coefficient);
        t.require("p", term.exponent);
        t.finish();
        n.terms.push_back(term);
      }
    }
    if (r.has("weight")) {
      if (r.raw("weight").is_number()) {
        double w = 1.0;
        r.read("weight", w);
        n.weight = {w};
      } else {
        r.read("weight", n.weight);
      }
    }
    r.finish();
  }
  if (root.has("solver")) {
    detail::ObjectReader r(root.raw("solver"), "/solver");
    SolveOptions& o = c.solver.options;
    r.read("tol_grad", o.tol_grad);
    r.read("max_iters", o.max_iters);
    r.read("n_starts", o.n_starts);
    r.read("seed", o.seed);
    r.read("flow_step", o.flow_step);
    r.read("orbit_tol", o.orbit_tol);
    r.read("sign_orbits", o.sign_orbits);
    r.read("polish_threshold", o.polish_threshold);
    r.read("residual_tol", o.residual_tol);
    r.read("threads", o.threads);
    r.read("inner_tol", o.inner.tol);
    r.read("inner_max_iters", o.inner.max_iters);
    r.read("gap_tol", c.solver.gap_tol);
    r.finish();
  }
  if (root.has("output")) {
    detail::ObjectReader r(root.raw("output"), "/output");
    r.read("dir", c.output.dir);
    r.read("emit_plot_data", c.output.emit_plot_data);
    r.finish();
  }
  if (root.has("sweep")) {
    detail::ObjectReader r(root.raw("sweep"), "/sweep");
    r.read("sides", c.sweep.sides);
    r.finish();
  }
  root.finish();
  validate(c);
  return c;
}

inline RunConfig parse_config_text(const std::string& text,
                                   const std::string& source = "<config>") {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    // Translate the byte offset into line and column.
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError(source + ":" + std::to_string(line) + ":" +
                      std::to_string(col) + ": syntax error: " + e.what());
  }
  try {
    return parse_config(j);
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

// ---------------------------------------------------------------------------
// Builders.

inline TorusPtr build_torus(const LatticeConfig& l) {
  return build_torus(l.dim, l.sides, l.period);
}

/// Same configuration with every side replaced by `side`.
inline RunConfig with_side(RunConfig c, int side) {
  for (int& s : c.lattice.sides) s = side;
  validate(c);
  return c;
}

inline Vector build_potential(const LatticeTorus& t, const PotentialConfig& p) {
  const auto n = static_cast<Index>(t.vertex_count());
  if (p.kind == "constant") return Vector::Constant(n, p.value);
  if (p.kind == "staggered") {
    Vector V(n);
    for (std::size_t v = 0; v < t.vertex_count(); ++v) {
      int sum = 0;
      for (int x : t.coords(v)) sum += x;
      V[static_cast<Index>(v)] = (sum % 2 == 0 ? 1.0 : -1.0) * p.amplitude + p.shift;
    }
    return V;
  }
  return periodic_extension(t, p.cell);
}

inline Nonlinearity build_nonlinearity(const TorusPtr& t,
                                       const NonlinearityConfig& n) {
  const Vector w = n.weight.size() == 1
                       ? Vector::Constant(static_cast<Index>(t->vertex_count()),
                                          n.weight.front())
                       : periodic_extension(*t, n.weight);
  const VertexFunction weight(t, w);
  if (n.kind == "power") return power_nonlinearity(n.p, weight);
  return sum_of_powers(n.terms, weight);
}

inline SchrodingerOperator build_operator(const RunConfig& c) {
  const TorusPtr t = build_torus(c.lattice);
  return SchrodingerOperator(t, build_potential(*t, c.potential));
}

/// Full problem; throws HypothesisViolation if 0 is not in a spectral gap.
inline Problem build_problem(const RunConfig& c) {
  const TorusPtr t = build_torus(c.lattice);
  return Problem(SchrodingerOperator(t, build_potential(*t, c.potential)),
                 build_nonlinearity(t, c.nonlinearity), c.solver.gap_tol);
}

}  // namespace nehari
