#pragma once

// Batch commands behind the `nehari` executable. Each command writes its
// files into the output directory, prints a short summary and returns the
// process exit code (0 success, 1 usage/config, 2 hypothesis violation,
// 3 no convergence).

#include <nlohmann/json.hpp>

#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "nehari/audit.hpp"
#include "nehari/config.hpp"
#include "nehari/errors.hpp"
#include "nehari/solver.hpp"
#include "nehari/spectral.hpp"
#include "nehari/variational.hpp"

namespace nehari {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 1,
  kExitHypothesis = 2,
  kExitNoConvergence = 3,
};

namespace detail {

inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline json header() {
  return {{"version", kVersion}, {"timestamp", utc_timestamp()}};
}

/// NaN and infinities become null.
inline json number(double x) {
  if (!std::isfinite(x)) return nullptr;
  return x;
}

inline std::string fmt(double x) {
  if (!std::isfinite(x)) return std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf");
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

/// RFC 4180 field.
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw ConfigError("cannot write " + path.string());
  }
  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i)
      out_ << (i ? "," : "") << csv_field(fields[i]);
    out_ << "\r\n";
  }

 private:
  std::ofstream out_;
};

inline void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

inline std::filesystem::path prepare_dir(const RunConfig& c) {
  std::filesystem::path dir(c.output.dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string());
  return dir;
}

}  // namespace detail

inline json to_json_value(const GapReport& g) {
  return {{"pass", g.pass},
          {"gap_tol", g.gap_tol},
          {"lambda_minus_max", detail::number(g.lambda_minus_max)},
          {"lambda_plus_min", detail::number(g.lambda_plus_min)},
          {"alpha", g.alpha},
          {"beta", g.beta},
          {"dim_minus", g.dim_minus},
          {"dim_plus", g.dim_plus},
          {"offending", g.offending},
          {"message", g.describe()}};
}

inline json to_json_value(const AuditReport& r) {
  json j{{"hypothesis", r.hypothesis},
         {"pass", r.pass},
         {"margin", detail::number(r.margin)},
         {"samples", r.samples},
         {"detail", r.detail},
         {"witness", nullptr}};
  if (r.witness)
    j["witness"] = {{"site", r.witness->site},
                    {"u", r.witness->u},
                    {"value", detail::number(r.witness->value)},
                    {"note", r.witness->note}};
  return j;
}

/// Deterministic content of a solve (everything but version and timestamp).
inline json to_json_value(const SolveResult& res, const Problem& P) {
  json sols = json::array();
  for (const CriticalPoint& cp : res.critical_points) {
    const VerificationReport& v = cp.verification;
    json values = json::array();
    for (Index i = 0; i < cp.point.u.size(); ++i) values.push_back(cp.point.u[i]);
    sols.push_back({{"energy", cp.point.energy},
                    {"residual_pointwise", v.residual_pointwise},
                    {"residual_nehari",
                     {{"along_u", v.residual_nehari.along_u},
                      {"along_minus", v.residual_nehari.along_minus}}},
                    {"norm_plus", v.norm_plus},
                    {"norm_minus", v.norm_minus},
                    {"orbit_class", cp.orbit_class},
                    {"grad_norm", cp.grad_norm},
                    {"sources", cp.sources},
                    {"values", values}});
  }
  json starts = json::array();
  for (const StartDiagnostic& d : res.diagnostics.starts)
    starts.push_back({{"index", d.index},
                      {"kind", to_string(d.kind)},
                      {"sites", d.sites},
                      {"converged", d.converged},
                      {"iterations", d.iterations},
                      {"polished", d.polished},
                      {"energy", detail::number(d.energy)},
                      {"grad_norm", detail::number(d.grad_norm)},
                      {"message", d.message}});
  json classes = json::array();
  for (const auto& c : res.orbit_classes) classes.push_back(c);
  return {{"solutions", sols},
          {"c_estimate", detail::number(res.c_estimate)},
          {"ground_state", res.ok() ? json(res.ground_state) : json(nullptr)},
          {"orbit_classes", classes},
          {"diagnostics",
           {{"starts", starts},
            {"total_iterations", res.diagnostics.total_iterations},
            {"rejected_points", res.diagnostics.rejected_points},
            {"kappa", detail::number(res.diagnostics.kappa)},
            {"dim_minus", P.split().dim_minus()},
            {"dim_plus", P.split().dim_plus()}}}};
}

// ---------------------------------------------------------------------------

inline int cmd_spectrum(const RunConfig& c, std::ostream& log) {
  const auto dir = detail::prepare_dir(c);
  const SchrodingerOperator op = build_operator(c);
  const Eigensystem es = eigendecompose(op);
  const GapReport gap = check_gap(es, c.solver.gap_tol);
  {
    detail::CsvWriter csv(dir / "spectrum.csv");
    csv.row({"index", "eigenvalue"});
    for (Index i = 0; i < es.values.size(); ++i)
      csv.row({std::to_string(i), detail::fmt(es.values[i])});
  }
  json j = detail::header();
  j["config_echo"] = to_json_value(c);
  j["count"] = es.values.size();
  j["min"] = es.values.minCoeff();
  j["max"] = es.values.maxCoeff();
  j["gap"] = {{"lambda_minus_max", detail::number(gap.lambda_minus_max)},
              {"lambda_plus_min", detail::number(gap.lambda_plus_min)},
              {"zero_in_gap", gap.pass}};
  detail::write_json(dir / "spectrum.json", j);
  if (c.output.emit_plot_data) {
    std::ofstream dat(dir / "spectrum.dat");
    dat << "# index eigenvalue\n";
    for (Index i = 0; i < es.values.size(); ++i)
      dat << i << ' ' << detail::fmt(es.values[i]) << '\n';
  }
  log << "spectrum: " << es.values.size() << " eigenvalues in ["
      << es.values.minCoeff() << ", " << es.values.maxCoeff() << "]\n";
  return kExitOk;
}

inline int cmd_gap_check(const RunConfig& c, std::ostream& log) {
  const auto dir = detail::prepare_dir(c);
  const GapReport gap =
      check_gap(eigendecompose(build_operator(c)), c.solver.gap_tol);
  json j = detail::header();
  j.update(to_json_value(gap));
  detail::write_json(dir / "gap_report.json", j);
  log << "gap-check: " << gap.describe() << "\n";
  return gap.pass ? kExitOk : kExitHypothesis;
}

inline int cmd_assumptions(const RunConfig& c, std::ostream& log) {
  const auto dir = detail::prepare_dir(c);
  const TorusPtr t = build_torus(c.lattice);
  const Nonlinearity nl = build_nonlinearity(t, c.nonlinearity);
  const std::vector<AuditReport> audits{
      verify_growth(nl),          verify_small_o(nl),
      verify_superquadratic(nl),  verify_monotone(nl),
      verify_sign_condition(nl),  verify_antiderivative(nl),
      verify_periodicity(nl, *t)};
  json j = detail::header();
  j["config_echo"] = to_json_value(c);
  j["nonlinearity"] = {{"description", nl.description},
                       {"p", nl.p},
                       {"a", nl.a},
                       {"odd", nl.odd}};
  json arr = json::array();
  bool all = true;
  for (const AuditReport& r : audits) {
    arr.push_back(to_json_value(r));
    all = all && r.pass;
    log << "  " << std::left << std::setw(16) << r.hypothesis
        << (r.pass ? "pass" : "FAIL") << "  " << r.detail << "\n";
  }
  j["audits"] = arr;
  j["all_pass"] = all;
  json table = json::array();
  for (double eps : {1e-1, 1e-2, 1e-3, 1e-4}) {
    json row{{"epsilon", eps}};
    try {
      row["C_epsilon"] = epsilon_bound(nl, eps);
    } catch (const Error& e) {
      row["C_epsilon"] = nullptr;
      row["error"] = e.what();
    }
    table.push_back(row);
  }
  j["epsilon_table"] = table;
  detail::write_json(dir / "assumptions.json", j);
  log << "assumptions: " << (all ? "all audits pass" : "some audits fail")
      << "\n";
  return kExitOk;
}

/// Writes solve.json (and one CSV per solution). Exit 2 on a gap failure,
/// 3 when no start produced a verified solution.
inline int cmd_solve(const RunConfig& c, std::ostream& log) {
  const auto dir = detail::prepare_dir(c);
  json j = detail::header();
  j["config_echo"] = to_json_value(c);
  const SchrodingerOperator op = build_operator(c);
  const GapReport gap = check_gap(eigendecompose(op), c.solver.gap_tol);
  j["gap_report"] = to_json_value(gap);
  if (!gap.pass || gap.dim_plus == 0) {
    j["solutions"] = json::array();
    j["c_estimate"] = nullptr;
    j["diagnostics"] = {{"error", gap.pass ? "E^+ is trivial" : gap.describe()}};
    detail::write_json(dir / "solve.json", j);
    log << "solve: " << j["diagnostics"]["error"].get<std::string>() << "\n";
    return kExitHypothesis;
  }
  const Problem P(op, build_nonlinearity(op.torus_ptr(), c.nonlinearity),
                  c.solver.gap_tol);
  const SolveResult res = multistart_search(P, c.solver.options);
  j.update(to_json_value(res, P));
  detail::write_json(dir / "solve.json", j);

  const LatticeTorus& t = P.torus();
  for (std::size_t k = 0; k < res.critical_points.size(); ++k) {
    const Vector& u = res.critical_points[k].point.u;
    detail::CsvWriter csv(dir / ("solution_" + std::to_string(k) + ".csv"));
    std::vector<std::string> head{"vertex"};
    for (int i = 0; i < t.dim(); ++i) head.push_back("x" + std::to_string(i));
    head.push_back("value");
    csv.row(head);
    for (std::size_t v = 0; v < t.vertex_count(); ++v) {
      std::vector<std::string> row{std::to_string(v)};
      for (int x : t.coords(v)) row.push_back(std::to_string(x));
      row.push_back(detail::fmt(u[static_cast<Index>(v)]));
      csv.row(row);
    }
    if (c.output.emit_plot_data) {
      std::ofstream dat(dir / ("solution_" + std::to_string(k) + ".dat"));
      dat << "# coordinates value\n";
      for (std::size_t v = 0; v < t.vertex_count(); ++v) {
        for (int x : t.coords(v)) dat << x << ' ';
        dat << detail::fmt(u[static_cast<Index>(v)]) << '\n';
        // blank line between scan lines for gnuplot splot
        if (t.dim() == 2 && (v + 1) % t.sides()[1] == 0) dat << '\n';
      }
    }
  }
  if (!res.ok()) {
    log << "solve: no verified solution from " << c.solver.options.n_starts
        << " starts\n";
    return kExitNoConvergence;
  }
  log << "solve: " << res.critical_points.size() << " critical point(s), "
      << res.orbit_classes.size() << " orbit class(es), c_estimate = "
      << std::setprecision(12) << res.c_estimate << "\n";
  return kExitOk;
}

/// One row per side; failures become rows with a status, the sweep goes on.
inline int cmd_sweep(const RunConfig& c, std::ostream& log) {
  const auto dir = detail::prepare_dir(c);
  if (c.sweep.sides.empty())
    throw ConfigError("/sweep/sides: sweep needs at least one side");
  detail::CsvWriter csv(dir / "sweep.csv");
  csv.row({"side", "status", "c_estimate", "residual", "n_orbits", "message"});
  for (int side : c.sweep.sides) {
    std::string status = "ok", message;
    double c_est = std::numeric_limits<double>::quiet_NaN();
    double residual = c_est;
    std::size_t n_orbits = 0;
    try {
      const RunConfig rc = with_side(c, side);
      const Problem P = build_problem(rc);
      const SolveResult res = multistart_search(P, rc.solver.options);
      if (res.ok()) {
        c_est = res.c_estimate;
        residual = 0.0;
        for (const CriticalPoint& cp : res.critical_points)
          residual = std::max(residual, cp.verification.residual_pointwise);
        n_orbits = res.orbit_classes.size();
      } else {
        status = "no_convergence";
      }
    } catch (const HypothesisViolation& e) {
      status = "hypothesis_violation";
      message = e.what();
    } catch (const ConfigError& e) {
      status = "config_error";
      message = e.what();
    } catch (const Error& e) {
      status = "error";
      message = e.what();
    }
    csv.row({std::to_string(side), status, detail::fmt(c_est),
             detail::fmt(residual), std::to_string(n_orbits), message});
    log << "sweep: side " << side << " " << status;
    if (status == "ok") log << " c_estimate = " << std::setprecision(12) << c_est;
    log << "\n";
  }
  return kExitOk;
}

/// Runs a named command, mapping exceptions to exit codes.
inline int run_command(const std::string& name, const RunConfig& c,
                       std::ostream& log, std::ostream& err) {
  try {
    if (name == "spectrum") return cmd_spectrum(c, log);
    if (name == "gap-check") return cmd_gap_check(c, log);
    if (name == "assumptions") return cmd_assumptions(c, log);
    if (name == "solve") return cmd_solve(c, log);
    if (name == "sweep") return cmd_sweep(c, log);
    err << "unknown command " << name << "\n";
    return kExitConfig;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const HypothesisViolation& e) {
    err << "hypothesis violation: " << e.what() << "\n";
    return kExitHypothesis;
  } catch (const DomainError& e) {
    err << "invalid input: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    err << "failed: " << e.what() << "\n";
    return kExitNoConvergence;
  }
}

}  // namespace nehari
