#pragma once

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "orbsus/validate.hpp"
#include "orbsus/version.hpp"

namespace orbsus {

struct SweepSpec {
  std::string param;  // only "delta" is supported
  double lo = 0.0, hi = 0.0;
  bool log_scale = true;
  int count = 0;
};

inline SweepSpec parse_sweep(const std::string& text) {
  // delta=1e-3:1e-1:log:9
  SweepSpec s;
  std::size_t eq = text.find('=');
  if (eq == std::string::npos) fail(errc::config_error, "sweep must look like name=lo:hi:scale:n");
  s.param = text.substr(0, eq);
  if (s.param != "delta") fail(errc::config_error, "only delta sweeps are supported");
  std::stringstream ss(text.substr(eq + 1));
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, ':')) parts.push_back(part);
  if (parts.size() != 4) fail(errc::config_error, "sweep must look like name=lo:hi:scale:n");
  s.lo = std::strtod(parts[0].c_str(), nullptr);
  s.hi = std::strtod(parts[1].c_str(), nullptr);
  if (parts[2] == "log")
    s.log_scale = true;
  else if (parts[2] == "lin")
    s.log_scale = false;
  else
    fail(errc::config_error, "sweep scale must be log or lin");
  s.count = std::atoi(parts[3].c_str());
  if (s.count < 1 || !(s.lo > 0.0 || !s.log_scale) || !(s.hi > s.lo))
    fail(errc::config_error, "sweep range is empty or not finite");
  return s;
}

inline std::vector<double> sweep_values(const SweepSpec& s) {
  std::vector<double> v(s.count);
  if (s.count == 1) {
    v[0] = s.lo;
    return v;
  }
  for (int i = 0; i < s.count; ++i) {
    double t = static_cast<double>(i) / (s.count - 1);
    v[i] = s.log_scale ? std::exp(std::log(s.lo) + t * (std::log(s.hi) - std::log(s.lo)))
                       : s.lo + t * (s.hi - s.lo);
  }
  return v;
}

struct RunConfig {
  std::string model_source = "honeycomb";  // registry name or file path
  std::string method = "residue";  // contour|residue|zerot|split|finite|bands|validate
  double beta = 10.0;
  double rho0 = 0.5;
  double delta = 1.0;
  double t = 1.0;
  double onsite_gap = 0.6;
  double lattice_a = 1.0;
  std::string zone_shape = "disk";
  double zone_K = 5.0;
  int grid = 64;
  double tol = 1e-4;  // grid-doubling guard, relative
  std::optional<SweepSpec> sweep;
  std::string output_path;  // empty -> stdout
  // finite-lattice studies
  std::string finite_study = "pressure";
  int finite_N = 8;
  double finite_b = 0.0;
  // band paths: "kx,ky:kx,ky:..."
  std::string kpath = "0,0:3,0";
  int kpath_points = 128;
  unsigned seed = 12345;
};

inline Model model_from_config(const RunConfig& cfg) {
  if (cfg.model_source.find('.') != std::string::npos ||
      cfg.model_source.find('/') != std::string::npos)
    return model_from_file(cfg.model_source);
  RegistryParams p;
  p.delta = cfg.delta;
  p.t = cfg.t;
  p.onsite_gap = cfg.onsite_gap;
  p.a = cfg.lattice_a;
  ZoneSpec zone;
  if (cfg.zone_shape == "square")
    zone.shape = ZoneSpec::Shape::square;
  else if (cfg.zone_shape == "disk")
    zone.shape = ZoneSpec::Shape::disk;
  else
    fail(errc::config_error, "zone shape must be disk or square");
  zone.K = cfg.zone_K;
  p.zone = zone;
  return model_from_registry(cfg.model_source, p);
}

namespace detail {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void csv_preamble(std::ostream& out, const RunConfig& cfg, const Model& m) {
  out << "# orbsus " << ORBSUS_VERSION << " model=" << m.name() << " hash=" << model_hash(m)
      << " grid=" << cfg.grid << " tol=" << fmt(cfg.tol) << " method=" << cfg.method
      << " seed=" << cfg.seed << "\n";
}

inline ChiOptions chi_options(const RunConfig& cfg) {
  ChiOptions o;
  o.grid_rel_tol = cfg.tol;
  return o;
}

inline void emit_chi_row(std::ostream& out, const ChiResult& r, bool with_split) {
  out << fmt(r.beta) << "," << fmt(r.rho0) << "," << fmt(r.mu0) << "," << fmt(r.chi);
  if (with_split)
    out << "," << fmt(r.chi_peierls.value()) << "," << fmt(r.chi_interband.value());
  out << "," << fmt(r.err_estimate) << "\n";
}

inline int run_chi(const RunConfig& cfg, std::ostream& out) {
  ChiOptions opts = chi_options(cfg);
  auto one = [&](const Model& m) -> ChiResult {
    if (cfg.method == "contour") return chi_contour(m, cfg.grid, cfg.beta, cfg.rho0, opts);
    if (cfg.method == "residue") return chi_residue(m, cfg.grid, cfg.beta, cfg.rho0, opts);
    if (cfg.method == "zerot") return chi_zero_temperature(m, cfg.grid, cfg.rho0, opts);
    if (cfg.method == "split") return peierls_split(m, cfg.grid, cfg.beta, cfg.rho0, opts);
    fail(errc::config_error, "unknown chi method '" + cfg.method + "'");
  };

  if (cfg.sweep) {
    if (cfg.model_source != "dirac-l" && cfg.model_source != "dirac-d")
      fail(errc::config_error, "delta sweeps need a dirac registry model");
    Model first = model_from_config(cfg);
    csv_preamble(out, cfg, first);
    bool with_split = cfg.method == "split";
    out << (with_split ? "delta,chi,chi_P,chi_Ib,err_estimate\n" : "delta,chi,err_estimate\n");
    for (double d : sweep_values(*cfg.sweep)) {
      RunConfig c = cfg;
      c.delta = d;
      ChiResult r = one(model_from_config(c));
      out << fmt(d) << "," << fmt(r.chi);
      if (with_split) out << "," << fmt(r.chi_peierls.value()) << "," << fmt(r.chi_interband.value());
      out << "," << fmt(r.err_estimate) << "\n";
    }
    return 0;
  }

  Model m = model_from_config(cfg);
  ChiResult r = one(m);
  csv_preamble(out, cfg, m);
  if (cfg.method == "split")
    out << "beta,rho0,mu0,chi,chi_P,chi_Ib,err_estimate\n";
  else if (cfg.method == "zerot")
    out << "rho0,fermi_energy,chi,err_estimate\n";
  else
    out << "beta,rho0,mu0,chi,err_estimate\n";
  if (cfg.method == "zerot")
    out << fmt(r.rho0) << "," << fmt(r.mu0) << "," << fmt(r.chi) << ","
        << fmt(r.err_estimate) << "\n";
  else
    emit_chi_row(out, r, cfg.method == "split");
  return 0;
}

inline int run_bands(const RunConfig& cfg, std::ostream& out) {
  Model m = model_from_config(cfg);
  std::vector<Vec2> waypoints;
  std::stringstream ss(cfg.kpath);
  std::string seg;
  while (std::getline(ss, seg, ':')) {
    std::size_t comma = seg.find(',');
    if (comma == std::string::npos) fail(errc::config_error, "k-path must be kx,ky:kx,ky:...");
    waypoints.push_back({std::strtod(seg.substr(0, comma).c_str(), nullptr),
                         std::strtod(seg.substr(comma + 1).c_str(), nullptr)});
  }
  if (waypoints.size() < 2) fail(errc::config_error, "k-path needs at least two waypoints");
  csv_preamble(out, cfg, m);
  out << "s,kx,ky";
  for (int j = 1; j <= m.bands(); ++j) out << ",E" << j;
  out << "\n";
  double total = 0.0;
  for (std::size_t i = 1; i < waypoints.size(); ++i) total += norm(waypoints[i] - waypoints[i - 1]);
  double s_accum = 0.0;
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    Vec2 from = waypoints[i - 1], to = waypoints[i];
    int steps = std::max(1, static_cast<int>(std::lround(
                                cfg.kpath_points * norm(to - from) / std::max(total, 1e-300))));
    for (int p = (i == 1 ? 0 : 1); p <= steps; ++p) {
      double t = static_cast<double>(p) / steps;
      Vec2 k = from + t * (to - from);
      BlochFiber f = m.fiber_at(k);
      out << fmt(s_accum + t * norm(to - from)) << "," << fmt(k.x) << "," << fmt(k.y);
      for (int j = 0; j < m.bands(); ++j) out << "," << fmt(f.E(j));
      out << "\n";
    }
    s_accum += norm(to - from);
  }
  return 0;
}

inline int run_finite(const RunConfig& cfg, std::ostream& out) {
  Model m = model_from_config(cfg);
  if (!m.is_lattice()) fail(errc::config_error, "finite studies need a hopping-table model");
  const LatticeModel& lm = m.lattice();
  csv_preamble(out, cfg, m);
  if (cfg.finite_study == "pressure") {
    const double z = 1.0;  // mu = 0 reference point
    double bulk = pressure_bulk(m, std::max(cfg.grid, 64), ThermoState{cfg.beta, 0.0, 0.5});
    out << "N,P_N,abs_diff_bulk\n";
    for (int N = 2; N <= cfg.finite_N; N += 2) {
      double p = pressure_N(build_harper(lm, N, cfg.finite_b), cfg.beta, z);
      out << N << "," << fmt(p) << "," << fmt(std::abs(p - bulk)) << "\n";
    }
    return 0;
  }
  if (cfg.finite_study == "kernels") {
    MagneticOperator op = build_harper(lm, cfg.finite_N, cfg.finite_b);
    const cd xi(0.2, 0.9);
    const double h = 1e-4;
    int x = op.lat.index(0, 0, 0);
    out << "order,b0,analytic_re,analytic_im,fd_re,fd_im,rel_err\n";
    MatC rp = resolvent_N(build_harper(lm, cfg.finite_N, cfg.finite_b + h), xi);
    MatC rm = resolvent_N(build_harper(lm, cfg.finite_N, cfg.finite_b - h), xi);
    MatC r0 = resolvent_N(op, xi);
    cd fd1 = (rp(x, x) - rm(x, x)) / (2.0 * h);
    cd fd2 = (rp(x, x) - 2.0 * r0(x, x) + rm(x, x)) / (h * h);
    for (int order : {1, 2}) {
      cd an = kernel_db(op, x, x, xi, order);
      cd fd = order == 1 ? fd1 : fd2;
      out << order << "," << fmt(cfg.finite_b) << "," << fmt(an.real()) << ","
          << fmt(an.imag()) << "," << fmt(fd.real()) << "," << fmt(fd.imag()) << ","
          << fmt(std::abs(an - fd) / std::max(std::abs(fd), 1e-300)) << "\n";
    }
    return 0;
  }
  if (cfg.finite_study == "ttilde") {
    MagneticOperator op = build_harper(lm, cfg.finite_N, cfg.finite_b);
    const cd xi(0.2, 0.9);
    out << "delta_b,norm,half_ratio,opident_residual\n";
    for (double db : {1e-2, 1e-3, 1e-4}) {
      double n1 = ttilde_norm(op, db, xi);
      double n2 = ttilde_norm(op, 0.5 * db, xi);
      double resid = opident_residual(lm, cfg.finite_N, cfg.finite_b, db, xi);
      out << fmt(db) << "," << fmt(n1) << "," << fmt(n1 / n2) << "," << fmt(resid) << "\n";
    }
    return 0;
  }
  fail(errc::config_error, "finite study must be pressure, kernels or ttilde");
}

inline int run_validate(const RunConfig& cfg, std::ostream& out) {
  auto suite = make_validate_suite(cfg.seed);
  int failures = 0;
  for (const auto& check : suite) {
    auto result = check.run();
    if (result) {
      ++failures;
      out << "[FAIL] " << check.name << ": " << *result << "\n";
    } else {
      out << "[ ok ] " << check.name << "\n";
    }
  }
  out << (failures == 0 ? "validate: all checks passed\n"
                        : "validate: " + std::to_string(failures) + " check(s) failed\n");
  return failures == 0 ? 0 : 3;
}

}  // namespace detail

// Dispatch a run; returns the process exit code (0 ok, 1 config, 2 compute,
// 3 validation failure).
inline int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    std::ostringstream buffer;
    int code = 0;
    if (cfg.method == "validate") {
      code = detail::run_validate(cfg, buffer);
    } else if (cfg.method == "bands") {
      code = detail::run_bands(cfg, buffer);
    } else if (cfg.method == "finite") {
      code = detail::run_finite(cfg, buffer);
    } else {
      code = detail::run_chi(cfg, buffer);
    }
    if (cfg.output_path.empty()) {
      out << buffer.str();
    } else {
      std::ofstream f(cfg.output_path);
      if (!f) fail(errc::config_error, "cannot open output file '" + cfg.output_path + "'");
      f << buffer.str();
    }
    return code;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == errc::config_error ? 1 : 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

namespace checks {

inline std::optional<std::string> run_csv_determinism() {
  RunConfig cfg;
  cfg.model_source = "dirac-l";
  cfg.method = "residue";
  cfg.grid = 16;
  cfg.beta = 2.0;
  std::ostringstream a, b, err;
  if (run(cfg, a, err) != 0) return "run failed: " + err.str();
  if (run(cfg, b, err) != 0) return "repeat run failed: " + err.str();
  if (a.str() != b.str()) return std::string("identical configs produced different CSV bytes");
  if (a.str().find("nan") != std::string::npos || a.str().find("inf") != std::string::npos)
    return std::string("NaN/Inf leaked into CSV output");
  return std::nullopt;
}

}  // namespace checks

}  // namespace orbsus
