#include "blochbands/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <sstream>

namespace blochbands {

const char* to_string(RunMode mode) {
  switch (mode) {
    case RunMode::scan: return "scan";
    case RunMode::single: return "single";
    case RunMode::selftest: return "selftest";
  }
  return "scan";
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

double to_double(const std::string& s) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw ConfigError("'" + s + "' is not a number");
  }
  if (pos != s.size()) throw ConfigError("'" + s + "' is not a number");
  return v;
}

long long to_integer(const std::string& s) {
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &pos);
  } catch (const std::exception&) {
    throw ConfigError("'" + s + "' is not an integer");
  }
  if (pos != s.size()) throw ConfigError("'" + s + "' is not an integer");
  return v;
}

int to_int(const std::string& s) { return static_cast<int>(to_integer(s)); }

// Accepts plain numbers and the shorthands "pi", "-pi", "pi/3", "2pi/3".
double to_angle(const std::string& s) {
  const auto at = s.find("pi");
  if (at == std::string::npos) return to_double(s);
  std::string head = s.substr(0, at);
  std::string tail = s.substr(at + 2);
  double scale = 1.0;
  if (head == "-") scale = -1.0;
  else if (!head.empty()) scale = to_double(head);
  double den = 1.0;
  if (!tail.empty()) {
    if (tail[0] != '/') throw ConfigError("'" + s + "' is not a number");
    den = to_double(tail.substr(1));
  }
  return scale * std::numbers::pi / den;
}

}  // namespace

Permittivity parse_permittivity(const std::string& spec, const UnitCell& cell) {
  const auto w = split_ws(spec);
  if (w.empty()) throw ConfigError("empty permittivity");
  if (w[0] == "constant") {
    if (w.size() != 2) throw ConfigError("expected 'constant <value>'");
    const double v = to_double(w[1]);
    if (!(v > 0.0)) throw ConfigError("permittivity must be positive");
    return ConstantPermittivity{v};
  }
  if (w[0] == "disc") {
    DiscPermittivity d;
    if (w.size() == 4) {
      d.cx = 0.5 * cell.a;
      d.cy = 0.5 * cell.b;
      d.radius = to_double(w[1]);
      d.eps_inside = to_double(w[2]);
      d.eps_outside = to_double(w[3]);
    } else if (w.size() == 6) {
      d.cx = to_double(w[1]);
      d.cy = to_double(w[2]);
      d.radius = to_double(w[3]);
      d.eps_inside = to_double(w[4]);
      d.eps_outside = to_double(w[5]);
    } else {
      throw ConfigError("expected 'disc [cx cy] radius eps_inside eps_outside'");
    }
    if (!(d.radius >= 0.0)) throw ConfigError("disc radius must be nonnegative");
    if (!(d.eps_inside > 0.0) || !(d.eps_outside > 0.0)) throw ConfigError("permittivity must be positive");
    return d;
  }
  if (w[0] == "raster") {
    if (w.size() != 2) throw ConfigError("expected 'raster <path>'");
    try {
      return load_raster(w[1]);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  }
  throw ConfigError("unknown permittivity kind '" + w[0] + "' (expected constant, disc or raster)");
}

GridHierarchy RunConfig::hierarchy() const { return build_hierarchy(cell, n0, m0, levels); }

std::vector<double> RunConfig::finest_eps() const { return sample_permittivity(hierarchy().finest(), eps); }

ScanOptions RunConfig::scan_options() const {
  ScanOptions o;
  o.solver.p = p;
  o.solver.q = q;
  o.solver.subspace = subspace;
  o.solver.tol = tol;
  o.solver.max_iter = max_iter;
  o.solver.precond_cycles = precond_cycles;
  o.solver.projection_cycles = projection_cycles;
  o.mu = mu;
  o.seed = seed;
  o.threads = threads;
  return o;
}

void RunConfig::validate() const {
  if (!(cell.a > 0.0) || !(cell.b > 0.0)) throw ConfigError("cell sides a and b must be positive");
  if (n0 < 2 || m0 < 2) throw ConfigError("n0 and m0 must be at least 2");
  if (levels < 0) throw ConfigError("levels must be nonnegative");
  if (kappa < 2) throw ConfigError("kappa must be at least 2");
  if (p < 1) throw ConfigError("p must be at least 1");
  if (q < 0) throw ConfigError("q must be nonnegative");
  if (!(tol > 0.0)) throw ConfigError("tol must be positive");
  if (max_iter < 1) throw ConfigError("max_iter must be at least 1");
  if (!(mu > 0.0)) throw ConfigError("mu must be positive");
  if (precond_cycles < 1) throw ConfigError("precond_cycles must be at least 1");
  if (projection_cycles < 1) throw ConfigError("projection_cycles must be at least 1");
  if (threads < 1) throw ConfigError("threads must be at least 1");
  if (const auto* r = std::get_if<RasterPermittivity>(&eps)) {
    const GridLevel fine = hierarchy().finest();
    if (r->n != fine.n || r->m != fine.m)
      throw ConfigError("raster is " + std::to_string(r->n) + "x" + std::to_string(r->m) + " but the finest grid is " +
                        std::to_string(fine.n) + "x" + std::to_string(fine.m));
  }
}

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::map<std::string, std::pair<std::string, int>> kv;
  std::istringstream in(text);
  int lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.resize(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    if (kv.count(key)) throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    kv[key] = {value, lineno};
  }

  auto at = [&](const std::string& key, auto&& apply) {
    auto it = kv.find(key);
    if (it == kv.end()) return;
    try {
      apply(it->second.first);
    } catch (const std::exception& e) {
      throw ConfigError("line " + std::to_string(it->second.second) + ": " + key + ": " + e.what());
    }
    kv.erase(it);
  };
  auto line_of = [&](const std::string& key) {
    auto it = kv.find(key);
    return it == kv.end() ? std::string() : "line " + std::to_string(it->second.second) + ": ";
  };

  bool have_mode = false;
  at("a", [&](const std::string& v) { cfg.cell.a = to_double(v); });
  at("b", [&](const std::string& v) { cfg.cell.b = to_double(v); });
  at("n0", [&](const std::string& v) { cfg.n0 = to_integer(v); });
  at("m0", [&](const std::string& v) { cfg.m0 = to_integer(v); });
  at("levels", [&](const std::string& v) { cfg.levels = to_int(v); });
  at("kappa", [&](const std::string& v) { cfg.kappa = to_int(v); });
  at("p", [&](const std::string& v) {
    cfg.p = to_int(v);
    if (cfg.p < 1) throw ConfigError("p must be at least 1");
  });
  at("q", [&](const std::string& v) {
    cfg.q = to_int(v);
    if (cfg.q < 0) throw ConfigError("q must be nonnegative");
  });
  at("tol", [&](const std::string& v) {
    cfg.tol = to_double(v);
    if (!(cfg.tol > 0.0)) throw ConfigError("tol must be positive");
  });
  at("max_iter", [&](const std::string& v) { cfg.max_iter = to_int(v); });
  at("mu", [&](const std::string& v) { cfg.mu = to_double(v); });
  at("precond_cycles", [&](const std::string& v) { cfg.precond_cycles = to_int(v); });
  at("projection_cycles", [&](const std::string& v) { cfg.projection_cycles = to_int(v); });
  at("subspace", [&](const std::string& v) { cfg.subspace = subspace_mode_from_string(v); });
  at("output", [&](const std::string& v) { cfg.output = v; });
  at("mode", [&](const std::string& v) {
    if (v == "scan") cfg.mode = RunMode::scan;
    else if (v == "single") cfg.mode = RunMode::single;
    else if (v == "selftest") cfg.mode = RunMode::selftest;
    else throw ConfigError("unknown mode '" + v + "' (expected scan, single or selftest)");
    have_mode = true;
  });
  at("k1", [&](const std::string& v) { cfg.k1 = to_angle(v); });
  at("k2", [&](const std::string& v) { cfg.k2 = to_angle(v); });
  at("seed", [&](const std::string& v) {
    const long long s = to_integer(v);
    if (s < 0) throw ConfigError("seed must be nonnegative");
    cfg.seed = static_cast<std::uint64_t>(s);
  });
  at("threads", [&](const std::string& v) { cfg.threads = to_int(v); });
  const std::string eps_line = line_of("permittivity");
  at("permittivity", [&](const std::string& v) { cfg.permittivity = v; });

  if (!kv.empty()) {
    const auto& [key, val] = *kv.begin();
    throw ConfigError("line " + std::to_string(val.second) + ": unknown key '" + key + "'");
  }
  if (!have_mode) throw ConfigError("missing required key 'mode'");
  if (cfg.q < 0) cfg.q = (cfg.p + 1) / 2;
  try {
    cfg.eps = parse_permittivity(cfg.permittivity, cfg.cell);
  } catch (const ConfigError& e) {
    throw ConfigError(eps_line + "permittivity: " + e.what());
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string describe(const RunConfig& cfg) {
  std::ostringstream o;
  o << std::setprecision(17);
  o << "mode = " << to_string(cfg.mode) << '\n'
    << "a = " << cfg.cell.a << '\n'
    << "b = " << cfg.cell.b << '\n'
    << "n0 = " << cfg.n0 << '\n'
    << "m0 = " << cfg.m0 << '\n'
    << "levels = " << cfg.levels << '\n'
    << "permittivity = " << cfg.permittivity << '\n'
    << "kappa = " << cfg.kappa << '\n'
    << "p = " << cfg.p << '\n'
    << "q = " << cfg.q << '\n'
    << "tol = " << cfg.tol << '\n'
    << "max_iter = " << cfg.max_iter << '\n'
    << "mu = " << cfg.mu << '\n'
    << "precond_cycles = " << cfg.precond_cycles << '\n'
    << "projection_cycles = " << cfg.projection_cycles << '\n'
    << "subspace = " << to_string(cfg.subspace) << '\n'
    << "output = " << cfg.output << '\n'
    << "k1 = " << cfg.k1 << '\n'
    << "k2 = " << cfg.k2 << '\n'
    << "seed = " << cfg.seed << '\n'
    << "threads = " << cfg.threads << '\n';
  return o.str();
}

namespace {

std::string fmt12(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace

void emit_bands(const BandSurface& surface, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "i,j,k1,k2,iters,converged";
  for (int l = 1; l <= surface.p; ++l) out << ",lambda_" << l;
  out << '\n';
  for (int j = 0; j < surface.kappa; ++j) {
    for (int i = 0; i < surface.kappa; ++i) {
      const PointResult& r = surface.at(i, j);
      out << i << ',' << j << ',' << fmt12(r.k1) << ',' << fmt12(r.k2) << ',' << r.iterations << ','
          << (r.converged ? 1 : 0);
      for (int l = 0; l < surface.p; ++l)
        out << ',' << (l < r.eigenvalues.size() ? fmt12(r.eigenvalues[l]) : std::string("nan"));
      out << '\n';
    }
  }
  if (!out) throw std::runtime_error("failed writing '" + path + "'");

  std::ofstream it(path + ".iters.csv");
  if (!it) throw std::runtime_error("cannot write '" + path + ".iters.csv'");
  it << 'j';
  for (int i = 0; i < surface.kappa; ++i) it << ",i" << i;
  it << '\n';
  for (int j = 0; j < surface.kappa; ++j) {
    it << j;
    for (int i = 0; i < surface.kappa; ++i) it << ',' << surface.at(i, j).iterations;
    it << '\n';
  }
  if (!it) throw std::runtime_error("failed writing '" + path + ".iters.csv'");
}

std::vector<BandRow> read_bands(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  std::string line;
  std::getline(in, line);
  std::vector<BandRow> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() < 6) throw std::runtime_error("short row in '" + path + "'");
    BandRow r;
    r.i = std::stoi(f[0]);
    r.j = std::stoi(f[1]);
    r.k1 = std::stod(f[2]);
    r.k2 = std::stod(f[3]);
    r.iters = std::stoi(f[4]);
    r.converged = f[5] == "1";
    for (std::size_t c = 6; c < f.size(); ++c) r.lambda.push_back(std::stod(f[c]));
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// selftest
// ---------------------------------------------------------------------------

namespace {

bool report(std::ostream& out, const std::string& name, bool ok, const std::string& detail) {
  out << (ok ? "PASS " : "FAIL ") << name << "  " << detail << '\n';
  return ok;
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

}  // namespace

bool selftest(std::ostream& out, SelftestFault fault) {
  bool all = true;
  const UnitCell cell{1.0, 1.0};
  const DiscPermittivity disc{0.5, 0.5, 1.0 / 3.0, 100.0, 1.0};

  // Null space: A L = 0 at several quasi-momenta and on every level.
  {
    const GridHierarchy hier = build_hierarchy(cell, 4, 4, 2);
    const auto eps = sample_permittivity(hier.finest(), disc);
    double worst = 0.0;
    for (const auto& [k1, k2] : {std::pair{0.0, 0.0}, {0.7, -1.9}, {std::numbers::pi, std::numbers::pi}}) {
      const auto lv = build_level_operators(hier, eps, BlochParameter(k1, k2, cell));
      for (const auto& l : lv) {
        SparseMatrix lift = l.L;
        if (fault == SelftestFault::lifting) {
          // Deliberately break the sign convention on x-edges.
          for (Index r = 0; r < l.grid.num_nodes(); ++r)
            for (SparseMatrix::InnerIterator it(lift, r); it; ++it) it.valueRef() = -it.value();
        }
        const SparseMatrix al = l.A.mat * lift;
        worst = std::max(worst, max_abs(al) / l.A.max_abs());
      }
    }
    all &= report(out, "null-space", worst <= 1e-12, "max|AL|/max|A| = " + sci(worst));
  }

  // Oracle: block solver against dense generalized eigensolver.
  {
    const GridHierarchy hier = build_hierarchy(cell, 4, 4, 1);
    const auto eps = sample_permittivity(hier.finest(), disc);
    const BlochParameter k(std::numbers::pi / 3.0, std::numbers::pi / 5.0, cell);
    SolverOptions so;
    so.p = 6;
    so.q = 2;
    so.tol = 1e-10;
    so.max_iter = 500;
    const BlochProblem bp(hier, eps, k, 1.0, so.block_size());
    const EigenProblem ep = bp.eigen_problem(bp.finest(), so);
    const ComplexMatrix e0 = random_initial_basis(ep, bp.level(bp.finest()).grid.num_edges(), so.block_size(), 42);
    const SolveResult r = pinvit_solve(ep, e0, so);
    const GeneralizedEig ref = dense_generalized_eig(*ep.A, *ep.M);
    std::vector<double> nz;
    for (Index i = 0; i < ref.values.size(); ++i)
      if (ref.values[i] > ep.null_threshold) nz.push_back(ref.values[i]);
    double err = r.converged ? 0.0 : 1.0;
    for (Index i = 0; i < so.p && i < r.eigenvalues.size(); ++i)
      err = std::max(err, std::abs(r.eigenvalues[i] - nz[static_cast<std::size_t>(i)]) / nz[static_cast<std::size_t>(i)]);
    all &= report(out, "oracle", r.converged && err <= 1e-8,
                  "max rel err = " + sci(err) + ", iterations = " + std::to_string(r.iterations));
  }

  // Analytic spectrum: vacuum at the zone corner, four-fold 2 pi^2.
  {
    const GridHierarchy hier = build_hierarchy(cell, 4, 4, 2);
    const auto eps = sample_permittivity(hier.finest(), ConstantPermittivity{1.0});
    SolverOptions so;
    so.p = 4;
    so.q = 2;
    so.tol = 1e-8;
    const BlochProblem bp(hier, eps, BlochParameter(std::numbers::pi, std::numbers::pi, cell), 1.0,
                          so.block_size());
    const SolveResult r = nested_iteration_first(bp, so);
    const double exact = 2.0 * std::numbers::pi * std::numbers::pi;
    double err = 0.0;
    for (Index i = 0; i < r.eigenvalues.size(); ++i) err = std::max(err, std::abs(r.eigenvalues[i] - exact) / exact);
    all &= report(out, "analytic-spectrum", r.converged && err <= 0.02, "max rel err = " + sci(err));
  }
  return all;
}

}  // namespace blochbands
