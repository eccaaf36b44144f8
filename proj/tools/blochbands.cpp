// Band-structure driver: scan the Bloch grid, solve one quasi-momentum, or self-check.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "blochbands/config.hpp"

using namespace blochbands;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNoConvergence = 2;
constexpr int kExitSelftest = 3;

int run_scan(const RunConfig& cfg) {
  const GridHierarchy hier = cfg.hierarchy();
  const auto eps = cfg.finest_eps();
  ScanOptions opts = cfg.scan_options();
  int done = 0;
  const int total = cfg.kappa * cfg.kappa;
  opts.on_point = [&](const GridPoint& gp, const PointResult& r) {
    ++done;
    std::fprintf(stderr, "[%d/%d] (%d,%d) iters=%d%s\n", done, total, gp.i, gp.j, r.iterations,
                 r.converged ? "" : " not converged");
  };
  const auto t0 = std::chrono::steady_clock::now();
  const BandSurface surf = run_band_scan(hier, eps, BlochGrid{cfg.kappa, cfg.cell}, opts);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  emit_bands(surf, cfg.output);
  int unconverged = 0;
  for (const auto& p : surf.points) unconverged += p.converged ? 0 : 1;
  std::cout << "wrote " << cfg.output << " (" << surf.points.size() << " points, " << unconverged
            << " not converged, " << secs << " s)\n";
  return kExitOk;
}

int run_single(const RunConfig& cfg) {
  const BlochParameter k(cfg.k1, cfg.k2, cfg.cell);
  const PointResult r = solve_single(cfg.hierarchy(), cfg.finest_eps(), k, cfg.scan_options());
  std::printf("k = (%.12g, %.12g)  iterations = %d  %s\n", r.k1, r.k2, r.iterations,
              r.converged ? "converged" : "NOT converged");
  for (Index i = 0; i < r.eigenvalues.size(); ++i)
    std::printf("lambda_%lld = %.12g  residual = %.3e\n", static_cast<long long>(i + 1), r.eigenvalues[i],
                r.residuals[i]);
  return r.converged ? kExitOk : kExitNoConvergence;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Photonic band structures with multigrid-preconditioned block eigensolvers"};
  std::string config_path;
  std::string mode_override;
  std::string out_override;
  std::string fault;
  app.add_option("config", config_path, "run configuration (key = value)");
  app.add_option("--mode", mode_override, "override the mode key")->check(CLI::IsMember({"scan", "single", "selftest"}));
  app.add_option("--out", out_override, "override the output path");
  app.add_option("--inject-fault", fault, "selftest hook")->check(CLI::IsMember({"lifting"}));
  CLI11_PARSE(app, argc, argv);

  // Selftest needs no configuration file.
  if (config_path.empty() && mode_override == "selftest") {
    const bool ok = selftest(std::cout, fault == "lifting" ? SelftestFault::lifting : SelftestFault::none);
    return ok ? kExitOk : kExitSelftest;
  }
  if (config_path.empty()) {
    std::cerr << "error: a config path is required (or --mode selftest)\n";
    return kExitConfig;
  }

  RunConfig cfg;
  try {
    std::string text;
    {
      std::ifstream in(config_path);
      if (!in) throw ConfigError("cannot read config file '" + config_path + "'");
      std::stringstream ss;
      ss << in.rdbuf();
      text = ss.str();
    }
    // A command-line mode replaces the file's mode line.
    if (!mode_override.empty()) {
      std::istringstream in(text);
      std::string filtered;
      for (std::string line; std::getline(in, line);) {
        const auto eq = line.find('=');
        std::string key = eq == std::string::npos ? std::string() : line.substr(0, eq);
        key.erase(0, key.find_first_not_of(" \t"));
        key.erase(key.find_last_not_of(" \t") + 1);
        filtered += (key == "mode" ? std::string("#") : std::string()) + line + '\n';
      }
      text = filtered + "mode = " + mode_override + '\n';
    }
    cfg = parse_config(text);
    if (!out_override.empty()) cfg.output = out_override;
    if (const char* env = std::getenv("BLOCHBANDS_THREADS")) {
      const int t = std::atoi(env);
      if (t < 1) throw ConfigError("BLOCHBANDS_THREADS must be a positive integer");
      cfg.threads = t;
    }
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  std::cout << describe(cfg) << std::flush;
  try {
    switch (cfg.mode) {
      case RunMode::selftest: {
        const bool ok = selftest(std::cout, fault == "lifting" ? SelftestFault::lifting : SelftestFault::none);
        return ok ? kExitOk : kExitSelftest;
      }
      case RunMode::single: return run_single(cfg);
      case RunMode::scan: return run_scan(cfg);
    }
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitOk;
}
