#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "blochbands/operators.hpp"
#include "blochbands/scan.hpp"

namespace blochbands {

enum class RunMode { scan, single, selftest };

const char* to_string(RunMode mode);

/// Raised by parse_config; the message carries the offending line number.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  UnitCell cell;
  Index n0 = 8;
  Index m0 = 8;
  int levels = 2;  // refinements above the coarsest grid
  std::string permittivity = "constant 1";
  Permittivity eps = ConstantPermittivity{1.0};
  int kappa = 10;
  int p = 4;
  int q = -1;  // resolved to ceil(p/2) by parse_config
  double tol = 1e-2;
  int max_iter = 200;
  double mu = 1.0;
  int precond_cycles = 2;
  int projection_cycles = 3;
  SubspaceMode subspace = SubspaceMode::lobpcg;
  std::string output = "bands.csv";
  RunMode mode = RunMode::scan;
  double k1 = 0.0;
  double k2 = 0.0;
  std::uint64_t seed = 42;
  int threads = 1;

  GridHierarchy hierarchy() const;
  std::vector<double> finest_eps() const;
  ScanOptions scan_options() const;
  void validate() const;  // throws ConfigError
};

/// key = value lines, '#' starts a comment. `mode` must be present.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Parses values like "constant 1", "disc 0.5 0.5 0.18 11.56 1" or
/// "disc 0.18 11.56 1" (centered), "raster eps.txt".
Permittivity parse_permittivity(const std::string& spec, const UnitCell& cell);

/// Fully resolved configuration in parse_config syntax.
std::string describe(const RunConfig& cfg);

/// Writes the band table and "<path>.iters.csv".
void emit_bands(const BandSurface& surface, const std::string& path);

struct BandRow {
  int i = 0;
  int j = 0;
  double k1 = 0.0;
  double k2 = 0.0;
  int iters = 0;
  bool converged = false;
  std::vector<double> lambda;
};

std::vector<BandRow> read_bands(const std::string& path);

enum class SelftestFault { none, lifting };

/// Small-grid oracle, null-space and analytic-spectrum checks; true if all pass.
bool selftest(std::ostream& out, SelftestFault fault = SelftestFault::none);

}  // namespace blochbands
