#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "blochbands/eigensolver.hpp"
#include "blochbands/multigrid.hpp"

namespace blochbands {

/// Operators, multigrid hierarchies and reference bases for one Bloch
/// parameter on every level. Not movable: the multigrid objects refer into
/// the level operators.
class BlochProblem {
 public:
  BlochProblem(const GridHierarchy& hierarchy, const std::vector<double>& finest_eps, const BlochParameter& k,
               double mu, int block_size, MultigridCycle cycle = {});
  BlochProblem(const BlochProblem&) = delete;
  BlochProblem& operator=(const BlochProblem&) = delete;

  const BlochParameter& k() const { return k_; }
  std::size_t num_levels() const { return levels_.size(); }
  std::size_t finest() const { return levels_.size() - 1; }
  const LevelOperators& level(std::size_t l) const { return levels_[l]; }
  const EdgeMultigrid& edge_mg() const { return *edge_mg_; }
  const NodalMultigrid& nodal_mg() const { return *nodal_mg_; }

  EigenProblem eigen_problem(std::size_t level, const SolverOptions& opts) const;

 private:
  BlochParameter k_;
  std::vector<LevelOperators> levels_;
  std::unique_ptr<EdgeMultigrid> edge_mg_;
  std::unique_ptr<NodalMultigrid> nodal_mg_;
  std::vector<MBasis> reference_;
  std::vector<ComplexMatrix> deflation_;
  std::vector<double> null_threshold_;
};

/// Random M-orthonormal block with gradients and deflation space removed.
/// The generator is a 64-bit Mersenne Twister with doubles built from the top
/// 53 bits, so sequences match across platforms.
ComplexMatrix random_initial_basis(const EigenProblem& problem, Index rows, Index cols, std::uint64_t seed);

/// Direct coarse solve followed by prolongation and iteration on each finer level.
SolveResult nested_iteration_first(const BlochProblem& problem, const SolverOptions& opts,
                                   std::vector<int>* level_iterations = nullptr);

/// Rayleigh-Ritz on the union of neighbouring bases, using the current
/// operators; returns `count` columns.
ComplexMatrix extrapolate_initial(const EigenProblem& problem, const std::vector<const ComplexMatrix*>& previous,
                                  Index count);

struct BlochGrid {
  int kappa = 2;
  UnitCell cell;
  BlochParameter point(int i, int j) const;
};

struct GridPoint {
  int i = 0;
  int j = 0;
  bool operator==(const GridPoint&) const = default;
};

/// Neighbours whose bases seed point (i,j) in the scan schedule.
std::vector<GridPoint> scan_dependencies(int i, int j);

struct PointResult {
  double k1 = 0.0;
  double k2 = 0.0;
  RealVector eigenvalues;
  RealVector residuals;
  int iterations = 0;
  bool converged = false;
  bool warm_started = false;
  std::vector<GridPoint> sources;  // bases actually used
};

struct BandSurface {
  int kappa = 0;
  int p = 0;
  std::vector<PointResult> points;  // index j * kappa + i

  const PointResult& at(int i, int j) const { return points[static_cast<std::size_t>(j * kappa + i)]; }
  PointResult& at(int i, int j) { return points[static_cast<std::size_t>(j * kappa + i)]; }
};

struct ScanOptions {
  SolverOptions solver;
  double mu = 1.0;
  MultigridCycle cycle;
  bool warm_start = true;  // false: every point from a random start
  std::uint64_t seed = 42;
  int threads = 1;
  std::function<void(const GridPoint&, const PointResult&)> on_point;
};

BandSurface run_band_scan(const GridHierarchy& hierarchy, const std::vector<double>& finest_eps,
                          const BlochGrid& grid, const ScanOptions& opts);

/// Solve at a single Bloch parameter by nested iteration.
PointResult solve_single(const GridHierarchy& hierarchy, const std::vector<double>& finest_eps,
                         const BlochParameter& k, const ScanOptions& opts);

}  // namespace blochbands
