#include "blochbands/scan.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numbers>
#include <random>
#include <thread>

namespace blochbands {

BlochProblem::BlochProblem(const GridHierarchy& hierarchy, const std::vector<double>& finest_eps,
                           const BlochParameter& k, double mu, int block_size, MultigridCycle cycle)
    : k_(k), levels_(build_level_operators(hierarchy, finest_eps, k)) {
  edge_mg_ = std::make_unique<EdgeMultigrid>(levels_, mu, cycle);
  nodal_mg_ = std::make_unique<NodalMultigrid>(levels_, k.is_periodic(), cycle);
  for (const auto& lv : levels_) {
    const Index want = std::min<Index>(3 * static_cast<Index>(block_size), lv.grid.num_edges());
    reference_.push_back(canonical_m_basis(lv.M.mat, want));
    deflation_.push_back(deflation_vectors(lv.grid, k, lv.M.mat));
    null_threshold_.push_back(default_null_threshold(lv.A.mat, lv.M.mat));
  }
}

EigenProblem BlochProblem::eigen_problem(std::size_t l, const SolverOptions& opts) const {
  EigenProblem ep;
  const LevelOperators& lv = levels_[l];
  ep.A = &lv.A.mat;
  ep.M = &lv.M.mat;
  const EdgeMultigrid* emg = edge_mg_.get();
  const int pc = opts.precond_cycles;
  ep.precondition = [emg, l, pc](const ComplexMatrix& r) { return emg->precondition(l, r, pc); };
  const NodalMultigrid* nmg = nodal_mg_.get();
  const int jc = opts.projection_cycles;
  ep.project = [&lv, nmg, l, jc](const ComplexMatrix& u) {
    return project_out_gradients(lv.M.mat, lv.L, *nmg, l, u, jc);
  };
  ep.deflation = deflation_[l];
  ep.reference = &reference_[l];
  ep.null_threshold = null_threshold_[l];
  return ep;
}

ComplexMatrix random_initial_basis(const EigenProblem& problem, Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  auto uniform = [&gen]() { return static_cast<double>(gen() >> 11) * 0x1.0p-53 * 2.0 - 1.0; };
  ComplexMatrix w(rows, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) {
      const double re = uniform();
      const double im = uniform();
      w(r, c) = Complex{re, im};
    }
  w = problem.eliminate_null_space(w);
  return generalized_householder_qr(*problem.M, w, *problem.reference, RankDeficiency::complete).E;
}

SolveResult nested_iteration_first(const BlochProblem& problem, const SolverOptions& opts,
                                   std::vector<int>* level_iterations) {
  opts.validate();
  const Index s = opts.block_size();
  const LevelOperators& coarse = problem.level(0);
  if (coarse.grid.num_edges() > kDenseOracleLimit)
    throw ContractError("coarsest level has " + std::to_string(coarse.grid.num_edges()) +
                        " unknowns, too many for the direct solve");
  const EigenProblem ep0 = problem.eigen_problem(0, opts);
  const GeneralizedEig direct = dense_generalized_eig(coarse.A.mat, coarse.M.mat);
  std::vector<Index> pick;
  for (Index i = 0; i < direct.values.size() && static_cast<Index>(pick.size()) < s; ++i)
    if (direct.values[i] > ep0.null_threshold) pick.push_back(i);
  if (static_cast<Index>(pick.size()) < s) throw ContractError("coarsest level has too few nonzero eigenpairs");
  ComplexMatrix e(coarse.grid.num_edges(), s);
  for (Index c = 0; c < s; ++c) e.col(c) = direct.vectors.col(pick[static_cast<std::size_t>(c)]);

  if (level_iterations) level_iterations->assign(problem.num_levels(), 0);
  if (problem.num_levels() == 1) return pinvit_solve(ep0, e, opts);

  SolveResult res;
  for (std::size_t l = 1; l < problem.num_levels(); ++l) {
    const EigenProblem ep = problem.eigen_problem(l, opts);
    ComplexMatrix fine = problem.level(l - 1).edge_prolongation * e;
    fine = ep.eliminate_null_space(fine);
    fine = generalized_householder_qr(*ep.M, fine, *ep.reference, RankDeficiency::complete).E;
    res = pinvit_solve(ep, fine, opts);
    if (level_iterations) (*level_iterations)[l] = res.iterations;
    e = res.full_basis;
  }
  return res;
}

ComplexMatrix extrapolate_initial(const EigenProblem& problem, const std::vector<const ComplexMatrix*>& previous,
                                  Index count) {
  if (previous.empty()) throw ContractError("extrapolation needs at least one previous basis");
  Index total = 0;
  for (const auto* b : previous) {
    if (b->rows() != problem.M->rows()) throw ContractError("previous basis lives on a different grid");
    total += b->cols();
  }
  ComplexMatrix w(problem.M->rows(), total);
  Index off = 0;
  for (const auto* b : previous) {
    w.middleCols(off, b->cols()) = *b;
    off += b->cols();
  }
  return ritz_extract(problem, w, count).vectors;
}

BlochParameter BlochGrid::point(int i, int j) const {
  if (kappa < 2) throw ContractError("Bloch grid needs at least 2 points per axis");
  const double t1 = 2.0 * static_cast<double>(i) / static_cast<double>(kappa - 1) - 1.0;
  const double t2 = 2.0 * static_cast<double>(j) / static_cast<double>(kappa - 1) - 1.0;
  return {std::numbers::pi / cell.a * t1, std::numbers::pi / cell.b * t2, cell};
}

std::vector<GridPoint> scan_dependencies(int i, int j) {
  std::vector<GridPoint> deps;
  if (i == 0 && j == 0) return deps;
  if (j == 0 || i >= 3) {
    // Horizontal: up to three predecessors in the same row.
    for (int d = std::min(i, 3); d >= 1; --d) deps.push_back({i - d, j});
    return deps;
  }
  for (int d = std::min(j, 3); d >= 1; --d) deps.push_back({i, j - d});
  return deps;
}

namespace {

std::uint64_t point_seed(std::uint64_t seed, int i, int j) {
  // splitmix64 finalizer over the point coordinates
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(j) * 65536u + static_cast<std::uint64_t>(i) + 1u);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

PointResult to_point(const BlochParameter& k, const SolveResult& r) {
  PointResult pr;
  pr.k1 = k.k1();
  pr.k2 = k.k2();
  pr.eigenvalues = r.eigenvalues;
  pr.residuals = r.residuals;
  pr.iterations = r.iterations;
  pr.converged = r.converged;
  return pr;
}

template <typename F>
void run_chains(const std::vector<std::vector<GridPoint>>& chains, int threads, F&& work) {
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t c = next++; c < chains.size(); c = next++)
      for (const auto& gp : chains[c]) work(gp);
  };
  const int nt = std::max(1, std::min<int>(threads, static_cast<int>(chains.size())));
  if (nt == 1) {
    worker();
    return;
  }
  std::vector<std::thread> pool;
  for (int t = 0; t < nt; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

}  // namespace

BandSurface run_band_scan(const GridHierarchy& hierarchy, const std::vector<double>& finest_eps,
                          const BlochGrid& grid, const ScanOptions& opts) {
  opts.solver.validate();
  const int kap = grid.kappa;
  if (kap < 2) throw ContractError("Bloch grid needs at least 2 points per axis");
  const Index s = opts.solver.block_size();
  const double reuse_limit = 10.0 * opts.solver.tol;

  BandSurface surf;
  surf.kappa = kap;
  surf.p = opts.solver.p;
  surf.points.resize(static_cast<std::size_t>(kap * kap));

  // Bases are kept until every dependent point has consumed them.
  std::vector<ComplexMatrix> bases(surf.points.size());
  std::vector<bool> usable(surf.points.size(), false);
  std::vector<int> pending(surf.points.size(), 0);
  if (opts.warm_start)
    for (int j = 0; j < kap; ++j)
      for (int i = 0; i < kap; ++i)
        for (const auto& d : scan_dependencies(i, j)) ++pending[static_cast<std::size_t>(d.j * kap + d.i)];
  std::mutex mtx;

  auto work = [&](const GridPoint& gp) {
    const BlochParameter k = grid.point(gp.i, gp.j);
    const BlochProblem bp(hierarchy, finest_eps, k, opts.mu, static_cast<int>(s), opts.cycle);
    const EigenProblem ep = bp.eigen_problem(bp.finest(), opts.solver);
    const Index nj = bp.level(bp.finest()).grid.num_edges();
    SolveResult r;
    std::vector<GridPoint> used;
    if (opts.warm_start && gp.i == 0 && gp.j == 0) {
      r = nested_iteration_first(bp, opts.solver);
    } else {
      std::vector<const ComplexMatrix*> prev;
      if (opts.warm_start) {
        std::lock_guard<std::mutex> lock(mtx);
        for (const auto& d : scan_dependencies(gp.i, gp.j)) {
          const auto idx = static_cast<std::size_t>(d.j * kap + d.i);
          if (usable[idx]) {
            prev.push_back(&bases[idx]);
            used.push_back(d);
          }
        }
      }
      // Dependencies are finished and never written again, so reading
      // them without the lock is safe.
      const ComplexMatrix e0 = prev.empty() ? random_initial_basis(ep, nj, s, point_seed(opts.seed, gp.i, gp.j))
                                            : extrapolate_initial(ep, prev, s);
      r = pinvit_solve(ep, e0, opts.solver);
    }
    PointResult pr = to_point(k, r);
    pr.warm_started = opts.warm_start && !(gp.i == 0 && gp.j == 0) && !used.empty();
    pr.sources = used;

    std::lock_guard<std::mutex> lock(mtx);
    const auto idx = static_cast<std::size_t>(gp.j * kap + gp.i);
    const bool ok = r.converged || (r.residuals.size() > 0 && r.residuals.maxCoeff() <= reuse_limit);
    if (opts.warm_start && pending[idx] > 0 && ok) {
      bases[idx] = std::move(r.full_basis);
      usable[idx] = true;
    }
    for (const auto& d : scan_dependencies(gp.i, gp.j)) {
      const auto di = static_cast<std::size_t>(d.j * kap + d.i);
      if (opts.warm_start && --pending[di] == 0) {
        bases[di] = ComplexMatrix();
        usable[di] = false;
      }
    }
    surf.points[idx] = std::move(pr);
    if (opts.on_point) opts.on_point(gp, surf.points[idx]);
  };

  // Row 0, then columns 0-2 upward, then the remaining rows left to right.
  std::vector<std::vector<GridPoint>> row0(1);
  for (int i = 0; i < kap; ++i) row0[0].push_back({i, 0});
  run_chains(row0, 1, work);

  std::vector<std::vector<GridPoint>> cols;
  for (int i = 0; i < std::min(kap, 3); ++i) {
    std::vector<GridPoint> c;
    for (int j = 1; j < kap; ++j) c.push_back({i, j});
    if (!c.empty()) cols.push_back(std::move(c));
  }
  run_chains(cols, opts.threads, work);

  std::vector<std::vector<GridPoint>> rows;
  for (int j = 1; j < kap; ++j) {
    std::vector<GridPoint> r;
    for (int i = 3; i < kap; ++i) r.push_back({i, j});
    if (!r.empty()) rows.push_back(std::move(r));
  }
  run_chains(rows, opts.threads, work);
  return surf;
}

PointResult solve_single(const GridHierarchy& hierarchy, const std::vector<double>& finest_eps,
                         const BlochParameter& k, const ScanOptions& opts) {
  const BlochProblem bp(hierarchy, finest_eps, k, opts.mu, opts.solver.block_size(), opts.cycle);
  return to_point(k, nested_iteration_first(bp, opts.solver));
}

}  // namespace blochbands
