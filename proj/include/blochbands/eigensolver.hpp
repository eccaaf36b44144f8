#pragma once

#include <functional>
#include <vector>

#include "blochbands/corelinalg.hpp"

namespace blochbands {

enum class SubspaceMode { plain, gradient, lobpcg };

const char* to_string(SubspaceMode mode);
SubspaceMode subspace_mode_from_string(const std::string& s);

struct SolverOptions {
  int p = 1;   // wanted eigenpairs
  int q = -1;  // throw-away vectors; negative selects ceil(p/2)
  SubspaceMode subspace = SubspaceMode::lobpcg;
  double tol = 1e-2;
  int max_iter = 200;
  int precond_cycles = 2;
  int projection_cycles = 3;
  bool record_history = false;

  int throwaway() const { return q < 0 ? (p + 1) / 2 : q; }
  int block_size() const { return p + throwaway(); }
  void validate() const;
};

/// Everything the block iteration needs about one discrete problem.
struct EigenProblem {
  const SparseMatrix* A = nullptr;
  const SparseMatrix* M = nullptr;
  std::function<ComplexMatrix(const ComplexMatrix&)> precondition;  // B ~ (A + mu M)^{-1}
  std::function<ComplexMatrix(const ComplexMatrix&)> project;       // gradient elimination; identity if empty
  ComplexMatrix deflation;        // M-orthonormal columns removed explicitly (k = 0)
  const MBasis* reference = nullptr;
  double null_threshold = 0.0;    // Ritz values at or below are treated as null space

  ComplexMatrix eliminate_null_space(const ComplexMatrix& w) const;
};

/// Null-space cutoff on the scale of ||A||/||M||.
double default_null_threshold(const SparseMatrix& a, const SparseMatrix& m);

/// E* A E; E must be M-orthonormal.
ComplexMatrix rayleigh_block(const SparseMatrix& a, const SparseMatrix& m, const ComplexMatrix& e);

/// Constant fields (1,0) and (0,1), M-orthonormalized, for the periodic case;
/// empty otherwise.
ComplexMatrix deflation_vectors(const GridLevel& level, const BlochParameter& k, const SparseMatrix& mass);

struct RitzPairs {
  ComplexMatrix vectors;
  RealVector values;
};

/// Rayleigh-Ritz on span(w) after null-space elimination and
/// M-orthonormalization; returns the `count` smallest non-null pairs.
RitzPairs ritz_extract(const EigenProblem& problem, const ComplexMatrix& w, Index count);

struct SolveResult {
  RealVector eigenvalues;     // p ascending
  ComplexMatrix basis;        // p columns
  ComplexMatrix full_basis;   // p + q columns, reused as warm start
  RealVector residuals;       // p defects ||A e - lambda M e||_2
  int iterations = 0;
  bool converged = false;
  std::vector<RealVector> ritz_history;      // all block Ritz values per iterate
  std::vector<RealVector> residual_history;  // all block defects per iterate
};

/// Block preconditioned inverse iteration state. Exposed for step-level tests.
class BlockIteration {
 public:
  BlockIteration(const EigenProblem& problem, const ComplexMatrix& e0, SubspaceMode mode);

  void step();
  void set_mode(SubspaceMode mode) { mode_ = mode; }

  const ComplexMatrix& basis() const { return e_; }
  const RealVector& ritz_values() const { return lambda_; }
  /// ||A e_i - lambda_i M e_i||_2 for every block column.
  RealVector defects() const;
  int iterations() const { return iter_; }

 private:
  void rotate(const ComplexMatrix& q, Index count);

  const EigenProblem* problem_;
  SubspaceMode mode_;
  ComplexMatrix e_;
  ComplexMatrix e_prev_;
  RealVector lambda_;
  int iter_ = 0;
};

SolveResult pinvit_solve(const EigenProblem& problem, const ComplexMatrix& e0, const SolverOptions& opts);

}  // namespace blochbands
