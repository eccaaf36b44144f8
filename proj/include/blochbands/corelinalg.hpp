#pragma once

#include <vector>

#include "blochbands/operators.hpp"

namespace blochbands {

/// x* M y.
Complex m_inner(const SparseMatrix& mass, const ComplexVector& x, const ComplexVector& y);

/// M-orthonormal reference basis P used as the target of the generalized
/// Householder reflections, stored together with M P.
struct MBasis {
  ComplexMatrix vectors;
  ComplexMatrix mass_times;
  Index size() const { return vectors.cols(); }
};

/// Scaled canonical unit vectors e_j / sqrt(M_jj) whose mass rows do not
/// overlap, picked greedily by ascending M_jj. Falls back to M-Gram-Schmidt
/// of canonical vectors if fewer than `count` disjoint ones exist.
MBasis canonical_m_basis(const SparseMatrix& mass, Index count);

/// max |E* M E - I|.
double m_orthonormality_defect(const SparseMatrix& mass, const ComplexMatrix& e);

enum class RankDeficiency {
  complete,  // substitute the next reference vector (keeps one column per candidate)
  drop,      // omit the column (E has rank(candidates) columns)
};

struct HouseholderQR {
  ComplexMatrix E;                // M-orthonormal, E R = candidates
  ComplexMatrix R;                // E.cols() x candidates.cols(), upper triangular / echelon
  std::vector<bool> deficient;    // per candidate column
  Index rank = 0;
};

/// Factorizes the candidate block with M-reflections Q_i = I - 2 v v* M / (v* M v)
/// so that Q_c...Q_1 W = P R, and returns E = Q_1...Q_c P.
HouseholderQR generalized_householder_qr(const SparseMatrix& mass, const ComplexMatrix& candidates,
                                         const MBasis& reference,
                                         RankDeficiency mode = RankDeficiency::complete,
                                         double rank_tol = 1e-10);

/// Applies a single M-reflection with Householder vector v.
ComplexVector apply_m_reflection(const SparseMatrix& mass, const ComplexVector& v, const ComplexVector& x);

struct HermitianEig {
  ComplexMatrix vectors;  // unitary, columns are eigenvectors
  RealVector values;      // ascending
};

/// Cyclic Jacobi for small dense Hermitian matrices.
HermitianEig hermitian_eig_small(const ComplexMatrix& h);

struct GeneralizedEig {
  ComplexMatrix vectors;  // M-orthonormal
  RealVector values;      // ascending
};

/// Full spectrum of A e = lambda M e for dense-sized problems. Reduces to a
/// standard problem through the Cholesky factor of M.
GeneralizedEig dense_generalized_eig(const ComplexMatrix& a, const ComplexMatrix& m);
GeneralizedEig dense_generalized_eig(const SparseMatrix& a, const SparseMatrix& m);

inline constexpr Index kDenseOracleLimit = 2048;

}  // namespace blochbands
