#pragma once

#include <string>
#include <variant>
#include <vector>

#include "blochbands/mesh.hpp"

namespace blochbands {

// ---------------------------------------------------------------------------
// Permittivity descriptions
// ---------------------------------------------------------------------------

struct ConstantPermittivity {
  double value = 1.0;
};

/// eps_inside where the (periodic) distance to center is <= radius.
struct DiscPermittivity {
  double cx = 0.5;
  double cy = 0.5;
  double radius = 0.25;
  double eps_inside = 1.0;
  double eps_outside = 1.0;
};

/// Per-cell values on the finest level, row-major with x1 fastest:
/// value(p,q) = values[q*n + p].
struct RasterPermittivity {
  Index n = 0;
  Index m = 0;
  std::vector<double> values;
};

using Permittivity = std::variant<ConstantPermittivity, DiscPermittivity, RasterPermittivity>;

/// Parses the plain-text raster format: "n m" followed by n*m positive reals.
RasterPermittivity parse_raster(const std::string& text);
RasterPermittivity load_raster(const std::string& path);

/// One positive value per cell of `level`; disc membership is decided at
/// the cell midpoint.
std::vector<double> sample_permittivity(const GridLevel& level, const Permittivity& eps);

// ---------------------------------------------------------------------------
// Sparse operators
// ---------------------------------------------------------------------------

struct SparseHermitianOperator {
  SparseMatrix mat;
  bool hermitian = true;
  bool positive_semidefinite = false;

  Index dim() const { return mat.rows(); }
  ComplexMatrix apply(const ComplexMatrix& x) const { return mat * x; }
  double max_abs() const;
  /// Largest |A_ij - conj(A_ji)|.
  double hermitian_defect() const;
};

double max_abs(const SparseMatrix& a);

struct EdgeOperators {
  SparseHermitianOperator stiffness;  // A
  SparseHermitianOperator mass;       // M
};

EdgeOperators assemble_edge_operators(const GridLevel& level, const std::vector<double>& eps_cells,
                                      const BlochParameter& k);

/// |J| x |I| matrix whose column i holds the edge coefficients of the
/// gradient of nodal basis function i.
SparseMatrix assemble_lifting(const GridLevel& level, const BlochParameter& k);

/// P = L* M L.
SparseHermitianOperator assemble_nodal(const SparseHermitianOperator& mass, const SparseMatrix& lifting);

enum class ProlongationKind { edge, nodal };

/// Natural embedding of the coarse space into the bisection-refined space.
SparseMatrix assemble_prolongation(const GridLevel& coarse, const GridLevel& fine, const BlochParameter& k,
                                   ProlongationKind kind);

/// P* A P.
SparseHermitianOperator galerkin_coarsen(const SparseHermitianOperator& fine, const SparseMatrix& prolongation);

/// Operators for one level of a hierarchy at a fixed Bloch parameter.
struct LevelOperators {
  GridLevel grid;
  SparseHermitianOperator A;
  SparseHermitianOperator M;
  SparseMatrix L;
  SparseHermitianOperator P;
  SparseMatrix edge_prolongation;   // to the next finer level (empty on finest)
  SparseMatrix nodal_prolongation;  // to the next finer level (empty on finest)
};

/// Assembles A and M on the finest level and forms every coarser A, M, P by
/// Galerkin coarsening. Returned vector is ordered coarse to fine.
std::vector<LevelOperators> build_level_operators(const GridHierarchy& hierarchy,
                                                  const std::vector<double>& finest_eps,
                                                  const BlochParameter& k);

}  // namespace blochbands
