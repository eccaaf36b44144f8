#pragma once

#include <array>
#include <vector>

#include "blochbands/operators.hpp"

namespace blochbands {

enum class SweepDirection { forward, backward };

/// Several vectors stored row by row, so that one sparse row visit updates
/// every column at once.
using RowBlock = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Overlapping 4-edge patch around one node. The local gradient direction is
/// rotated onto the first axis by a Householder reflection before the
/// transformed patch block is Cholesky-factorized.
struct EdgePatch {
  std::array<Index, 4> dofs{};
  Eigen::Vector4cd gradient;    // unit vector, restriction of the node's L column
  Eigen::Vector4cd reflector;   // H = I - 2 u u*, H gradient = phase * e_0
  Eigen::Matrix4cd chol_lower;  // H K_patch H = C C*
  Eigen::Matrix4cd inverse;     // H (C C*)^{-1} H, cached for the sweeps

  Eigen::Vector4cd reflect(const Eigen::Vector4cd& x) const { return x - 2.0 * reflector * reflector.dot(x); }
  Eigen::Vector4cd solve(const Eigen::Vector4cd& rhs) const;
};

EdgePatch make_edge_patch(const SparseMatrix& k, const std::array<Index, 4>& dofs,
                          const Eigen::Vector4cd& gradient);

/// Block Gauss-Seidel over a fixed patch list on operator K.
class BlockSmoother {
 public:
  BlockSmoother() = default;
  BlockSmoother(const SparseMatrix* k, std::vector<EdgePatch> patches);

  void smooth(ComplexVector& x, const ComplexVector& rhs, int sweeps, SweepDirection dir) const;
  void smooth(RowBlock& x, const RowBlock& rhs, int sweeps, SweepDirection dir) const;
  const std::vector<EdgePatch>& patches() const { return patches_; }

 private:
  struct PatchBuffer {
    using Block = Eigen::Matrix<Complex, 4, Eigen::Dynamic, Eigen::RowMajor>;
    Block res, upd;
  };
  void update(const EdgePatch& patch, RowBlock& x, const RowBlock& rhs, PatchBuffer& buf) const;
  const SparseMatrix* k_ = nullptr;
  std::vector<EdgePatch> patches_;
};

/// Node-patch list of a grid level: incident edges {x(p-1,q), x(p,q),
/// y(p,q-1), y(p,q)} and the matching column of the lifting matrix.
std::vector<EdgePatch> build_node_patches(const GridLevel& grid, const SparseMatrix& k, const SparseMatrix& lifting);

struct MultigridCycle {
  int presmooth = 2;
  int postsmooth = 2;
};

/// Geometric multigrid for K = A + mu M over all levels of a hierarchy.
class EdgeMultigrid {
 public:
  EdgeMultigrid(const std::vector<LevelOperators>& levels, double mu, MultigridCycle cycle = {});

  std::size_t num_levels() const { return ops_.size(); }
  double mu() const { return mu_; }
  const SparseMatrix& op(std::size_t level) const { return ops_[level]; }
  const BlockSmoother& smoother(std::size_t level) const { return smoothers_[level]; }

  void smooth(std::size_t level, ComplexVector& x, const ComplexVector& rhs, int sweeps, SweepDirection dir) const;
  /// One V-cycle on `level` starting from x (in/out).
  void vcycle(std::size_t level, ComplexVector& x, const ComplexVector& rhs) const;
  void vcycle(std::size_t level, ComplexVector& x, const ComplexVector& rhs, int nu1, int nu2) const;
  void vcycle(std::size_t level, RowBlock& x, const RowBlock& rhs, int nu1, int nu2) const;
  /// `cycles` V-cycles from a zero start: the preconditioner B ~ K^{-1}.
  ComplexVector precondition(std::size_t level, const ComplexVector& r, int cycles) const;
  ComplexMatrix precondition(std::size_t level, const ComplexMatrix& r, int cycles) const;

 private:
  std::vector<SparseMatrix> ops_;
  std::vector<const SparseMatrix*> prolong_;
  std::vector<BlockSmoother> smoothers_;
  Eigen::LLT<ComplexMatrix> coarse_;
  double mu_;
  MultigridCycle cycle_;
};

/// Multigrid for the nodal matrix P = L* M L with pointwise Gauss-Seidel. In
/// the periodic case the constant null vector is removed from every cycle
/// output and the coarse solve acts as the pseudo-inverse.
class NodalMultigrid {
 public:
  NodalMultigrid(const std::vector<LevelOperators>& levels, bool periodic, MultigridCycle cycle = {});

  std::size_t num_levels() const { return ops_.size(); }
  bool periodic() const { return periodic_; }
  void vcycle(std::size_t level, ComplexVector& x, const ComplexVector& rhs) const;
  void vcycle(std::size_t level, RowBlock& x, const RowBlock& rhs) const;
  ComplexVector solve(std::size_t level, const ComplexVector& rhs, int cycles) const;
  ComplexMatrix solve(std::size_t level, const ComplexMatrix& rhs, int cycles) const;

 private:
  void smooth(std::size_t level, RowBlock& x, const RowBlock& rhs, int sweeps, SweepDirection dir) const;
  void remove_constant(RowBlock& x) const;
  std::vector<const SparseMatrix*> ops_;
  std::vector<const SparseMatrix*> prolong_;
  std::vector<RealVector> inv_diag_;
  Eigen::LLT<ComplexMatrix> coarse_;
  bool periodic_;
  MultigridCycle cycle_;
};

/// u - L phi with phi ~ P^{-1} L* M u from `cycles` nodal V-cycles, per column.
ComplexMatrix project_out_gradients(const SparseMatrix& mass, const SparseMatrix& lifting, const NodalMultigrid& mg,
                                    std::size_t level, const ComplexMatrix& u, int cycles);

}  // namespace blochbands
