#include "blochbands/multigrid.hpp"

#include <cmath>

namespace blochbands {

Eigen::Vector4cd EdgePatch::solve(const Eigen::Vector4cd& rhs) const {
  Eigen::Vector4cd y = reflect(rhs);
  y = chol_lower.triangularView<Eigen::Lower>().solve(y);
  y = chol_lower.adjoint().triangularView<Eigen::Upper>().solve(y);
  return reflect(y);
}

EdgePatch make_edge_patch(const SparseMatrix& k, const std::array<Index, 4>& dofs, const Eigen::Vector4cd& gradient) {
  EdgePatch patch;
  patch.dofs = dofs;
  const double gnorm = gradient.norm();
  if (!(gnorm > 0.0)) throw ContractError("patch gradient direction is zero");
  patch.gradient = gradient / gnorm;

  const Complex g0 = patch.gradient[0];
  const Complex phase = std::abs(g0) > 0.0 ? -g0 / std::abs(g0) : Complex{-1.0, 0.0};
  Eigen::Vector4cd u = patch.gradient;
  u[0] -= phase;
  patch.reflector = u / u.norm();

  Eigen::Matrix4cd block;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) block(r, c) = k.coeff(dofs[r], dofs[c]);
  Eigen::Matrix4cd h = Eigen::Matrix4cd::Identity() - 2.0 * patch.reflector * patch.reflector.adjoint();
  Eigen::Matrix4cd t = h * block * h;
  t = 0.5 * (t + t.adjoint()).eval();
  Eigen::LLT<Eigen::Matrix4cd> llt(t);
  if (llt.info() != Eigen::Success) throw ContractError("patch block is not positive definite");
  patch.chol_lower = llt.matrixL();
  patch.inverse = h * llt.solve(Eigen::Matrix4cd::Identity()) * h;
  return patch;
}

BlockSmoother::BlockSmoother(const SparseMatrix* k, std::vector<EdgePatch> patches)
    : k_(k), patches_(std::move(patches)) {}

void BlockSmoother::update(const EdgePatch& patch, RowBlock& x, const RowBlock& rhs,
                           PatchBuffer& buf) const {
  auto& res = buf.res;
  for (int l = 0; l < 4; ++l) {
    const Index row = patch.dofs[static_cast<std::size_t>(l)];
    res.row(l) = rhs.row(row);
    for (SparseMatrix::InnerIterator it(*k_, row); it; ++it) res.row(l) -= it.value() * x.row(it.col());
  }
  buf.upd.noalias() = patch.inverse * res;
  for (int l = 0; l < 4; ++l) x.row(patch.dofs[static_cast<std::size_t>(l)]) += buf.upd.row(l);
}

void BlockSmoother::smooth(RowBlock& x, const RowBlock& rhs, int sweeps, SweepDirection dir) const {
  PatchBuffer buf{PatchBuffer::Block(4, x.cols()), PatchBuffer::Block(4, x.cols())};
  for (int s = 0; s < sweeps; ++s) {
    if (dir == SweepDirection::forward) {
      for (const auto& p : patches_) update(p, x, rhs, buf);
    } else {
      for (auto it = patches_.rbegin(); it != patches_.rend(); ++it) update(*it, x, rhs, buf);
    }
  }
}

void BlockSmoother::smooth(ComplexVector& x, const ComplexVector& rhs, int sweeps, SweepDirection dir) const {
  RowBlock xb = x;
  const RowBlock rb = rhs;
  smooth(xb, rb, sweeps, dir);
  x = xb;
}

std::vector<EdgePatch> build_node_patches(const GridLevel& grid, const SparseMatrix& k, const SparseMatrix& lifting) {
  // Column access to L: transpose once into row-major storage.
  const SparseMatrix lt = lifting.transpose();
  const BlochParameter k0{};
  std::vector<EdgePatch> patches;
  patches.reserve(static_cast<std::size_t>(grid.num_nodes()));
  for (Index q = 0; q < grid.m; ++q) {
    for (Index p = 0; p < grid.n; ++p) {
      const Index node = grid.node_index(p, q);
      // Periodic wrap only resolves indices here; phases come from L itself.
      const std::array<Index, 4> dofs{
          wrap_edge(grid, k0, {EdgeDirection::x, p - 1, q}).index,
          grid.edge_index(EdgeDirection::x, p, q),
          wrap_edge(grid, k0, {EdgeDirection::y, p, q - 1}).index,
          grid.edge_index(EdgeDirection::y, p, q),
      };
      Eigen::Vector4cd g = Eigen::Vector4cd::Zero();
      for (SparseMatrix::InnerIterator it(lt, node); it; ++it)
        for (int l = 0; l < 4; ++l)
          if (it.col() == dofs[static_cast<std::size_t>(l)]) g[l] = it.value();
      patches.push_back(make_edge_patch(k, dofs, g));
    }
  }
  return patches;
}

EdgeMultigrid::EdgeMultigrid(const std::vector<LevelOperators>& levels, double mu, MultigridCycle cycle)
    : mu_(mu), cycle_(cycle) {
  if (!(mu > 0.0)) throw ContractError("multigrid regularization mu must be positive");
  if (levels.empty()) throw ContractError("multigrid needs at least one level");
  ops_.reserve(levels.size());
  for (const auto& lv : levels) ops_.push_back(lv.A.mat + mu * lv.M.mat);
  for (std::size_t l = 0; l + 1 < levels.size(); ++l) prolong_.push_back(&levels[l].edge_prolongation);
  smoothers_.reserve(levels.size());
  for (std::size_t l = 0; l < levels.size(); ++l)
    smoothers_.emplace_back(&ops_[l], build_node_patches(levels[l].grid, ops_[l], levels[l].L));
  coarse_.compute(ComplexMatrix(ops_.front()));
  if (coarse_.info() != Eigen::Success) throw ContractError("coarse multigrid operator is not positive definite");
}

void EdgeMultigrid::smooth(std::size_t level, ComplexVector& x, const ComplexVector& rhs, int sweeps,
                           SweepDirection dir) const {
  smoothers_[level].smooth(x, rhs, sweeps, dir);
}

void EdgeMultigrid::vcycle(std::size_t level, ComplexVector& x, const ComplexVector& rhs) const {
  vcycle(level, x, rhs, cycle_.presmooth, cycle_.postsmooth);
}

void EdgeMultigrid::vcycle(std::size_t level, ComplexVector& x, const ComplexVector& rhs, int nu1, int nu2) const {
  RowBlock xb = x;
  const RowBlock rb = rhs;
  vcycle(level, xb, rb, nu1, nu2);
  x = xb;
}

void EdgeMultigrid::vcycle(std::size_t level, RowBlock& x, const RowBlock& rhs, int nu1, int nu2) const {
  if (level == 0) {
    x = coarse_.solve(ComplexMatrix(rhs));
    return;
  }
  smoothers_[level].smooth(x, rhs, nu1, SweepDirection::forward);
  const SparseMatrix& pr = *prolong_[level - 1];
  const RowBlock fine_res = rhs - ops_[level] * x;
  const RowBlock rc = pr.adjoint() * fine_res;
  RowBlock ec = RowBlock::Zero(rc.rows(), rc.cols());
  vcycle(level - 1, ec, rc, nu1, nu2);
  x += pr * ec;
  smoothers_[level].smooth(x, rhs, nu2, SweepDirection::backward);
}

ComplexVector EdgeMultigrid::precondition(std::size_t level, const ComplexVector& r, int cycles) const {
  return precondition(level, ComplexMatrix(r), cycles).col(0);
}

ComplexMatrix EdgeMultigrid::precondition(std::size_t level, const ComplexMatrix& r, int cycles) const {
  if (cycles < 1) throw ContractError("precondition needs at least one cycle");
  const RowBlock rb = r;
  RowBlock x = RowBlock::Zero(r.rows(), r.cols());
  for (int c = 0; c < cycles; ++c) vcycle(level, x, rb, cycle_.presmooth, cycle_.postsmooth);
  return x;
}

NodalMultigrid::NodalMultigrid(const std::vector<LevelOperators>& levels, bool periodic, MultigridCycle cycle)
    : periodic_(periodic), cycle_(cycle) {
  if (levels.empty()) throw ContractError("multigrid needs at least one level");
  for (const auto& lv : levels) {
    ops_.push_back(&lv.P.mat);
    RealVector d = lv.P.mat.diagonal().real();
    for (Index i = 0; i < d.size(); ++i) {
      if (!(d[i] > 0.0)) throw ContractError("nodal operator has a nonpositive diagonal entry");
      d[i] = 1.0 / d[i];
    }
    inv_diag_.push_back(std::move(d));
  }
  for (std::size_t l = 0; l + 1 < levels.size(); ++l) prolong_.push_back(&levels[l].nodal_prolongation);
  ComplexMatrix p0(*ops_.front());
  if (periodic_) {
    // Rank-one lift of the constant null vector: for rhs orthogonal to the
    // constants, the solution equals the pseudo-inverse applied to it.
    const double n = static_cast<double>(p0.rows());
    const double s = p0.diagonal().real().maxCoeff();
    p0.array() += s / n;
  }
  coarse_.compute(p0);
  if (coarse_.info() != Eigen::Success) throw ContractError("coarse nodal operator does not factorize");
}

void NodalMultigrid::remove_constant(RowBlock& x) const {
  if (periodic_) x.rowwise() -= x.colwise().mean();
}

void NodalMultigrid::smooth(std::size_t level, RowBlock& x, const RowBlock& rhs, int sweeps,
                            SweepDirection dir) const {
  const SparseMatrix& p = *ops_[level];
  const RealVector& inv = inv_diag_[level];
  const Index n = p.rows();
  Eigen::Matrix<Complex, 1, Eigen::Dynamic> s(x.cols());
  auto relax = [&](Index i) {
    s = rhs.row(i);
    for (SparseMatrix::InnerIterator it(p, i); it; ++it) s -= it.value() * x.row(it.col());
    x.row(i) += s * inv[i];
  };
  for (int sw = 0; sw < sweeps; ++sw) {
    if (dir == SweepDirection::forward)
      for (Index i = 0; i < n; ++i) relax(i);
    else
      for (Index i = n; i-- > 0;) relax(i);
  }
}

void NodalMultigrid::vcycle(std::size_t level, ComplexVector& x, const ComplexVector& rhs) const {
  RowBlock xb = x;
  const RowBlock rb = rhs;
  vcycle(level, xb, rb);
  x = xb;
}

void NodalMultigrid::vcycle(std::size_t level, RowBlock& x, const RowBlock& rhs) const {
  if (level == 0) {
    x = coarse_.solve(ComplexMatrix(rhs));
    remove_constant(x);
    return;
  }
  smooth(level, x, rhs, cycle_.presmooth, SweepDirection::forward);
  const SparseMatrix& pr = *prolong_[level - 1];
  const RowBlock fine_res = rhs - *ops_[level] * x;
  const RowBlock rc = pr.adjoint() * fine_res;
  RowBlock ec = RowBlock::Zero(rc.rows(), rc.cols());
  vcycle(level - 1, ec, rc);
  x += pr * ec;
  smooth(level, x, rhs, cycle_.postsmooth, SweepDirection::backward);
  remove_constant(x);
}

ComplexVector NodalMultigrid::solve(std::size_t level, const ComplexVector& rhs, int cycles) const {
  return solve(level, ComplexMatrix(rhs), cycles).col(0);
}

ComplexMatrix NodalMultigrid::solve(std::size_t level, const ComplexMatrix& rhs, int cycles) const {
  if (cycles < 1) throw ContractError("nodal solve needs at least one cycle");
  const RowBlock rb = rhs;
  RowBlock x = RowBlock::Zero(rhs.rows(), rhs.cols());
  for (int c = 0; c < cycles; ++c) vcycle(level, x, rb);
  return x;
}

ComplexMatrix project_out_gradients(const SparseMatrix& mass, const SparseMatrix& lifting, const NodalMultigrid& mg,
                                    std::size_t level, const ComplexMatrix& u, int cycles) {
  const ComplexMatrix rhs = lifting.adjoint() * (mass * u);
  return u - lifting * mg.solve(level, rhs, cycles);
}

}  // namespace blochbands
