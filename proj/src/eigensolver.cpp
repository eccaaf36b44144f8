#include "blochbands/eigensolver.hpp"

#include <algorithm>
#include <cmath>

namespace blochbands {

const char* to_string(SubspaceMode mode) {
  switch (mode) {
    case SubspaceMode::plain: return "plain";
    case SubspaceMode::gradient: return "gradient";
    case SubspaceMode::lobpcg: return "lobpcg";
  }
  return "lobpcg";
}

SubspaceMode subspace_mode_from_string(const std::string& s) {
  if (s == "plain") return SubspaceMode::plain;
  if (s == "gradient") return SubspaceMode::gradient;
  if (s == "lobpcg") return SubspaceMode::lobpcg;
  throw ContractError("unknown subspace mode '" + s + "' (expected plain, gradient or lobpcg)");
}

void SolverOptions::validate() const {
  if (p < 1) throw ContractError("p must be at least 1");
  if (q < -1) throw ContractError("q must be nonnegative");
  if (!(tol > 0.0)) throw ContractError("tol must be positive");
  if (max_iter < 0) throw ContractError("max_iter must be nonnegative");
  if (precond_cycles < 1) throw ContractError("precond_cycles must be at least 1");
  if (projection_cycles < 1) throw ContractError("projection_cycles must be at least 1");
}

ComplexMatrix EigenProblem::eliminate_null_space(const ComplexMatrix& w) const {
  ComplexMatrix out = project ? project(w) : w;
  if (deflation.cols() > 0) out -= deflation * (deflation.adjoint() * (*M * out));
  return out;
}

double default_null_threshold(const SparseMatrix& a, const SparseMatrix& m) {
  return 1e-8 * max_abs(a) / max_abs(m);
}

ComplexMatrix rayleigh_block(const SparseMatrix& a, const SparseMatrix& m, const ComplexMatrix& e) {
  if (e.cols() > 0) {
    // Cheap contract check on the first column only.
    const Complex d = e.col(0).dot(m * e.col(0));
    if (std::abs(d - 1.0) > 1e-8) throw ContractError("rayleigh_block: basis is not M-orthonormal");
  }
  ComplexMatrix h = e.adjoint() * (a * e);
  return 0.5 * (h + h.adjoint());
}

ComplexMatrix deflation_vectors(const GridLevel& level, const BlochParameter& k, const SparseMatrix& mass) {
  if (!k.is_periodic()) return ComplexMatrix(level.num_edges(), 0);
  const Index nm = level.num_nodes();
  ComplexMatrix v = ComplexMatrix::Zero(level.num_edges(), 2);
  v.col(0).head(nm).setConstant(level.h1());
  v.col(1).tail(nm).setConstant(level.h2());
  for (Index c = 0; c < 2; ++c) {
    ComplexVector col = v.col(c);
    for (Index l = 0; l < c; ++l) col -= v.col(l) * m_inner(mass, v.col(l), col);
    v.col(c) = col / std::sqrt(m_inner(mass, col, col).real());
  }
  return v;
}

namespace {

// Indices of the `count` smallest Ritz values above the null threshold;
// tops up with the largest sub-threshold ones if the space is too small.
std::vector<Index> select_ritz(const RealVector& values, Index count, double null_threshold) {
  std::vector<Index> keep, below;
  for (Index i = 0; i < values.size(); ++i) (values[i] > null_threshold ? keep : below).push_back(i);
  if (static_cast<Index>(keep.size()) > count) keep.resize(static_cast<std::size_t>(count));
  while (static_cast<Index>(keep.size()) < count && !below.empty()) {
    keep.insert(keep.begin(), below.back());
    below.pop_back();
  }
  return keep;
}

HouseholderQR orthonormalize(const EigenProblem& problem, const ComplexMatrix& w, Index min_rank) {
  HouseholderQR qr = generalized_householder_qr(*problem.M, w, *problem.reference, RankDeficiency::drop);
  if (qr.rank < min_rank && problem.reference->size() >= w.cols())
    qr = generalized_householder_qr(*problem.M, w, *problem.reference, RankDeficiency::complete);
  return qr;
}

}  // namespace

RitzPairs ritz_extract(const EigenProblem& problem, const ComplexMatrix& w, Index count) {
  const ComplexMatrix clean = problem.eliminate_null_space(w);
  const HouseholderQR qr = orthonormalize(problem, clean, count);
  const ComplexMatrix aq = *problem.A * qr.E;
  ComplexMatrix h = qr.E.adjoint() * aq;
  h = 0.5 * (h + h.adjoint());
  const HermitianEig eig = hermitian_eig_small(h);
  const auto sel = select_ritz(eig.values, count, problem.null_threshold);
  RitzPairs out;
  out.vectors.resize(w.rows(), static_cast<Index>(sel.size()));
  out.values.resize(static_cast<Index>(sel.size()));
  for (std::size_t i = 0; i < sel.size(); ++i) {
    out.vectors.col(static_cast<Index>(i)) = qr.E * eig.vectors.col(sel[i]);
    out.values[static_cast<Index>(i)] = eig.values[sel[i]];
  }
  return out;
}

BlockIteration::BlockIteration(const EigenProblem& problem, const ComplexMatrix& e0, SubspaceMode mode)
    : problem_(&problem), mode_(mode) {
  if (e0.cols() == 0) throw ContractError("initial block is empty");
  if (m_orthonormality_defect(*problem.M, e0.leftCols(std::min<Index>(e0.cols(), 2))) > 1e-8)
    throw ContractError("initial block is not M-orthonormal");
  rotate(e0, e0.cols());
}

void BlockIteration::rotate(const ComplexMatrix& q, Index count) {
  const ComplexMatrix aq = *problem_->A * q;
  ComplexMatrix h = q.adjoint() * aq;
  h = 0.5 * (h + h.adjoint());
  const HermitianEig eig = hermitian_eig_small(h);
  const auto sel = select_ritz(eig.values, count, problem_->null_threshold);
  ComplexMatrix u(q.cols(), static_cast<Index>(sel.size()));
  lambda_.resize(static_cast<Index>(sel.size()));
  for (std::size_t i = 0; i < sel.size(); ++i) {
    u.col(static_cast<Index>(i)) = eig.vectors.col(sel[i]);
    lambda_[static_cast<Index>(i)] = eig.values[sel[i]];
  }
  e_ = q * u;
}

RealVector BlockIteration::defects() const {
  const ComplexMatrix r = (*problem_->A * e_) - (*problem_->M * e_) * lambda_.asDiagonal();
  return r.colwise().norm().transpose();
}

void BlockIteration::step() {
  const Index s = e_.cols();
  const ComplexMatrix r = (*problem_->A * e_) - (*problem_->M * e_) * lambda_.asDiagonal();
  const ComplexMatrix d = problem_->precondition(r);

  // span{E, E - B R} = span{E, B R}; the correction and the previous
  // iterate are kept as separate, well-scaled columns. The whole block is
  // projected so that gradient residue from the inexact nodal solves decays
  // geometrically instead of accumulating in E.
  const bool use_prev = mode_ == SubspaceMode::lobpcg && iter_ > 1 && e_prev_.cols() > 0;
  ComplexMatrix cand;
  if (mode_ == SubspaceMode::plain) {
    cand = e_ - d;
  } else {
    cand.resize(e_.rows(), 2 * s + (use_prev ? e_prev_.cols() : 0));
    cand.leftCols(s) = e_;
    cand.middleCols(s, s) = d;
    if (use_prev) {
      const ComplexMatrix me = *problem_->M * e_;
      cand.rightCols(e_prev_.cols()) = e_prev_ - e_ * (me.adjoint() * e_prev_);
    }
  }
  cand = problem_->eliminate_null_space(cand);

  const HouseholderQR qr = orthonormalize(*problem_, cand, s);
  e_prev_ = e_;
  rotate(qr.E, s);
  ++iter_;
}

SolveResult pinvit_solve(const EigenProblem& problem, const ComplexMatrix& e0, const SolverOptions& opts) {
  opts.validate();
  const Index p = opts.p;
  if (e0.cols() < p) throw ContractError("initial block has fewer columns than wanted eigenpairs");
  BlockIteration it(problem, e0, opts.subspace);
  SolveResult res;
  RealVector d = it.defects();
  for (;;) {
    if (opts.record_history) {
      res.ritz_history.push_back(it.ritz_values());
      res.residual_history.push_back(d);
    }
    // Throw-away columns beyond p do not enter the stopping rule.
    if (d.head(std::min<Index>(p, d.size())).maxCoeff() <= opts.tol) {
      res.converged = true;
      break;
    }
    if (it.iterations() >= opts.max_iter) break;
    it.step();
    d = it.defects();
  }
  const Index np = std::min<Index>(p, it.basis().cols());
  res.iterations = it.iterations();
  res.eigenvalues = it.ritz_values().head(np);
  res.basis = it.basis().leftCols(np);
  res.full_basis = it.basis();
  res.residuals = d.head(np);
  return res;
}

}  // namespace blochbands
