#include "blochbands/corelinalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace blochbands {

Complex m_inner(const SparseMatrix& mass, const ComplexVector& x, const ComplexVector& y) {
  if (x.size() != mass.rows() || y.size() != mass.cols())
    throw ContractError("m_inner: vector length does not match the mass matrix");
  return x.dot(mass * y);  // Eigen's dot conjugates the left argument
}

double m_orthonormality_defect(const SparseMatrix& mass, const ComplexMatrix& e) {
  if (e.cols() == 0) return 0.0;
  ComplexMatrix g = e.adjoint() * (mass * e);
  g -= ComplexMatrix::Identity(e.cols(), e.cols());
  return g.cwiseAbs().maxCoeff();
}

MBasis canonical_m_basis(const SparseMatrix& mass, Index count) {
  const Index nj = mass.rows();
  if (count < 0) throw ContractError("basis size must be nonnegative");
  RealVector diag = mass.diagonal().real();
  std::vector<Index> order(static_cast<std::size_t>(nj));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index i, Index j) { return diag[i] < diag[j]; });

  std::vector<bool> blocked(static_cast<std::size_t>(nj), false);
  std::vector<Index> chosen;
  chosen.reserve(static_cast<std::size_t>(count));
  for (Index j : order) {
    if (static_cast<Index>(chosen.size()) == count) break;
    if (blocked[static_cast<std::size_t>(j)]) continue;
    chosen.push_back(j);
    for (SparseMatrix::InnerIterator it(mass, j); it; ++it)
      if (it.value() != Complex{0.0, 0.0}) blocked[static_cast<std::size_t>(it.col())] = true;
  }

  MBasis basis;
  basis.vectors = ComplexMatrix::Zero(nj, count);
  if (static_cast<Index>(chosen.size()) == count) {
    for (Index c = 0; c < count; ++c) {
      const Index j = chosen[static_cast<std::size_t>(c)];
      basis.vectors(j, c) = 1.0 / std::sqrt(diag[j]);
    }
  } else {
    // Cannot pick disjoint supports: sequential M-Gram-Schmidt of e_0, e_1, ...
    if (count > nj) throw ContractError("reference basis larger than the space");
    Index c = 0;
    for (Index j = 0; j < nj && c < count; ++j) {
      ComplexVector v = ComplexVector::Zero(nj);
      v[j] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        ComplexVector mv = mass * v;
        for (Index l = 0; l < c; ++l) v -= basis.vectors.col(l) * basis.vectors.col(l).dot(mv);
      }
      const double nrm = std::sqrt(std::abs(m_inner(mass, v, v)));
      if (nrm < 1e-8) continue;
      basis.vectors.col(c++) = v / nrm;
    }
    if (c < count) throw ContractError("could not build an M-orthonormal reference basis");
  }
  basis.mass_times = mass * basis.vectors;
  return basis;
}

ComplexVector apply_m_reflection(const SparseMatrix& mass, const ComplexVector& v, const ComplexVector& x) {
  const ComplexVector mv = mass * v;
  const double denom = v.dot(mv).real();
  if (denom == 0.0) return x;
  return x - v * (2.0 * mv.dot(x) / denom);
}

namespace {

struct Reflection {
  ComplexVector v;
  ComplexVector mv;
  double denom = 0.0;  // v* M v; zero marks the identity
  void apply(ComplexVector& x) const {
    if (denom == 0.0) return;
    x -= v * (2.0 * mv.dot(x) / denom);
  }
};

}  // namespace

HouseholderQR generalized_householder_qr(const SparseMatrix& mass, const ComplexMatrix& candidates,
                                         const MBasis& reference, RankDeficiency mode, double rank_tol) {
  const Index nj = mass.rows();
  const Index nc = candidates.cols();
  if (candidates.rows() != nj || reference.vectors.rows() != nj)
    throw ContractError("householder: block shapes do not match the mass matrix");
  if (reference.size() < nc && mode == RankDeficiency::complete)
    throw ContractError("householder: reference basis has fewer columns than the candidate block");
  if (reference.size() > 0) {
    // Spot check the reference contract on its first and last column.
    for (Index c : {Index{0}, reference.size() - 1}) {
      const double d = std::abs(reference.vectors.col(c).dot(reference.mass_times.col(c)) - 1.0);
      if (d > 1e-8) throw ContractError("householder: reference basis is not M-orthonormal");
    }
  }

  std::vector<Reflection> refl;
  refl.reserve(static_cast<std::size_t>(nc));
  ComplexMatrix r = ComplexMatrix::Zero(std::min(nc, reference.size()), nc);
  HouseholderQR out;
  out.deficient.assign(static_cast<std::size_t>(nc), false);

  Index t = 0;
  for (Index j = 0; j < nc; ++j) {
    ComplexVector w = candidates.col(j);
    const double wnorm = std::sqrt(std::max(0.0, w.dot(mass * w).real()));
    for (const auto& q : refl) q.apply(w);
    ComplexVector coeff = reference.mass_times.leftCols(t).adjoint() * w;
    ComplexVector rest = w - reference.vectors.leftCols(t) * coeff;
    const ComplexVector mrest = mass * rest;
    const double nrm = std::sqrt(std::max(0.0, rest.dot(mrest).real()));
    r.col(j).head(t) = coeff;

    if (!(nrm > rank_tol * wnorm) || wnorm == 0.0) {
      out.deficient[static_cast<std::size_t>(j)] = true;
      if (mode == RankDeficiency::complete) {
        refl.push_back(Reflection{});  // identity; reference vector t completes the basis
        ++t;
      }
      continue;
    }
    if (t >= reference.size()) throw ContractError("householder: reference basis exhausted");

    const ComplexVector pt = reference.vectors.col(t);
    const Complex zeta = reference.mass_times.col(t).dot(rest);
    const Complex phase = std::abs(zeta) > 0.0 ? zeta / std::abs(zeta) : Complex{1.0, 0.0};
    const Complex diag = -nrm * phase;  // opposite phase avoids cancellation in v
    Reflection q;
    q.v = rest - diag * pt;
    q.mv = mrest - diag * reference.mass_times.col(t);
    q.denom = q.v.dot(q.mv).real();
    refl.push_back(std::move(q));
    r(t, j) = diag;
    ++t;
  }

  out.rank = static_cast<Index>(std::count(out.deficient.begin(), out.deficient.end(), false));
  out.R = r.topRows(t);
  out.E.resize(nj, t);
  for (Index i = 0; i < t; ++i) {
    // Reflections after i leave p_i unchanged, so E_i = Q_1 ... Q_i p_i.
    ComplexVector e = reference.vectors.col(i);
    for (Index l = i + 1; l-- > 0;) refl[static_cast<std::size_t>(l)].apply(e);
    out.E.col(i) = e;
  }
  return out;
}

HermitianEig hermitian_eig_small(const ComplexMatrix& input) {
  const Index n = input.rows();
  if (input.cols() != n) throw ContractError("hermitian_eig_small: matrix is not square");
  HermitianEig out;
  if (n == 0) {
    out.vectors.resize(0, 0);
    out.values.resize(0);
    return out;
  }
  const double scale = input.norm();
  const double asym = (input - input.adjoint()).cwiseAbs().maxCoeff();
  if (asym > 1e-8 * std::max(scale, 1e-300))
    throw ContractError("hermitian_eig_small: input is not Hermitian");

  ComplexMatrix h = 0.5 * (input + input.adjoint());
  ComplexMatrix v = ComplexMatrix::Identity(n, n);
  const double target = 1e-14 * std::max(h.norm(), 1e-300);

  auto off_norm = [&]() {
    double s = 0.0;
    for (Index c = 0; c < n; ++c)
      for (Index rr = 0; rr < n; ++rr)
        if (rr != c) s += std::norm(h(rr, c));
    return std::sqrt(s);
  };

  for (int sweep = 0; sweep < 100 && off_norm() > target; ++sweep) {
    for (Index p = 0; p < n - 1; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const Complex hpq = h(p, q);
        const double mag = std::abs(hpq);
        if (mag <= 1e-300 || mag < 1e-18 * target) continue;
        const Complex e = hpq / mag;  // e^{i phi}
        const double a = h(p, p).real(), d = h(q, q).real();
        const double theta = 0.5 * std::atan2(2.0 * mag, d - a);
        const double c = std::cos(theta), s = std::sin(theta);
        // G = [[c, s e], [-s conj(e), c]] acting on columns p, q.
        ComplexVector colp = h.col(p), colq = h.col(q);
        h.col(p) = c * colp - s * std::conj(e) * colq;
        h.col(q) = s * e * colp + c * colq;
        Eigen::RowVectorXcd rowp = h.row(p), rowq = h.row(q);
        h.row(p) = c * rowp - s * e * rowq;
        h.row(q) = s * std::conj(e) * rowp + c * rowq;
        h(p, q) = 0.0;
        h(q, p) = 0.0;
        ComplexVector vp = v.col(p), vq = v.col(q);
        v.col(p) = c * vp - s * std::conj(e) * vq;
        v.col(q) = s * e * vp + c * vq;
      }
    }
  }

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index i, Index j) { return h(i, i).real() < h(j, j).real(); });
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Index i = 0; i < n; ++i) {
    out.values[i] = h(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i)]).real();
    out.vectors.col(i) = v.col(order[static_cast<std::size_t>(i)]);
  }
  return out;
}

GeneralizedEig dense_generalized_eig(const ComplexMatrix& a, const ComplexMatrix& m) {
  const Index n = a.rows();
  if (a.cols() != n || m.rows() != n || m.cols() != n) throw ContractError("dense_generalized_eig: shape mismatch");
  if (n > kDenseOracleLimit) throw ContractError("dense_generalized_eig: problem too large for the dense oracle");
  const ComplexMatrix mh = 0.5 * (m + m.adjoint());
  Eigen::LLT<ComplexMatrix> llt(mh);
  if (llt.info() != Eigen::Success) throw ContractError("dense_generalized_eig: M is not positive definite");
  ComplexMatrix x = llt.matrixL().solve(a);
  ComplexMatrix c = llt.matrixL().solve(ComplexMatrix(x.adjoint())).adjoint();
  c = 0.5 * (c + c.adjoint());
  HermitianEig std_eig = hermitian_eig_small(c);
  GeneralizedEig out;
  out.values = std_eig.values;
  out.vectors = llt.matrixU().solve(std_eig.vectors);
  return out;
}

GeneralizedEig dense_generalized_eig(const SparseMatrix& a, const SparseMatrix& m) {
  if (a.rows() > kDenseOracleLimit) throw ContractError("dense_generalized_eig: problem too large for the dense oracle");
  return dense_generalized_eig(ComplexMatrix(a), ComplexMatrix(m));
}

}  // namespace blochbands
