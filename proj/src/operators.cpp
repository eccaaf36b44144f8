#include "blochbands/operators.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

namespace blochbands {

namespace {

// Minimum-image distance so a disc crossing the cell boundary stays periodic.
double periodic_delta(double d, double period) { return d - period * std::round(d / period); }

struct SampleVisitor {
  const GridLevel& level;

  std::vector<double> operator()(const ConstantPermittivity& c) const {
    if (!(c.value > 0.0)) throw ContractError("permittivity must be positive");
    return std::vector<double>(static_cast<std::size_t>(level.num_cells()), c.value);
  }

  std::vector<double> operator()(const DiscPermittivity& d) const {
    if (!(d.eps_inside > 0.0) || !(d.eps_outside > 0.0)) throw ContractError("permittivity must be positive");
    if (d.radius < 0.0) throw ContractError("disc radius must be nonnegative");
    std::vector<double> out(static_cast<std::size_t>(level.num_cells()));
    const double h1 = level.h1(), h2 = level.h2();
    for (Index q = 0; q < level.m; ++q) {
      for (Index p = 0; p < level.n; ++p) {
        const double dx = periodic_delta((static_cast<double>(p) + 0.5) * h1 - d.cx, level.cell.a);
        const double dy = periodic_delta((static_cast<double>(q) + 0.5) * h2 - d.cy, level.cell.b);
        const bool inside = dx * dx + dy * dy <= d.radius * d.radius;
        out[static_cast<std::size_t>(q * level.n + p)] = inside ? d.eps_inside : d.eps_outside;
      }
    }
    return out;
  }

  std::vector<double> operator()(const RasterPermittivity& r) const {
    if (r.n != level.n || r.m != level.m)
      throw ContractError("raster is " + std::to_string(r.n) + "x" + std::to_string(r.m) + " but the level has " +
                          std::to_string(level.n) + "x" + std::to_string(level.m) + " cells");
    for (double v : r.values)
      if (!(v > 0.0)) throw ContractError("permittivity must be positive");
    return r.values;
  }
};

}  // namespace

RasterPermittivity parse_raster(const std::string& text) {
  std::istringstream in(text);
  RasterPermittivity r;
  if (!(in >> r.n >> r.m) || r.n < 1 || r.m < 1) throw ContractError("raster header must be 'n m'");
  const auto count = static_cast<std::size_t>(r.n * r.m);
  r.values.reserve(count);
  double v = 0.0;
  while (r.values.size() < count && in >> v) {
    if (!(v > 0.0)) throw ContractError("raster value " + std::to_string(r.values.size()) + " is not positive");
    r.values.push_back(v);
  }
  if (r.values.size() != count)
    throw ContractError("raster expects " + std::to_string(count) + " values, found " +
                        std::to_string(r.values.size()));
  std::string rest;
  if (in >> rest) throw ContractError("trailing data after raster values");
  return r;
}

RasterPermittivity load_raster(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ContractError("cannot open raster file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_raster(ss.str());
}

std::vector<double> sample_permittivity(const GridLevel& level, const Permittivity& eps) {
  return std::visit(SampleVisitor{level}, eps);
}

double max_abs(const SparseMatrix& a) {
  double mx = 0.0;
  for (Index r = 0; r < a.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(a, r); it; ++it) mx = std::max(mx, std::abs(it.value()));
  return mx;
}

double SparseHermitianOperator::max_abs() const { return blochbands::max_abs(mat); }

double SparseHermitianOperator::hermitian_defect() const {
  SparseMatrix diff = mat - SparseMatrix(mat.adjoint());
  return blochbands::max_abs(diff);
}

EdgeOperators assemble_edge_operators(const GridLevel& level, const std::vector<double>& eps_cells,
                                      const BlochParameter& k) {
  if (static_cast<Index>(eps_cells.size()) != level.num_cells())
    throw ContractError("permittivity has " + std::to_string(eps_cells.size()) + " cells, level has " +
                        std::to_string(level.num_cells()));
  const double h1 = level.h1(), h2 = level.h2();
  const double area = h1 * h2;

  // Local order: bottom x, top x, left y, right y. Each basis function has
  // constant curl sign[l] / (h1 h2) on the cell.
  constexpr std::array<double, 4> sign{-1.0, 1.0, 1.0, -1.0};
  const double mxx_diag = h2 / (3.0 * h1), mxx_off = h2 / (6.0 * h1);
  const double myy_diag = h1 / (3.0 * h2), myy_off = h1 / (6.0 * h2);

  std::vector<Triplet> at, mt;
  at.reserve(static_cast<std::size_t>(16 * level.num_cells()));
  mt.reserve(static_cast<std::size_t>(8 * level.num_cells()));

  for (Index q = 0; q < level.m; ++q) {
    for (Index p = 0; p < level.n; ++p) {
      const double eps = eps_cells[static_cast<std::size_t>(q * level.n + p)];
      if (!(eps > 0.0)) throw ContractError("permittivity must be positive");
      const std::array<Wrapped, 4> e{
          wrap_edge(level, k, {EdgeDirection::x, p, q}),
          wrap_edge(level, k, {EdgeDirection::x, p, q + 1}),
          wrap_edge(level, k, {EdgeDirection::y, p, q}),
          wrap_edge(level, k, {EdgeDirection::y, p + 1, q}),
      };
      for (int l = 0; l < 4; ++l) {
        for (int r = 0; r < 4; ++r) {
          const Complex ph = std::conj(e[l].phase) * e[r].phase;
          at.emplace_back(e[l].index, e[r].index, ph * (sign[l] * sign[r] / (area * eps)));
        }
      }
      // Mass: x and y components are orthogonal, so only the xx and yy blocks.
      for (int base : {0, 2}) {
        const double d = base == 0 ? mxx_diag : myy_diag;
        const double o = base == 0 ? mxx_off : myy_off;
        for (int l = base; l < base + 2; ++l)
          for (int r = base; r < base + 2; ++r)
            mt.emplace_back(e[l].index, e[r].index, std::conj(e[l].phase) * e[r].phase * (l == r ? d : o));
      }
    }
  }
  const Index nj = level.num_edges();
  EdgeOperators ops;
  ops.stiffness.mat.resize(nj, nj);
  ops.stiffness.mat.setFromTriplets(at.begin(), at.end());
  ops.stiffness.positive_semidefinite = true;
  ops.mass.mat.resize(nj, nj);
  ops.mass.mat.setFromTriplets(mt.begin(), mt.end());
  ops.mass.positive_semidefinite = true;
  return ops;
}

SparseMatrix assemble_lifting(const GridLevel& level, const BlochParameter& k) {
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(4 * level.num_nodes()));
  for (Index q = 0; q < level.m; ++q) {
    for (Index p = 0; p < level.n; ++p) {
      const Index node = level.node_index(p, q);
      // Edges leaving the node see the potential drop from 1 to 0, edges
      // arriving see it rise; a wrapped arrival carries the Bloch factor.
      const Wrapped in_x = wrap_edge(level, k, {EdgeDirection::x, p - 1, q});
      const Wrapped in_y = wrap_edge(level, k, {EdgeDirection::y, p, q - 1});
      t.emplace_back(in_x.index, node, std::conj(in_x.phase));
      t.emplace_back(level.edge_index(EdgeDirection::x, p, q), node, Complex{-1.0, 0.0});
      t.emplace_back(in_y.index, node, std::conj(in_y.phase));
      t.emplace_back(level.edge_index(EdgeDirection::y, p, q), node, Complex{-1.0, 0.0});
    }
  }
  SparseMatrix l(level.num_edges(), level.num_nodes());
  l.setFromTriplets(t.begin(), t.end());
  return l;
}

SparseHermitianOperator assemble_nodal(const SparseHermitianOperator& mass, const SparseMatrix& lifting) {
  if (mass.dim() != lifting.rows())
    throw ContractError("lifting has " + std::to_string(lifting.rows()) + " rows, mass matrix dimension is " +
                        std::to_string(mass.dim()));
  SparseHermitianOperator p;
  SparseMatrix ml = mass.mat * lifting;
  p.mat = SparseMatrix(lifting.adjoint()) * ml;
  p.mat.prune(Complex{0.0, 0.0}, 0.0);
  p.positive_semidefinite = true;
  return p;
}

SparseMatrix assemble_prolongation(const GridLevel& coarse, const GridLevel& fine, const BlochParameter& k,
                                   ProlongationKind kind) {
  if (fine.n != 2 * coarse.n || fine.m != 2 * coarse.m)
    throw ContractError("levels are not related by bisection");
  std::vector<Triplet> t;
  auto add_edge = [&](Index col, EdgeDirection dir, Index p, Index q, double w) {
    const Wrapped f = wrap_edge(fine, k, {dir, p, q});
    t.emplace_back(f.index, col, std::conj(f.phase) * w);
  };
  if (kind == ProlongationKind::edge) {
    t.reserve(static_cast<std::size_t>(6 * coarse.num_edges()));
    for (Index q = 0; q < coarse.m; ++q) {
      for (Index p = 0; p < coarse.n; ++p) {
        // The coarse x-edge splits into two collinear fine edges carrying half
        // the line integral; the parallel fine edges at mid-height of the two
        // adjacent coarse cells see the ramp at 1/2, hence weight 1/4.
        const Index cx = coarse.edge_index(EdgeDirection::x, p, q);
        for (Index s = 0; s < 2; ++s) {
          add_edge(cx, EdgeDirection::x, 2 * p + s, 2 * q, 0.5);
          add_edge(cx, EdgeDirection::x, 2 * p + s, 2 * q + 1, 0.25);
          add_edge(cx, EdgeDirection::x, 2 * p + s, 2 * q - 1, 0.25);
        }
        const Index cy = coarse.edge_index(EdgeDirection::y, p, q);
        for (Index s = 0; s < 2; ++s) {
          add_edge(cy, EdgeDirection::y, 2 * p, 2 * q + s, 0.5);
          add_edge(cy, EdgeDirection::y, 2 * p + 1, 2 * q + s, 0.25);
          add_edge(cy, EdgeDirection::y, 2 * p - 1, 2 * q + s, 0.25);
        }
      }
    }
    SparseMatrix pm(fine.num_edges(), coarse.num_edges());
    pm.setFromTriplets(t.begin(), t.end());
    return pm;
  }
  t.reserve(static_cast<std::size_t>(9 * coarse.num_nodes()));
  constexpr std::array<double, 3> w{0.5, 1.0, 0.5};
  for (Index q = 0; q < coarse.m; ++q) {
    for (Index p = 0; p < coarse.n; ++p) {
      const Index c = coarse.node_index(p, q);
      for (Index dy = -1; dy <= 1; ++dy) {
        for (Index dx = -1; dx <= 1; ++dx) {
          const Wrapped f = wrap_node(fine, k, {2 * p + dx, 2 * q + dy});
          t.emplace_back(f.index, c, std::conj(f.phase) * (w[static_cast<std::size_t>(dx + 1)] *
                                                           w[static_cast<std::size_t>(dy + 1)]));
        }
      }
    }
  }
  SparseMatrix pm(fine.num_nodes(), coarse.num_nodes());
  pm.setFromTriplets(t.begin(), t.end());
  return pm;
}

SparseHermitianOperator galerkin_coarsen(const SparseHermitianOperator& fine, const SparseMatrix& prolongation) {
  if (fine.dim() != prolongation.rows())
    throw ContractError("prolongation has " + std::to_string(prolongation.rows()) +
                        " rows, operator dimension is " + std::to_string(fine.dim()));
  SparseHermitianOperator c;
  SparseMatrix ap = fine.mat * prolongation;
  c.mat = SparseMatrix(prolongation.adjoint()) * ap;
  c.mat.prune(Complex{0.0, 0.0}, 0.0);
  c.hermitian = fine.hermitian;
  c.positive_semidefinite = fine.positive_semidefinite;
  return c;
}

std::vector<LevelOperators> build_level_operators(const GridHierarchy& hierarchy,
                                                  const std::vector<double>& finest_eps,
                                                  const BlochParameter& k) {
  const std::size_t nl = hierarchy.size();
  if (nl == 0) throw ContractError("empty hierarchy");
  std::vector<LevelOperators> ops(nl);
  for (std::size_t l = 0; l < nl; ++l) {
    ops[l].grid = hierarchy.levels[l];
    ops[l].L = assemble_lifting(hierarchy.levels[l], k);
    if (l + 1 < nl) {
      ops[l].edge_prolongation =
          assemble_prolongation(hierarchy.levels[l], hierarchy.levels[l + 1], k, ProlongationKind::edge);
      ops[l].nodal_prolongation =
          assemble_prolongation(hierarchy.levels[l], hierarchy.levels[l + 1], k, ProlongationKind::nodal);
    }
  }
  EdgeOperators fine = assemble_edge_operators(hierarchy.finest(), finest_eps, k);
  ops.back().A = std::move(fine.stiffness);
  ops.back().M = std::move(fine.mass);
  ops.back().P = assemble_nodal(ops.back().M, ops.back().L);
  for (std::size_t l = nl - 1; l-- > 0;) {
    ops[l].A = galerkin_coarsen(ops[l + 1].A, ops[l].edge_prolongation);
    ops[l].M = galerkin_coarsen(ops[l + 1].M, ops[l].edge_prolongation);
    ops[l].P = galerkin_coarsen(ops[l + 1].P, ops[l].nodal_prolongation);
  }
  return ops;
}

}  // namespace blochbands
