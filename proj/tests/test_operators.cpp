#include <doctest.h>

#include <algorithm>
#include <fstream>

#include "helpers.hpp"

using namespace testing;

namespace {

double rel_diff(const SparseMatrix& a, const SparseMatrix& b) {
  const SparseMatrix d = a - b;
  return max_abs(d) / std::max(max_abs(a), 1e-300);
}

EdgeOperators ops_on(const GridLevel& g, const Permittivity& eps, const BlochParameter& k) {
  return assemble_edge_operators(g, sample_permittivity(g, eps), k);
}

}  // namespace

TEST_CASE("constant permittivity sampling") {
  const GridLevel g({1.0, 1.0}, 4, 4);
  const auto v = sample_permittivity(g, ConstantPermittivity{1.0});
  CHECK(v.size() == 16);
  CHECK(std::all_of(v.begin(), v.end(), [](double x) { return x == 1.0; }));
  CHECK_THROWS_AS(sample_permittivity(g, ConstantPermittivity{0.0}), ContractError);
  CHECK_THROWS_AS(sample_permittivity(g, DiscPermittivity{0.5, 0.5, 0.2, -1.0, 1.0}), ContractError);
}

TEST_CASE("disc sampling: center cell of the 11.56 rod") {
  const GridLevel g({1.0, 1.0}, 16, 16);
  const auto v = sample_permittivity(g, paper_disc());
  // Cell (8,8) spans [0.5, 0.5625]^2 and has its midpoint 0.044 from the center.
  CHECK(v[8 * 16 + 8] == 11.56);
  CHECK(v[7 * 16 + 7] == 11.56);
  CHECK(v[0] == 1.0);
}

TEST_CASE("disc sampling matches midpoint membership count") {
  const GridLevel g({1.0, 1.0}, 8, 8);
  const auto v = sample_permittivity(g, strong_disc());
  int inside = 0;
  for (int q = 0; q < 8; ++q)
    for (int p = 0; p < 8; ++p) {
      const double dx = (p + 0.5) / 8 - 0.5, dy = (q + 0.5) / 8 - 0.5;
      if (dx * dx + dy * dy <= 1.0 / 9.0) ++inside;
    }
  CHECK(std::count(v.begin(), v.end(), 100.0) == inside);
  // Frozen: the 8x8 midpoint grid puts 24 cells inside r = 1/3.
  CHECK(inside == 24);
}

TEST_CASE("disc sampling is periodic across the cell boundary") {
  const GridLevel g({1.0, 1.0}, 8, 8);
  const auto v = sample_permittivity(g, DiscPermittivity{0.0, 0.0, 0.1, 5.0, 1.0});
  CHECK(v[0] == 5.0);
  CHECK(v[7] == 5.0);
  CHECK(v[7 * 8] == 5.0);
  CHECK(v[7 * 8 + 7] == 5.0);
  CHECK(std::count(v.begin(), v.end(), 5.0) == 4);
}

TEST_CASE("raster parsing") {
  const auto r = parse_raster("2 3\n1 2\n3 4\n5 6\n");
  CHECK(r.n == 2);
  CHECK(r.m == 3);
  CHECK(r.values == std::vector<double>{1, 2, 3, 4, 5, 6});
  CHECK_THROWS_AS(parse_raster("2 2\n1 2 3"), ContractError);
  CHECK_THROWS_AS(parse_raster("2 2\n1 2 3 0"), ContractError);
  CHECK_THROWS_AS(parse_raster("2 2\n1 2 3 4 5"), ContractError);
  CHECK_THROWS_AS(parse_raster("x"), ContractError);
  const GridLevel g({1.0, 1.0}, 2, 3);
  CHECK(sample_permittivity(g, r)[5] == 6.0);
  CHECK_THROWS_AS(sample_permittivity(GridLevel({1.0, 1.0}, 3, 3), r), ContractError);
}

TEST_CASE("raster file loading") {
  const std::string path = std::string(TEST_DATA_DIR) + "/raster_4x4.txt";
  const auto r = load_raster(path);
  CHECK(r.n == 4);
  CHECK(r.values.size() == 16);
  CHECK_THROWS_AS(load_raster("/nonexistent/raster.txt"), ContractError);
}

TEST_CASE("analytic element integrals on 16x16, eps = 1") {
  const GridLevel g({1.0, 1.0}, 16, 16);
  std::mt19937_64 gen(1);
  const auto ops = ops_on(g, ConstantPermittivity{1.0}, random_k(gen));
  for (Index j : {Index{0}, Index{37}, g.num_edges() - 1}) {
    CHECK(ops.stiffness.mat.coeff(j, j).real() == doctest::Approx(512.0).epsilon(1e-13));
    CHECK(std::abs(ops.stiffness.mat.coeff(j, j).imag()) < 1e-12);
    CHECK(ops.mass.mat.coeff(j, j).real() == doctest::Approx(2.0 / 3.0).epsilon(1e-13));
  }
}

TEST_CASE("mass diagonal scales with the aspect ratio") {
  const GridLevel g({2.0, 1.0}, 4, 4);  // h1 = 0.5, h2 = 0.25
  const auto ops = ops_on(g, ConstantPermittivity{1.0}, BlochParameter());
  const Index jx = g.edge_index(EdgeDirection::x, 1, 1);
  const Index jy = g.edge_index(EdgeDirection::y, 1, 1);
  CHECK(ops.mass.mat.coeff(jx, jx).real() == doctest::Approx(2.0 / 3.0 * 0.25 / 0.5));
  CHECK(ops.mass.mat.coeff(jy, jy).real() == doctest::Approx(2.0 / 3.0 * 0.5 / 0.25));
  CHECK(ops.stiffness.mat.coeff(jx, jx).real() == doctest::Approx(2.0 / (0.5 * 0.25)));
}

TEST_CASE("stiffness scales with 1/eps") {
  const GridLevel g({1.0, 1.0}, 4, 4);
  const auto a1 = ops_on(g, ConstantPermittivity{1.0}, BlochParameter(0.3, 0.2, {}));
  const auto a4 = ops_on(g, ConstantPermittivity{4.0}, BlochParameter(0.3, 0.2, {}));
  CHECK(rel_diff(a1.stiffness.mat, SparseMatrix(4.0 * a4.stiffness.mat)) < 1e-14);
  CHECK(rel_diff(a1.mass.mat, a4.mass.mat) < 1e-15);
}

TEST_CASE("A and M are Hermitian and A(-k) = conj A(k)") {
  const GridLevel g({1.0, 1.0}, 8, 8);
  std::mt19937_64 gen(7);
  for (int t = 0; t < 4; ++t) {
    const BlochParameter k = random_k(gen);
    const auto ops = ops_on(g, strong_disc(), k);
    CHECK(ops.stiffness.hermitian_defect() <= 1e-14 * ops.stiffness.max_abs());
    CHECK(ops.mass.hermitian_defect() <= 1e-14 * ops.mass.max_abs());
    const auto neg = ops_on(g, strong_disc(), k.negated({}));
    CHECK(rel_diff(neg.stiffness.mat, SparseMatrix(ops.stiffness.mat.conjugate())) < 1e-14);
    CHECK(rel_diff(neg.mass.mat, SparseMatrix(ops.mass.mat.conjugate())) < 1e-14);
  }
}

TEST_CASE("operators depend on k only through the phases") {
  const GridLevel g({1.0, 1.0}, 4, 4);
  const auto a = ops_on(g, strong_disc(), BlochParameter(0.7, -0.4, {}));
  const auto b = ops_on(g, strong_disc(), BlochParameter(0.7 + 2 * pi, -0.4, {}));
  CHECK(rel_diff(a.stiffness.mat, b.stiffness.mat) < 1e-13);
  CHECK(rel_diff(a.mass.mat, b.mass.mat) < 1e-13);
}

TEST_CASE("spectral properties of A and M via the dense oracle") {
  const GridLevel g({1.0, 1.0}, 4, 4);
  std::mt19937_64 gen(3);
  for (int t = 0; t < 3; ++t) {
    const auto ops = ops_on(g, strong_disc(), random_k(gen));
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> ea(ComplexMatrix(ops.stiffness.mat));
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> em(ComplexMatrix(ops.mass.mat));
    CHECK(ea.eigenvalues().minCoeff() >= -1e-10 * ops.stiffness.max_abs());
    CHECK(em.eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("constant field has M-energy equal to the cell area") {
  const UnitCell cell{1.5, 0.8};
  const GridLevel g(cell, 6, 4);
  const auto ops = ops_on(g, paper_disc(), BlochParameter());
  ComplexVector ex = ComplexVector::Zero(g.num_edges()), ey = ComplexVector::Zero(g.num_edges());
  ex.head(g.num_nodes()).setConstant(g.h1());
  ey.tail(g.num_nodes()).setConstant(g.h2());
  CHECK(m_inner(ops.mass.mat, ex, ex).real() == doctest::Approx(cell.a * cell.b).epsilon(1e-12));
  CHECK(m_inner(ops.mass.mat, ey, ey).real() == doctest::Approx(cell.a * cell.b).epsilon(1e-12));
  CHECK(std::abs(m_inner(ops.mass.mat, ex, ey)) < 1e-14);
  CHECK((ops.stiffness.mat * ex).cwiseAbs().maxCoeff() < 1e-12 * ops.stiffness.max_abs());
}

TEST_CASE("lifting structure") {
  const GridLevel g({1.0, 1.0}, 4, 4);
  const BlochParameter k(0.9, -2.1, {});
  const SparseMatrix l = assemble_lifting(g, k);
  CHECK(l.rows() == g.num_edges());
  CHECK(l.cols() == g.num_nodes());
  const SparseMatrix lt = l.transpose();
  for (Index c = 0; c < g.num_nodes(); ++c) {
    int nnz = 0;
    for (SparseMatrix::InnerIterator it(lt, c); it; ++it) {
      ++nnz;
      CHECK(std::abs(std::abs(it.value()) - 1.0) < 1e-15);
    }
    CHECK(nnz == 4);
  }
  // Interior node (1,1): -1 on its own edges, +1 on the incoming neighbours.
  const Index node = g.node_index(1, 1);
  CHECK(l.coeff(g.edge_index(EdgeDirection::x, 1, 1), node) == Complex(-1.0, 0.0));
  CHECK(l.coeff(g.edge_index(EdgeDirection::x, 0, 1), node) == Complex(1.0, 0.0));
  CHECK(l.coeff(g.edge_index(EdgeDirection::y, 1, 1), node) == Complex(-1.0, 0.0));
  CHECK(l.coeff(g.edge_index(EdgeDirection::y, 1, 0), node) == Complex(1.0, 0.0));
}

TEST_CASE("gradient of the constant vanishes at k = 0") {
  const GridLevel g({1.0, 1.0}, 5, 3);
  const SparseMatrix l = assemble_lifting(g, BlochParameter());
  const ComplexVector ones = ComplexVector::Ones(g.num_nodes());
  CHECK((l * ones).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("A L = 0 on an 8x8 grid for random k") {
  const GridLevel g({1.0, 1.0}, 8, 8);
  std::mt19937_64 gen(11);
  for (int t = 0; t < 10; ++t) {
    const BlochParameter k = random_k(gen);
    const auto ops = ops_on(g, strong_disc(), k);
    const SparseMatrix al = ops.stiffness.mat * assemble_lifting(g, k);
    CHECK(max_abs(al) <= 1e-12 * ops.stiffness.max_abs());
  }
}

TEST_CASE("nodal matrix") {
  const GridLevel g({1.0, 1.0}, 4, 4);
  SUBCASE("positive definite for k != 0") {
    const BlochParameter k(0.4, 0.1, {});
    const auto ops = ops_on(g, strong_disc(), k);
    const auto p = assemble_nodal(ops.mass, assemble_lifting(g, k));
    CHECK(p.hermitian_defect() <= 1e-14 * p.max_abs());
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es{ComplexMatrix(p.mat)};
    CHECK(es.eigenvalues().minCoeff() > 1e-6);
  }
  SUBCASE("constant null vector at k = 0") {
    const auto ops = ops_on(g, strong_disc(), BlochParameter());
    const auto p = assemble_nodal(ops.mass, assemble_lifting(g, BlochParameter()));
    const ComplexVector ones = ComplexVector::Ones(g.num_nodes());
    CHECK((p.mat * ones).cwiseAbs().maxCoeff() < 1e-14 * p.max_abs());
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es{ComplexMatrix(p.mat)};
    CHECK(std::abs(es.eigenvalues()[0]) < 1e-12);
    CHECK(es.eigenvalues()[1] > 1e-3);  // one-dimensional null space
  }
  CHECK_THROWS_AS(assemble_nodal(ops_on(g, ConstantPermittivity{1.0}, {}).mass,
                                 assemble_lifting(GridLevel({1.0, 1.0}, 2, 2), {})),
                  std::exception);
}

TEST_CASE("edge prolongation weights") {
  const UnitCell cell{1.0, 1.0};
  const GridLevel c(cell, 4, 4), f(cell, 8, 8);
  const BlochParameter k(0.3, 0.5, cell);
  const SparseMatrix pe = assemble_prolongation(c, f, k, ProlongationKind::edge);
  const Index cx = c.edge_index(EdgeDirection::x, 1, 1);
  CHECK(pe.coeff(f.edge_index(EdgeDirection::x, 2, 2), cx) == Complex(0.5, 0.0));
  CHECK(pe.coeff(f.edge_index(EdgeDirection::x, 3, 2), cx) == Complex(0.5, 0.0));
  CHECK(pe.coeff(f.edge_index(EdgeDirection::x, 2, 3), cx) == Complex(0.25, 0.0));
  CHECK(pe.coeff(f.edge_index(EdgeDirection::x, 3, 1), cx) == Complex(0.25, 0.0));
  CHECK(pe.coeff(f.edge_index(EdgeDirection::y, 2, 2), cx) == Complex(0.0, 0.0));
  // Each coarse edge has 6 fine contributions.
  const SparseMatrix pet = pe.transpose();
  for (Index j = 0; j < c.num_edges(); ++j) CHECK(pet.innerVector(j).nonZeros() == 6);
  CHECK_THROWS_AS(assemble_prolongation(c, GridLevel(cell, 6, 8), k, ProlongationKind::edge), ContractError);
}

TEST_CASE("nodal prolongation weights and partition of unity") {
  const UnitCell cell{1.0, 1.0};
  const GridLevel c(cell, 4, 4), f(cell, 8, 8);
  const SparseMatrix pn = assemble_prolongation(c, f, BlochParameter(), ProlongationKind::nodal);
  const Index cn = c.node_index(1, 2);
  CHECK(pn.coeff(f.node_index(2, 4), cn) == Complex(1.0, 0.0));
  CHECK(pn.coeff(f.node_index(3, 4), cn) == Complex(0.5, 0.0));
  CHECK(pn.coeff(f.node_index(3, 5), cn) == Complex(0.25, 0.0));
  const ComplexVector fine = pn * ComplexVector::Ones(c.num_nodes());
  CHECK((fine.array() - 1.0).abs().maxCoeff() < 1e-15);
}

TEST_CASE("prolongations commute with the lifting") {
  // Coarse gradients embed as fine gradients: Pe Lc = Lf Pn.
  const UnitCell cell{1.0, 1.0};
  const GridLevel c(cell, 4, 4), f(cell, 8, 8);
  const BlochParameter k(1.1, -0.6, cell);
  const SparseMatrix lhs = assemble_prolongation(c, f, k, ProlongationKind::edge) * assemble_lifting(c, k);
  const SparseMatrix rhs = assemble_lifting(f, k) * assemble_prolongation(c, f, k, ProlongationKind::nodal);
  CHECK(rel_diff(lhs, rhs) < 1e-14);
}

TEST_CASE("Galerkin coarsening reproduces direct coarse assembly for eps = 1") {
  const UnitCell cell{1.0, 1.0};
  const GridLevel c(cell, 4, 4), f(cell, 8, 8);
  std::mt19937_64 gen(2);
  for (const BlochParameter& k : {BlochParameter(), random_k(gen), BlochParameter(pi, pi, cell)}) {
    const auto fine = ops_on(f, ConstantPermittivity{1.0}, k);
    const auto coarse = ops_on(c, ConstantPermittivity{1.0}, k);
    const SparseMatrix pe = assemble_prolongation(c, f, k, ProlongationKind::edge);
    CHECK(rel_diff(galerkin_coarsen(fine.mass, pe).mat, coarse.mass.mat) < 1e-12);
    CHECK(rel_diff(galerkin_coarsen(fine.stiffness, pe).mat, coarse.stiffness.mat) < 1e-12);
    const SparseMatrix pn = assemble_prolongation(c, f, k, ProlongationKind::nodal);
    const auto pf = assemble_nodal(fine.mass, assemble_lifting(f, k));
    const auto pc = assemble_nodal(coarse.mass, assemble_lifting(c, k));
    CHECK(rel_diff(galerkin_coarsen(pf, pn).mat, pc.mat) < 1e-12);
  }
}

TEST_CASE("Galerkin coarsening edge cases") {
  const UnitCell cell{1.0, 1.0};
  const GridLevel c(cell, 2, 2), f(cell, 4, 4);
  const SparseMatrix pe = assemble_prolongation(c, f, {}, ProlongationKind::edge);
  SparseHermitianOperator zero;
  zero.mat.resize(f.num_edges(), f.num_edges());
  CHECK(galerkin_coarsen(zero, pe).mat.nonZeros() == 0);
  SparseHermitianOperator wrong;
  wrong.mat.resize(5, 5);
  CHECK_THROWS_AS(galerkin_coarsen(wrong, pe), ContractError);
}

TEST_CASE("level operators keep A L = 0 on every level") {
  const auto h = build_hierarchy({1.0, 1.0}, 4, 4, 2);
  const auto eps = sample_permittivity(h.finest(), strong_disc());
  const auto lv = build_level_operators(h, eps, BlochParameter(0.8, 2.0, {}));
  REQUIRE(lv.size() == 3);
  for (const auto& l : lv) {
    CHECK(max_abs(SparseMatrix(l.A.mat * l.L)) <= 1e-12 * l.A.max_abs());
    CHECK(l.A.hermitian_defect() <= 1e-13 * l.A.max_abs());
  }
  CHECK(lv.back().edge_prolongation.size() == 0);
  CHECK_THROWS_AS(assemble_edge_operators(h.finest(), std::vector<double>(3, 1.0), {}), ContractError);
}
