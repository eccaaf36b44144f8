#include "blochbands/mesh.hpp"

#include <cmath>
#include <string>

namespace blochbands {

BlochParameter::BlochParameter(double k1, double k2, const UnitCell& cell)
    : k1_(k1), k2_(k2), alpha_(std::polar(1.0, k1 * cell.a)), beta_(std::polar(1.0, k2 * cell.b)) {}

bool BlochParameter::is_periodic() const {
  constexpr double eps = 1e-14;
  return std::abs(alpha_ - 1.0) < eps && std::abs(beta_ - 1.0) < eps;
}

GridLevel::GridLevel(const UnitCell& c, Index n_, Index m_) : cell(c), n(n_), m(m_) {
  if (!(cell.a > 0.0) || !(cell.b > 0.0)) throw ContractError("unit cell dimensions must be positive");
  if (n < 2 || m < 2) throw ContractError("grid level needs at least 2x2 cells");
}

EdgeRef GridLevel::edge_ref(Index j) const {
  const Index nm = n * m;
  const EdgeDirection dir = j < nm ? EdgeDirection::x : EdgeDirection::y;
  const Index r = j % nm;
  return {dir, r % n, r / n};
}

NodeRef GridLevel::node_ref(Index i) const { return {i % n, i / n}; }

GridHierarchy build_hierarchy(const UnitCell& cell, Index n0, Index m0, int num_refinements) {
  if (n0 < 2 || m0 < 2)
    throw ContractError("coarse grid must have at least 2x2 cells, got " + std::to_string(n0) + "x" +
                        std::to_string(m0));
  if (!(cell.a > 0.0) || !(cell.b > 0.0)) throw ContractError("unit cell dimensions must be positive");
  if (num_refinements < 0) throw ContractError("level count must be nonnegative");
  GridHierarchy h;
  h.levels.reserve(static_cast<std::size_t>(num_refinements) + 1);
  for (int l = 0; l <= num_refinements; ++l) h.levels.emplace_back(cell, n0 << l, m0 << l);
  return h;
}

namespace {

// Shift count in {-1,0,1} and canonical coordinate.
std::pair<int, Index> fold(Index v, Index period) {
  if (v < 0) return {-1, v + period};
  if (v >= period) return {1, v - period};
  return {0, v};
}

Complex phase_for(const BlochParameter& k, int sx, int sy) {
  Complex ph{1.0, 0.0};
  if (sx == 1) ph *= k.alpha();
  if (sx == -1) ph *= std::conj(k.alpha());
  if (sy == 1) ph *= k.beta();
  if (sy == -1) ph *= std::conj(k.beta());
  return ph;
}

}  // namespace

Wrapped wrap_edge(const GridLevel& level, const BlochParameter& k, const EdgeRef& raw) {
  const auto [sx, p] = fold(raw.p, level.n);
  const auto [sy, q] = fold(raw.q, level.m);
  return {level.edge_index(raw.dir, p, q), phase_for(k, sx, sy)};
}

Wrapped wrap_node(const GridLevel& level, const BlochParameter& k, const NodeRef& raw) {
  const auto [sx, p] = fold(raw.p, level.n);
  const auto [sy, q] = fold(raw.q, level.m);
  return {level.node_index(p, q), phase_for(k, sx, sy)};
}

}  // namespace blochbands
