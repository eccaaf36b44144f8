#pragma once

#include <vector>

#include "blochbands/types.hpp"

namespace blochbands {

/// Rectangular period cell [0,a] x [0,b].
struct UnitCell {
  double a = 1.0;
  double b = 1.0;
};

/// Wave vector k together with the boundary phase factors
/// alpha = exp(i k1 a) and beta = exp(i k2 b).
class BlochParameter {
 public:
  BlochParameter() = default;
  BlochParameter(double k1, double k2, const UnitCell& cell);

  double k1() const { return k1_; }
  double k2() const { return k2_; }
  Complex alpha() const { return alpha_; }
  Complex beta() const { return beta_; }

  /// True when both phase factors equal one, i.e. the purely periodic case.
  bool is_periodic() const;

  BlochParameter negated(const UnitCell& cell) const { return {-k1_, -k2_, cell}; }

 private:
  double k1_ = 0.0;
  double k2_ = 0.0;
  Complex alpha_{1.0, 0.0};
  Complex beta_{1.0, 0.0};
};

enum class EdgeDirection { x = 0, y = 1 };

/// Edge identified by its owning node and direction. Node (p,q) sits at
/// (p h1, q h2); it owns the x-edge running to node (p+1,q) and the y-edge
/// running to node (p,q+1). Indices outside [0,n) x [0,m) are "raw"
/// references to Bloch images of canonical edges.
struct EdgeRef {
  EdgeDirection dir = EdgeDirection::x;
  Index p = 0;
  Index q = 0;
};

struct NodeRef {
  Index p = 0;
  Index q = 0;
};

/// Canonical DOF index plus the phase relating the raw reference to it:
/// value seen through the raw reference = phase * canonical coefficient.
struct Wrapped {
  Index index = 0;
  Complex phase{1.0, 0.0};
};

struct GridLevel {
  UnitCell cell;
  Index n = 0;
  Index m = 0;

  GridLevel() = default;
  GridLevel(const UnitCell& cell, Index n, Index m);

  double h1() const { return cell.a / static_cast<double>(n); }
  double h2() const { return cell.b / static_cast<double>(m); }
  Index num_nodes() const { return n * m; }
  Index num_edges() const { return 2 * n * m; }
  Index num_cells() const { return n * m; }

  Index node_index(Index p, Index q) const { return q * n + p; }
  Index edge_index(EdgeDirection dir, Index p, Index q) const {
    return (dir == EdgeDirection::x ? 0 : n * m) + q * n + p;
  }
  EdgeRef edge_ref(Index j) const;
  NodeRef node_ref(Index i) const;
};

/// Nested levels, index 0 coarsest, each refinement doubling n and m.
struct GridHierarchy {
  std::vector<GridLevel> levels;

  const GridLevel& finest() const { return levels.back(); }
  const GridLevel& coarsest() const { return levels.front(); }
  std::size_t size() const { return levels.size(); }
};

GridHierarchy build_hierarchy(const UnitCell& cell, Index n0, Index m0, int num_refinements);

/// Resolves a raw edge reference that lies at most one period outside the
/// canonical range.
Wrapped wrap_edge(const GridLevel& level, const BlochParameter& k, const EdgeRef& raw);

/// Same for nodes.
Wrapped wrap_node(const GridLevel& level, const BlochParameter& k, const NodeRef& raw);

}  // namespace blochbands
