#pragma once

#include <numbers>
#include <random>

#include "blochbands/scan.hpp"

namespace testing {

using namespace blochbands;

inline constexpr double pi = std::numbers::pi;

inline ComplexMatrix random_block(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ComplexMatrix w(rows, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) w(r, c) = Complex(u(gen), u(gen));
  return w;
}

inline BlochParameter random_k(std::mt19937_64& gen, const UnitCell& cell = {}) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return {pi / cell.a * u(gen), pi / cell.b * u(gen), cell};
}

inline DiscPermittivity paper_disc() { return {0.5, 0.5, 0.18, 11.56, 1.0}; }
inline DiscPermittivity strong_disc() { return {0.5, 0.5, 1.0 / 3.0, 100.0, 1.0}; }

// Nonzero oracle eigenvalues in ascending order.
inline std::vector<double> nonzero_spectrum(const SparseMatrix& a, const SparseMatrix& m, double threshold) {
  const GeneralizedEig ev = dense_generalized_eig(a, m);
  std::vector<double> out;
  for (Index i = 0; i < ev.values.size(); ++i)
    if (ev.values[i] > threshold) out.push_back(ev.values[i]);
  return out;
}

// Asymptotic residual reduction per V-cycle on A + mu M at the finest level:
// geometric mean over cycles `skip`+1 .. `cycles`, random rhs, zero start.
inline double vcycle_contraction(const std::vector<LevelOperators>& levels, double mu, int cycles = 10,
                                 int skip = 3, std::uint64_t seed = 7) {
  const EdgeMultigrid mg(levels, mu);
  const std::size_t top = levels.size() - 1;
  const ComplexVector rhs = random_block(mg.op(top).rows(), 1, seed).col(0);
  ComplexVector x = ComplexVector::Zero(rhs.size());
  double first = rhs.norm(), last = first;
  for (int c = 1; c <= cycles; ++c) {
    mg.vcycle(top, x, rhs, 2, 2);
    const double r = (rhs - mg.op(top) * x).norm();
    if (c == skip) first = r;
    last = r;
  }
  return std::pow(last / first, 1.0 / (cycles - skip));
}

}  // namespace testing
