#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace blochbands {

using Complex = std::complex<double>;
using ComplexVector = Eigen::VectorXcd;
using ComplexMatrix = Eigen::MatrixXcd;
using RealVector = Eigen::VectorXd;

// Row-major so that Gauss-Seidel sweeps can walk a row directly.
using SparseMatrix = Eigen::SparseMatrix<Complex, Eigen::RowMajor, std::int64_t>;
using Triplet = Eigen::Triplet<Complex, std::int64_t>;

using Index = std::int64_t;

/// Raised when an operation is called with arguments outside its contract.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace blochbands
