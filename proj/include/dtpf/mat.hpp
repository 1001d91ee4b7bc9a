#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <utility>
#include <vector>

namespace dtpf::mat {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Thrown when a symmetric factorization still fails after the jitter retry.
class NotPositiveDefiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Matrix multiply(const Matrix& a, const Matrix& b);

// (a + a^T)/2. Covariances are passed through this after every update.
Matrix symmetrized(const Matrix& a);

// Solves a*x = b for symmetric positive definite a via Cholesky; never forms
// an explicit inverse. On factorization failure adds 1e-9*trace(a)/n to the
// diagonal once and retries; the second failure throws.
Matrix spd_solve(const Matrix& a, const Matrix& b);

// S with S*S^T == a for symmetric positive semidefinite a. Cholesky fast
// path (with the jitter retry); semidefinite inputs fall back to an
// eigendecomposition square root with negative eigenvalues clamped at zero.
Matrix psd_sqrt(const Matrix& a);

// (lambda_min, lambda_max) of a symmetric matrix, relative tolerance 1e-8.
std::pair<double, double> symmetric_eig_extrema(const Matrix& a);

// max |lambda| of a symmetric matrix.
double symmetric_spectral_radius(const Matrix& a);

struct Block {
  Matrix value;
  int block_row = 0;
  int block_col = 0;
};

// Upper bound sum_{i,j} rho(A_ij^T A_ij)^{1/2} on the spectral radius of the
// square matrix tiled by `blocks`. Every cell of the block grid must be
// supplied exactly once (zero blocks included).
double spectral_radius_bound_blocks(const std::vector<Block>& blocks);

}  // namespace dtpf::mat
