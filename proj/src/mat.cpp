#include "dtpf/mat.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace dtpf::mat {

namespace {

double max_abs(const Matrix& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

// LLT with the jitter retry. Returns an engaged factorization or throws.
Eigen::LLT<Matrix> llt_with_jitter(const Matrix& a) {
  Matrix s = symmetrized(a);
  Eigen::LLT<Matrix> llt(s);
  if (llt.info() == Eigen::Success) return llt;
  const double jitter = 1e-9 * s.trace() / static_cast<double>(s.rows());
  s.diagonal().array() += jitter;
  llt.compute(s);
  if (llt.info() == Eigen::Success) return llt;
  throw NotPositiveDefiniteError("spd factorization failed after jitter retry");
}

}  // namespace

Matrix multiply(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("multiply: inner dimensions differ");
  return a * b;
}

Matrix symmetrized(const Matrix& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("symmetrized: matrix not square");
  return 0.5 * (a + a.transpose());
}

Matrix spd_solve(const Matrix& a, const Matrix& b) {
  if (a.rows() != a.cols()) throw std::invalid_argument("spd_solve: matrix not square");
  if (a.rows() != b.rows()) throw std::invalid_argument("spd_solve: rhs dimension mismatch");
  return llt_with_jitter(a).solve(b);
}

Matrix psd_sqrt(const Matrix& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("psd_sqrt: matrix not square");
  const Matrix s = symmetrized(a);
  Eigen::LLT<Matrix> llt(s);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(s);
  if (eig.info() != Eigen::Success)
    throw NotPositiveDefiniteError("psd_sqrt: eigendecomposition failed");
  Vector lam = eig.eigenvalues();
  const double scale = std::max(1.0, lam.cwiseAbs().maxCoeff());
  if (lam.minCoeff() < -1e-8 * scale)
    throw NotPositiveDefiniteError("psd_sqrt: matrix is indefinite");
  lam = lam.cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * lam.asDiagonal();
}

std::pair<double, double> symmetric_eig_extrema(const Matrix& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("symmetric_eig_extrema: matrix not square");
  const double asym = max_abs(a - a.transpose());
  if (asym > 1e-8 * std::max(1.0, max_abs(a)))
    throw std::invalid_argument("symmetric_eig_extrema: input not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrized(a), Eigen::EigenvaluesOnly);
  const auto& lam = eig.eigenvalues();
  return {lam.minCoeff(), lam.maxCoeff()};
}

double symmetric_spectral_radius(const Matrix& a) {
  auto [lo, hi] = symmetric_eig_extrema(a);
  return std::max(std::abs(lo), std::abs(hi));
}

double spectral_radius_bound_blocks(const std::vector<Block>& blocks) {
  if (blocks.empty()) throw std::invalid_argument("spectral_radius_bound_blocks: no blocks");
  std::map<int, Eigen::Index> row_heights, col_widths;
  std::map<std::pair<int, int>, bool> seen;
  for (const auto& b : blocks) {
    if (b.block_row < 0 || b.block_col < 0)
      throw std::invalid_argument("spectral_radius_bound_blocks: negative block index");
    auto [itr, new_r] = row_heights.emplace(b.block_row, b.value.rows());
    if (!new_r && itr->second != b.value.rows())
      throw std::invalid_argument("spectral_radius_bound_blocks: inconsistent block heights");
    auto [itc, new_c] = col_widths.emplace(b.block_col, b.value.cols());
    if (!new_c && itc->second != b.value.cols())
      throw std::invalid_argument("spectral_radius_bound_blocks: inconsistent block widths");
    if (!seen.emplace(std::make_pair(b.block_row, b.block_col), true).second)
      throw std::invalid_argument("spectral_radius_bound_blocks: duplicate block");
  }
  // Contiguous grid, every cell present, total matrix square.
  int nr = 0, nc = 0;
  Eigen::Index total_rows = 0, total_cols = 0;
  for (const auto& [i, h] : row_heights) {
    if (i != nr++) throw std::invalid_argument("spectral_radius_bound_blocks: missing block row");
    total_rows += h;
  }
  for (const auto& [j, w] : col_widths) {
    if (j != nc++) throw std::invalid_argument("spectral_radius_bound_blocks: missing block col");
    total_cols += w;
  }
  if (blocks.size() != static_cast<std::size_t>(nr) * static_cast<std::size_t>(nc))
    throw std::invalid_argument("spectral_radius_bound_blocks: grid has holes");
  if (total_rows != total_cols)
    throw std::invalid_argument("spectral_radius_bound_blocks: tiled matrix not square");

  double bound = 0.0;
  for (const auto& b : blocks) {
    // rho(A^T A)^{1/2} is the largest singular value of the block.
    const Matrix gram = symmetrized(b.value.transpose() * b.value);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
    bound += std::sqrt(std::max(0.0, eig.eigenvalues().maxCoeff()));
  }
  return bound;
}

}  // namespace dtpf::mat
