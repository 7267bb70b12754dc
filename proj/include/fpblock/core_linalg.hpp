#pragma once

// Dense kernels shared by every other module: thin Householder QR with a
// fixed sign convention, symmetric eigendecomposition, rank-truncating SVD
// and the block tridiagonal container.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "fpblock/error.hpp"

namespace fpblock {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
/// An n x width panel of basis columns. Width 0 marks full deflation.
using BlockVector = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Unit roundoff of IEEE double precision (2^-53).
inline constexpr double unit_roundoff() { return std::numeric_limits<double>::epsilon() / 2.0; }

/// Spectral norm of an arbitrary dense matrix. Empty matrices have norm 0.
inline double norm2(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  if (m.cols() == 1) return m.col(0).norm();
  if (m.rows() == 1) return m.row(0).norm();
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

inline double smallest_singular_value(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(svd.singularValues().size() - 1);
}

inline double symmetry_defect(const Matrix& m) {
  if (m.rows() != m.cols()) return std::numeric_limits<double>::infinity();
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------------------
// QR

struct QrFactors {
  BlockVector q;  // n x p, orthonormal columns
  Matrix r;       // p x p, upper triangular, nonnegative diagonal
};

enum class RankCheck { enforce, skip };

/// Thin Householder QR of a tall panel. The diagonal of R is made
/// nonnegative so identical inputs always give identical factors.
///
/// Throws RankDeficient when min |r_ii| < 1e-12 ||m|| and `check` is
/// `RankCheck::enforce`.
inline QrFactors householder_qr(const BlockVector& m, RankCheck check = RankCheck::enforce) {
  const Index n = m.rows();
  const Index p = m.cols();
  if (p < 1 || n < p) {
    throw Error(ErrorCode::InvalidArgument,
                "householder_qr needs 1 <= width <= rows, got " + std::to_string(n) + "x" +
                    std::to_string(p));
  }
  Eigen::HouseholderQR<Matrix> qr(m);
  QrFactors out;
  out.q = qr.householderQ() * Matrix::Identity(n, p);
  out.r = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
  for (Index i = 0; i < p; ++i) {
    if (out.r(i, i) < 0.0) {
      out.r.row(i) *= -1.0;
      out.q.col(i) *= -1.0;
    }
  }
  if (check == RankCheck::enforce) {
    const double scale = norm2(out.r);
    const double min_diag = out.r.diagonal().minCoeff();
    if (!(min_diag >= 1e-12 * scale) || scale == 0.0) {
      throw Error(ErrorCode::RankDeficient, "min diag(R) = " + std::to_string(min_diag) +
                                                " below 1e-12 * ||m|| = " +
                                                std::to_string(1e-12 * scale));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Symmetric eigendecomposition

struct SymEig {
  Vector theta;  // ascending
  Matrix s;      // orthonormal eigenvectors, column i pairs with theta(i)
};

/// Eigendecomposition of (t + t^T)/2. Eigenvalues come back ascending.
inline SymEig sym_eig(const Matrix& t) {
  if (t.rows() != t.cols() || t.rows() == 0) {
    throw Error(ErrorCode::ShapeMismatch, "sym_eig needs a nonempty square matrix");
  }
  const Matrix sym = 0.5 * (t + t.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  if (es.info() != Eigen::Success) {
    throw Error(ErrorCode::ConvergenceFailure, "symmetric eigensolver did not converge");
  }
  return {es.eigenvalues(), es.eigenvectors()};
}

inline Vector sym_eigenvalues(const Matrix& t) {
  if (t.rows() != t.cols() || t.rows() == 0) {
    throw Error(ErrorCode::ShapeMismatch, "sym_eigenvalues needs a nonempty square matrix");
  }
  const Matrix sym = 0.5 * (t + t.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    throw Error(ErrorCode::ConvergenceFailure, "symmetric eigensolver did not converge");
  }
  return es.eigenvalues();
}

/// ||A||_2 for a symmetric matrix, via its extreme eigenvalues.
inline double sym_norm2(const Matrix& a) {
  const Vector ev = sym_eigenvalues(a);
  return std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
}

// ---------------------------------------------------------------------------
// Truncated SVD

struct TruncatedSvd {
  BlockVector u;            // n x rank, orthonormal
  Matrix b;                 // rank x width, S_t V_t^T (full row rank)
  Index rank = 0;
  Vector singular_values;   // all of them, descending
};

/// Economy SVD w = U S V^T keeping singular values >= tol. The kept part is
/// returned as u = U_t and b = S_t V_t^T. Rank 0 yields an n x 0 panel.
inline TruncatedSvd truncated_svd(const BlockVector& w, double tol) {
  if (!(tol >= 0.0)) throw Error(ErrorCode::InvalidArgument, "truncated_svd tolerance must be >= 0");
  TruncatedSvd out;
  const Index n = w.rows();
  const Index width = w.cols();
  if (width == 0) {
    out.u = BlockVector(n, 0);
    out.b = Matrix(0, 0);
    out.singular_values = Vector(0);
    return out;
  }
  Eigen::JacobiSVD<Matrix> svd(w, Eigen::ComputeThinU | Eigen::ComputeThinV);
  out.singular_values = svd.singularValues();
  Index rank = 0;
  while (rank < out.singular_values.size() && out.singular_values(rank) >= tol &&
         out.singular_values(rank) > 0.0) {
    ++rank;
  }
  out.rank = rank;
  out.u = svd.matrixU().leftCols(rank);
  out.b = out.singular_values.head(rank).asDiagonal() * svd.matrixV().leftCols(rank).transpose();
  return out;
}

// ---------------------------------------------------------------------------
// Block tridiagonal container

/// Symmetric block tridiagonal matrix stored by blocks. Diagonal block j is
/// s_j x s_j; sub-diagonal block betas[j] couples block j+1 to block j and is
/// s_{j+1} x s_j. Block sizes never grow along the diagonal.
class BlockTridiagonal {
 public:
  BlockTridiagonal() = default;

  void push_diagonal(Matrix alpha) { alphas_.push_back(std::move(alpha)); }
  void push_subdiagonal(Matrix beta) { betas_.push_back(std::move(beta)); }

  const std::vector<Matrix>& alphas() const { return alphas_; }
  const std::vector<Matrix>& betas() const { return betas_; }

  std::size_t num_blocks() const { return alphas_.size(); }
  bool empty() const { return alphas_.empty(); }

  std::vector<Index> block_sizes() const {
    std::vector<Index> sizes;
    sizes.reserve(alphas_.size());
    for (const auto& a : alphas_) sizes.push_back(a.rows());
    return sizes;
  }

  Index dim() const {
    Index d = 0;
    for (const auto& a : alphas_) d += a.rows();
    return d;
  }

  /// Offset of block j in the dense matrix.
  Index offset(std::size_t j) const {
    Index d = 0;
    for (std::size_t i = 0; i < j; ++i) d += alphas_[i].rows();
    return d;
  }

  /// Leading `k` blocks (alpha_1..alpha_k, beta_2..beta_k).
  BlockTridiagonal leading(std::size_t k) const {
    BlockTridiagonal t;
    const std::size_t kk = std::min(k, alphas_.size());
    for (std::size_t j = 0; j < kk; ++j) t.push_diagonal(alphas_[j]);
    for (std::size_t j = 0; j + 1 < kk && j < betas_.size(); ++j) t.push_subdiagonal(betas_[j]);
    return t;
  }

  /// Throws ShapeMismatch on inconsistent block dimensions.
  void check_shapes() const {
    if (alphas_.empty()) throw Error(ErrorCode::ShapeMismatch, "block tridiagonal has no blocks");
    if (betas_.size() + 1 != alphas_.size()) {
      throw Error(ErrorCode::ShapeMismatch, "expected " + std::to_string(alphas_.size() - 1) +
                                                " sub-diagonal blocks, got " +
                                                std::to_string(betas_.size()));
    }
    for (std::size_t j = 0; j < alphas_.size(); ++j) {
      if (alphas_[j].rows() != alphas_[j].cols() || alphas_[j].rows() == 0) {
        throw Error(ErrorCode::ShapeMismatch, "diagonal block " + std::to_string(j + 1) +
                                                  " is not a nonempty square");
      }
    }
    for (std::size_t j = 0; j < betas_.size(); ++j) {
      if (betas_[j].rows() != alphas_[j + 1].rows() || betas_[j].cols() != alphas_[j].rows()) {
        throw Error(ErrorCode::ShapeMismatch,
                    "sub-diagonal block " + std::to_string(j + 2) + " has shape " +
                        std::to_string(betas_[j].rows()) + "x" + std::to_string(betas_[j].cols()));
      }
    }
  }

  /// Empty string when alpha blocks are symmetric to 1e-14 ||alpha||, block
  /// sizes do not grow and every beta has full row rank (smallest singular
  /// value above `rank_tol`); otherwise a description of the first failure.
  std::string invariant_violation(double rank_tol = 1e-12) const {
    check_shapes();
    for (std::size_t j = 0; j < alphas_.size(); ++j) {
      const Matrix& a = alphas_[j];
      if ((a - a.transpose()).norm() > 1e-14 * std::max(a.norm(), 1e-300)) {
        return "alpha_" + std::to_string(j + 1) + " is not symmetric";
      }
      if (j > 0 && a.rows() > alphas_[j - 1].rows()) {
        return "block size grows at block " + std::to_string(j + 1);
      }
    }
    for (std::size_t j = 0; j < betas_.size(); ++j) {
      const Matrix& b = betas_[j];
      const Eigen::JacobiSVD<Matrix> svd(b);
      const Vector sv = svd.singularValues();
      if (sv.size() < b.rows() || sv(sv.size() - 1) <= rank_tol) {
        return "beta_" + std::to_string(j + 2) + " lacks full row rank";
      }
    }
    return {};
  }

 private:
  std::vector<Matrix> alphas_;
  std::vector<Matrix> betas_;
};

/// Dense symmetric matrix with alpha_j on the block diagonal and beta_{j+1},
/// beta_{j+1}^T below and above it.
inline Matrix densify(const BlockTridiagonal& t) {
  t.check_shapes();
  const Index d = t.dim();
  Matrix out = Matrix::Zero(d, d);
  Index off = 0;
  for (std::size_t j = 0; j < t.num_blocks(); ++j) {
    const Matrix& a = t.alphas()[j];
    out.block(off, off, a.rows(), a.cols()) = a;
    if (j < t.betas().size()) {
      const Matrix& b = t.betas()[j];
      out.block(off + a.rows(), off, b.rows(), b.cols()) = b;
      out.block(off, off + a.rows(), b.cols(), b.rows()) = b.transpose();
    }
    off += a.rows();
  }
  return out;
}

/// Kronecker product a (x) b.
inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// Removes the components of `w` along `basis`, twice (classical
/// Gram-Schmidt, two passes).
inline void reorthogonalize_twice(BlockVector& w, const Matrix& basis) {
  if (basis.cols() == 0 || w.cols() == 0) return;
  for (int pass = 0; pass < 2; ++pass) w -= basis * (basis.transpose() * w);
}

/// Horizontal concatenation of panels.
inline Matrix hstack(const std::vector<BlockVector>& panels, Index rows) {
  Index cols = 0;
  for (const auto& p : panels) cols += p.cols();
  Matrix out(rows, cols);
  Index off = 0;
  for (const auto& p : panels) {
    out.middleCols(off, p.cols()) = p;
    off += p.cols();
  }
  return out;
}

}  // namespace fpblock
