#pragma once

// Test problem generators. All randomness flows through an explicit
// std::mt19937_64 seeded from the caller's seed; there is no global state.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "fpblock/core_linalg.hpp"

namespace fpblock {

using Rng = std::mt19937_64;

/// Independent stream `stream` derived from a user seed.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), 0x9e3779b9u};
  return Rng(seq);
}

inline Matrix random_normal(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix m(rows, cols);
  // column-major fill, fixed order
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  return m;
}

/// Q factor of an n x n standard normal matrix (nonnegative-R convention).
inline Matrix random_orthonormal(Index n, Rng& rng) {
  return householder_qr(random_normal(n, n, rng), RankCheck::skip).q;
}

// ---------------------------------------------------------------------------

struct SpectrumSpec {
  Index n = 48;
  double lambda_1 = 0.1;
  double lambda_n = 100.0;
  double rho = 0.8;

  void validate() const {
    if (n < 2) throw Error(ErrorCode::InvalidArgument, "spectrum needs n >= 2");
    if (!(lambda_1 < lambda_n)) throw Error(ErrorCode::InvalidArgument, "need lambda_1 < lambda_n");
    if (!(rho > 0.0 && rho < 1.0)) throw Error(ErrorCode::InvalidArgument, "need 0 < rho < 1");
  }
};

inline SpectrumSpec strakos48(double lambda_1, double lambda_n) { return {48, lambda_1, lambda_n, 0.8}; }

/// lambda_i = lambda_1 + (i-1)/(n-1) (lambda_n - lambda_1) rho^(n-i).
inline Vector strakos_spectrum(const SpectrumSpec& spec) {
  spec.validate();
  const Index n = spec.n;
  Vector lam(n);
  lam(0) = spec.lambda_1;
  for (Index i = 2; i <= n; ++i) {
    lam(i - 1) = spec.lambda_1 + (static_cast<double>(i - 1) / static_cast<double>(n - 1)) *
                                     (spec.lambda_n - spec.lambda_1) *
                                     std::pow(spec.rho, static_cast<double>(n - i));
  }
  lam(n - 1) = spec.lambda_n;
  return lam;
}

struct SpectralMatrix {
  Matrix a;  // U diag(eigs) U^T
  Matrix u;
};

/// A = U diag(eigs) U^T with U random orthonormal drawn from `seed`.
inline SpectralMatrix spectrum_to_matrix(const Vector& eigs, std::uint64_t seed) {
  if (eigs.size() == 0) throw Error(ErrorCode::InvalidArgument, "empty eigenvalue list");
  Rng rng = make_rng(seed, 11);
  SpectralMatrix out;
  out.u = random_orthonormal(eigs.size(), rng);
  out.a = out.u * eigs.asDiagonal() * out.u.transpose();
  out.a = 0.5 * (out.a + out.a.transpose());
  return out;
}

/// Symmetric positive definite matrix with eigenvalues uniform in [lo, hi].
inline SpectralMatrix random_spd(Index n, std::uint64_t seed, double lo = 1.0, double hi = 10.0) {
  Rng rng = make_rng(seed, 12);
  std::uniform_real_distribution<double> dist(lo, hi);
  Vector eigs(n);
  for (Index i = 0; i < n; ++i) eigs(i) = dist(rng);
  std::sort(eigs.data(), eigs.data() + n);
  return spectrum_to_matrix(eigs, seed);
}

// ---------------------------------------------------------------------------
// Blurred problem

struct BlurSpec {
  Index m = 11;        // copies per eigenvalue, odd
  double delta = 0.0;  // interval width

  void validate() const {
    if (m == 1) {
      if (delta != 0.0) throw Error(ErrorCode::InvalidArgument, "m = 1 requires delta = 0");
      return;
    }
    if (m < 3 || m % 2 == 0) throw Error(ErrorCode::InvalidArgument, "m must be odd and >= 3");
    if (!(delta > 0.0)) throw Error(ErrorCode::InvalidArgument, "delta must be > 0");
  }
};

struct BlurredProblem {
  Vector a_hat;       // diagonal of the blurred matrix, n*m entries
  BlockVector b_hat;  // n*m x p
};

/// Replaces each eigenvalue lambda_i by m copies spread uniformly over
/// [lambda_i - delta/2, lambda_i + delta/2] and splits the weight
/// y_i^T b^(c) evenly (in squares) over the copies, keeping its sign.
/// `y` holds the orthonormal eigenvectors of A, column i for base_eigs(i).
inline BlurredProblem blurred_problem(const Vector& base_eigs, const Matrix& y,
                                      const BlockVector& b, const BlurSpec& blur) {
  blur.validate();
  const Index n = base_eigs.size();
  if (y.rows() != n || y.cols() != n || b.rows() != n) {
    throw Error(ErrorCode::ShapeMismatch, "blurred_problem: eigenvectors and rhs must match n");
  }
  if (n > 1 && blur.delta > 0.0) {
    Vector sorted = base_eigs;
    std::sort(sorted.data(), sorted.data() + n);
    double min_gap = std::numeric_limits<double>::infinity();
    for (Index i = 1; i < n; ++i) min_gap = std::min(min_gap, sorted(i) - sorted(i - 1));
    if (blur.delta >= min_gap) {
      throw Error(ErrorCode::OverlappingIntervals,
                  "delta " + std::to_string(blur.delta) + " >= min eigenvalue gap " +
                      std::to_string(min_gap));
    }
  }
  const Index m = blur.m;
  BlurredProblem out;
  out.a_hat.resize(n * m);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 1; j <= m; ++j) {
      const double offset =
          m == 1 ? 0.0
                 : (static_cast<double>(j) - static_cast<double>(m + 1) / 2.0) /
                       static_cast<double>(m - 1) * blur.delta;
      out.a_hat(i * m + j - 1) = base_eigs(i) + offset;
    }
  }
  const Matrix weights = y.transpose() * b;  // n x p, entry (i, c) = y_i^T b^(c)
  const double scale = 1.0 / std::sqrt(static_cast<double>(m));
  out.b_hat.resize(n * m, b.cols());
  for (Index c = 0; c < b.cols(); ++c)
    for (Index i = 0; i < n; ++i)
      out.b_hat.col(c).segment(i * m, m).setConstant(weights(i, c) * scale);
  return out;
}

// ---------------------------------------------------------------------------
// Kronecker-structured test matrices

struct ScalarLanczos {
  Vector alphas;
  Vector betas;  // betas(j) couples step j+1 and j+2 (length s-1)
  Index s = 0;

  Matrix tridiagonal() const {
    Matrix t = Matrix::Zero(s, s);
    for (Index j = 0; j < s; ++j) t(j, j) = alphas(j);
    for (Index j = 0; j + 1 < s; ++j) t(j + 1, j) = t(j, j + 1) = betas(j);
    return t;
  }
};

/// Single-vector Lanczos with double reorthogonalization; stops when the
/// next beta falls below 1e-12 ||B|| or the space is exhausted.
inline ScalarLanczos scalar_lanczos_reorthogonalized(const Matrix& b_mat, const Vector& y) {
  const Index n = b_mat.rows();
  const double b_norm = sym_norm2(b_mat);
  Matrix q(n, n);
  q.col(0) = y / y.norm();
  std::vector<double> alphas, betas;
  double beta_prev = 0.0;
  Index s = 0;
  for (Index j = 0; j < n; ++j) {
    Vector w = b_mat * q.col(j);
    if (j > 0) w -= beta_prev * q.col(j - 1);
    const double alpha = q.col(j).dot(w);
    w -= alpha * q.col(j);
    for (int pass = 0; pass < 2; ++pass) w -= q.leftCols(j + 1) * (q.leftCols(j + 1).transpose() * w);
    alphas.push_back(alpha);
    s = j + 1;
    const double beta = w.norm();
    if (j + 1 == n || beta < 1e-12 * b_norm) break;
    betas.push_back(beta);
    q.col(j + 1) = w / beta;
    beta_prev = beta;
  }
  ScalarLanczos out;
  out.s = s;
  out.alphas = Eigen::Map<Vector>(alphas.data(), static_cast<Index>(alphas.size()));
  out.betas = Eigen::Map<Vector>(betas.data(), static_cast<Index>(betas.size()));
  return out;
}

struct KronProblem {
  Matrix a;          // U (T~_s (x) (I_p + omega E)) U^T, size s*p
  BlockVector v;     // U (e_1 (x) I_p)
  Matrix t_tilde;    // s x s Jacobi matrix from the inner run
  Matrix e;          // p x p symmetric perturbation direction
  Matrix u;          // outer orthonormal similarity
  Index s = 0;
  Index p = 0;
  double omega = 0.0;
};

/// Block-Kronecker test matrix: an exact single-vector Lanczos run on a
/// matrix with the given spectrum produces T~_s, which is replicated p
/// times, perturbed by omega E and hidden by a random orthogonal
/// similarity. E is symmetrized so that A stays symmetric.
inline KronProblem kron_perturbed_problem(const SpectrumSpec& spec, Index p, double omega,
                                          std::uint64_t seed) {
  if (p < 2) throw Error(ErrorCode::InvalidArgument, "kron problem needs p >= 2");
  if (!(omega >= 0.0)) throw Error(ErrorCode::InvalidArgument, "omega must be >= 0");
  const Vector eigs = strakos_spectrum(spec);
  const Matrix b_mat = spectrum_to_matrix(eigs, seed).a;
  Rng rng_y = make_rng(seed, 21);
  const Vector y = random_normal(spec.n, 1, rng_y).col(0);
  const ScalarLanczos inner = scalar_lanczos_reorthogonalized(b_mat, y);
  if (inner.s < 3) {
    throw Error(ErrorCode::InnerBreakdown,
                "inner Lanczos run terminated at s = " + std::to_string(inner.s));
  }
  KronProblem out;
  out.s = inner.s;
  out.p = p;
  out.omega = omega;
  out.t_tilde = inner.tridiagonal();
  Rng rng_e = make_rng(seed, 22);
  const Matrix g = random_normal(p, p, rng_e);
  out.e = 0.5 * (g + g.transpose());
  Rng rng_u = make_rng(seed, 23);
  out.u = random_orthonormal(inner.s * p, rng_u);
  const Matrix core = kron(out.t_tilde, Matrix::Identity(p, p) + omega * out.e);
  out.a = out.u * core * out.u.transpose();
  out.a = 0.5 * (out.a + out.a.transpose());
  out.v = out.u.leftCols(p);
  return out;
}

}  // namespace fpblock
