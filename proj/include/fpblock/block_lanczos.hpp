#pragma once

// Block Lanczos with two orthogonalization regimes, Ritz extraction and
// measurement of the perturbed recurrence.

#include <string>
#include <vector>

#include "fpblock/core_linalg.hpp"

namespace fpblock {

enum class LanczosMode {
  finite_precision,  // plain three-term recurrence
  simulated_exact,   // w reorthogonalized twice against every previous panel
};

inline std::string to_string(LanczosMode mode) {
  return mode == LanczosMode::finite_precision ? "finite_precision" : "simulated_exact";
}

enum class Termination {
  reached_k_max,
  exhausted,   // k p == n, the block Krylov space is the whole space
  rank_drop,   // sigma_min(w) fell below the termination tolerance
};

inline std::string to_string(Termination t) {
  switch (t) {
    case Termination::reached_k_max: return "reached_k_max";
    case Termination::exhausted: return "exhausted";
    case Termination::rank_drop: return "rank_drop";
  }
  return "unknown";
}

/// One row per iteration j of the finite precision measurements.
struct DiagnosticsRow {
  Index j = 0;
  double delta_v_norm = 0.0;  // ||A v_j - v_j a_j - v_{j-1} b_j^T - v_{j+1} b_{j+1}||
  double normality = 0.0;     // ||v_j^T v_j - I||
  double local_orth = 0.0;    // ||v_j^T v_{j+1} b_{j+1}||
  double beta_norm = 0.0;     // ||b_{j+1}||
  double global_orth = 0.0;   // ||V_j^T v_{j+1}||
};

struct LanczosOptions {
  /// Stop when sigma_min of the new block falls below this times ||A||.
  double termination_tol = 1e-10;
};

struct LanczosRun {
  std::vector<BlockVector> panels;  // v_1 .. v_{k+1}
  Matrix beta_1;                    // v = v_1 beta_1
  BlockTridiagonal t;               // alpha_1..alpha_k, beta_2..beta_k
  Matrix beta_next;                 // beta_{k+1}
  LanczosMode mode = LanczosMode::finite_precision;
  Termination termination = Termination::reached_k_max;
  double a_norm = 0.0;
  std::vector<DiagnosticsRow> diagnostics;

  Index steps() const { return static_cast<Index>(t.num_blocks()); }
  Index n() const { return panels.empty() ? 0 : panels.front().rows(); }
  Index p() const { return panels.empty() ? 0 : panels.front().cols(); }

  /// v_j, 1-based; v_0 is the n x p zero block.
  BlockVector panel(Index j) const {
    if (j == 0) return BlockVector::Zero(n(), p());
    return panels.at(static_cast<std::size_t>(j - 1));
  }

  const Matrix& alpha(Index j) const { return t.alphas().at(static_cast<std::size_t>(j - 1)); }

  /// beta_j for 2 <= j <= k+1.
  const Matrix& beta(Index j) const {
    if (j == steps() + 1) return beta_next;
    return t.betas().at(static_cast<std::size_t>(j - 2));
  }

  /// V_k = [v_1, ..., v_k].
  Matrix basis(Index k) const {
    return hstack(std::vector<BlockVector>(panels.begin(), panels.begin() + k), n());
  }
};

/// Perturbation Delta v_j of the computed recurrence at step j (1-based).
inline BlockVector recurrence_residual(const Matrix& a, const LanczosRun& run, Index j) {
  BlockVector r = a * run.panel(j) - run.panel(j) * run.alpha(j) - run.panel(j + 1) * run.beta(j + 1);
  if (j > 1) r -= run.panel(j - 1) * run.beta(j).transpose();
  return r;
}

/// Measures the recurrence of a completed run. All quantities are
/// recomputed in double precision, so each carries O(eps)||A|| noise of
/// its own.
inline std::vector<DiagnosticsRow> recurrence_diagnostics(const Matrix& a, const LanczosRun& run) {
  std::vector<DiagnosticsRow> rows;
  const Index k = run.steps();
  rows.reserve(static_cast<std::size_t>(k));
  for (Index j = 1; j <= k; ++j) {
    DiagnosticsRow row;
    row.j = j;
    const BlockVector& vj = run.panels[static_cast<std::size_t>(j - 1)];
    const BlockVector& vj1 = run.panels[static_cast<std::size_t>(j)];
    const Matrix& bj1 = run.beta(j + 1);
    row.delta_v_norm = norm2(recurrence_residual(a, run, j));
    row.normality = norm2(vj.transpose() * vj - Matrix::Identity(vj.cols(), vj.cols()));
    row.local_orth = norm2(vj.transpose() * vj1 * bj1);
    row.beta_norm = norm2(bj1);
    row.global_orth = norm2(run.basis(j).transpose() * vj1);
    rows.push_back(row);
  }
  return rows;
}

/// Block Lanczos on symmetric `a` from the block `v`, for at most `k_max`
/// steps. The run stops early, with a report, when the Krylov space is
/// exhausted or the new block loses rank.
inline LanczosRun run_block_lanczos(const Matrix& a, const BlockVector& v, Index k_max, LanczosMode mode,
                                    const LanczosOptions& options = {}) {
  const Index n = a.rows();
  if (a.cols() != n || v.rows() != n) throw Error(ErrorCode::ShapeMismatch, "a and v dimensions differ");
  const double a_norm = sym_norm2(a);
  if (symmetry_defect(a) > 1e-12 * std::max(a_norm, std::numeric_limits<double>::min())) {
    throw Error(ErrorCode::NotSymmetric, "matrix is not symmetric to 1e-12 ||A||");
  }
  const Index p = v.cols();
  if (p < 1 || k_max < 1 || k_max * p > n) {
    throw Error(ErrorCode::InvalidArgument, "need p >= 1 and 1 <= k_max * p <= n");
  }

  LanczosRun run;
  run.mode = mode;
  run.a_norm = a_norm;
  QrFactors start;
  try {
    start = householder_qr(v);
  } catch (const Error& e) {
    throw Error(ErrorCode::RankDeficientStart, e.what());
  }
  run.panels.push_back(start.q);
  run.beta_1 = start.r;

  Matrix all_panels(n, 0);
  if (mode == LanczosMode::simulated_exact) all_panels = start.q;

  for (Index k = 1; k <= k_max; ++k) {
    const BlockVector& vk = run.panels.back();
    BlockVector w = a * vk;
    if (k > 1) w -= run.panels[static_cast<std::size_t>(k - 2)] * run.t.betas().back().transpose();
    Matrix alpha = vk.transpose() * w;
    w -= vk * alpha;
    alpha = 0.5 * (alpha + alpha.transpose());
    if (mode == LanczosMode::simulated_exact) reorthogonalize_twice(w, all_panels);

    const QrFactors next = householder_qr(w, RankCheck::skip);
    run.t.push_diagonal(alpha);
    run.panels.push_back(next.q);
    run.beta_next = next.r;

    const bool rank_drop = smallest_singular_value(next.r) < options.termination_tol * a_norm;
    if (rank_drop || k * p >= n) {
      run.termination = k * p >= n ? Termination::exhausted : Termination::rank_drop;
      break;
    }
    if (k == k_max) break;
    run.t.push_subdiagonal(next.r);
    if (mode == LanczosMode::simulated_exact) {
      all_panels.conservativeResize(Eigen::NoChange, all_panels.cols() + p);
      all_panels.rightCols(p) = next.q;
    }
  }
  run.diagnostics = recurrence_diagnostics(a, run);
  return run;
}

// ---------------------------------------------------------------------------
// Ritz pairs

struct RitzSet {
  Index k = 0;
  Vector thetas;         // ascending
  Matrix s;              // eigenvectors of T_k
  Matrix z;              // Ritz vectors V_k S_k
  Matrix sigma;          // bottom block rows of S_k (p x kp)
  Vector deltas;         // ||beta_{k+1} sigma_i||
  Vector z_norms;        // ||z_i||
  Vector residuals;      // ||A z_i - theta_i z_i|| / ||z_i||
  Vector fp_bounds;      // (delta_i + ||Delta V_k s_i||) / ||z_i||
};

/// Ritz values and vectors of T_k with their residual bounds. Needs `a` to
/// measure the finite precision terms of the a posteriori bound.
inline RitzSet ritz_analysis(const Matrix& a, const LanczosRun& run, Index k) {
  if (k < 1 || k > run.steps()) {
    throw Error(ErrorCode::InvalidArgument, "ritz_analysis: k out of range");
  }
  RitzSet rs;
  rs.k = k;
  const Matrix tk = densify(run.t.leading(static_cast<std::size_t>(k)));
  const SymEig eig = sym_eig(tk);
  rs.thetas = eig.theta;
  rs.s = eig.s;
  const Matrix vk = run.basis(k);
  rs.z = vk * rs.s;
  const Index pk = run.panels[static_cast<std::size_t>(k - 1)].cols();
  rs.sigma = rs.s.bottomRows(pk);
  const Matrix& beta_k1 = run.beta(k + 1);
  const Matrix bs = beta_k1 * rs.sigma;

  Matrix delta_v(a.rows(), tk.rows());
  Index off = 0;
  for (Index j = 1; j <= k; ++j) {
    const BlockVector r = recurrence_residual(a, run, j);
    delta_v.middleCols(off, r.cols()) = r;
    off += r.cols();
  }
  const Matrix dvs = delta_v * rs.s;
  const Matrix az = a * rs.z;

  const Index m = tk.rows();
  rs.deltas.resize(m);
  rs.z_norms.resize(m);
  rs.residuals.resize(m);
  rs.fp_bounds.resize(m);
  for (Index i = 0; i < m; ++i) {
    rs.deltas(i) = bs.col(i).norm();
    rs.z_norms(i) = rs.z.col(i).norm();
    rs.residuals(i) = (az.col(i) - rs.thetas(i) * rs.z.col(i)).norm() / rs.z_norms(i);
    rs.fp_bounds(i) = (rs.deltas(i) + dvs.col(i).norm()) / rs.z_norms(i);
  }
  return rs;
}

}  // namespace fpblock
