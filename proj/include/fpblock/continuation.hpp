#pragma once

// Continuation of a finite precision block Lanczos run: the recurrence is
// extended from step k with perturbed three-term steps, each new block
// orthogonalized against an orthonormal basis W_k of selected Ritz vectors
// and against the continuation blocks already built, until the truncated
// block has rank zero. The result closes the model relation
//   A [V_k, Q] = [V_k, Q] T_N + [Delta V_{k-1}, Delta V~].

#include <algorithm>
#include <optional>
#include <vector>

#include "fpblock/block_lanczos.hpp"
#include "fpblock/core_linalg.hpp"

namespace fpblock {

// ---------------------------------------------------------------------------
// Ritz vector selection

struct SelectionReport {
  double mu = 0.0;
  double a_norm = 0.0;
  std::vector<Index> selected;    // ascending theta order
  std::vector<Index> unselected;
  Vector deltas_selected;
  Vector deltas_unselected;
  std::optional<double> rho_k;    // ||R_k^{-1}||, filled once W_k is built

  Index m() const { return static_cast<Index>(selected.size()); }
};

/// Keeps the Ritz pairs with delta_{k,i} > mu ||A||.
inline SelectionReport select_ritz_vectors(const RitzSet& rs, double mu, double a_norm) {
  if (!(mu > 0.0)) throw Error(ErrorCode::InvalidArgument, "mu must be > 0");
  SelectionReport rep;
  rep.mu = mu;
  rep.a_norm = a_norm;
  const double threshold = mu * a_norm;
  for (Index i = 0; i < rs.deltas.size(); ++i) {
    (rs.deltas(i) > threshold ? rep.selected : rep.unselected).push_back(i);
  }
  if (rep.selected.empty()) {
    throw Error(ErrorCode::EmptySelection,
                "no Ritz pair has delta > mu ||A|| = " + std::to_string(threshold));
  }
  rep.deltas_selected.resize(rep.m());
  for (Index i = 0; i < rep.m(); ++i) rep.deltas_selected(i) = rs.deltas(rep.selected[i]);
  rep.deltas_unselected.resize(static_cast<Index>(rep.unselected.size()));
  for (Index i = 0; i < rep.deltas_unselected.size(); ++i)
    rep.deltas_unselected(i) = rs.deltas(rep.unselected[static_cast<std::size_t>(i)]);
  return rep;
}

inline Matrix select_columns(const Matrix& m, const std::vector<Index>& cols) {
  Matrix out(m.rows(), static_cast<Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) out.col(static_cast<Index>(i)) = m.col(cols[i]);
  return out;
}

struct WkFactors {
  Matrix w;     // n x m, orthonormal
  Matrix r;     // m x m upper triangular
  double rho;   // ||R^{-1}||
};

/// QR of the selected Ritz vectors, Z_m = W_k R_k.
inline WkFactors build_wk(const Matrix& z_selected) {
  if (z_selected.cols() == 0) throw Error(ErrorCode::InvalidArgument, "no Ritz vectors to orthonormalize");
  Eigen::JacobiSVD<Matrix> svd(z_selected);
  const Vector& sv = svd.singularValues();
  if (!(sv(sv.size() - 1) >= 1e-10 * sv(0))) {
    throw Error(ErrorCode::NearDependentRitzVectors,
                "sigma_min / sigma_max of selected Ritz vectors = " +
                    std::to_string(sv(sv.size() - 1) / sv(0)));
  }
  const QrFactors qr = householder_qr(z_selected, RankCheck::skip);
  return {qr.q, qr.r, 1.0 / smallest_singular_value(qr.r)};
}

// ---------------------------------------------------------------------------
// Continuation process

struct ContinuationInput {
  BlockVector v_prev;   // v_{k-1} (zero block when k = 1)
  BlockVector v_k;
  Matrix alpha_k;
  Matrix beta_k;        // beta_k (zero when k = 1)
  Matrix w_k;           // orthonormal columns
  double svd_tol = 1e-12;
  Index n_cap = 0;      // max continuation steps, 0 means n
  /// ||Delta v_1||..||Delta v_{k-1}|| from the finite precision phase,
  /// folded into epsilon2.
  std::vector<double> fp_delta_norms;
};

struct ContinuationResult {
  std::vector<BlockVector> q_panels;  // q_{k+1} .. q_N
  std::vector<Matrix> alphas;         // alpha_{k+1} .. alpha_N
  std::vector<Matrix> betas;          // beta_{k+1} .. beta_N
  std::vector<BlockVector> h;         // h_k .. h_N
  std::vector<double> h_norms;
  double a_norm = 0.0;
  double epsilon2 = 0.0;              // max(||Delta v_j||, ||h_j||) / ||A||
  double alpha_asymmetry = 0.0;       // largest ||alpha - alpha^T|| before symmetrizing

  Index steps() const { return static_cast<Index>(q_panels.size()); }
  Index total_width() const {
    Index w = 0;
    for (const auto& q : q_panels) w += q.cols();
    return w;
  }
  std::vector<Index> widths() const {
    std::vector<Index> out;
    for (const auto& q : q_panels) out.push_back(q.cols());
    return out;
  }
  /// Q = [q_{k+1}, ..., q_N].
  Matrix q_basis(Index n) const { return hstack(q_panels, n); }
};

/// Runs the continuation from the state after step k of a finite precision
/// run. Throws CapReached when rank zero is not reached within n_cap steps.
inline ContinuationResult continuation_run(const Matrix& a, const ContinuationInput& in, double a_norm) {
  const Index n = a.rows();
  const Index p = in.v_k.cols();
  if (in.v_k.rows() != n || in.v_prev.rows() != n || in.w_k.rows() != n || in.alpha_k.rows() != p ||
      in.beta_k.rows() != p) {
    throw Error(ErrorCode::ShapeMismatch, "continuation inputs do not match the matrix size");
  }
  const Index cap = in.n_cap > 0 ? in.n_cap : n;
  ContinuationResult out;
  out.a_norm = a_norm;

  Matrix basis = in.w_k;
  auto extend_basis = [&basis](const BlockVector& q) {
    basis.conservativeResize(Eigen::NoChange, basis.cols() + q.cols());
    basis.rightCols(q.cols()) = q;
  };

  // j = 1: the finite precision three-term step from v_k
  BlockVector w_tilde = a * in.v_k - in.v_k * in.alpha_k - in.v_prev * in.beta_k.transpose();
  for (Index j = 1;; ++j) {
    BlockVector w = w_tilde;
    reorthogonalize_twice(w, basis);
    const TruncatedSvd svd = truncated_svd(w, in.svd_tol);
    if (svd.rank == 0) {
      out.h.push_back(w_tilde);
      out.h_norms.push_back(norm2(w_tilde));
      break;
    }
    const BlockVector& q = svd.u;
    const Matrix& beta = svd.b;
    out.h.push_back(w_tilde - q * beta);
    out.h_norms.push_back(norm2(out.h.back()));
    out.q_panels.push_back(q);
    out.betas.push_back(beta);
    extend_basis(q);
    if (j >= cap) {
      throw Error(ErrorCode::CapReached, "continuation did not terminate within " + std::to_string(cap) +
                                             " steps");
    }

    // three-term step from q_{k+j}
    const BlockVector aq = a * q;
    const BlockVector& prev = j == 1 ? in.v_k : out.q_panels[out.q_panels.size() - 2];
    const BlockVector u = aq - prev * beta.transpose();
    Matrix alpha = j == 1 ? Matrix(q.transpose() * u) : Matrix(q.transpose() * aq);
    out.alpha_asymmetry = std::max(out.alpha_asymmetry, norm2(alpha - alpha.transpose()));
    alpha = 0.5 * (alpha + alpha.transpose());
    out.alphas.push_back(alpha);
    w_tilde = u - q * alpha;
  }

  double worst = 0.0;
  for (double d : in.fp_delta_norms) worst = std::max(worst, d);
  for (double d : out.h_norms) worst = std::max(worst, d);
  out.epsilon2 = worst / a_norm;
  return out;
}

/// Appends the continuation blocks to T_k, giving T_N with beta_{N+1} = 0.
inline BlockTridiagonal assemble_tn(const BlockTridiagonal& t_k, const ContinuationResult& cont) {
  t_k.check_shapes();
  if (cont.alphas.size() != cont.q_panels.size() || cont.betas.size() != cont.q_panels.size()) {
    throw Error(ErrorCode::ShapeMismatch, "continuation result is inconsistent");
  }
  BlockTridiagonal tn = t_k;
  for (std::size_t j = 0; j < cont.q_panels.size(); ++j) {
    tn.push_subdiagonal(cont.betas[j]);
    tn.push_diagonal(cont.alphas[j]);
  }
  tn.check_shapes();
  return tn;
}

/// h_{k+j-1} in closed form for j >= 3:
///   W W^T A q_{k+j-1} + q_{k+1} beta_{k+1} v_k^T q_{k+j-1}.
inline BlockVector closed_form_perturbation(const Matrix& a, const Matrix& w_k, const BlockVector& v_k,
                                            const ContinuationResult& cont, Index j) {
  if (j < 3 || j - 2 >= cont.steps()) {
    throw Error(ErrorCode::InvalidArgument, "closed form defined for 3 <= j <= steps + 1");
  }
  const BlockVector& q = cont.q_panels[static_cast<std::size_t>(j - 2)];
  return w_k * (w_k.transpose() * (a * q)) + cont.q_panels.front() * cont.betas.front() * (v_k.transpose() * q);
}

// ---------------------------------------------------------------------------
// Perturbation decomposition

struct PerturbationStep {
  Index j = 0;            // h_{k+j}
  double h_norm = 0.0;
  double leading = 0.0;   // norm of the leading term
  double remainder = 0.0; // ||Delta_j||
};

struct PerturbationReport {
  Index k = 0;
  double term21a = 0.0;   // ||W^T v_{k+1} beta_{k+1}^FP||
  double term21b = 0.0;   // ||beta_{k+1} r_k^T S_m R^{-1}||
  double term22 = 0.0;    // ||(I - W W^T) v_k beta_{k+1}^T||
  double rho = 0.0;
  std::vector<PerturbationStep> steps;
};

/// Splits each measured h_{k+j} into its leading term and remainder:
///   h_k     = W W^T v_{k+1} beta^FP_{k+1} + Delta_0
///   h_{k+1} = -W R^{-T} S_m^T r_k beta_{k+1}^T + Delta_1
///   h_{k+j} = q_{k+1} beta_{k+1} v_k^T q_{k+j} + Delta_j,   j >= 2
/// with r_k^T = [v_k^T V_{k-1}, 0].
inline PerturbationReport perturbation_decomposition(const LanczosRun& run, Index k, const RitzSet& rs,
                                                     const SelectionReport& sel, const WkFactors& wk,
                                                     const ContinuationResult& cont) {
  PerturbationReport rep;
  rep.k = k;
  rep.rho = wk.rho;
  const BlockVector vk = run.panel(k);
  const BlockVector vk1 = run.panel(k + 1);
  const Matrix& beta_fp = run.beta(k + 1);
  const Index p = vk.cols();

  Matrix r_k = Matrix::Zero(rs.s.rows(), p);  // kp x p
  if (k > 1) r_k.topRows((k - 1) * p) = run.basis(k - 1).transpose() * vk;

  const Matrix s_m = select_columns(rs.s, sel.selected);
  // R^{-1} applied from the right: X R^{-1} = (R^{-T} X^T)^T
  const Matrix rinv = wk.r.triangularView<Eigen::Upper>().solve(Matrix::Identity(wk.r.rows(), wk.r.cols()));

  const Matrix lead0 = wk.w * (wk.w.transpose() * vk1 * beta_fp);
  rep.term21a = norm2(wk.w.transpose() * vk1 * beta_fp);

  const bool has_q = cont.steps() > 0;
  const Matrix beta_c = has_q ? cont.betas.front() : Matrix::Zero(0, p);
  const Matrix middle = r_k.transpose() * s_m * rinv;  // p x m
  rep.term21b = has_q ? norm2(beta_c * middle) : 0.0;
  rep.term22 = has_q ? norm2((vk - wk.w * (wk.w.transpose() * vk)) * beta_c.transpose()) : 0.0;

  for (std::size_t idx = 0; idx < cont.h.size(); ++idx) {
    const Index j = static_cast<Index>(idx);
    PerturbationStep step;
    step.j = j;
    const BlockVector& h = cont.h[idx];
    step.h_norm = norm2(h);
    Matrix lead;
    if (j == 0) {
      lead = lead0;
    } else if (j == 1) {
      lead = -wk.w * (rinv.transpose() * (s_m.transpose() * r_k * beta_c.transpose()));
    } else {
      lead = cont.q_panels.front() * beta_c * (vk.transpose() * cont.q_panels[idx - 1]);
    }
    step.leading = norm2(lead);
    step.remainder = norm2(h - lead);
    rep.steps.push_back(step);
  }
  return rep;
}

}  // namespace fpblock
