#pragma once

// End-to-end model construction: k finite precision block Lanczos steps,
// Ritz vector selection, continuation to T_N and the spread analysis of its
// eigenvalues.

#include <cmath>
#include <vector>

#include "fpblock/analysis.hpp"
#include "fpblock/block_lanczos.hpp"
#include "fpblock/continuation.hpp"

namespace fpblock {

struct ModelConfig {
  Index k = 24;
  double mu = 1e-5;
  double svd_tol = 1e-12;
  Index n_cap = 0;
};

/// mu = sqrt(k n p eps).
inline double default_mu(Index k, Index n, Index p) {
  return std::sqrt(static_cast<double>(k * n * p) * unit_roundoff());
}

struct ModelResult {
  LanczosRun run;
  RitzSet ritz;
  SelectionReport selection;
  WkFactors wk;
  ContinuationResult cont;
  BlockTridiagonal tn;
  Matrix basis;                 // [V_k, Q]
  PerturbationReport decomposition;
  SpreadReport spread;
  Theorem1Certificate certificate;
  Vector a_eigs;
  double a_norm = 0.0;
};

/// Continuation input taken from step k of a finite precision run.
inline ContinuationInput continuation_input_at(const LanczosRun& run, Index k, const Matrix& w_k,
                                               double svd_tol, Index n_cap) {
  ContinuationInput in;
  const Index p = run.p();
  in.v_prev = run.panel(k - 1);
  in.v_k = run.panel(k);
  in.alpha_k = run.alpha(k);
  in.beta_k = k > 1 ? run.beta(k) : Matrix::Zero(p, p);
  in.w_k = w_k;
  in.svd_tol = svd_tol;
  in.n_cap = n_cap;
  for (Index j = 1; j < k; ++j) in.fp_delta_norms.push_back(run.diagnostics[static_cast<std::size_t>(j - 1)].delta_v_norm);
  return in;
}

/// Selection, W_k, continuation and decomposition at step k of an existing
/// run (which must have at least k steps).
struct StepModel {
  RitzSet ritz;
  SelectionReport selection;
  WkFactors wk;
  ContinuationResult cont;
  PerturbationReport decomposition;
};

inline StepModel model_at_step(const Matrix& a, const LanczosRun& run, Index k, const ModelConfig& cfg) {
  StepModel sm;
  sm.ritz = ritz_analysis(a, run, k);
  sm.selection = select_ritz_vectors(sm.ritz, cfg.mu, run.a_norm);
  sm.wk = build_wk(select_columns(sm.ritz.z, sm.selection.selected));
  sm.selection.rho_k = sm.wk.rho;
  sm.cont = continuation_run(a, continuation_input_at(run, k, sm.wk.w, cfg.svd_tol, cfg.n_cap), run.a_norm);
  sm.decomposition = perturbation_decomposition(run, k, sm.ritz, sm.selection, sm.wk, sm.cont);
  return sm;
}

inline ModelResult build_model(const Matrix& a, const BlockVector& v, const Vector& a_eigs,
                               const ModelConfig& cfg) {
  ModelResult r;
  r.run = run_block_lanczos(a, v, cfg.k, LanczosMode::finite_precision);
  if (r.run.steps() < cfg.k) {
    throw Error(ErrorCode::InvalidArgument, "Lanczos run stopped after " + std::to_string(r.run.steps()) +
                                                " steps (" + to_string(r.run.termination) + ")");
  }
  r.a_norm = r.run.a_norm;
  r.a_eigs = a_eigs;
  StepModel sm = model_at_step(a, r.run, cfg.k, cfg);
  r.ritz = std::move(sm.ritz);
  r.selection = std::move(sm.selection);
  r.wk = std::move(sm.wk);
  r.cont = std::move(sm.cont);
  r.decomposition = std::move(sm.decomposition);
  r.tn = assemble_tn(r.run.t.leading(static_cast<std::size_t>(cfg.k)), r.cont);
  Matrix vk = r.run.basis(cfg.k);
  r.basis.resize(a.rows(), vk.cols() + r.cont.total_width());
  r.basis.leftCols(vk.cols()) = vk;
  r.basis.rightCols(r.cont.total_width()) = r.cont.q_basis(a.rows());
  r.certificate = theorem1_certificate(r.tn, r.basis, a_eigs, r.a_norm, r.cont.epsilon2);
  r.spread = interval_spread(r.certificate.thetas, a_eigs, r.a_norm);
  r.spread.epsilon1 = r.certificate.epsilon1;
  r.spread.epsilon2 = r.certificate.epsilon2;
  r.spread.theorem1_bound = r.certificate.bound;
  return r;
}

}  // namespace fpblock
