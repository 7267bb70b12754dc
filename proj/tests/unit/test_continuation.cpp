#include <gtest/gtest.h>

#include <cmath>

#include "fpblock/matgen.hpp"
#include "fpblock/model.hpp"

using namespace fpblock;

namespace {

Matrix randn(Index r, Index c, std::uint64_t seed) {
  Rng rng = make_rng(seed, 9);
  return random_normal(r, c, rng);
}

struct KronRun {
  KronProblem kp;
  Vector eigs;
  LanczosRun run;
};

const KronRun& kron_run(int which) {
  static const KronRun runs[2] = {
      [] {
        KronRun r;
        r.kp = kron_perturbed_problem(strakos48(0.001, 1), 2, 1e-12, 1);
        r.eigs = sym_eigenvalues(r.kp.a);
        r.run = run_block_lanczos(r.kp.a, r.kp.v, 24, LanczosMode::finite_precision);
        return r;
      }(),
      [] {
        KronRun r;
        r.kp = kron_perturbed_problem(strakos48(0.1, 100), 2, 1e-12, 2);
        r.eigs = sym_eigenvalues(r.kp.a);
        r.run = run_block_lanczos(r.kp.a, r.kp.v, 24, LanczosMode::finite_precision);
        return r;
      }()};
  return runs[which];
}

ModelConfig config(double mu) {
  ModelConfig mc;
  mc.k = 24;
  mc.mu = mu;
  return mc;
}

}  // namespace

TEST(Selection, ThresholdExtremes) {
  const KronRun& r = kron_run(1);
  const RitzSet rs = ritz_analysis(r.kp.a, r.run, 24);
  const SelectionReport all = select_ritz_vectors(rs, 1e-300, r.run.a_norm);
  EXPECT_EQ(all.m(), rs.thetas.size());
  EXPECT_TRUE(all.unselected.empty());
  EXPECT_THROW(select_ritz_vectors(rs, 2.0 * rs.deltas.maxCoeff() / r.run.a_norm, r.run.a_norm), Error);
  try {
    select_ritz_vectors(rs, 10.0, r.run.a_norm);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptySelection);
  }
  EXPECT_THROW(select_ritz_vectors(rs, 0.0, r.run.a_norm), Error);

  const SelectionReport mid = select_ritz_vectors(rs, 1e-5, r.run.a_norm);
  EXPECT_EQ(mid.m() + static_cast<Index>(mid.unselected.size()), rs.thetas.size());
  for (Index i = 0; i < mid.deltas_selected.size(); ++i) EXPECT_GT(mid.deltas_selected(i), 1e-5 * r.run.a_norm);
  for (Index i = 0; i < mid.deltas_unselected.size(); ++i)
    EXPECT_LE(mid.deltas_unselected(i), 1e-5 * r.run.a_norm);
}

TEST(BuildWk, TrivialAndOracleCases) {
  const Vector z = randn(7, 1, 1).col(0);
  const WkFactors one = build_wk(Matrix(z));
  EXPECT_LT((one.w.col(0) - z / z.norm()).norm(), 1e-15);
  EXPECT_NEAR(one.rho, 1.0 / z.norm(), 1e-15);

  const Matrix q = householder_qr(randn(9, 3, 2)).q;
  const WkFactors orth = build_wk(q);
  EXPECT_LT((orth.w.cwiseAbs() - q.cwiseAbs()).norm(), 1e-14);
  EXPECT_NEAR(orth.rho, 1.0, 1e-14);

  const Matrix zr = randn(12, 4, 3);
  const WkFactors wk = build_wk(zr);
  Eigen::JacobiSVD<Matrix> svd(zr);
  EXPECT_NEAR(wk.rho, 1.0 / svd.singularValues()(3), 1e-12 * wk.rho);
  EXPECT_LT((wk.w * wk.r - zr).norm(), 1e-13 * zr.norm());

  Matrix dep = zr;
  dep.col(3) = dep.col(0) + 1e-14 * dep.col(1);
  try {
    build_wk(dep);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NearDependentRitzVectors);
  }
}

TEST(Continuation, OrthonormalBasisAndBetaIdentity) {
  for (int which : {0, 1}) {
    const KronRun& r = kron_run(which);
    const StepModel sm = model_at_step(r.kp.a, r.run, 24, config(1e-5));
    const Matrix q = sm.cont.q_basis(r.kp.a.rows());
    Matrix wq(q.rows(), sm.wk.w.cols() + q.cols());
    wq << sm.wk.w, q;
    EXPECT_LE(norm2(wq.transpose() * wq - Matrix::Identity(wq.cols(), wq.cols())), 1e-12);
    EXPECT_LE(wq.cols(), r.kp.a.rows());
    for (Index j = 3; j <= sm.cont.steps(); ++j) {
      const auto& qj = sm.cont.q_panels[static_cast<std::size_t>(j - 1)];
      const auto& qp = sm.cont.q_panels[static_cast<std::size_t>(j - 2)];
      EXPECT_LE(norm2(sm.cont.betas[static_cast<std::size_t>(j - 1)] - qj.transpose() * r.kp.a * qp),
                1e-10 * r.run.a_norm);
    }
  }
}

TEST(Continuation, TerminatesWithRankZeroAndShrinkingWidths) {
  const KronRun& r = kron_run(0);
  const StepModel sm = model_at_step(r.kp.a, r.run, 24, config(1e-5));
  ASSERT_GT(sm.cont.steps(), 0);
  EXPECT_EQ(sm.cont.h.size(), static_cast<std::size_t>(sm.cont.steps() + 1));
  const auto widths = sm.cont.widths();
  bool deflated = false;
  for (std::size_t j = 1; j < widths.size(); ++j) {
    if (widths[j] < widths[j - 1]) deflated = true;
    if (deflated) EXPECT_LE(widths[j], widths[j - 1]);
  }
  // Recompute the final step: nothing is left after projecting out [W, Q].
  const Matrix q = sm.cont.q_basis(r.kp.a.rows());
  Matrix basis(q.rows(), sm.wk.w.cols() + q.cols());
  basis << sm.wk.w, q;
  BlockVector last = sm.cont.h.back();
  reorthogonalize_twice(last, basis);
  EXPECT_LT(norm2(last), 1e-12);
}

TEST(Continuation, EpsilonTwoIsTheLargestPerturbation) {
  const KronRun& r = kron_run(1);
  const StepModel sm = model_at_step(r.kp.a, r.run, 24, config(1e-5));
  double worst = 0.0;
  for (Index j = 1; j < 24; ++j) worst = std::max(worst, r.run.diagnostics[static_cast<std::size_t>(j - 1)].delta_v_norm);
  for (const auto& h : sm.cont.h) worst = std::max(worst, norm2(h));
  EXPECT_DOUBLE_EQ(sm.cont.epsilon2, worst / r.run.a_norm);
  EXPECT_LT(sm.cont.alpha_asymmetry, 1e-12 * r.run.a_norm);
}

TEST(Continuation, ClosedFormPerturbationMatches) {
  for (int which : {0, 1}) {
    const KronRun& r = kron_run(which);
    const StepModel sm = model_at_step(r.kp.a, r.run, 24, config(1e-5));
    const BlockVector vk = r.run.panel(24);
    for (Index j = 3; j <= sm.cont.steps() + 1; ++j) {
      const BlockVector closed = closed_form_perturbation(r.kp.a, sm.wk.w, vk, sm.cont, j);
      EXPECT_LE(norm2(sm.cont.h[static_cast<std::size_t>(j - 1)] - closed), 1e-10 * r.run.a_norm) << "j=" << j;
    }
    EXPECT_THROW(closed_form_perturbation(r.kp.a, sm.wk.w, vk, sm.cont, 2), Error);
  }
}

TEST(Continuation, Deterministic) {
  const KronRun& r = kron_run(0);
  const StepModel a = model_at_step(r.kp.a, r.run, 20, config(1e-5));
  const StepModel b = model_at_step(r.kp.a, r.run, 20, config(1e-5));
  ASSERT_EQ(a.cont.steps(), b.cont.steps());
  for (std::size_t j = 0; j < a.cont.q_panels.size(); ++j) {
    EXPECT_TRUE(a.cont.q_panels[j] == b.cont.q_panels[j]);
    EXPECT_TRUE(a.cont.alphas[j] == b.cont.alphas[j]);
  }
}

TEST(Continuation, CapAndShapeErrors) {
  const KronRun& r = kron_run(0);
  const RitzSet rs = ritz_analysis(r.kp.a, r.run, 24);
  const SelectionReport sel = select_ritz_vectors(rs, 1e-5, r.run.a_norm);
  const WkFactors wk = build_wk(select_columns(rs.z, sel.selected));
  ContinuationInput in = continuation_input_at(r.run, 24, wk.w, 1e-12, 2);
  try {
    continuation_run(r.kp.a, in, r.run.a_norm);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::CapReached);
  }
  in.n_cap = 0;
  in.alpha_k = Matrix::Zero(3, 3);
  EXPECT_THROW(continuation_run(r.kp.a, in, r.run.a_norm), Error);
}

TEST(Continuation, FirstStepDegenerateRun) {
  const KronRun& r = kron_run(1);
  const StepModel sm = model_at_step(r.kp.a, r.run, 1, config(1e-5));
  EXPECT_GT(sm.cont.steps(), 0);
  const BlockTridiagonal tn = assemble_tn(r.run.t.leading(1), sm.cont);
  EXPECT_EQ(tn.num_blocks(), static_cast<std::size_t>(1 + sm.cont.steps()));
}

TEST(AssembleTn, NoContinuationStepsLeavesTk) {
  const KronRun& r = kron_run(0);
  const BlockTridiagonal tk = r.run.t.leading(5);
  ContinuationResult empty;
  const BlockTridiagonal tn = assemble_tn(tk, empty);
  EXPECT_TRUE(densify(tn) == densify(tk));
}

TEST(AssembleTn, ModelRecurrenceResidual) {
  const KronRun& r = kron_run(1);
  const ModelResult m = build_model(r.kp.a, r.kp.v, r.eigs, config(1e-5));
  const Matrix resid = r.kp.a * m.basis - m.basis * densify(m.tn);
  const double limit = m.cont.epsilon2 * m.a_norm;
  for (Index c = 0; c < resid.cols(); ++c) EXPECT_LE(resid.col(c).norm(), limit * (1 + 1e-8)) << "column " << c;
  EXPECT_EQ(m.tn.invariant_violation(), "");
}

TEST(AssembleTn, SinglePanelWidthGivesTridiagonal) {
  const Vector eigs = strakos_spectrum(strakos48(0.1, 100));
  const Matrix a = spectrum_to_matrix(eigs, 3).a;
  ModelConfig mc;
  mc.k = 20;
  mc.mu = 1e-5;
  const ModelResult m = build_model(a, randn(48, 1, 3), eigs, mc);
  const Matrix t = densify(m.tn);
  for (Index i = 0; i < t.rows(); ++i)
    for (Index j = 0; j < t.cols(); ++j)
      if (std::abs(i - j) > 1) EXPECT_EQ(t(i, j), 0.0);
  EXPECT_TRUE(m.certificate.holds);
}

TEST(Decomposition, FullRangeSelectionKillsOrthogonalComplementTerm) {
  const Vector eigs = strakos_spectrum(strakos48(0.1, 100));
  const Matrix a = spectrum_to_matrix(eigs, 4).a;
  const LanczosRun run = run_block_lanczos(a, randn(48, 2, 4), 6, LanczosMode::simulated_exact);
  ModelConfig mc;
  mc.k = 6;
  mc.mu = 1e-300;
  const StepModel sm = model_at_step(a, run, 6, mc);
  EXPECT_EQ(sm.selection.m(), 12);
  EXPECT_LE(sm.decomposition.term22, 1e-10 * run.a_norm);
}

TEST(Decomposition, LeadingTermOfFirstPerturbation) {
  const KronRun& r = kron_run(0);
  const StepModel sm = model_at_step(r.kp.a, r.run, 24, config(std::sqrt(24.0 * 96 * 2 * unit_roundoff())));
  const double band = 10.0 * 96 * 2 * unit_roundoff() * r.run.a_norm;
  ASSERT_FALSE(sm.decomposition.steps.empty());
  EXPECT_LE(sm.decomposition.steps[0].remainder, band);
  for (std::size_t j = 2; j < sm.decomposition.steps.size(); ++j)
    EXPECT_LE(sm.decomposition.steps[j].remainder, 1e-10 * r.run.a_norm);
}

TEST(Decomposition, TermsStayNearMuNorm) {
  const KronRun& r = kron_run(1);
  const ModelConfig mc = config(1e-5);
  for (Index k = 4; k <= 24; k += 4) {
    const PerturbationReport d = model_at_step(r.kp.a, r.run, k, mc).decomposition;
    const double limit = 10 * mc.mu * r.run.a_norm;
    EXPECT_LE(d.term21a, limit) << "k=" << k;
    EXPECT_LE(d.term21b, limit) << "k=" << k;
    EXPECT_LE(d.term22, limit) << "k=" << k;
    EXPECT_EQ(d.k, k);
  }
}

TEST(Model, SmallStrakosKronSizeNearReported) {
  const KronRun& r = kron_run(0);
  ModelConfig mc = config(default_mu(24, 96, 2));
  EXPECT_NEAR(mc.mu, 7.15e-7, 1e-9);
  const ModelResult m = build_model(r.kp.a, r.kp.v, r.eigs, mc);
  EXPECT_NEAR(static_cast<double>(m.tn.dim()), 114.0, 15.0);
  for (std::size_t j = 2; j < m.cont.h_norms.size(); ++j) EXPECT_LE(m.cont.h_norms[j], mc.mu * m.a_norm);
}
