#include <gtest/gtest.h>

#include <cmath>

#include "fpblock/block_lanczos.hpp"
#include "fpblock/matgen.hpp"

using namespace fpblock;

namespace {

Matrix randn(Index r, Index c, std::uint64_t seed) {
  Rng rng = make_rng(seed, 6);
  return random_normal(r, c, rng);
}

double eps() { return unit_roundoff(); }

double min_distance(double x, const Vector& values) { return (values.array() - x).abs().minCoeff(); }

struct Fixture {
  Matrix a;
  Vector eigs;
  Matrix v;
};

Fixture strakos_fixture(double l1, double ln, Index p, std::uint64_t seed) {
  Fixture f;
  f.eigs = strakos_spectrum(strakos48(l1, ln));
  f.a = spectrum_to_matrix(f.eigs, seed).a;
  f.v = randn(48, p, seed);
  return f;
}

}  // namespace

TEST(BlockLanczos, FiniteModeRecurrenceResidualIsRoundoffSized) {
  for (Index p : {1, 2, 3}) {
    const Fixture f = strakos_fixture(0.1, 100, p, 2);
    const Index k = 40 / p;
    const LanczosRun run = run_block_lanczos(f.a, f.v, k, LanczosMode::finite_precision);
    ASSERT_EQ(run.steps(), k);
    const Matrix vk = run.basis(k);
    Matrix resid = f.a * vk - vk * densify(run.t);
    resid.rightCols(p) -= run.panel(k + 1) * run.beta_next;
    const double band = 10.0 * 48 * static_cast<double>(p) * eps() * run.a_norm;
    for (Index c = 0; c < resid.cols(); ++c) EXPECT_LE(resid.col(c).norm(), band) << "p=" << p << " col " << c;
  }
}

TEST(BlockLanczos, ExactModeKeepsOrthonormality) {
  const Fixture f = strakos_fixture(0.1, 100, 2, 3);
  const LanczosRun run = run_block_lanczos(f.a, f.v, 20, LanczosMode::simulated_exact);
  const Matrix v = run.basis(run.steps() + 1);
  EXPECT_LE(norm2(v.transpose() * v - Matrix::Identity(v.cols(), v.cols())), 1e-12);
  for (const auto& d : run.diagnostics) EXPECT_LE(d.global_orth, 1e-12);
}

TEST(BlockLanczos, FiniteModeLosesGlobalOrthogonality) {
  const Fixture f = strakos_fixture(0.1, 100, 2, 3);
  const LanczosRun run = run_block_lanczos(f.a, f.v, 24, LanczosMode::finite_precision);
  double worst = 0.0;
  for (const auto& d : run.diagnostics) worst = std::max(worst, d.global_orth);
  EXPECT_GT(worst, 1e-3);
}

TEST(BlockLanczos, KroneckerStartReproducesReplicatedTridiagonal) {
  const KronProblem kp = kron_perturbed_problem(strakos48(0.1, 100), 3, 0.0, 4);
  const LanczosRun run = run_block_lanczos(kp.a, kp.v, kp.s, LanczosMode::simulated_exact);
  ASSERT_EQ(run.steps(), kp.s);
  for (Index k = 1; k <= run.steps(); ++k) {
    const Matrix expected = kron(kp.t_tilde.topLeftCorner(k, k), Matrix::Identity(3, 3));
    const Matrix got = densify(run.t.leading(static_cast<std::size_t>(k)));
    ASSERT_LE((got - expected).cwiseAbs().maxCoeff(), 1e-10 * run.a_norm) << "k=" << k;
  }
}

TEST(BlockLanczos, ExactRunToTerminationFinishes) {
  const SpectralMatrix sm = random_spd(24, 5);
  const LanczosRun run = run_block_lanczos(sm.a, randn(24, 3, 5), 8, LanczosMode::simulated_exact);
  EXPECT_EQ(run.steps(), 8);
  EXPECT_EQ(run.termination, Termination::exhausted);
  EXPECT_LE(norm2(run.beta_next), 1e-10 * run.a_norm);
  const Vector eig_t = sym_eigenvalues(densify(run.t));
  const Vector eig_a = sym_eigenvalues(sm.a);
  for (Index i = 0; i < eig_t.size(); ++i) EXPECT_LE(min_distance(eig_t(i), eig_a), 1e-10 * run.a_norm);
  EXPECT_EQ(run.t.invariant_violation(), "");
}

TEST(BlockLanczos, SingleVectorIsClassicalLanczos) {
  const Fixture f = strakos_fixture(0.1, 100, 1, 6);
  const LanczosRun run = run_block_lanczos(f.a, f.v, 20, LanczosMode::simulated_exact);
  const Matrix t = densify(run.t);
  for (Index i = 0; i < t.rows(); ++i) {
    for (Index j = 0; j < t.cols(); ++j) {
      if (std::abs(i - j) > 1) EXPECT_EQ(t(i, j), 0.0);
    }
    if (i > 0) EXPECT_GT(t(i, i - 1), 0.0);
  }
  // Scalar oracle: the reorthogonalized single-vector run from the same start.
  const ScalarLanczos sl = scalar_lanczos_reorthogonalized(f.a, f.v.col(0));
  EXPECT_LE((t - sl.tridiagonal().topLeftCorner(20, 20)).cwiseAbs().maxCoeff(), 1e-10 * run.a_norm);
}

TEST(BlockLanczos, ExtremeRitzValuesMoveOutward) {
  const SpectralMatrix sm = random_spd(30, 7);
  const Index p = 2;
  const LanczosRun run = run_block_lanczos(sm.a, randn(30, p, 7), 15, LanczosMode::simulated_exact);
  for (Index k = 1; k < run.steps(); ++k) {
    const Vector tk = sym_eigenvalues(densify(run.t.leading(static_cast<std::size_t>(k))));
    const Vector tk1 = sym_eigenvalues(densify(run.t.leading(static_cast<std::size_t>(k + 1))));
    EXPECT_LT(tk1(0), tk(0));
    EXPECT_LT(tk(tk.size() - 1), tk1(tk1.size() - 1));
  }
}

TEST(BlockLanczos, StopsOnRankDrop) {
  // Start block inside a 2-dimensional invariant subspace: the Krylov space
  // cannot grow past it.
  const SpectralMatrix sm = spectrum_to_matrix(Vector::LinSpaced(10, 1, 10), 8);
  Matrix v = sm.u.leftCols(2) * randn(2, 2, 8);
  const LanczosRun run = run_block_lanczos(sm.a, v, 4, LanczosMode::finite_precision);
  EXPECT_EQ(run.termination, Termination::rank_drop);
  EXPECT_EQ(run.steps(), 1);
}

TEST(BlockLanczos, Errors) {
  const SpectralMatrix sm = random_spd(6, 1);
  Matrix nonsym = sm.a;
  nonsym(0, 1) += 1.0;
  auto code = [](auto f) {
    try {
      f();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::IoError;
  };
  EXPECT_EQ(code([&] { run_block_lanczos(nonsym, randn(6, 2, 1), 2, LanczosMode::finite_precision); }),
            ErrorCode::NotSymmetric);
  Matrix dependent = randn(6, 2, 1);
  dependent.col(1) = dependent.col(0);
  EXPECT_EQ(code([&] { run_block_lanczos(sm.a, dependent, 2, LanczosMode::finite_precision); }),
            ErrorCode::RankDeficientStart);
  EXPECT_EQ(code([&] { run_block_lanczos(sm.a, randn(6, 2, 1), 4, LanczosMode::finite_precision); }),
            ErrorCode::InvalidArgument);
  EXPECT_EQ(code([&] { run_block_lanczos(sm.a, randn(5, 2, 1), 1, LanczosMode::finite_precision); }),
            ErrorCode::ShapeMismatch);
}

TEST(Diagnostics, FigureTwoBandAndBetaBound) {
  const Fixture f = strakos_fixture(0.001, 1, 2, 1);
  const LanczosRun run = run_block_lanczos(f.a, f.v, 24, LanczosMode::finite_precision);
  const double npe = 48 * 2 * eps();
  ASSERT_EQ(run.diagnostics.size(), 24u);
  for (const auto& d : run.diagnostics) {
    EXPECT_LE(d.delta_v_norm, 10 * npe * run.a_norm);
    EXPECT_LE(d.local_orth, 10 * npe * run.a_norm);
    EXPECT_LE(d.normality, 10 * npe);
    EXPECT_LE(d.beta_norm, 2.0 * run.a_norm);
  }
}

TEST(Diagnostics, PureMeasurement) {
  const Fixture f = strakos_fixture(0.1, 100, 2, 2);
  const LanczosRun run = run_block_lanczos(f.a, f.v, 10, LanczosMode::finite_precision);
  const auto r1 = recurrence_diagnostics(f.a, run);
  const auto r2 = recurrence_diagnostics(f.a, run);
  ASSERT_EQ(r1.size(), r2.size());
  for (std::size_t i = 0; i < r1.size(); ++i) {
    EXPECT_EQ(r1[i].delta_v_norm, r2[i].delta_v_norm);
    EXPECT_EQ(r1[i].global_orth, r2[i].global_orth);
  }
}

TEST(RitzAnalysis, DiagonalMatrixFirstStep) {
  const Vector d = Vector::LinSpaced(8, 1, 8);
  const Matrix a = d.asDiagonal();
  const Matrix v = Matrix::Identity(8, 8).leftCols(2);
  // Couple the first two coordinates to the rest so the step is non-trivial.
  Matrix a2 = a;
  for (Index j = 2; j < 8; ++j) {
    a2(0, j) = a2(j, 0) = 0.1;
    a2(1, j) = a2(j, 1) = 0.05 * static_cast<double>(j);
  }
  const LanczosRun run = run_block_lanczos(a2, v, 1, LanczosMode::simulated_exact);
  const RitzSet rs = ritz_analysis(a2, run, 1);
  EXPECT_NEAR(rs.thetas(0), 1.0, 1e-15);
  EXPECT_NEAR(rs.thetas(1), 2.0, 1e-15);
  const Vector lambda = sym_eigenvalues(a2);
  for (Index i = 0; i < 2; ++i) EXPECT_LE(min_distance(rs.thetas(i), lambda), rs.deltas(i) * (1 + 1e-12));
}

TEST(RitzAnalysis, ResidualBoundHoldsInExactMode) {
  const Fixture f = strakos_fixture(0.1, 100, 2, 9);
  const LanczosRun run = run_block_lanczos(f.a, f.v, 12, LanczosMode::simulated_exact);
  for (Index k : {1, 4, 8, 12}) {
    const RitzSet rs = ritz_analysis(f.a, run, k);
    ASSERT_EQ(rs.thetas.size(), 2 * k);
    EXPECT_LE(norm2(rs.s.transpose() * rs.s - Matrix::Identity(2 * k, 2 * k)), 1e-12);
    for (Index i = 0; i < rs.thetas.size(); ++i) {
      EXPECT_LE(min_distance(rs.thetas(i), f.eigs), rs.deltas(i) + 1e-12 * run.a_norm);
      EXPECT_NEAR(rs.residuals(i), rs.deltas(i), 1e-10 * run.a_norm);
    }
  }
}

TEST(RitzAnalysis, FinitePrecisionBoundHolds) {
  const Fixture f = strakos_fixture(0.1, 100, 2, 10);
  const LanczosRun run = run_block_lanczos(f.a, f.v, 24, LanczosMode::finite_precision);
  const RitzSet rs = ritz_analysis(f.a, run, 24);
  for (Index i = 0; i < rs.thetas.size(); ++i) {
    EXPECT_LE(rs.residuals(i), rs.fp_bounds(i) * (1 + 1e-8) + 1e-13 * run.a_norm);
  }
  EXPECT_THROW(ritz_analysis(f.a, run, 25), Error);
}
