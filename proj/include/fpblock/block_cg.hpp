#pragma once

// Block conjugate gradients: O'Leary's Hestenes-Stiefel form and Dubrulle's
// QR-based DR variant, with the trace A-norm error measure.
//
// The operator type only has to support `op * X` for an n x p block X, so
// dense matrices and diagonal matrices both work.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "fpblock/core_linalg.hpp"

namespace fpblock {

template <class Op>
concept BlockOperator = requires(const Op& op, const Matrix& x) {
  { Matrix(op * x) };
};

enum class CgStatus {
  max_iterations,
  reached_target,
  singular_inner_solve,  // run halted at the last recorded iterate
  exhausted,             // exact mode ran out of directions
};

inline std::string to_string(CgStatus s) {
  switch (s) {
    case CgStatus::max_iterations: return "max_iterations";
    case CgStatus::reached_target: return "reached_target";
    case CgStatus::singular_inner_solve: return "singular_inner_solve";
    case CgStatus::exhausted: return "exhausted";
  }
  return "unknown";
}

struct CgOptions {
  Index max_iterations = 100;
  /// Stop once the trace error drops to this value (0 runs to max_iterations).
  double target_error = 0.0;
  bool record_iterates = false;
};

struct CgHistory {
  std::string variant;
  bool exact_mode = false;
  std::vector<double> errors;            // errors[k] for iterate x_k, errors[0] = 1 when x_0 = 0
  Vector final_residual_norms;           // ||b - A x|| per column
  std::vector<Matrix> iterates;          // x_0, x_1, ... when requested
  Matrix x;                              // last iterate
  CgStatus status = CgStatus::max_iterations;
  std::string message;

  Index iterations() const { return static_cast<Index>(errors.size()) - 1; }

  /// First iteration whose error is <= level, or nullopt.
  std::optional<Index> first_below(double level) const {
    for (std::size_t k = 0; k < errors.size(); ++k)
      if (errors[k] <= level) return static_cast<Index>(k);
    return std::nullopt;
  }
};

/// Relative trace A-norm of the error:
///   sqrt(tr((x*-x)^T A (x*-x))) / sqrt(tr((x*-x0)^T A (x*-x0))).
template <BlockOperator Op>
double trace_error(const Matrix& x, const Matrix& x_star, const Matrix& x0, const Op& a) {
  const Matrix e = x_star - x;
  const Matrix e0 = x_star - x0;
  const double num = (e.transpose() * Matrix(a * e)).trace();
  const double den = (e0.transpose() * Matrix(a * e0)).trace();
  if (den <= 0.0) return num <= 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::sqrt(std::max(num, 0.0) / den);
}

/// Block solution of A X = B by dense Cholesky; the reference solution
/// used for error histories.
inline Matrix dense_reference_solution(const Matrix& a, const Matrix& b) {
  Eigen::LLT<Matrix> llt(0.5 * (a + a.transpose()));
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::InvalidArgument, "reference solve: matrix is not positive definite");
  }
  return llt.solve(b);
}

template <BlockOperator Op>
struct CgProblem {
  const Op& a;
  Matrix b;
  Matrix x0;
  Matrix x_star;
  double a_norm;
};

namespace detail {

// Solves the small SPD system m X = rhs, or reports singularity when
// sigma_min(m) < threshold.
inline std::optional<Matrix> spd_inner_solve(const Matrix& m, const Matrix& rhs, double threshold) {
  if (!(smallest_singular_value(m) >= threshold)) return std::nullopt;
  Eigen::LLT<Matrix> llt(0.5 * (m + m.transpose()));
  if (llt.info() != Eigen::Success) return std::nullopt;
  return Matrix(llt.solve(rhs));
}

template <BlockOperator Op>
void record(CgHistory& h, const CgProblem<Op>& pr, const Matrix& x, const CgOptions& opt) {
  h.errors.push_back(trace_error(x, pr.x_star, pr.x0, pr.a));
  if (opt.record_iterates) h.iterates.push_back(x);
}

template <BlockOperator Op>
void finish(CgHistory& h, const CgProblem<Op>& pr, const Matrix& x) {
  h.x = x;
  const Matrix r = pr.b - Matrix(pr.a * x);
  h.final_residual_norms = r.colwise().norm().transpose();
}

}  // namespace detail

/// O'Leary block CG with phi_i = I_p.
template <BlockOperator Op>
CgHistory hs_bcg(const CgProblem<Op>& pr, const CgOptions& opt) {
  CgHistory h;
  h.variant = "hs_bcg";
  Matrix x = pr.x0;
  Matrix r = pr.b - Matrix(pr.a * x);
  Matrix p = r;
  Matrix rr = r.transpose() * r;
  detail::record(h, pr, x, opt);
  for (Index k = 1; k <= opt.max_iterations; ++k) {
    if (opt.target_error > 0.0 && h.errors.back() <= opt.target_error) {
      h.status = CgStatus::reached_target;
      break;
    }
    const Matrix ap = pr.a * p;
    const Matrix pap = p.transpose() * ap;
    const double p_norm = norm2(p);
    const auto gamma = detail::spd_inner_solve(pap, rr, 1e-14 * pr.a_norm * p_norm * p_norm);
    if (!gamma) {
      h.status = CgStatus::singular_inner_solve;
      h.message = "p^T A p numerically singular at iteration " + std::to_string(k);
      break;
    }
    x += p * *gamma;
    r -= ap * *gamma;
    const Matrix rr_new = r.transpose() * r;
    Eigen::LLT<Matrix> llt(rr);
    if (llt.info() != Eigen::Success) {
      h.status = CgStatus::singular_inner_solve;
      h.message = "r^T r not positive definite at iteration " + std::to_string(k);
      detail::record(h, pr, x, opt);
      break;
    }
    const Matrix delta = llt.solve(rr_new);
    p = r + p * delta;
    rr = rr_new;
    detail::record(h, pr, x, opt);
  }
  detail::finish(h, pr, x);
  return h;
}

/// Dubrulle-R block CG. With `exact_mode`, each new w block is
/// orthogonalized twice against all previous w blocks.
template <BlockOperator Op>
CgHistory dr_bcg(const CgProblem<Op>& pr, const CgOptions& opt, bool exact_mode) {
  CgHistory h;
  h.variant = "dr_bcg";
  h.exact_mode = exact_mode;
  const Index n = pr.b.rows();
  const Index p = pr.b.cols();
  Matrix x = pr.x0;
  const QrFactors first = householder_qr(pr.b - Matrix(pr.a * x), RankCheck::skip);
  Matrix w = first.q;
  Matrix sigma = first.r;
  Matrix s = w;
  Matrix history(n, 0);
  if (exact_mode) history = w;
  detail::record(h, pr, x, opt);
  for (Index k = 1; k <= opt.max_iterations; ++k) {
    if (opt.target_error > 0.0 && h.errors.back() <= opt.target_error) {
      h.status = CgStatus::reached_target;
      break;
    }
    const Matrix as = pr.a * s;
    const Matrix sas = s.transpose() * as;
    const double s_norm = norm2(s);
    const auto xi =
        detail::spd_inner_solve(sas, Matrix::Identity(p, p), 1e-14 * pr.a_norm * s_norm * s_norm);
    if (!xi) {
      h.status = CgStatus::singular_inner_solve;
      h.message = "s^T A s numerically singular at iteration " + std::to_string(k);
      break;
    }
    x += s * (*xi * sigma);
    Matrix w_new = w - as * *xi;
    if (exact_mode) {
      if (history.cols() + p > n) {
        detail::record(h, pr, x, opt);
        h.status = CgStatus::exhausted;
        break;
      }
      reorthogonalize_twice(w_new, history);
    }
    const QrFactors next = householder_qr(w_new, RankCheck::skip);
    w = next.q;
    s = w + s * next.r.transpose();
    sigma = next.r * sigma;
    if (exact_mode) {
      history.conservativeResize(Eigen::NoChange, history.cols() + p);
      history.rightCols(p) = w;
    }
    detail::record(h, pr, x, opt);
  }
  detail::finish(h, pr, x);
  return h;
}

}  // namespace fpblock
