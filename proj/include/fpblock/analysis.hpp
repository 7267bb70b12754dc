#pragma once

// Spectral post-processing: Ritz value interlacing, the conjectured
// interval property across later iterations, cluster labels, eigenvalue
// interval spread and the eigenvalue-spread certificate for T_N.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "fpblock/core_linalg.hpp"

namespace fpblock {

// ---------------------------------------------------------------------------
// Interlacing

struct InterlacingViolation {
  enum class Kind { lower_bound, upper_bound, left_end, right_end } kind;
  Index i = 0;           // 1-based index into thetas_k
  double lhs = 0.0;
  double rhs = 0.0;
};

inline std::string to_string(InterlacingViolation::Kind k) {
  switch (k) {
    case InterlacingViolation::Kind::lower_bound: return "theta_i(k) < theta_{i+p}(k+1)";
    case InterlacingViolation::Kind::upper_bound: return "theta_{i+p}(k+1) < theta_{i+p}(k)";
    case InterlacingViolation::Kind::left_end: return "theta_1(k+1) < theta_1(k)";
    case InterlacingViolation::Kind::right_end: return "theta_kp(k) < theta_(k+1)p(k+1)";
  }
  return "unknown";
}

/// Checks, strictly,
///   theta_i^(k) < theta_{i+p}^(k+1) < theta_{i+p}^(k),  i = 1..(k-1)p,
///   theta_1^(k+1) < theta_1^(k),  theta_kp^(k) < theta_(k+1)p^(k+1).
/// Returns every failed inequality; empty means the pattern holds.
inline std::vector<InterlacingViolation> interlacing_check(const Vector& thetas_k, const Vector& thetas_k1,
                                                           Index p) {
  const Index kp = thetas_k.size();
  if (p < 1 || kp % p != 0 || thetas_k1.size() != kp + p) {
    throw Error(ErrorCode::ShapeMismatch, "interlacing_check needs len(k+1) = len(k) + p");
  }
  using Kind = InterlacingViolation::Kind;
  std::vector<InterlacingViolation> out;
  for (Index i = 1; i + p <= kp; ++i) {
    const double lo = thetas_k(i - 1);
    const double mid = thetas_k1(i + p - 1);
    const double hi = thetas_k(i + p - 1);
    if (!(lo < mid)) out.push_back({Kind::lower_bound, i, lo, mid});
    if (!(mid < hi)) out.push_back({Kind::upper_bound, i, mid, hi});
  }
  if (!(thetas_k1(0) < thetas_k(0))) out.push_back({Kind::left_end, 1, thetas_k1(0), thetas_k(0)});
  if (!(thetas_k(kp - 1) < thetas_k1(kp + p - 1))) {
    out.push_back({Kind::right_end, kp, thetas_k(kp - 1), thetas_k1(kp + p - 1)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Interval conjecture

struct ConjectureMiss {
  Index k = 0;  // iteration defining the interval (1-based)
  Index i = 0;  // interval (theta_i^(k), theta_{i+p}^(k))
  Index j = 0;  // later iteration with no Ritz value inside
};

struct ConjectureReport {
  Index checks = 0;
  Index confirmations = 0;
  std::vector<ConjectureMiss> misses;

  Index violations() const { return static_cast<Index>(misses.size()); }
  double confirmation_rate() const {
    return checks == 0 ? 1.0 : static_cast<double>(confirmations) / static_cast<double>(checks);
  }
};

/// For every k < s and every open interval (theta_i^(k), theta_{i+p}^(k)),
/// counts whether each later T_j (k < j <= s) has a Ritz value inside.
/// `theta_sequence[k-1]` holds the sorted Ritz values of T_k.
inline ConjectureReport conjecture_scan(const std::vector<Vector>& theta_sequence, Index p) {
  ConjectureReport rep;
  const Index s = static_cast<Index>(theta_sequence.size());
  for (Index k = 1; k < s; ++k) {
    const Vector& tk = theta_sequence[static_cast<std::size_t>(k - 1)];
    for (Index i = 1; i + p <= tk.size(); ++i) {
      const double lo = tk(i - 1);
      const double hi = tk(i + p - 1);
      for (Index j = k + 1; j <= s; ++j) {
        const Vector& tj = theta_sequence[static_cast<std::size_t>(j - 1)];
        const double* first = tj.data();
        const double* last = tj.data() + tj.size();
        const double* it = std::upper_bound(first, last, lo);
        ++rep.checks;
        if (it != last && *it < hi) {
          ++rep.confirmations;
        } else {
          rep.misses.push_back({k, i, j});
        }
      }
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Clusters

enum class ClusterKind { separated, proper, improper };

inline std::string to_string(ClusterKind k) {
  switch (k) {
    case ClusterKind::separated: return "separated";
    case ClusterKind::proper: return "proper";
    case ClusterKind::improper: return "improper";
  }
  return "unknown";
}

struct ClusterLabel {
  std::vector<Index> members;  // indices into the sorted theta list
  double theta_min = 0.0;
  double theta_max = 0.0;
  ClusterKind kind = ClusterKind::separated;
  double psi = 0.0;
  double eta = 0.0;
};

/// Groups sorted Ritz values by chaining neighbours closer than psi ||A||.
/// A group of two or more is proper when some eigenvalue of A lies in
/// [theta_min - eta ||A||, theta_max + eta ||A||], improper otherwise.
inline std::vector<ClusterLabel> classify_clusters(const Vector& thetas, const Vector& base_eigs,
                                                   double a_norm, double psi, double eta) {
  if (!(psi > 0.0) || !(eta > 0.0)) throw Error(ErrorCode::InvalidArgument, "psi and eta must be > 0");
  std::vector<ClusterLabel> out;
  const Index m = thetas.size();
  if (m == 0) return out;
  std::vector<Index> order(static_cast<std::size_t>(m));
  for (Index i = 0; i < m; ++i) order[static_cast<std::size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(), [&](Index x, Index y) { return thetas(x) < thetas(y); });

  Vector sorted_base = base_eigs;
  std::sort(sorted_base.data(), sorted_base.data() + sorted_base.size());

  auto close_group = [&](std::vector<Index> members) {
    ClusterLabel c;
    c.psi = psi;
    c.eta = eta;
    c.theta_min = thetas(members.front());
    c.theta_max = thetas(members.back());
    if (members.size() == 1) {
      c.kind = ClusterKind::separated;
    } else {
      const double lo = c.theta_min - eta * a_norm;
      const double hi = c.theta_max + eta * a_norm;
      const double* it = std::lower_bound(sorted_base.data(), sorted_base.data() + sorted_base.size(), lo);
      const bool hit = it != sorted_base.data() + sorted_base.size() && *it <= hi;
      c.kind = hit ? ClusterKind::proper : ClusterKind::improper;
    }
    c.members = std::move(members);
    out.push_back(std::move(c));
  };

  std::vector<Index> group{order[0]};
  for (std::size_t t = 1; t < order.size(); ++t) {
    const double gap = thetas(order[t]) - thetas(order[t - 1]);
    if (gap / a_norm <= psi) {
      group.push_back(order[t]);
    } else {
      close_group(std::move(group));
      group = {order[t]};
    }
  }
  close_group(std::move(group));
  return out;
}

// ---------------------------------------------------------------------------
// Interval spread

struct SpreadReport {
  Vector lambdas;                 // base eigenvalues, ascending
  Vector widths;                  // max |theta - lambda_i| over assigned theta
  Vector lower_extent;            // max (lambda_i - theta) over assigned theta below
  Vector upper_extent;            // max (theta - lambda_i) over assigned theta above
  std::vector<Index> counts;
  double a_norm = 0.0;
  double epsilon1 = 0.0;
  double epsilon2 = 0.0;
  double theorem1_bound = 0.0;

  double max_width() const { return widths.size() ? widths.maxCoeff() : 0.0; }
  Index total_count() const {
    Index t = 0;
    for (Index c : counts) t += c;
    return t;
  }
};

/// Assigns every eigenvalue of T_N to its nearest base eigenvalue (lowest
/// index on ties) and records per-eigenvalue interval widths and counts.
inline SpreadReport interval_spread(const Vector& tn_eigs, const Vector& base_eigs, double a_norm) {
  if (tn_eigs.size() == 0 || base_eigs.size() == 0) {
    throw Error(ErrorCode::InvalidArgument, "interval_spread needs nonempty lists");
  }
  SpreadReport rep;
  rep.a_norm = a_norm;
  rep.lambdas = base_eigs;
  std::sort(rep.lambdas.data(), rep.lambdas.data() + rep.lambdas.size());
  const Index nb = rep.lambdas.size();
  rep.widths = Vector::Zero(nb);
  rep.lower_extent = Vector::Zero(nb);
  rep.upper_extent = Vector::Zero(nb);
  rep.counts.assign(static_cast<std::size_t>(nb), 0);
  const double* first = rep.lambdas.data();
  const double* last = first + nb;
  for (Index t = 0; t < tn_eigs.size(); ++t) {
    const double x = tn_eigs(t);
    const double* it = std::lower_bound(first, last, x);
    Index best;
    if (it == first) {
      best = 0;
    } else if (it == last) {
      best = nb - 1;
    } else {
      const Index hi = static_cast<Index>(it - first);
      // prefer the lower neighbour on an exact tie
      best = (x - rep.lambdas(hi - 1) <= rep.lambdas(hi) - x) ? hi - 1 : hi;
    }
    // equal base eigenvalues: take the first of the run
    while (best > 0 && rep.lambdas(best - 1) == rep.lambdas(best)) --best;
    const double d = x - rep.lambdas(best);
    rep.widths(best) = std::max(rep.widths(best), std::abs(d));
    if (d < 0) rep.lower_extent(best) = std::max(rep.lower_extent(best), -d);
    if (d > 0) rep.upper_extent(best) = std::max(rep.upper_extent(best), d);
    ++rep.counts[static_cast<std::size_t>(best)];
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Eigenvalue-spread certificate for T_N

struct Theorem1Certificate {
  double epsilon1 = 0.0;          // normalized by ||A||
  double epsilon2 = 0.0;
  double bound = 0.0;             // 3 max(sqrt(N) eps2, eps1) ||A||
  Index num_blocks = 0;           // N
  double max_distance = 0.0;      // max over eig(T_N) of distance to eig(A)
  Index small_norm_count = 0;     // Ritz vectors with ||z|| < 0.5
  bool holds = false;
  Vector thetas;
  Vector z_norms;
};

/// Ritz vectors of T_N lifted by `basis` = [V_k, Q]; epsilon1 is the largest
/// distance from a small-norm (< 0.5) Ritz value to the nearest large-norm
/// one, over ||A||. Throws AssumptionUnsatisfiable when small-norm Ritz
/// vectors exist but no Ritz vector reaches norm 0.5.
inline Theorem1Certificate theorem1_certificate(const BlockTridiagonal& tn, const Matrix& basis,
                                                const Vector& a_eigs, double a_norm, double epsilon2) {
  const Matrix dense = densify(tn);
  if (basis.cols() != dense.rows()) throw Error(ErrorCode::ShapeMismatch, "basis does not match T_N");
  const SymEig eig = sym_eig(dense);
  Theorem1Certificate c;
  c.thetas = eig.theta;
  c.z_norms = (basis * eig.s).colwise().norm().transpose();
  c.epsilon2 = epsilon2;
  c.num_blocks = static_cast<Index>(tn.num_blocks());

  std::vector<double> large;
  for (Index i = 0; i < c.z_norms.size(); ++i)
    if (c.z_norms(i) >= 0.5) large.push_back(c.thetas(i));
  double worst = 0.0;
  for (Index i = 0; i < c.z_norms.size(); ++i) {
    if (c.z_norms(i) >= 0.5) continue;
    ++c.small_norm_count;
    if (large.empty()) {
      throw Error(ErrorCode::AssumptionUnsatisfiable, "no Ritz vector of T_N has norm >= 0.5");
    }
    double best = std::numeric_limits<double>::infinity();
    for (double th : large) best = std::min(best, std::abs(th - c.thetas(i)));
    worst = std::max(worst, best);
  }
  c.epsilon1 = worst / a_norm;
  c.bound = 3.0 * std::max(std::sqrt(static_cast<double>(c.num_blocks)) * epsilon2, c.epsilon1) * a_norm;

  Vector sorted = a_eigs;
  std::sort(sorted.data(), sorted.data() + sorted.size());
  for (Index i = 0; i < c.thetas.size(); ++i) {
    const double x = c.thetas(i);
    const double* first = sorted.data();
    const double* last = first + sorted.size();
    const double* it = std::lower_bound(first, last, x);
    double d = std::numeric_limits<double>::infinity();
    if (it != last) d = std::min(d, *it - x);
    if (it != first) d = std::min(d, x - *(it - 1));
    c.max_distance = std::max(c.max_distance, d);
  }
  c.holds = c.max_distance <= c.bound;
  return c;
}

}  // namespace fpblock
