#pragma once

// Experiment drivers shared by the command line tool and the acceptance
// suite. Each driver computes its data in memory and, when given an output
// directory, writes CSV files with '#' provenance lines plus a gnuplot
// script per figure.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "fpblock/analysis.hpp"
#include "fpblock/block_cg.hpp"
#include "fpblock/block_lanczos.hpp"
#include "fpblock/matgen.hpp"
#include "fpblock/matrix_market.hpp"
#include "fpblock/model.hpp"

namespace fpblock {

inline constexpr const char* kVersion = "fpblock 1.0.0";

struct ExperimentConfig {
  std::string experiment;
  std::string matrix = "strakos48(0.1,100)";
  std::string mtx;                      // overrides `matrix` when set
  Index p = 2;
  Index k = 24;
  std::optional<double> mu;             // default: sqrt(k n p eps)
  double psi = std::sqrt(unit_roundoff());
  double eta = std::sqrt(unit_roundoff());
  double svd_tol = 1e-12;
  double omega = 1e-12;
  std::vector<double> deltas{100.0, 0.5};  // blur widths in units of eps ||A||
  Index m = 11;
  Index maxit = 0;                      // 0: chosen per experiment
  std::uint64_t seed = 1;
  std::string out;

  /// Stable one-line rendering used in every provenance header.
  std::string describe() const {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "matrix=" << (mtx.empty() ? matrix : "mtx:" + mtx) << " p=" << p << " k=" << k << " mu=";
    if (mu) os << *mu; else os << "auto";
    os << " psi=" << psi << " eta=" << eta << " svd_tol=" << svd_tol << " omega=" << omega << " deltas=";
    for (std::size_t i = 0; i < deltas.size(); ++i) os << (i ? ";" : "") << deltas[i];
    os << " m=" << m << " maxit=" << maxit << " seed=" << seed;
    return os.str();
  }
};

// ---------------------------------------------------------------------------
// Problem instances

struct ProblemInstance {
  std::string name;
  Matrix a;
  BlockVector v;        // starting block / right-hand side
  Vector eigs;          // ascending
  Matrix eigvecs;       // matching eigenvectors
  double a_norm = 0.0;
  bool kron = false;
};

namespace detail {

inline void finish_instance(ProblemInstance& pi) {
  const SymEig e = sym_eig(pi.a);
  pi.eigs = e.theta;
  pi.eigvecs = e.s;
  pi.a_norm = std::max(std::abs(pi.eigs(0)), std::abs(pi.eigs(pi.eigs.size() - 1)));
}

inline std::vector<double> parse_numbers(const std::string& list) {
  std::vector<double> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

}  // namespace detail

/// Builds the problem named by the config. Recognized generator names:
///   strakos48(l1,ln)            U diag(lambda) U^T, n = 48, rho = 0.8
///   strakos(n,l1,ln,rho)
///   strakos48(l1,ln)_kron       Kronecker test matrix (also accepts a
///                               trailing "_x" or the UTF-8 sign)
///   random_spd(n)               eigenvalues uniform in [1, 10]
/// A Matrix Market path in `mtx` takes precedence. Unless the generator
/// defines its own starting block, v is a seeded standard normal n x p block.
inline ProblemInstance make_problem(const ExperimentConfig& cfg) {
  ProblemInstance pi;
  if (!cfg.mtx.empty()) {
    pi.name = std::filesystem::path(cfg.mtx).stem().string();
    pi.a = read_matrix_market(cfg.mtx);
  } else {
    static const std::regex re(R"(^\s*([a-z_0-9]+)\s*\(([^)]*)\)\s*(_kron|_x|_⊗|⊗)?\s*$)");
    std::smatch match;
    if (!std::regex_match(cfg.matrix, match, re)) {
      throw Error(ErrorCode::InvalidArgument, "unrecognized matrix '" + cfg.matrix + "'");
    }
    const std::string family = match[1];
    const std::vector<double> args = detail::parse_numbers(match[2]);
    pi.kron = match[3].matched;
    pi.name = cfg.matrix;
    SpectrumSpec spec;
    if (family == "strakos48" && args.size() == 2) {
      spec = strakos48(args[0], args[1]);
    } else if (family == "strakos" && args.size() == 4) {
      spec = {static_cast<Index>(args[0]), args[1], args[2], args[3]};
    } else if (family == "random_spd" && args.size() == 1 && !pi.kron) {
      pi.a = random_spd(static_cast<Index>(args[0]), cfg.seed).a;
    } else {
      throw Error(ErrorCode::InvalidArgument, "unrecognized matrix '" + cfg.matrix + "'");
    }
    if (family != "random_spd") {
      if (pi.kron) {
        KronProblem kp = kron_perturbed_problem(spec, cfg.p, cfg.omega, cfg.seed);
        pi.a = std::move(kp.a);
        pi.v = std::move(kp.v);
      } else {
        pi.a = spectrum_to_matrix(strakos_spectrum(spec), cfg.seed).a;
      }
    }
  }
  if (pi.v.size() == 0) {
    Rng rng = make_rng(cfg.seed, 31);
    pi.v = random_normal(pi.a.rows(), cfg.p, rng);
  }
  detail::finish_instance(pi);
  return pi;
}

// ---------------------------------------------------------------------------
// Output helpers

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const ExperimentConfig& cfg,
            const std::vector<std::string>& extra_provenance = {})
      : out_(path) {
    if (!out_) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
    out_ << "# experiment=" << cfg.experiment << " seed=" << cfg.seed << " version=" << kVersion
         << " config: " << cfg.describe() << "\n";
    for (const auto& line : extra_provenance) out_ << "# " << line << "\n";
    out_ << std::setprecision(17);
  }

  void header(const std::vector<std::string>& cols) { write_row(cols); }

  template <class... Ts>
  void row(const Ts&... values) {
    bool first = true;
    ((out_ << (first ? "" : ",") << values, first = false), ...);
    out_ << "\n";
  }

  std::ofstream& stream() { return out_; }

 private:
  void write_row(const std::vector<std::string>& cols) {
    for (std::size_t i = 0; i < cols.size(); ++i) out_ << (i ? "," : "") << cols[i];
    out_ << "\n";
  }
  std::ofstream out_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out << text;
}

inline std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

/// Serializes T_N: block count, block sizes, then each dense block.
inline void write_block_tridiagonal(const std::filesystem::path& path, const BlockTridiagonal& t,
                                    const ExperimentConfig& cfg) {
  CsvWriter w(path, cfg);
  auto& os = w.stream();
  os << "blocks " << t.num_blocks() << "\n";
  os << "sizes";
  for (Index s : t.block_sizes()) os << " " << s;
  os << "\n";
  auto dump = [&os](const Matrix& m) {
    for (Index i = 0; i < m.rows(); ++i) {
      for (Index j = 0; j < m.cols(); ++j) os << (j ? " " : "") << m(i, j);
      os << "\n";
    }
  };
  for (std::size_t j = 0; j < t.num_blocks(); ++j) {
    if (j > 0) {
      const Matrix& b = t.betas()[j - 1];
      os << "beta " << j + 1 << " " << b.rows() << " " << b.cols() << "\n";
      dump(b);
    }
    const Matrix& a = t.alphas()[j];
    os << "alpha " << j + 1 << " " << a.rows() << " " << a.cols() << "\n";
    dump(a);
  }
}

inline ExperimentConfig named(ExperimentConfig cfg, const char* name) {
  if (cfg.experiment.empty()) cfg.experiment = name;
  return cfg;
}

// ---------------------------------------------------------------------------
// fp-diagnostics

struct FpDiagnosticsResult {
  ProblemInstance problem;
  LanczosRun run;
  double ref_npe = 0.0;        // n p eps
  double ref_npe_norm = 0.0;   // n p eps ||A||
};

inline FpDiagnosticsResult run_fp_diagnostics(const ExperimentConfig& config) {
  const ExperimentConfig cfg = named(config, "fp-diagnostics");
  if (cfg.k < 1) throw Error(ErrorCode::InvalidArgument, "fp-diagnostics needs k >= 1");
  FpDiagnosticsResult r;
  r.problem = make_problem(cfg);
  const Index n = r.problem.a.rows();
  const Index k = std::min(cfg.k, n / cfg.p);
  r.run = run_block_lanczos(r.problem.a, r.problem.v, k, LanczosMode::finite_precision);
  r.ref_npe = static_cast<double>(n * cfg.p) * unit_roundoff();
  r.ref_npe_norm = r.ref_npe * r.problem.a_norm;
  if (!cfg.out.empty()) {
    const std::filesystem::path dir(cfg.out);
    std::filesystem::create_directories(dir);
    CsvWriter w(dir / "fp_diagnostics.csv", cfg,
                {"reference npe=" + fmt(r.ref_npe) + " npe_norm=" + fmt(r.ref_npe_norm),
                 "a_norm=" + fmt(r.problem.a_norm)});
    w.header({"j", "delta_v_norm", "normality", "local_orth", "beta_norm", "global_orth"});
    for (const auto& d : r.run.diagnostics)
      w.row(d.j, d.delta_v_norm, d.normality, d.local_orth, d.beta_norm, d.global_orth);
    write_text(dir / "fp_diagnostics.gp",
               "set datafile separator ','\nset logscale y\nset key outside\n"
               "set xlabel 'iteration j'\nset terminal pngcairo size 800,500\n"
               "set output 'fp_diagnostics.png'\n"
               "npe = " + fmt(r.ref_npe) + "\nnpe_norm = " + fmt(r.ref_npe_norm) + "\n"
               "plot 'fp_diagnostics.csv' using 1:2 with linespoints title '||dv_j||', \\\n"
               "     '' using 1:3 with linespoints title '||v_j^T v_j - I||', \\\n"
               "     '' using 1:4 with linespoints title '||v_j^T v_{j+1} b_{j+1}||', \\\n"
               "     npe with lines dt 2 title 'n p eps', \\\n"
               "     npe_norm with lines dt 3 title 'n p eps ||A||'\n");
  }
  return r;
}

// ---------------------------------------------------------------------------
// blurred-cg

struct BlurredCgResult {
  ProblemInstance problem;
  std::vector<std::string> series;
  std::vector<CgHistory> histories;  // fp hs, fp dr, exact dr per delta
  std::vector<double> deltas;        // absolute widths
  Matrix b;
};

inline BlurredCgResult run_blurred_cg(const ExperimentConfig& config) {
  const ExperimentConfig cfg = named(config, "blurred-cg");
  BlurredCgResult r;
  r.problem = make_problem(cfg);
  const ProblemInstance& pi = r.problem;
  const Index n = pi.a.rows();
  Rng rng = make_rng(cfg.seed, 41);
  r.b = random_normal(n, cfg.p, rng);
  const Index maxit = cfg.maxit > 0 ? cfg.maxit : 4 * n;

  CgOptions opt;
  opt.max_iterations = maxit;
  opt.target_error = 1e-16;
  const Matrix x0 = Matrix::Zero(n, cfg.p);
  const Matrix x_star = dense_reference_solution(pi.a, r.b);
  const CgProblem<Matrix> prob{pi.a, r.b, x0, x_star, pi.a_norm};
  r.series.push_back("fp_hs_bcg");
  r.histories.push_back(hs_bcg(prob, opt));
  r.series.push_back("fp_dr_bcg");
  r.histories.push_back(dr_bcg(prob, opt, false));

  for (double factor : cfg.deltas) {
    const double delta = factor * unit_roundoff() * pi.a_norm;
    BlurSpec blur{cfg.m, delta};
    if (factor == 0.0) blur.m = 1;
    const BlurredProblem bp = blurred_problem(pi.eigs, pi.eigvecs, r.b, blur);
    const Eigen::DiagonalMatrix<double, Eigen::Dynamic> a_hat(bp.a_hat);
    const Matrix xs_hat = bp.b_hat.array().colwise() / bp.a_hat.array();
    const Matrix x0_hat = Matrix::Zero(bp.b_hat.rows(), cfg.p);
    const double a_hat_norm = bp.a_hat.cwiseAbs().maxCoeff();
    const CgProblem<Eigen::DiagonalMatrix<double, Eigen::Dynamic>> bprob{a_hat, bp.b_hat, x0_hat, xs_hat,
                                                                         a_hat_norm};
    r.deltas.push_back(delta);
    r.series.push_back("exact_dr_bcg_delta_" + fmt(factor) + "eps");
    r.histories.push_back(dr_bcg(bprob, opt, true));
  }

  if (!cfg.out.empty()) {
    const std::filesystem::path dir(cfg.out);
    std::filesystem::create_directories(dir);
    Index longest = 0;
    for (const auto& h : r.histories) longest = std::max(longest, h.iterations());
    CsvWriter w(dir / "blurred_cg.csv", cfg,
                {"a_norm=" + fmt(pi.a_norm), "x_star: dense Cholesky solve (error O(eps kappa(A)))",
                 "missing iterations of a finished series are written as nan"});
    w.header({"iteration", "trace_error", "series", "variant", "exact_mode", "seed"});
    for (Index it = 0; it <= longest; ++it) {
      for (std::size_t s = 0; s < r.histories.size(); ++s) {
        const CgHistory& h = r.histories[s];
        const double e = it <= h.iterations() ? h.errors[static_cast<std::size_t>(it)]
                                              : std::numeric_limits<double>::quiet_NaN();
        w.row(it, e, r.series[s], h.variant, h.exact_mode ? 1 : 0, cfg.seed);
      }
    }
    std::string gp =
        "set datafile separator ','\nset logscale y\nset key outside\nset xlabel 'iteration'\n"
        "set ylabel 'relative trace A-norm of error'\nset terminal pngcairo size 800,500\n"
        "set output 'blurred_cg.png'\nplot ";
    for (std::size_t s = 0; s < r.series.size(); ++s) {
      gp += (s ? ", \\\n     " : "") + std::string("'blurred_cg.csv' using 1:(strcol(3) eq '") + r.series[s] +
            "' ? $2 : 1/0) with lines title '" + r.series[s] + "'";
    }
    write_text(dir / "blurred_cg.gp", gp + "\n");
  }
  return r;
}

// ---------------------------------------------------------------------------
// continuation

struct ContinuationExperiment {
  ProblemInstance problem;
  ModelResult model;
  double mu = 0.0;
  std::vector<PerturbationReport> sweep;  // terms for k' = 1..k
  std::vector<ClusterLabel> clusters;     // Ritz values of T_k
};

inline ContinuationExperiment run_continuation_experiment(const ExperimentConfig& config,
                                                          bool with_sweep = true) {
  const ExperimentConfig cfg = named(config, "continuation");
  ContinuationExperiment r;
  r.problem = make_problem(cfg);
  const ProblemInstance& pi = r.problem;
  const Index n = pi.a.rows();
  r.mu = cfg.mu ? *cfg.mu : default_mu(cfg.k, n, cfg.p);
  ModelConfig mc;
  mc.k = cfg.k;
  mc.mu = r.mu;
  mc.svd_tol = cfg.svd_tol;
  r.model = build_model(pi.a, pi.v, pi.eigs, mc);
  if (with_sweep) {
    for (Index kk = 1; kk <= cfg.k; ++kk) r.sweep.push_back(model_at_step(pi.a, r.model.run, kk, mc).decomposition);
  }
  r.clusters = classify_clusters(r.model.ritz.thetas, pi.eigs, pi.a_norm, cfg.psi, cfg.eta);

  if (!cfg.out.empty()) {
    const std::filesystem::path dir(cfg.out);
    std::filesystem::create_directories(dir);
    const ModelResult& m = r.model;
    const std::string mu_line = "mu=" + fmt(r.mu) + " mu_a_norm=" + fmt(r.mu * pi.a_norm);
    {
      CsvWriter w(dir / "h_norms.csv", cfg, {mu_line});
      w.header({"j", "width", "h_norm", "leading", "remainder", "term21a", "term21b", "term22"});
      for (const auto& s : m.decomposition.steps) {
        const Index width = m.cont.h[static_cast<std::size_t>(s.j)].cols();
        w.row(s.j, width, s.h_norm, s.leading, s.remainder, m.decomposition.term21a, m.decomposition.term21b,
              m.decomposition.term22);
      }
    }
    if (with_sweep) {
      CsvWriter w(dir / "selection_terms.csv", cfg, {mu_line});
      w.header({"k", "term21a", "term21b", "term22", "rho", "mu_a_norm"});
      for (const auto& d : r.sweep) w.row(d.k, d.term21a, d.term21b, d.term22, d.rho, r.mu * pi.a_norm);
    }
    write_block_tridiagonal(dir / "t_n.txt", m.tn, cfg);
    {
      CsvWriter w(dir / "spread.csv", cfg,
                  {"normalization sqrt_eps_a_norm=" + fmt(std::sqrt(unit_roundoff()) * pi.a_norm)});
      w.header({"lambda", "width", "count"});
      for (Index i = 0; i < m.spread.lambdas.size(); ++i)
        w.row(m.spread.lambdas(i), m.spread.widths(i), m.spread.counts[static_cast<std::size_t>(i)]);
    }
    {
      CsvWriter w(dir / "clusters.csv", cfg, {"psi=" + fmt(cfg.psi) + " eta=" + fmt(cfg.eta)});
      w.header({"kind", "theta_min", "theta_max", "members"});
      for (const auto& c : r.clusters) {
        std::string members;
        for (std::size_t i = 0; i < c.members.size(); ++i) members += (i ? ";" : "") + std::to_string(c.members[i] + 1);
        w.row(to_string(c.kind), fmt(c.theta_min), fmt(c.theta_max), members);
      }
    }
    {
      CsvWriter w(dir / "summary.csv", cfg);
      w.header({"k", "mu", "selected", "rho", "continuation_steps", "dim_tn", "num_blocks", "epsilon1", "epsilon2",
                "theorem1_bound", "max_distance", "max_width", "holds"});
      w.row(cfg.k, r.mu, m.selection.m(), m.wk.rho, m.cont.steps(), m.tn.dim(), m.certificate.num_blocks,
            m.certificate.epsilon1, m.certificate.epsilon2, m.certificate.bound, m.certificate.max_distance,
            m.spread.max_width(), m.certificate.holds ? 1 : 0);
    }
    write_text(dir / "h_norms.gp",
               "set datafile separator ','\nset logscale y\nset xlabel 'j'\nset terminal pngcairo size 800,500\n"
               "set output 'h_norms.png'\nmuA = " + fmt(r.mu * pi.a_norm) + "\n"
               "plot 'h_norms.csv' using 1:3 with linespoints title '||h_{k+j}||', muA with lines dt 2 title 'mu ||A||'\n");
    write_text(dir / "selection_terms.gp",
               "set datafile separator ','\nset logscale y\nset xlabel 'k'\nset terminal pngcairo size 800,500\n"
               "set output 'selection_terms.png'\n"
               "plot 'selection_terms.csv' using 1:2 with linespoints title '||W^T v_{k+1} b_{k+1}||', \\\n"
               "     '' using 1:3 with linespoints title '||b_{k+1} r_k^T S_m R^{-1}||', \\\n"
               "     '' using 1:4 with linespoints title '||(I-WW^T) v_k b_{k+1}^T||', \\\n"
               "     '' using 1:6 with lines dt 2 title 'mu ||A||'\n");
    write_text(dir / "spread.gp",
               "set datafile separator ','\nset terminal pngcairo size 800,700\nset output 'spread.png'\n"
               "set multiplot layout 2,1\nset logscale y\nnorm = " + fmt(std::sqrt(unit_roundoff()) * pi.a_norm) + "\n"
               "plot 'spread.csv' using 0:($2 > 0 ? $2/norm : 1/0) with impulses title 'width / (sqrt(eps)||A||)'\n"
               "unset logscale y\nplot 'spread.csv' using 0:3 with impulses title 'eigenvalues of T_N per interval'\n"
               "unset multiplot\n");
  }
  return r;
}

// ---------------------------------------------------------------------------
// interlacing

struct InterlacingExperiment {
  ProblemInstance problem;
  LanczosRun run;
  std::vector<Vector> thetas;                       // T_1 .. T_s
  std::vector<std::vector<InterlacingViolation>> violations;  // pair (k, k+1)
  ConjectureReport conjecture;

  Index total_violations() const {
    Index t = 0;
    for (const auto& v : violations) t += static_cast<Index>(v.size());
    return t;
  }
};

inline InterlacingExperiment run_interlacing_experiment(const ExperimentConfig& config) {
  const ExperimentConfig cfg = named(config, "interlacing");
  InterlacingExperiment r;
  r.problem = make_problem(cfg);
  const Index n = r.problem.a.rows();
  r.run = run_block_lanczos(r.problem.a, r.problem.v, n / cfg.p, LanczosMode::simulated_exact);
  const Index s = r.run.steps();
  for (Index k = 1; k <= s; ++k) r.thetas.push_back(sym_eigenvalues(densify(r.run.t.leading(static_cast<std::size_t>(k)))));
  for (Index k = 1; k < s; ++k) {
    r.violations.push_back(interlacing_check(r.thetas[static_cast<std::size_t>(k - 1)],
                                             r.thetas[static_cast<std::size_t>(k)], cfg.p));
  }
  r.conjecture = conjecture_scan(r.thetas, cfg.p);

  if (!cfg.out.empty()) {
    const std::filesystem::path dir(cfg.out);
    std::filesystem::create_directories(dir);
    {
      CsvWriter w(dir / "interlacing.csv", cfg,
                  {"eq6_violations=" + std::to_string(r.total_violations()),
                   "conjecture_checks=" + std::to_string(r.conjecture.checks) +
                       " confirmed=" + std::to_string(r.conjecture.confirmations) +
                       " confirmation_percent=" + fmt(100.0 * r.conjecture.confirmation_rate())});
      w.header({"k", "i", "j", "theta_lo", "theta_hi", "confirmed"});
      std::size_t miss = 0;
      for (Index k = 1; k < s; ++k) {
        const Vector& tk = r.thetas[static_cast<std::size_t>(k - 1)];
        for (Index i = 1; i + cfg.p <= tk.size(); ++i) {
          for (Index j = k + 1; j <= s; ++j) {
            bool confirmed = true;
            if (miss < r.conjecture.misses.size()) {
              const auto& mm = r.conjecture.misses[miss];
              if (mm.k == k && mm.i == i && mm.j == j) {
                confirmed = false;
                ++miss;
              }
            }
            w.row(k, i, j, tk(i - 1), tk(i + cfg.p - 1), confirmed ? 1 : 0);
          }
        }
      }
    }
    {
      CsvWriter w(dir / "interlacing_violations.csv", cfg);
      w.header({"k", "i", "inequality", "lhs", "rhs"});
      for (std::size_t kk = 0; kk < r.violations.size(); ++kk)
        for (const auto& v : r.violations[kk]) w.row(kk + 1, v.i, "\"" + to_string(v.kind) + "\"", v.lhs, v.rhs);
    }
  }
  return r;
}

}  // namespace fpblock
