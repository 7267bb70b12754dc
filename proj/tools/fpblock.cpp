#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <future>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fpblock/experiments.hpp"

namespace {

using fpblock::ExperimentConfig;

void add_common(CLI::App* app, ExperimentConfig& cfg, std::vector<std::uint64_t>& sweep) {
  app->add_option("--matrix", cfg.matrix,
                  "generator: strakos48(l1,ln), strakos(n,l1,ln,rho), strakos48(l1,ln)_kron, random_spd(n)")
      ->capture_default_str();
  app->add_option("--mtx", cfg.mtx, "Matrix Market file (overrides --matrix)");
  app->add_option("--p", cfg.p, "block size")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--k", cfg.k, "Lanczos steps")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option_function<double>("--mu", [&cfg](double v) { cfg.mu = v; }, "selection tolerance (default sqrt(k n p eps))")
      ->check(CLI::PositiveNumber);
  app->add_option("--psi", cfg.psi, "cluster chaining tolerance, relative to ||A||")->check(CLI::PositiveNumber);
  app->add_option("--eta", cfg.eta, "cluster eigenvalue tolerance, relative to ||A||")->check(CLI::PositiveNumber);
  app->add_option("--svd-tol", cfg.svd_tol, "continuation rank tolerance")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--omega", cfg.omega, "Kronecker perturbation size")->capture_default_str();
  app->add_option("--delta", cfg.deltas, "blur widths in units of eps ||A||")->delimiter(',')->capture_default_str();
  app->add_option("--m", cfg.m, "blur multiplicity (odd)")->capture_default_str();
  app->add_option("--maxit", cfg.maxit, "CG iteration cap (0: 4n)")->capture_default_str();
  app->add_option("--seed", cfg.seed, "random seed")->capture_default_str();
  app->add_option("--out", cfg.out, "output directory")->required();
  app->add_option("--sweep", sweep, "run these seeds in parallel, one subdirectory each")->delimiter(',');
}

std::string report(const ExperimentConfig& cfg) {
  std::string text;
  char line[512];
  auto out = [&](const char* f, auto... args) {
    std::snprintf(line, sizeof line, f, args...);
    text += line;
  };
  out("[%s] seed %llu\n", cfg.experiment.c_str(), static_cast<unsigned long long>(cfg.seed));
  if (cfg.experiment == "fp-diagnostics") {
    const auto r = fpblock::run_fp_diagnostics(cfg);
    double dv = 0, nrm = 0, loc = 0;
    for (const auto& d : r.run.diagnostics) {
      dv = std::max(dv, d.delta_v_norm);
      nrm = std::max(nrm, d.normality);
      loc = std::max(loc, d.local_orth);
    }
    out("  steps %lld  max ||dv|| %.3e  max normality %.3e  max local orth %.3e  (npe %.3e)\n",
                static_cast<long long>(r.run.steps()), dv, nrm, loc, r.ref_npe);
  } else if (cfg.experiment == "blurred-cg") {
    const auto r = fpblock::run_blurred_cg(cfg);
    for (std::size_t s = 0; s < r.series.size(); ++s) {
      const auto it = r.histories[s].first_below(1e-12);
      out("  %-36s iterations %4lld  reach 1e-12 at %s  (%s)\n", r.series[s].c_str(),
                  static_cast<long long>(r.histories[s].iterations()),
                  it ? std::to_string(*it).c_str() : "never", fpblock::to_string(r.histories[s].status).c_str());
    }
  } else if (cfg.experiment == "continuation") {
    const auto r = fpblock::run_continuation_experiment(cfg);
    const auto& m = r.model;
    out("  mu %.3e  selected %lld  continuation steps %lld  dim T_N %lld\n", r.mu,
                static_cast<long long>(m.selection.m()), static_cast<long long>(m.cont.steps()),
                static_cast<long long>(m.tn.dim()));
    out("  max distance to eig(A) %.3e (relative %.3e)  eps1 %.3e  eps2 %.3e  bound %.3e  %s\n",
                m.certificate.max_distance, m.certificate.max_distance / m.a_norm, m.certificate.epsilon1,
                m.certificate.epsilon2, m.certificate.bound, m.certificate.holds ? "holds" : "VIOLATED");
  } else if (cfg.experiment == "interlacing") {
    const auto r = fpblock::run_interlacing_experiment(cfg);
    out("  steps %lld  interlacing violations %lld  conjecture %lld/%lld confirmed (%.2f%%)\n",
                static_cast<long long>(r.run.steps()), static_cast<long long>(r.total_violations()),
                static_cast<long long>(r.conjecture.confirmations), static_cast<long long>(r.conjecture.checks),
                100.0 * r.conjecture.confirmation_rate());
  }
  return text;
}

int dispatch(ExperimentConfig cfg, const std::vector<std::uint64_t>& sweep) {
  if (sweep.empty()) {
    std::fputs(report(cfg).c_str(), stdout);
    return 0;
  }
  std::vector<std::future<std::string>> jobs;
  for (std::uint64_t seed : sweep) {
    ExperimentConfig c = cfg;
    c.seed = seed;
    c.out = (std::filesystem::path(cfg.out) / ("seed_" + std::to_string(seed))).string();
    jobs.push_back(std::async(std::launch::async, [c] { return report(c); }));
  }
  int rc = 0;
  for (auto& j : jobs) {
    try {
      std::fputs(j.get().c_str(), stdout);
    } catch (const std::exception& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      rc = 1;
    }
  }
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Block Lanczos and block CG in finite precision: experiment runner"};
  app.set_config("--config", "", "key=value configuration file; command-line flags take precedence");
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(fpblock::kVersion));

  ExperimentConfig cfg;
  std::vector<std::uint64_t> sweep;
  add_common(&app, cfg, sweep);
  const std::pair<const char*, const char*> commands[] = {
      {"blurred-cg", "block CG in finite precision versus exact DR-BCG on blurred spectra"},
      {"fp-diagnostics", "recurrence perturbation and orthogonality measures of a finite precision run"},
      {"continuation", "model matrix T_N from a finite precision run and the spread of its eigenvalues"},
      {"interlacing", "Ritz value interlacing and interval conjecture scan in exact mode"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->fallthrough();
    sub->callback([&cfg, name = name] { cfg.experiment = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    return dispatch(cfg, sweep);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s: %s\n", cfg.experiment.c_str(), e.what());
    return 2;
  }
}
