// Runs a few block Lanczos steps on a small Strakos matrix in both modes and
// prints the extreme Ritz values next to the eigenvalues of A.

#include <cstdio>

#include "fpblock/block_lanczos.hpp"
#include "fpblock/matgen.hpp"

int main() {
  using namespace fpblock;
  const Vector eigs = strakos_spectrum(strakos48(0.1, 100));
  const Matrix a = spectrum_to_matrix(eigs, 7).a;
  Rng rng = make_rng(7, 1);
  const Matrix v = random_normal(a.rows(), 2, rng);

  for (LanczosMode mode : {LanczosMode::finite_precision, LanczosMode::simulated_exact}) {
    const LanczosRun run = run_block_lanczos(a, v, 12, mode);
    const RitzSet rs = ritz_analysis(a, run, run.steps());
    std::printf("%s: %lld steps\n", to_string(mode).c_str(), static_cast<long long>(run.steps()));
    const Index m = rs.thetas.size();
    for (Index i = m - 4; i < m; ++i) {
      std::printf("  theta %10.6f  delta %.2e  lambda %10.6f\n", rs.thetas(i), rs.deltas(i),
                  eigs(eigs.size() - (m - i)));
    }
  }
  return 0;
}
