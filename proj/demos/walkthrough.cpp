// A short tour: build a planted two-block graphon, regularize it, sample
// from it, and estimate max-cut from samples.

#include <iostream>
#include <vector>

#include "graphlim/graphlim.hpp"

using namespace graphlim;

int main() {
  const StepGraphon w(IntervalPartition({0.5, 0.5}), Matrix::from_rows({{0.9, 0.1}, {0.1, 0.9}}));

  const StepKernel centered = w.kernel() - StepKernel::constant(0.5, w.partition());
  std::cout << "cut norm of W - 1/2: " << format_double(cut_norm_exact(centered).value) << '\n';

  RegularityConfig cfg;
  cfg.epsilon = 0.1;
  const auto reg = weak_regularity(w.kernel().rebase(IntervalPartition::canonical(8)), cfg);
  std::cout << "weak regularity: " << reg.classes() << " classes after " << reg.iterations
            << " steps, residual " << format_double(reg.certified_residual) << " <= "
            << format_double(reg.threshold) << '\n';

  const auto k3 = SimpleGraph::complete(3);
  std::cout << "t(K3, W) = " << format_double(density_step_graphon(k3, w)) << '\n';

  const auto g = sample_graphon(w, 20, 7).result;
  std::cout << "G(20, W) has " << g.edge_count() << " edges\n";

  const auto maxcut = find_witness("maxcut");
  const double f = weak_nd_value(g, maxcut, SearchMode::exact).value;
  std::cout << "max-cut density of the sample: " << format_double(f) << '\n';

  const std::vector<std::size_t> qs{6, 10};
  NdTestingOptions opts;
  opts.trials = 50;
  const auto ex = nd_testing_experiment(g, maxcut, qs, opts);
  for (const auto& row : ex.summary)
    std::cout << "q = " << row.q << ": median |f(G) - f(G(q,G))| = " << format_double(row.median_abs_dev)
              << '\n';
  return 0;
}
