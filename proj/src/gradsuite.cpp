#include "softperm/gradsuite.hpp"

#include <algorithm>
#include <cmath>

namespace softperm {

namespace {

// Uniform scores with every pairwise gap at least `gap`, so truncation and
// the hard sorts inside the operators do not flip under FD perturbations.
Vector gapped_scores(Rng& rng, int n, Scalar gap) {
  for (;;) {
    Vector s = rng.uniform_vector(n, -3.0, 3.0);
    Scalar min_gap = std::numeric_limits<Scalar>::infinity();
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) min_gap = std::min(min_gap, std::abs(s(i) - s(j)));
    if (n < 2 || min_gap >= gap) return s;
  }
}

RankDistribution pick_pk(Rng& rng, int max_k) {
  const std::vector<std::vector<Scalar>> shapes = {
      {1.0},
      {0.5, 0.5},
      {0.5, 0.0, 0.0, 0.0, 0.5},
      {0.2, 0.2, 0.2, 0.2, 0.2},
      {0.0, 0.0, 0.0, 0.0, 1.0},
      {0.25, 0.0, 0.0, 0.0, 0.75},
  };
  for (;;) {
    const auto& shape = shapes[static_cast<size_t>(rng.uniform_int(static_cast<int>(shapes.size())))];
    RankDistribution pk = make_rank_distribution(shape);
    if (pk.k_max() <= max_k) return pk;
  }
}

}  // namespace

GradSuiteResult run_gradient_suite(const GradSuiteSpec& spec) {
  GradSuiteResult result;
  Rng rng(spec.seed);
  NetworkCache nets;

  for (RankOperator op : spec.operators) {
    for (LossMode mode : spec.modes) {
      for (int trial = 0; trial < spec.trials; ++trial) {
        const int n = 6 + rng.uniform_int(std::max(1, spec.max_n - 5));
        const RankDistribution pk = pick_pk(rng, std::min(spec.max_k, n));
        const int k_max = pk.k_max();
        const int m = k_max + rng.uniform_int(n - k_max + 1);
        const int y = rng.uniform_int(n);

        OperatorConfig config;
        config.op = op;
        config.temperature = 0.25 * std::pow(2.0, rng.uniform_int(3));
        config.network_kind = NetworkKind::SplitterSelection;
        config.sinkhorn.epsilon = 0.05 * std::pow(2.0, rng.uniform_int(2));
        config.sinkhorn.tol = 0.0;  // fixed unroll
        config.sinkhorn.max_iters = 120;

        const Vector x0 = gapped_scores(rng, n, 1e-3);
        const ScalarFn fn = [&](const Vector& x, Vector* grad) -> Scalar {
          const LossResult lr = loss_forward_backward(x, y, pk, config, m, mode, nets);
          if (grad) *grad = lr.grad;
          return lr.loss;
        };

        const GradCheckReport report = gradcheck(fn, x0, spec.step);
        result.cases++;
        if (report.max_rel_err > result.worst_rel_err) {
          result.worst_rel_err = report.max_rel_err;
          result.worst = {op, mode, n, trial, report};
        }
      }
    }
  }
  return result;
}

}  // namespace softperm
