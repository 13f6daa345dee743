#ifndef SOFTPERM_GRADSUITE_HPP
#define SOFTPERM_GRADSUITE_HPP

#include "softperm/loss.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace softperm {

struct GradSuiteSpec {
  std::vector<RankOperator> operators{RankOperator::NeuralSort, RankOperator::SoftSort,
                                      RankOperator::Sinkhorn, RankOperator::DiffSortNet};
  std::vector<LossMode> modes{LossMode::PureTopk, LossMode::SmTopk};
  int trials = 100;
  int max_n = 16;
  int max_k = 5;
  Scalar step = 1e-6;
  std::uint64_t seed = 2024;
};

struct GradSuiteWorst {
  RankOperator op = RankOperator::NeuralSort;
  LossMode mode = LossMode::PureTopk;
  int n = 0;
  int trial = 0;
  GradCheckReport report;
};

struct GradSuiteResult {
  Scalar worst_rel_err = 0.0;
  GradSuiteWorst worst;
  int cases = 0;
};

// Random loss-pipeline instances for every (operator, loss mode) pair,
// checked against central finite differences. Scores keep a minimum gap so
// the hard selections inside the pipeline are stable under the step.
// Sinkhorn runs a fixed number of iterations (tol 0) so the recorded forward
// pass is a smooth function of the scores.
GradSuiteResult run_gradient_suite(const GradSuiteSpec& spec);

}  // namespace softperm

#endif  // SOFTPERM_GRADSUITE_HPP
