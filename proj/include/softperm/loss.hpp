#ifndef SOFTPERM_LOSS_HPP
#define SOFTPERM_LOSS_HPP

#include "softperm/core.hpp"
#include "softperm/diffrank.hpp"

#include <map>
#include <vector>

namespace softperm {

// Probability vector over k = 1..K_max describing how much each top-k
// objective weighs.
struct RankDistribution {
  std::vector<Scalar> p;

  int size() const { return static_cast<int>(p.size()); }
  // Largest k with positive weight.
  int k_max() const;
  Scalar operator()(int k) const { return p[static_cast<size_t>(k - 1)]; }
};

// Validates (non-negative, sums to 1 within tol) and renormalizes exactly.
RankDistribution make_rank_distribution(std::vector<Scalar> weights, Scalar tol = 1e-6);

// Reverse cumulative sums: w_m = sum_{k >= m} P_K(k). Non-increasing, and
// w_1 = 1 for a normalized distribution.
std::vector<Scalar> rank_weights(const RankDistribution& pk);

struct PerClassRankDistributions {
  std::map<int, RankDistribution> per_class;
  RankDistribution fallback;

  const RankDistribution& for_class(int c) const;
  int k_max() const;
};

struct SoftmaxCeResult {
  Scalar loss = 0.0;
  Vector grad;
};

// Plain softmax cross-entropy in the log domain (no clamping needed).
SoftmaxCeResult softmax_ce(const Vector& s, int y);

struct TopkCeResult {
  Scalar loss = 0.0;
  Matrix grad_p;  // nonzero only in column y, rows 1..K_max
};

// loss = -log(sum_m w_m P[m][y]) with the inner value clamped below at 1e-12
// before the log; the gradient is exactly that of the clamped expression.
// A non-column-stochastic P can push the inner value above 1, making the
// loss negative; this is permitted, not clipped.
TopkCeResult topk_ce_loss(const Matrix& p, int y, const RankDistribution& pk);

struct SmTopkResult {
  Scalar loss = 0.0;
  Vector grad_s;
  Matrix grad_p;
};

// Mixture of softmax cross-entropy (the top-1 component) and the top-k
// cross-entropy over components k >= 2, evaluated exactly as written: the
// k >= 2 weights are not renormalized, which only shifts the log by a
// constant. P's columns must align with the classes of s.
SmTopkResult sm_topk_loss(const Vector& s, const Matrix& p, int y, const RankDistribution& pk);

struct TruncationResult {
  std::vector<int> selected;  // class indices in descending score order
  Vector sub_scores;
  int label_position = 0;  // position of the ground truth within selected
};

// Indices of the m largest scores (ties to the lower class index); if the
// ground truth is missing, it replaces the lowest-scoring selected class and
// keeps its original score in the re-sorted selection.
TruncationResult truncate_topm(const Vector& s, int y, int m);

enum class LossMode { PureTopk, SmTopk, SoftmaxBaseline };

const char* to_string(LossMode mode);
LossMode loss_mode_from_string(const std::string& s);

struct LossResult {
  Scalar loss = 0.0;
  Vector grad;  // w.r.t. all n scores
  bool operator_converged = true;
};

// Full pipeline: truncate to the top-m scores (ground truth forced in), rank
// the sub-scores with the configured operator, evaluate the configured loss
// and chain the gradients back onto the n-vector. The softmax component of
// SmTopk always uses all n scores; classes outside the selection receive
// gradient only through it.
LossResult loss_forward_backward(const Vector& s, int y, const RankDistribution& pk,
                                 const OperatorConfig& config, int m, LossMode mode,
                                 NetworkCache& nets);

// Default truncation size: 16 up to 1000 classes, 50 above.
int default_truncation(int n_classes);

}  // namespace softperm

#endif  // SOFTPERM_LOSS_HPP
