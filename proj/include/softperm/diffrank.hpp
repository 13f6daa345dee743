#ifndef SOFTPERM_DIFFRANK_HPP
#define SOFTPERM_DIFFRANK_HPP

#include "softperm/core.hpp"
#include "softperm/selnet.hpp"

#include <map>
#include <tuple>
#include <vector>

namespace softperm {

enum class RankOperator { NeuralSort, SoftSort, Sinkhorn, DiffSortNet };

const char* to_string(RankOperator op);
RankOperator rank_operator_from_string(const std::string& s);

struct SinkhornParams {
  Scalar epsilon = 1e-2;
  Scalar tol = 1e-6;
  int max_iters = 500;
};

struct OperatorConfig {
  RankOperator op = RankOperator::NeuralSort;
  Scalar temperature = 1.0;
  SinkhornParams sinkhorn;
  NetworkKind network_kind = NetworkKind::SplitterSelection;

  void validate() const;
};

// Row-stochastic k x n matrix; entry (m, c) is the relaxed probability that
// class c occupies descending rank m.
struct RelaxedPermutation {
  int k = 0;
  int n = 0;
  Matrix p;
  bool converged = true;  // false only when Sinkhorn hits max_iters
};

namespace detail {
struct CompAlpha {
  int lo = 0;
  int hi = 0;
  Scalar alpha = 0.0;
};
}  // namespace detail

// Saved intermediates of one forward pass, sufficient for the exact gradient
// of <upstream, P> with respect to the scores.
struct OperatorTape {
  RankOperator op = RankOperator::NeuralSort;
  Vector scores;
  Scalar temperature = 0.0;
  int k = 0;

  // NeuralSort / SoftSort: the materialized softmax rows.
  Matrix rows;
  std::vector<int> sigma;  // SoftSort: descending argsort of the scores

  // Sinkhorn: cost matrix, the dual warm start and the potential iterates.
  // sigma is the descending argsort of the normalized scores that the warm
  // start was built from.
  Matrix cost;
  Vector g_init;
  std::vector<Vector> f_hist;
  std::vector<Vector> g_hist;
  Vector f_final;
  Vector anchors;
  Vector normalized;
  Scalar eps = 0.0;
  Scalar range = 0.0;
  int argmin = 0;
  int argmax = 0;
  Matrix plan;  // final n x n transport plan
  bool converged = true;

  // DiffSortNet: per-layer comparators with their mixing coefficients, the
  // wire values entering each layer, and the suffix products
  // E * L_t * ... * L_(l+1) needed by the reverse matrix-chain pass.
  int wires = 0;
  std::vector<std::vector<detail::CompAlpha>> comp_layers;
  std::vector<Vector> wire_values;  // t+1 vectors of length `wires`
  std::vector<Matrix> suffix;       // suffix[l] = E * L_t * ... * L_(l+1), k x wires
};

// Deterministic NeuralSort, first k rows only:
// row i = softmax_j(((n + 1 - 2i) s_j - sum_q |s_j - s_q|) / tau).
RelaxedPermutation neuralsort_topk(const Vector& s, Scalar tau, int k,
                                   OperatorTape* tape = nullptr);

// SoftSort, first k rows only: row i = softmax_j(-|s_(i) - s_j| / tau) with
// s_(i) the i-th largest score.
RelaxedPermutation softsort_topk(const Vector& s, Scalar tau, int k,
                                 OperatorTape* tape = nullptr);

// Entropy-regularized transport between the scores (min-max normalized to
// [0,1]) and a descending uniform anchor grid, squared-difference cost,
// balanced in the log domain. The potentials start from the exact duals of
// the unregularized problem (closed form for this sorted 1-D cost), so the
// iteration converges quickly at any epsilon; the fixed point is unchanged.
// Returns the full n x n plan with rows normalized to 1 by a final row
// update. Non-convergence within max_iters sets converged = false rather
// than throwing. With tol = 0 the iteration count is fixed by the
// parameters, so the recorded pass is a smooth function of the scores.
RelaxedPermutation sinkhorn_sort(const Vector& s, const SinkhornParams& params,
                                 OperatorTape* tape = nullptr);

// Differentiable evaluation of a comparator network: every comparator mixes
// its two wires with alpha = logistic((v_lo - v_hi) / tau), and P is the
// back-to-front product of the first k rows of the last layer with the
// earlier sparse layer matrices. Sentinel wires of padded networks carry a
// finite value far enough below min(s) that their mixes saturate exactly.
RelaxedPermutation diffsortnet_topk(const Vector& s, const ComparatorNetwork& net, Scalar tau,
                                    int k, OperatorTape* tape = nullptr);

// Exact gradient of <upstream, P> w.r.t. the scores of the recorded pass.
// upstream must be k x n (n x n for Sinkhorn; k x n is zero-extended).
Vector backprop(const OperatorTape& tape, const Matrix& upstream);

// Reference n x n relaxed permutation of the same network, assembled
// front-to-back (layer 1 applied to the identity first). Quadratic per
// layer; the slow side of the equivalence pair.
RelaxedPermutation diffsortnet_full(const Vector& s, const ComparatorNetwork& net, Scalar tau);

// Sparse layer matrix of one relaxed comparator layer (identity elsewhere).
SparseLayerMatrix relaxed_layer_matrix(int wires, const std::vector<detail::CompAlpha>& comps);

// Checks that the k x n back-to-front product matches the first k rows of
// the full n x n front-to-back product.
bool topk_rows_equivalence_check(const ComparatorNetwork& net, const Vector& s, Scalar tau,
                                 int k, Scalar tol = 1e-9);

// Caches constructed networks so repeated loss evaluations of equal width
// reuse them.
class NetworkCache {
 public:
  const ComparatorNetwork& get(NetworkKind kind, int width, int k);

 private:
  std::map<std::tuple<NetworkKind, int, int>, ComparatorNetwork> cache_;
};

// Uniform entry point keyed by the config; slices Sinkhorn's full plan to the
// first k rows. The tape still records the full pass.
RelaxedPermutation rank_topk(const Vector& s, int k, const OperatorConfig& config,
                             NetworkCache& nets, OperatorTape* tape = nullptr);

}  // namespace softperm

#endif  // SOFTPERM_DIFFRANK_HPP
