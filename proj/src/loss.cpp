#include "softperm/loss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace softperm {

namespace {
constexpr Scalar kLogClamp = 1e-12;
}

int RankDistribution::k_max() const {
  int k = 0;
  for (int i = 0; i < size(); ++i)
    if (p[static_cast<size_t>(i)] > 0.0) k = i + 1;
  return k;
}

RankDistribution make_rank_distribution(std::vector<Scalar> weights, Scalar tol) {
  if (weights.empty()) throw std::invalid_argument("pk: must hold at least one weight");
  Scalar sum = 0.0;
  for (Scalar w : weights) {
    if (!std::isfinite(w) || w < 0.0) throw std::invalid_argument("pk: weights must be non-negative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > tol)
    throw std::invalid_argument("pk: weights must sum to 1 (got " + std::to_string(sum) + ")");
  for (Scalar& w : weights) w /= sum;
  RankDistribution pk{std::move(weights)};
  if (pk.k_max() == 0) throw std::invalid_argument("pk: needs a positive weight");
  return pk;
}

std::vector<Scalar> rank_weights(const RankDistribution& pk) {
  std::vector<Scalar> w(static_cast<size_t>(pk.size()), 0.0);
  Scalar acc = 0.0;
  for (int m = pk.size(); m >= 1; --m) {
    acc += pk(m);
    w[static_cast<size_t>(m - 1)] = acc;
  }
  return w;
}

const RankDistribution& PerClassRankDistributions::for_class(int c) const {
  auto it = per_class.find(c);
  return it != per_class.end() ? it->second : fallback;
}

int PerClassRankDistributions::k_max() const {
  int k = fallback.k_max();
  for (const auto& [c, pk] : per_class) k = std::max(k, pk.k_max());
  return k;
}

SoftmaxCeResult softmax_ce(const Vector& s, int y) {
  if (y < 0 || y >= s.size()) throw std::invalid_argument("softmax_ce: label out of range");
  require_finite(s, "softmax_ce scores");
  const Scalar m = s.maxCoeff();
  const Scalar lse = std::log(((s.array() - m).exp()).sum());
  SoftmaxCeResult res;
  res.loss = lse - (s(y) - m);
  res.grad = ((s.array() - m - lse).exp()).matrix();
  res.grad(y) -= 1.0;
  return res;
}

TopkCeResult topk_ce_loss(const Matrix& p, int y, const RankDistribution& pk) {
  if (y < 0 || y >= p.cols()) throw std::invalid_argument("topk_ce_loss: label out of range");
  const int k_max = pk.k_max();
  if (p.rows() < k_max)
    throw std::invalid_argument("topk_ce_loss: P needs at least K_max rows");

  const std::vector<Scalar> w = rank_weights(pk);
  Scalar inner = 0.0;
  for (int m = 1; m <= k_max; ++m) inner += w[static_cast<size_t>(m - 1)] * p(m - 1, y);

  TopkCeResult res;
  res.loss = -std::log(std::max(inner, kLogClamp));
  res.grad_p = Matrix::Zero(p.rows(), p.cols());
  if (inner > kLogClamp)
    for (int m = 1; m <= k_max; ++m) res.grad_p(m - 1, y) = -w[static_cast<size_t>(m - 1)] / inner;
  return res;
}

SmTopkResult sm_topk_loss(const Vector& s, const Matrix& p, int y, const RankDistribution& pk) {
  if (p.cols() != s.size())
    throw std::invalid_argument("sm_topk_loss: P columns must match score length");
  const Scalar pk1 = pk(1);
  if (pk1 < 0.0 || pk1 > 1.0) throw std::invalid_argument("sm_topk_loss: P_K(1) outside [0,1]");

  SmTopkResult res;
  res.grad_s = Vector::Zero(s.size());
  res.grad_p = Matrix::Zero(p.rows(), p.cols());

  const SoftmaxCeResult ce = softmax_ce(s, y);
  res.loss = pk1 * ce.loss;
  res.grad_s = pk1 * ce.grad;

  if (pk1 >= 1.0) return res;  // no top-k components left

  const int k_max = pk.k_max();
  if (p.rows() < k_max) throw std::invalid_argument("sm_topk_loss: P needs at least K_max rows");

  // w2_m = sum_{k >= max(m, 2)} P_K(k): rank weights with the top-1
  // component removed but not renormalized.
  std::vector<Scalar> w2 = rank_weights(pk);
  if (!w2.empty()) w2[0] = 1.0 - pk1;

  Scalar inner = 0.0;
  for (int m = 1; m <= k_max; ++m) inner += w2[static_cast<size_t>(m - 1)] * p(m - 1, y);
  res.loss -= (1.0 - pk1) * std::log(std::max(inner, kLogClamp));
  if (inner > kLogClamp)
    for (int m = 1; m <= k_max; ++m)
      res.grad_p(m - 1, y) = -(1.0 - pk1) * w2[static_cast<size_t>(m - 1)] / inner;
  return res;
}

TruncationResult truncate_topm(const Vector& s, int y, int m) {
  const int n = static_cast<int>(s.size());
  if (m < 1 || m > n) throw std::invalid_argument("truncate_topm: need 1 <= m <= n");
  if (y < 0 || y >= n) throw std::invalid_argument("truncate_topm: label out of range");

  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return s(a) > s(b); });

  std::vector<int> selected(order.begin(), order.begin() + m);
  if (std::find(selected.begin(), selected.end(), y) == selected.end()) {
    selected[static_cast<size_t>(m - 1)] = y;  // replace the lowest of the top-m
    std::stable_sort(selected.begin(), selected.end(), [&](int a, int b) {
      return s(a) != s(b) ? s(a) > s(b) : a < b;
    });
  }

  TruncationResult res;
  res.selected = std::move(selected);
  res.sub_scores.resize(m);
  for (int i = 0; i < m; ++i) res.sub_scores(i) = s(res.selected[static_cast<size_t>(i)]);
  const auto it = std::find(res.selected.begin(), res.selected.end(), y);
  res.label_position = static_cast<int>(it - res.selected.begin());
  return res;
}

const char* to_string(LossMode mode) {
  switch (mode) {
    case LossMode::PureTopk: return "pure-topk";
    case LossMode::SmTopk: return "sm-topk";
    case LossMode::SoftmaxBaseline: return "softmax-baseline";
  }
  return "unknown";
}

LossMode loss_mode_from_string(const std::string& s) {
  if (s == "pure-topk") return LossMode::PureTopk;
  if (s == "sm-topk" || s == "sm+topk") return LossMode::SmTopk;
  if (s == "softmax-baseline" || s == "softmax") return LossMode::SoftmaxBaseline;
  throw std::invalid_argument("unknown loss mode: " + s);
}

LossResult loss_forward_backward(const Vector& s, int y, const RankDistribution& pk,
                                 const OperatorConfig& config, int m, LossMode mode,
                                 NetworkCache& nets) {
  const int n = static_cast<int>(s.size());
  if (y < 0 || y >= n) throw std::invalid_argument("loss: label out of range");

  LossResult res;
  res.grad = Vector::Zero(n);

  if (mode == LossMode::SoftmaxBaseline) {
    const SoftmaxCeResult ce = softmax_ce(s, y);
    res.loss = ce.loss;
    res.grad = ce.grad;
    return res;
  }

  const int k_max = pk.k_max();
  const int m_eff = std::min(m, n);
  if (m_eff < k_max) throw std::invalid_argument("loss: truncation size m must be >= K_max");

  const Scalar pk1 = pk(1);
  const Scalar topk_weight = mode == LossMode::SmTopk ? 1.0 - pk1 : 1.0;

  if (mode == LossMode::SmTopk) {
    const SoftmaxCeResult ce = softmax_ce(s, y);
    res.loss = pk1 * ce.loss;
    res.grad = pk1 * ce.grad;
    if (topk_weight <= 0.0) return res;  // pure softmax; skip the ranking pass
  }

  const TruncationResult trunc = truncate_topm(s, y, m_eff);
  OperatorTape tape;
  const RelaxedPermutation perm = rank_topk(trunc.sub_scores, k_max, config, nets, &tape);
  res.operator_converged = perm.converged;

  std::vector<Scalar> w = rank_weights(pk);
  if (mode == LossMode::SmTopk) w[0] = 1.0 - pk1;

  Scalar inner = 0.0;
  for (int r = 1; r <= k_max; ++r)
    inner += w[static_cast<size_t>(r - 1)] * perm.p(r - 1, trunc.label_position);
  res.loss -= topk_weight * std::log(std::max(inner, kLogClamp));

  if (inner > kLogClamp) {
    Matrix upstream = Matrix::Zero(k_max, m_eff);
    for (int r = 1; r <= k_max; ++r)
      upstream(r - 1, trunc.label_position) = -topk_weight * w[static_cast<size_t>(r - 1)] / inner;
    const Vector d_sub = backprop(tape, upstream);
    for (int i = 0; i < m_eff; ++i) res.grad(trunc.selected[static_cast<size_t>(i)]) += d_sub(i);
  }
  return res;
}

int default_truncation(int n_classes) { return n_classes <= 1000 ? 16 : 50; }

}  // namespace softperm
