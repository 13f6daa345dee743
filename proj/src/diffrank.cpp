#include "softperm/diffrank.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace softperm {

namespace {

Scalar logistic(Scalar x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (1.0 + e);
}

Scalar sign(Scalar x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Descending argsort, ties broken by lower index.
std::vector<int> argsort_desc(const Vector& s) {
  std::vector<int> idx(static_cast<size_t>(s.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return s(a) > s(b); });
  return idx;
}

Scalar log_sum_exp(const Vector& v) {
  const Scalar m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log(((v.array() - m).exp()).sum());
}

void check_topk_args(const Vector& s, Scalar tau, int k) {
  require_finite(s, "ranking operator scores");
  if (tau <= 0.0) throw std::invalid_argument("ranking operator: temperature must be positive");
  if (k < 1 || k > s.size())
    throw std::invalid_argument("ranking operator: need 1 <= k <= n");
}

}  // namespace

const char* to_string(RankOperator op) {
  switch (op) {
    case RankOperator::NeuralSort: return "neuralsort";
    case RankOperator::SoftSort: return "softsort";
    case RankOperator::Sinkhorn: return "sinkhorn";
    case RankOperator::DiffSortNet: return "diffsortnet";
  }
  return "unknown";
}

RankOperator rank_operator_from_string(const std::string& s) {
  if (s == "neuralsort") return RankOperator::NeuralSort;
  if (s == "softsort") return RankOperator::SoftSort;
  if (s == "sinkhorn") return RankOperator::Sinkhorn;
  if (s == "diffsortnet") return RankOperator::DiffSortNet;
  throw std::invalid_argument("unknown ranking operator: " + s);
}

void OperatorConfig::validate() const {
  if (temperature <= 0.0) throw std::invalid_argument("operator config: temperature must be positive");
  if (sinkhorn.epsilon <= 0.0) throw std::invalid_argument("operator config: epsilon must be positive");
  if (sinkhorn.tol < 0.0) throw std::invalid_argument("operator config: tol must be non-negative");
  if (sinkhorn.max_iters < 1) throw std::invalid_argument("operator config: max_iters must be >= 1");
}

RelaxedPermutation neuralsort_topk(const Vector& s, Scalar tau, int k, OperatorTape* tape) {
  check_topk_args(s, tau, k);
  const int n = static_cast<int>(s.size());

  Vector abs_dist(n);
  for (int j = 0; j < n; ++j) abs_dist(j) = (s.array() - s(j)).abs().sum();

  Matrix p(k, n);
  Vector logits(n);
  for (int i = 0; i < k; ++i) {
    const Scalar coeff = static_cast<Scalar>(n + 1 - 2 * (i + 1));
    logits = coeff * s - abs_dist;
    p.row(i) = softmax_row(logits, tau).transpose();
  }

  if (tape) {
    tape->op = RankOperator::NeuralSort;
    tape->scores = s;
    tape->temperature = tau;
    tape->k = k;
    tape->rows = p;
  }
  return {k, n, std::move(p), true};
}

RelaxedPermutation softsort_topk(const Vector& s, Scalar tau, int k, OperatorTape* tape) {
  check_topk_args(s, tau, k);
  const int n = static_cast<int>(s.size());
  const std::vector<int> sigma = argsort_desc(s);

  Matrix p(k, n);
  Vector logits(n);
  for (int i = 0; i < k; ++i) {
    const Scalar si = s(sigma[static_cast<size_t>(i)]);
    logits = -(s.array() - si).abs();
    p.row(i) = softmax_row(logits, tau).transpose();
  }

  if (tape) {
    tape->op = RankOperator::SoftSort;
    tape->scores = s;
    tape->temperature = tau;
    tape->k = k;
    tape->rows = p;
    tape->sigma = sigma;
  }
  return {k, n, std::move(p), true};
}

RelaxedPermutation sinkhorn_sort(const Vector& s, const SinkhornParams& params,
                                 OperatorTape* tape) {
  require_finite(s, "sinkhorn scores");
  if (params.epsilon <= 0.0) throw std::invalid_argument("sinkhorn: epsilon must be positive");
  if (params.max_iters < 1) throw std::invalid_argument("sinkhorn: max_iters must be >= 1");
  const int n = static_cast<int>(s.size());

  if (n == 1) {
    Matrix p = Matrix::Ones(1, 1);
    if (tape) {
      *tape = OperatorTape{};
      tape->op = RankOperator::Sinkhorn;
      tape->scores = s;
      tape->k = 1;
      tape->plan = p;
      tape->range = 0.0;
      tape->converged = true;
    }
    return {1, 1, std::move(p), true};
  }

  int argmin = 0, argmax = 0;
  for (int j = 1; j < n; ++j) {
    if (s(j) < s(argmin)) argmin = j;
    if (s(j) > s(argmax)) argmax = j;
  }
  const Scalar range = s(argmax) - s(argmin);
  Vector normalized(n);
  if (range > 0.0)
    normalized = (s.array() - s(argmin)) / range;
  else
    normalized.setConstant(0.5);

  Vector anchors(n);
  for (int i = 0; i < n; ++i) anchors(i) = 1.0 - static_cast<Scalar>(i) / static_cast<Scalar>(n - 1);

  Matrix cost(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const Scalar d = anchors(i) - normalized(j);
      cost(i, j) = d * d;
    }

  // Warm start from the exact duals of the unregularized problem. The
  // optimal plan matches anchor rank i to score rank i; consecutive-tight
  // duals g_(r) = sum_{i<r} C(i, i+1) - C(i, i) are feasible by the Monge
  // property of the sorted quadratic cost and complementary-slack on the
  // matching, hence optimal. They put the potentials in the right basin for
  // any epsilon; without them the alternating updates need of the order of
  // 1/epsilon iterations to resolve assignment chains.
  const std::vector<int> order = argsort_desc(normalized);
  Vector g = Vector::Zero(n);
  {
    Scalar acc = 0.0;
    for (int r = 1; r < n; ++r) {
      const Scalar prev = anchors(r - 1) - normalized(order[static_cast<size_t>(r - 1)]);
      const Scalar cross = anchors(r - 1) - normalized(order[static_cast<size_t>(r)]);
      acc += cross * cross - prev * prev;
      g(order[static_cast<size_t>(r)]) = acc / params.epsilon;
    }
  }
  const Vector g_init = g;

  const Matrix log_kernel = -cost / params.epsilon;
  std::vector<Vector> f_hist, g_hist;
  Vector f = Vector::Zero(n);
  bool converged = false;
  for (int it = 0; it < params.max_iters; ++it) {
    for (int i = 0; i < n; ++i) f(i) = -log_sum_exp(log_kernel.row(i).transpose() + g);
    for (int j = 0; j < n; ++j) g(j) = -log_sum_exp(log_kernel.col(j) + f);
    f_hist.push_back(f);
    g_hist.push_back(g);
    if (params.tol <= 0.0) continue;  // fixed unroll
    // Columns are exact after the g update; the residual lives in the rows.
    Scalar dev = 0.0;
    for (int i = 0; i < n; ++i) {
      const Scalar row_sum = ((log_kernel.row(i).transpose() + g).array() + f(i)).exp().sum();
      dev = std::max(dev, std::abs(row_sum - 1.0));
    }
    if (dev < params.tol) {
      converged = true;
      break;
    }
  }

  // Final row normalization so the returned plan is exactly row-stochastic.
  Vector f_final(n);
  for (int i = 0; i < n; ++i)
    f_final(i) = -log_sum_exp(log_kernel.row(i).transpose() + g);
  Matrix p(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) p(i, j) = std::exp(f_final(i) + log_kernel(i, j) + g(j));

  if (tape) {
    *tape = OperatorTape{};
    tape->op = RankOperator::Sinkhorn;
    tape->scores = s;
    tape->k = n;
    tape->cost = std::move(cost);
    tape->g_init = g_init;
    tape->sigma = order;
    tape->f_hist = std::move(f_hist);
    tape->g_hist = std::move(g_hist);
    tape->f_final = std::move(f_final);
    tape->anchors = std::move(anchors);
    tape->normalized = std::move(normalized);
    tape->eps = params.epsilon;
    tape->range = range;
    tape->argmin = argmin;
    tape->argmax = argmax;
    tape->plan = p;
    tape->converged = converged;
  }
  return {n, n, std::move(p), converged};
}

SparseLayerMatrix relaxed_layer_matrix(int wires, const std::vector<detail::CompAlpha>& comps) {
  SparseLayerMatrix m;
  m.n = wires;
  std::vector<bool> touched(static_cast<size_t>(wires), false);
  for (const auto& c : comps) {
    touched[static_cast<size_t>(c.lo)] = true;
    touched[static_cast<size_t>(c.hi)] = true;
  }
  for (const auto& c : comps) {
    m.entries.push_back({c.lo, c.lo, c.alpha});
    m.entries.push_back({c.lo, c.hi, 1.0 - c.alpha});
    m.entries.push_back({c.hi, c.lo, 1.0 - c.alpha});
    m.entries.push_back({c.hi, c.hi, c.alpha});
  }
  for (int w = 0; w < wires; ++w)
    if (!touched[static_cast<size_t>(w)]) m.entries.push_back({w, w, 1.0});
  std::sort(m.entries.begin(), m.entries.end(), [](const SparseEntry& a, const SparseEntry& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  return m;
}

namespace {

// Sentinel for padded wires: far enough below min(s) that every mix against
// it saturates to an exact 0/1 coefficient at this temperature.
Scalar sentinel_value(const Vector& s, Scalar tau) {
  const Scalar lo = s.minCoeff();
  const Scalar hi = s.maxCoeff();
  return lo - (40.0 * tau + (hi - lo) + 1.0);
}

struct DiffSortForward {
  int wires = 0;
  std::vector<std::vector<detail::CompAlpha>> comp_layers;
  std::vector<Vector> wire_values;  // values entering layer l at index l
};

DiffSortForward relaxed_value_pass(const Vector& s, const ComparatorNetwork& net, Scalar tau) {
  DiffSortForward fwd;
  fwd.wires = net.wires();
  Vector v = Vector::Constant(fwd.wires, sentinel_value(s, tau));
  v.head(s.size()) = s;
  fwd.wire_values.push_back(v);
  for (const auto& layer : net.layers) {
    std::vector<detail::CompAlpha> comps;
    comps.reserve(layer.size());
    for (const auto& c : layer) {
      const Scalar alpha = logistic((v(c.lo) - v(c.hi)) / tau);
      const Scalar a = v(c.lo), b = v(c.hi);
      v(c.lo) = alpha * a + (1.0 - alpha) * b;
      v(c.hi) = (1.0 - alpha) * a + alpha * b;
      comps.push_back({c.lo, c.hi, alpha});
    }
    fwd.comp_layers.push_back(std::move(comps));
    fwd.wire_values.push_back(v);
  }
  return fwd;
}

// M <- M * layer, column mixing in place.
void apply_layer_right(Matrix& m, const std::vector<detail::CompAlpha>& comps) {
  for (const auto& c : comps) {
    const Vector lo = m.col(c.lo);
    const Vector hi = m.col(c.hi);
    m.col(c.lo) = c.alpha * lo + (1.0 - c.alpha) * hi;
    m.col(c.hi) = (1.0 - c.alpha) * lo + c.alpha * hi;
  }
}

}  // namespace

RelaxedPermutation diffsortnet_topk(const Vector& s, const ComparatorNetwork& net, Scalar tau,
                                    int k, OperatorTape* tape) {
  check_topk_args(s, tau, k);
  if (static_cast<int>(s.size()) != net.width)
    throw std::invalid_argument("diffsortnet_topk: scores length must equal network width");
  if (k > net.k) throw std::invalid_argument("diffsortnet_topk: k exceeds network selection size");
  const int n = net.width;

  DiffSortForward fwd = relaxed_value_pass(s, net, tau);
  const int t = static_cast<int>(fwd.comp_layers.size());

  // P = E * L_t * ... * L_1, evaluated left to right so the accumulator
  // stays k x wires.
  Matrix m = Matrix::Zero(k, fwd.wires);
  for (int i = 0; i < k; ++i) m(i, i) = 1.0;
  std::vector<Matrix> suffix;
  if (tape) {
    suffix.resize(static_cast<size_t>(t) + 1);
    suffix[static_cast<size_t>(t)] = m;
  }
  for (int l = t - 1; l >= 0; --l) {
    apply_layer_right(m, fwd.comp_layers[static_cast<size_t>(l)]);
    if (tape) suffix[static_cast<size_t>(l)] = m;
  }

  Matrix p = m.leftCols(n);
  if (tape) {
    *tape = OperatorTape{};
    tape->op = RankOperator::DiffSortNet;
    tape->scores = s;
    tape->temperature = tau;
    tape->k = k;
    tape->wires = fwd.wires;
    tape->comp_layers = std::move(fwd.comp_layers);
    tape->wire_values = std::move(fwd.wire_values);
    tape->suffix = std::move(suffix);
  }
  return {k, n, std::move(p), true};
}

namespace {

Vector backprop_neuralsort(const OperatorTape& tape, const Matrix& upstream) {
  const Vector& s = tape.scores;
  const int n = static_cast<int>(s.size());
  const int k = tape.k;
  const Scalar tau = tape.temperature;

  // Softmax backward per materialized row.
  Matrix g_logits(k, n);
  for (int i = 0; i < k; ++i) {
    const Scalar dot = upstream.row(i).dot(tape.rows.row(i));
    g_logits.row(i) = (tape.rows.row(i).array() * (upstream.row(i).array() - dot)).matrix();
  }

  Vector col_sum = g_logits.colwise().sum().transpose();
  Vector h(n);
  for (int j = 0; j < n; ++j) {
    Scalar acc = 0.0;
    for (int i = 0; i < k; ++i) acc += g_logits(i, j) * static_cast<Scalar>(n + 1 - 2 * (i + 1));
    h(j) = acc;
  }

  Vector grad = Vector::Zero(n);
  for (int j = 0; j < n; ++j) {
    Scalar sign_sum = 0.0;
    Scalar cross = 0.0;
    for (int q = 0; q < n; ++q) {
      if (q == j) continue;
      sign_sum += sign(s(j) - s(q));
      cross += col_sum(q) * sign(s(q) - s(j));
    }
    grad(j) = (h(j) - col_sum(j) * sign_sum + cross) / tau;
  }
  return grad;
}

Vector backprop_softsort(const OperatorTape& tape, const Matrix& upstream) {
  const Vector& s = tape.scores;
  const int n = static_cast<int>(s.size());
  const int k = tape.k;
  const Scalar tau = tape.temperature;

  Matrix g_logits(k, n);
  for (int i = 0; i < k; ++i) {
    const Scalar dot = upstream.row(i).dot(tape.rows.row(i));
    g_logits.row(i) = (tape.rows.row(i).array() * (upstream.row(i).array() - dot)).matrix();
  }

  Vector grad = Vector::Zero(n);
  for (int i = 0; i < k; ++i) {
    const int anchor = tape.sigma[static_cast<size_t>(i)];
    const Scalar si = s(anchor);
    Scalar through_anchor = 0.0;
    for (int j = 0; j < n; ++j) {
      grad(j) += g_logits(i, j) * sign(si - s(j)) / tau;
      through_anchor -= g_logits(i, j) * sign(si - s(j)) / tau;
    }
    grad(anchor) += through_anchor;
  }
  return grad;
}

Vector backprop_sinkhorn(const OperatorTape& tape, const Matrix& upstream) {
  const Vector& s = tape.scores;
  const int n = static_cast<int>(s.size());
  if (n == 1) return Vector::Zero(1);

  Matrix u = Matrix::Zero(n, n);
  u.topRows(upstream.rows()) = upstream;

  // The gradient w.r.t. the cost accumulates one kernel term per recorded
  // update; each iteration contributes through its own epsilon.
  Matrix c_bar = Matrix::Zero(n, n);

  // P_ij = exp(f_final_i - C_ij / eps + g_T_j).
  const Matrix up = u.cwiseProduct(tape.plan);
  Vector f_bar = up.rowwise().sum();
  Vector g_bar = up.colwise().sum().transpose();
  c_bar -= up / tape.eps;

  // Final row normalization f_final = -LSE_j(-C/eps + g_T); its softmax
  // weights are exactly the plan rows.
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const Scalar w = tape.plan(i, j);
      c_bar(i, j) += f_bar(i) * w / tape.eps;
    }
  Vector g_accum = g_bar;
  for (int j = 0; j < n; ++j) {
    Scalar acc = 0.0;
    for (int i = 0; i < n; ++i) acc += f_bar(i) * tape.plan(i, j);
    g_accum(j) -= acc;
  }

  // Reverse the recorded iterations.
  const int iters = static_cast<int>(tape.f_hist.size());
  const Scalar eps = tape.eps;
  Vector f_grad = Vector::Zero(n);
  Vector g_grad = g_accum;
  for (int t = iters - 1; t >= 0; --t) {
    const Vector& ft = tape.f_hist[static_cast<size_t>(t)];
    const Vector& gt = tape.g_hist[static_cast<size_t>(t)];
    // g_t = -LSE_i(-C/eps + f_t_i), weights V_ij = exp(g_t_j - C_ij/eps + f_t_i).
    f_grad.setZero();
    for (int j = 0; j < n; ++j) {
      if (g_grad(j) == 0.0) continue;
      for (int i = 0; i < n; ++i) {
        const Scalar v = std::exp(gt(j) - tape.cost(i, j) / eps + ft(i));
        c_bar(i, j) += g_grad(j) * v / eps;
        f_grad(i) -= g_grad(j) * v;
      }
    }
    // f_t = -LSE_j(-C/eps + g_{t-1}_j).
    const Vector& g_prev = t > 0 ? tape.g_hist[static_cast<size_t>(t - 1)] : tape.g_init;
    g_grad.setZero();
    for (int i = 0; i < n; ++i) {
      if (f_grad(i) == 0.0) continue;
      for (int j = 0; j < n; ++j) {
        const Scalar w = std::exp(ft(i) - tape.cost(i, j) / eps + g_prev(j));
        c_bar(i, j) += f_grad(i) * w / eps;
        g_grad(j) -= f_grad(i) * w;
      }
    }
  }

  // C_ij = (a_i - sn_j)^2.
  Vector sn_bar = Vector::Zero(n);
  for (int j = 0; j < n; ++j) {
    Scalar acc = 0.0;
    for (int i = 0; i < n; ++i)
      acc += c_bar(i, j) * 2.0 * (tape.normalized(j) - tape.anchors(i));
    sn_bar(j) = acc;
  }

  // Warm-start path: g_init(sigma_r) = (1/eps) * sum_{i<r} C(i, sigma_{i+1})
  // - C(i, sigma_i) in sorted coordinates, so each prefix term collects the
  // suffix sum of the incoming gradient.
  {
    Scalar suffix = 0.0;
    for (int r = n - 1; r >= 1; --r) {
      suffix += g_grad(tape.sigma[static_cast<size_t>(r)]) / eps;
      const int jc = tape.sigma[static_cast<size_t>(r)];      // appears as C(r-1, sigma_r)
      const int jp = tape.sigma[static_cast<size_t>(r - 1)];  // appears as C(r-1, sigma_{r-1})
      sn_bar(jc) += suffix * 2.0 * (tape.normalized(jc) - tape.anchors(r - 1));
      sn_bar(jp) -= suffix * 2.0 * (tape.normalized(jp) - tape.anchors(r - 1));
    }
  }

  Vector grad = Vector::Zero(n);
  if (tape.range > 0.0) {
    const Scalar r = tape.range;
    const Scalar smin = s(tape.argmin), smax = s(tape.argmax);
    for (int j = 0; j < n; ++j) grad(j) += sn_bar(j) / r;
    Scalar dmin = 0.0, dmax = 0.0;
    for (int j = 0; j < n; ++j) {
      dmin += sn_bar(j) * (s(j) - smax) / (r * r);
      dmax += sn_bar(j) * (smin - s(j)) / (r * r);
    }
    grad(tape.argmin) += dmin;
    grad(tape.argmax) += dmax;
  }
  return grad;
}

Vector backprop_diffsortnet(const OperatorTape& tape, const Matrix& upstream) {
  const int n = static_cast<int>(tape.scores.size());
  const int k = tape.k;
  const int w = tape.wires;
  const Scalar tau = tape.temperature;
  const int t = static_cast<int>(tape.comp_layers.size());

  Matrix s_bar = Matrix::Zero(k, w);
  s_bar.leftCols(n) = upstream;

  // Reverse matrix-chain pass: s_bar at stage l is the gradient w.r.t.
  // suffix[l]; comparator coefficients pick up
  // sum_i (suffix[l][i,lo]-suffix[l][i,hi]) * (s_bar[i,lo]-s_bar[i,hi]).
  std::vector<std::vector<Scalar>> alpha_bar(static_cast<size_t>(t));
  for (int l = 0; l < t; ++l) {
    const auto& comps = tape.comp_layers[static_cast<size_t>(l)];
    auto& bars = alpha_bar[static_cast<size_t>(l)];
    bars.resize(comps.size());
    const Matrix& suf = tape.suffix[static_cast<size_t>(l) + 1];
    for (size_t c = 0; c < comps.size(); ++c) {
      const int lo = comps[c].lo, hi = comps[c].hi;
      Scalar acc = 0.0;
      for (int i = 0; i < k; ++i)
        acc += (suf(i, lo) - suf(i, hi)) * (s_bar(i, lo) - s_bar(i, hi));
      bars[c] = acc;
    }
    // s_bar <- s_bar * layer (the layer matrix is symmetric).
    for (const auto& c : comps) {
      const Vector lo = s_bar.col(c.lo);
      const Vector hi = s_bar.col(c.hi);
      s_bar.col(c.lo) = c.alpha * lo + (1.0 - c.alpha) * hi;
      s_bar.col(c.hi) = (1.0 - c.alpha) * lo + c.alpha * hi;
    }
  }

  // Value pass backward: alphas depend on the wire values entering their layer.
  Vector v_bar = Vector::Zero(w);
  for (int l = t - 1; l >= 0; --l) {
    const auto& comps = tape.comp_layers[static_cast<size_t>(l)];
    const Vector& v_in = tape.wire_values[static_cast<size_t>(l)];
    for (size_t c = 0; c < comps.size(); ++c) {
      const int lo = comps[c].lo, hi = comps[c].hi;
      const Scalar alpha = comps[c].alpha;
      const Scalar total =
          alpha_bar[static_cast<size_t>(l)][c] + (v_bar(lo) - v_bar(hi)) * (v_in(lo) - v_in(hi));
      const Scalar z_bar = total * alpha * (1.0 - alpha) / tau;
      const Scalar blo = v_bar(lo), bhi = v_bar(hi);
      v_bar(lo) = alpha * blo + (1.0 - alpha) * bhi + z_bar;
      v_bar(hi) = (1.0 - alpha) * blo + alpha * bhi - z_bar;
    }
  }
  return v_bar.head(n);
}

}  // namespace

Vector backprop(const OperatorTape& tape, const Matrix& upstream) {
  const int n = static_cast<int>(tape.scores.size());
  if (tape.op == RankOperator::Sinkhorn) {
    // The tape records the full n x n pass; a k x n upstream (the sliced
    // view handed to the loss) is zero-extended.
    if (upstream.cols() != n || upstream.rows() < 1 || upstream.rows() > n)
      throw std::invalid_argument("backprop: upstream shape does not match the tape");
  } else if (upstream.cols() != n || upstream.rows() != tape.k) {
    throw std::invalid_argument("backprop: upstream shape does not match the tape");
  }

  switch (tape.op) {
    case RankOperator::NeuralSort: return backprop_neuralsort(tape, upstream);
    case RankOperator::SoftSort: return backprop_softsort(tape, upstream);
    case RankOperator::Sinkhorn: return backprop_sinkhorn(tape, upstream);
    case RankOperator::DiffSortNet: return backprop_diffsortnet(tape, upstream);
  }
  throw std::logic_error("backprop: unknown operator");
}

RelaxedPermutation diffsortnet_full(const Vector& s, const ComparatorNetwork& net, Scalar tau) {
  check_topk_args(s, tau, 1);
  if (static_cast<int>(s.size()) != net.width)
    throw std::invalid_argument("diffsortnet_full: scores length must equal network width");
  const int n = net.width;

  DiffSortForward fwd = relaxed_value_pass(s, net, tau);
  const int w = fwd.wires;
  Matrix front = Matrix::Identity(w, w);
  for (size_t l = 0; l < fwd.comp_layers.size(); ++l) {
    const SparseLayerMatrix layer = relaxed_layer_matrix(w, fwd.comp_layers[l]);
    apply_layer_left(layer, front);
  }
  Matrix p = front.topRows(n).leftCols(n);
  return {n, n, std::move(p), true};
}

bool topk_rows_equivalence_check(const ComparatorNetwork& net, const Vector& s, Scalar tau,
                                 int k, Scalar tol) {
  const RelaxedPermutation back = diffsortnet_topk(s, net, tau, k);
  const RelaxedPermutation front = diffsortnet_full(s, net, tau);
  const Matrix diff = back.p - front.p.topRows(k);
  return diff.cwiseAbs().maxCoeff() <= tol;
}

const ComparatorNetwork& NetworkCache::get(NetworkKind kind, int width, int k) {
  const auto key = std::make_tuple(kind, width, k);
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  ComparatorNetwork net;
  switch (kind) {
    case NetworkKind::SplitterSelection: net = build_splitter_selection(width, k); break;
    case NetworkKind::ClassicSelection: net = build_classic_selection(width, k); break;
    case NetworkKind::BitonicSort: net = build_full_sorter(width, SortFlavor::Bitonic); break;
    case NetworkKind::OddEvenSort: net = build_full_sorter(width, SortFlavor::OddEven); break;
  }
  return cache_.emplace(key, std::move(net)).first->second;
}

RelaxedPermutation rank_topk(const Vector& s, int k, const OperatorConfig& config,
                             NetworkCache& nets, OperatorTape* tape) {
  config.validate();
  const int n = static_cast<int>(s.size());
  switch (config.op) {
    case RankOperator::NeuralSort:
      return neuralsort_topk(s, config.temperature, k, tape);
    case RankOperator::SoftSort:
      return softsort_topk(s, config.temperature, k, tape);
    case RankOperator::Sinkhorn: {
      RelaxedPermutation full = sinkhorn_sort(s, config.sinkhorn, tape);
      Matrix p = full.p.topRows(k);
      return {k, n, std::move(p), full.converged};
    }
    case RankOperator::DiffSortNet: {
      const bool full_sort = config.network_kind == NetworkKind::BitonicSort ||
                             config.network_kind == NetworkKind::OddEvenSort;
      const ComparatorNetwork& net = nets.get(config.network_kind, n, full_sort ? n : k);
      return diffsortnet_topk(s, net, config.temperature, k, tape);
    }
  }
  throw std::logic_error("rank_topk: unknown operator");
}

}  // namespace softperm
