#include "softperm/core.hpp"

#include <algorithm>
#include <cmath>

namespace softperm {

SparseLayerMatrix SparseLayerMatrix::identity(int n) {
  SparseLayerMatrix m;
  m.n = n;
  m.entries.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) m.entries.push_back({i, i, 1.0});
  return m;
}

Matrix SparseLayerMatrix::to_dense() const {
  Matrix d = Matrix::Zero(n, n);
  for (const auto& e : entries) d(e.row, e.col) += e.value;
  return d;
}

void SparseLayerMatrix::validate(Scalar tol) const {
  std::vector<int> count(static_cast<size_t>(n), 0);
  std::vector<Scalar> sum(static_cast<size_t>(n), 0.0);
  for (const auto& e : entries) {
    if (e.row < 0 || e.row >= n || e.col < 0 || e.col >= n)
      throw std::invalid_argument("SparseLayerMatrix: entry out of range");
    if (e.value < -tol || e.value > 1.0 + tol)
      throw std::invalid_argument("SparseLayerMatrix: value outside [0,1]");
    count[static_cast<size_t>(e.row)]++;
    sum[static_cast<size_t>(e.row)] += e.value;
  }
  for (int r = 0; r < n; ++r) {
    if (count[static_cast<size_t>(r)] < 1 || count[static_cast<size_t>(r)] > 2)
      throw std::invalid_argument("SparseLayerMatrix: row must hold 1 or 2 entries");
    if (std::abs(sum[static_cast<size_t>(r)] - 1.0) > tol)
      throw std::invalid_argument("SparseLayerMatrix: row does not sum to 1");
  }
}

Matrix matmul_dense_sparse(const Matrix& left, const SparseLayerMatrix& right) {
  if (left.cols() != right.n)
    throw std::invalid_argument("matmul_dense_sparse: dimension mismatch");
  Matrix out = Matrix::Zero(left.rows(), right.n);
  // Entries are sorted by (row, col), so each output column accumulates its
  // contributions in ascending source-row order.
  for (const auto& e : right.entries) out.col(e.col) += e.value * left.col(e.row);
  return out;
}

void apply_layer_left(const SparseLayerMatrix& layer, Matrix& dense) {
  if (dense.rows() != layer.n)
    throw std::invalid_argument("apply_layer_left: dimension mismatch");
  // out.row(r) = sum of value * dense.row(col) over the entries of row r.
  Matrix out = Matrix::Zero(dense.rows(), dense.cols());
  for (const auto& e : layer.entries) out.row(e.row) += e.value * dense.row(e.col);
  dense.swap(out);
}

Vector softmax_row(const Vector& v, Scalar temperature) {
  if (temperature <= 0.0) throw std::invalid_argument("softmax_row: temperature must be positive");
  require_finite(v, "softmax_row input");
  const Scalar m = v.maxCoeff();
  Vector e = ((v.array() - m) / temperature).exp();
  return e / e.sum();
}

GradCheckReport gradcheck(const ScalarFn& f, const Vector& x, Scalar step) {
  if (step <= 0.0) throw std::invalid_argument("gradcheck: step must be positive");
  Vector analytic(x.size());
  const Scalar fx = f(x, &analytic);
  if (!std::isfinite(fx)) throw std::runtime_error("gradcheck: non-finite function value");
  require_finite(analytic, "gradcheck analytic gradient");

  Vector fd(x.size());
  Vector xp = x;
  for (int i = 0; i < x.size(); ++i) {
    const Scalar xi = x(i);
    xp(i) = xi + step;
    const Scalar fp = f(xp, nullptr);
    xp(i) = xi - step;
    const Scalar fm = f(xp, nullptr);
    xp(i) = xi;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw std::runtime_error("gradcheck: non-finite evaluation during differencing");
    fd(i) = (fp - fm) / (2.0 * step);
  }

  GradCheckReport rep;
  Scalar scale = 0.0;
  for (int i = 0; i < x.size(); ++i)
    scale = std::max({scale, std::abs(analytic(i)), std::abs(fd(i))});
  // Coordinates far below the gradient's own magnitude sit under the
  // cancellation noise of central differences (~eps/step in absolute terms),
  // so they are measured against the gradient scale instead of themselves.
  for (int i = 0; i < x.size(); ++i) {
    const Scalar abs_err = std::abs(analytic(i) - fd(i));
    const Scalar denom =
        std::max({std::abs(analytic(i)), std::abs(fd(i)), 0.05 * scale, 1e-300});
    const Scalar rel_err = abs_err / denom;
    if (abs_err > rep.max_abs_err) rep.max_abs_err = abs_err;
    if (rel_err > rep.max_rel_err) {
      rep.max_rel_err = rel_err;
      rep.worst_index = i;
    }
  }
  return rep;
}

void require_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite value");
}

int Rng::uniform_int(int n) {
  // Rejection keeps the draw unbiased without widening the modulus.
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t r;
  do {
    r = next_u64();
  } while (r >= limit);
  return static_cast<int>(r % bound);
}

Scalar Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  Scalar u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const Scalar u2 = uniform();
  const Scalar r = std::sqrt(-2.0 * std::log(u1));
  const Scalar theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

Vector Rng::uniform_vector(int n, Scalar lo, Scalar hi) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = uniform(lo, hi);
  return v;
}

}  // namespace softperm
