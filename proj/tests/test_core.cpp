#include "softperm/core.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace softperm;

namespace {

SparseLayerMatrix mixing_layer(int n, int lo, int hi, Scalar alpha) {
  SparseLayerMatrix m;
  m.n = n;
  for (int w = 0; w < n; ++w) {
    if (w == lo) {
      m.entries.push_back({lo, lo, alpha});
      m.entries.push_back({lo, hi, 1.0 - alpha});
    } else if (w == hi) {
      m.entries.push_back({hi, lo, 1.0 - alpha});
      m.entries.push_back({hi, hi, alpha});
    } else {
      m.entries.push_back({w, w, 1.0});
    }
  }
  return m;
}

SparseLayerMatrix random_comparator_layer(int n, Rng& rng) {
  std::vector<int> wires(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) wires[static_cast<size_t>(i)] = i;
  for (int i = n - 1; i > 0; --i)
    std::swap(wires[static_cast<size_t>(i)], wires[static_cast<size_t>(rng.uniform_int(i + 1))]);

  SparseLayerMatrix m;
  m.n = n;
  std::vector<bool> used(static_cast<size_t>(n), false);
  for (int i = 0; i + 1 < n; i += 2) {
    if (rng.uniform() < 0.3) continue;  // leave some wires untouched
    const int a = wires[static_cast<size_t>(i)], b = wires[static_cast<size_t>(i + 1)];
    const Scalar alpha = rng.uniform();
    m.entries.push_back({a, a, alpha});
    m.entries.push_back({a, b, 1.0 - alpha});
    m.entries.push_back({b, a, 1.0 - alpha});
    m.entries.push_back({b, b, alpha});
    used[static_cast<size_t>(a)] = used[static_cast<size_t>(b)] = true;
  }
  for (int w = 0; w < n; ++w)
    if (!used[static_cast<size_t>(w)]) m.entries.push_back({w, w, 1.0});
  std::sort(m.entries.begin(), m.entries.end(), [](const SparseEntry& a, const SparseEntry& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  return m;
}

}  // namespace

TEST_CASE("identity sparse layer leaves a dense matrix unchanged") {
  Rng rng(11);
  Matrix left(3, 5);
  for (int i = 0; i < left.size(); ++i) left.data()[i] = rng.uniform(-2, 2);
  const Matrix out = matmul_dense_sparse(left, SparseLayerMatrix::identity(5));
  CHECK((out - left).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("hand-computed dense-sparse product") {
  Matrix left(1, 2);
  left << 1.0, 2.0;
  const Matrix out = matmul_dense_sparse(left, mixing_layer(2, 0, 1, 0.5));
  CHECK(out(0, 0) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(out(0, 1) == doctest::Approx(1.5).epsilon(1e-15));
}

TEST_CASE("dense-sparse product equals the dense-dense oracle") {
  Rng rng(42);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 2 + rng.uniform_int(63);
    const int k = 1 + rng.uniform_int(3);
    Matrix left(k, n);
    for (int i = 0; i < left.size(); ++i) left.data()[i] = rng.uniform(-2, 2);
    const SparseLayerMatrix layer = random_comparator_layer(n, rng);
    layer.validate();
    const Matrix expected = left * layer.to_dense();
    const Matrix got = matmul_dense_sparse(left, layer);
    CHECK((got - expected).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("dense-sparse dimension mismatch throws") {
  Matrix left = Matrix::Zero(2, 3);
  CHECK_THROWS_AS(matmul_dense_sparse(left, SparseLayerMatrix::identity(4)),
                  std::invalid_argument);
}

TEST_CASE("chained layer products keep rows stochastic") {
  Rng rng(7);
  const int n = 24;
  Matrix acc = Matrix::Zero(5, n);
  for (int i = 0; i < 5; ++i) acc(i, i) = 1.0;
  for (int step = 0; step < 40; ++step)
    acc = matmul_dense_sparse(acc, random_comparator_layer(n, rng));
  for (int i = 0; i < acc.rows(); ++i) CHECK(std::abs(acc.row(i).sum() - 1.0) < 1e-9);
}

TEST_CASE("softmax_row basics") {
  Vector v(2);
  v << 0.0, 0.0;
  const Vector p = softmax_row(v, 1.0);
  CHECK(p(0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(p(1) == doctest::Approx(0.5).epsilon(1e-15));

  Vector one(1);
  one << 1.0;
  CHECK(softmax_row(one, 7.0)(0) == doctest::Approx(1.0).epsilon(1e-15));

  Vector v3(3);
  v3 << 1.0, 2.0, 3.0;
  const Vector p3 = softmax_row(v3, 1.0);
  const Scalar z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  CHECK(p3(0) == doctest::Approx(std::exp(1.0) / z).epsilon(1e-12));
  CHECK(p3(1) == doctest::Approx(std::exp(2.0) / z).epsilon(1e-12));
  CHECK(p3(2) == doctest::Approx(std::exp(3.0) / z).epsilon(1e-12));
  CHECK(p3(0) == doctest::Approx(0.09003057).epsilon(1e-6));
  CHECK(p3(1) == doctest::Approx(0.24472847).epsilon(1e-6));
  CHECK(p3(2) == doctest::Approx(0.66524096).epsilon(1e-6));
}

TEST_CASE("softmax_row stays normalized for large magnitudes") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + rng.uniform_int(15);
    const Vector v = rng.uniform_vector(n, -1e3, 1e3);
    const Vector p = softmax_row(v, 0.5);
    CHECK(std::abs(p.sum() - 1.0) < 1e-12);
    CHECK(p.minCoeff() >= 0.0);
  }
}

TEST_CASE("softmax_row rejects bad input") {
  Vector v(2);
  v << 1.0, std::numeric_limits<Scalar>::infinity();
  CHECK_THROWS_AS(softmax_row(v, 1.0), std::invalid_argument);
  v << 1.0, 2.0;
  CHECK_THROWS_AS(softmax_row(v, 0.0), std::invalid_argument);
}

TEST_CASE("gradcheck on a sum of squares") {
  const ScalarFn f = [](const Vector& x, Vector* grad) {
    if (grad) *grad = 2.0 * x;
    return x.squaredNorm();
  };
  Vector x(2);
  x << 1.0, 2.0;
  CHECK(gradcheck(f, x, 1e-5).max_rel_err < 1e-8);
}

TEST_CASE("gradcheck on softmax cross-entropy") {
  Rng rng(19);
  const Vector x0 = rng.uniform_vector(10, -2, 2);
  const int y = 3;
  const ScalarFn f = [&](const Vector& x, Vector* grad) {
    const Vector p = softmax_row(x, 1.0);
    if (grad) {
      *grad = p;
      (*grad)(y) -= 1.0;
    }
    return -std::log(p(y));
  };
  CHECK(gradcheck(f, x0, 1e-6).max_rel_err < 1e-6);
}

TEST_CASE("gradcheck on a constant function") {
  const ScalarFn f = [](const Vector& x, Vector* grad) {
    if (grad) *grad = Vector::Zero(x.size());
    return 4.0;
  };
  CHECK(gradcheck(f, Vector::Zero(5), 1e-5).max_abs_err < 1e-9);
}

TEST_CASE("rng streams are deterministic") {
  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) {
    CHECK(a.uniform() == b.uniform());
    CHECK(a.normal() == b.normal());
  }
}
