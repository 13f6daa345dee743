#ifndef SOFTPERM_CORE_HPP
#define SOFTPERM_CORE_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

namespace softperm {

using Scalar = double;
// Row-major so that the rank rows of a relaxed permutation matrix are contiguous.
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// One nonzero of a comparator-layer permutation matrix.
struct SparseEntry {
  int row = 0;
  int col = 0;
  Scalar value = 0.0;
};

// Sparse n x n layer matrix with one or two entries per row, row values
// summing to 1. Entries are kept sorted by (row, col) so products are
// accumulated in a fixed order.
struct SparseLayerMatrix {
  int n = 0;
  std::vector<SparseEntry> entries;

  static SparseLayerMatrix identity(int n);

  Matrix to_dense() const;

  // Throws std::invalid_argument if the row-count/row-sum invariants fail.
  void validate(Scalar tol = 1e-12) const;
};

// left (k x n) times sparse layer (n x n), exact, O(k) work per stored entry.
Matrix matmul_dense_sparse(const Matrix& left, const SparseLayerMatrix& right);

// In-place layer * dense (row mixing), used by the front-to-back n x n pass.
void apply_layer_left(const SparseLayerMatrix& layer, Matrix& dense);

// softmax(v / temperature) with max subtraction.
Vector softmax_row(const Vector& v, Scalar temperature);

struct GradCheckReport {
  Scalar max_abs_err = 0.0;
  Scalar max_rel_err = 0.0;
  int worst_index = -1;
};

// Scalar function with analytic gradient: returns f(x), writes df/dx into
// *grad when grad != nullptr.
using ScalarFn = std::function<Scalar(const Vector&, Vector* grad)>;

// Central finite differences against the analytic gradient, coordinate by
// coordinate. Relative errors are measured against the larger of the two
// gradients, floored at a fraction of the overall gradient scale so that
// coordinates below the differencing noise do not blow up the ratio.
GradCheckReport gradcheck(const ScalarFn& f, const Vector& x, Scalar step);

void require_finite(const Vector& v, const char* what);

// Deterministic RNG used everywhere randomness is needed. mt19937_64 plus a
// hand-rolled Box-Muller keeps byte-identical streams across standard
// libraries (std::normal_distribution is implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform on [0, 1) with 53 random bits.
  Scalar uniform() { return static_cast<Scalar>(gen_() >> 11) * 0x1.0p-53; }

  Scalar uniform(Scalar lo, Scalar hi) { return lo + (hi - lo) * uniform(); }

  int uniform_int(int n);  // uniform on {0, ..., n-1}

  Scalar normal();

  Vector uniform_vector(int n, Scalar lo, Scalar hi);

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  Scalar spare_ = 0.0;
};

}  // namespace softperm

#endif  // SOFTPERM_CORE_HPP
