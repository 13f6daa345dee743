#ifndef SOFTPERM_BENCH_HPP
#define SOFTPERM_BENCH_HPP

#include "softperm/diffrank.hpp"
#include "softperm/selnet.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace softperm {

struct BenchPoint {
  int n = 0;
  int k = 0;
  double seconds_topk = 0.0;  // back-to-front k x n assembly
  double seconds_full = 0.0;  // front-to-back n x n assembly
  int iters_topk = 0;
  int iters_full = 0;
  std::string checksum_topk;
  std::string checksum_full;
};

struct BenchReport {
  int k = 0;
  Scalar tau = 0.0;
  NetworkKind kind = NetworkKind::SplitterSelection;
  int repeats = 0;
  std::uint64_t seed = 0;
  std::vector<BenchPoint> points;
  double exponent_topk = 0.0;  // fitted log-log slope of time vs n
  double exponent_full = 0.0;
};

// Times the two assembly orders of the relaxed permutation matrix on
// identical inputs. Throws if the two results disagree beyond 1e-9 anywhere.
// Medians over `repeats` samples after one warm-up; each sample loops the
// operation enough times to be measurable.
BenchReport bench_eq3(const std::vector<int>& n_list, int k, Scalar tau, int repeats,
                      NetworkKind kind, std::uint64_t seed);

// Least-squares slope of log(y) against log(x).
double fit_log_exponent(const std::vector<double>& x, const std::vector<double>& y);

// FNV-1a over the raw bytes, hex string. Stable for a fixed build and seed.
std::string fnv1a_hex(const Matrix& m);

}  // namespace softperm

#endif  // SOFTPERM_BENCH_HPP
