#include "softperm/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace softperm {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Median sample time for fn(), looping it enough to stay measurable.
template <typename Fn>
std::pair<double, int> time_median(Fn&& fn, int repeats) {
  auto t0 = Clock::now();
  fn();  // warm-up, also used to size the inner loop
  const double warm = std::max(seconds_since(t0), 1e-9);
  const int iters = std::max(1, static_cast<int>(0.003 / warm));

  std::vector<double> samples;
  samples.reserve(static_cast<size_t>(repeats));
  for (int r = 0; r < repeats; ++r) {
    t0 = Clock::now();
    for (int i = 0; i < iters; ++i) fn();
    samples.push_back(seconds_since(t0) / iters);
  }
  std::sort(samples.begin(), samples.end());
  return {samples[samples.size() / 2], iters};
}

ComparatorNetwork build_for(NetworkKind kind, int n, int k) {
  switch (kind) {
    case NetworkKind::SplitterSelection: return build_splitter_selection(n, k);
    case NetworkKind::ClassicSelection: return build_classic_selection(n, k);
    case NetworkKind::BitonicSort: return build_full_sorter(n, SortFlavor::Bitonic);
    case NetworkKind::OddEvenSort: return build_full_sorter(n, SortFlavor::OddEven);
  }
  throw std::logic_error("bench: unknown network kind");
}

}  // namespace

std::string fnv1a_hex(const Matrix& m) {
  std::uint64_t h = 1469598103934665603ull;
  const auto* bytes = reinterpret_cast<const unsigned char*>(m.data());
  const size_t len = static_cast<size_t>(m.size()) * sizeof(Scalar);
  for (size_t i = 0; i < len; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ull;
  }
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

double fit_log_exponent(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("fit_log_exponent: need at least two points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

BenchReport bench_eq3(const std::vector<int>& n_list, int k, Scalar tau, int repeats,
                      NetworkKind kind, std::uint64_t seed) {
  if (repeats < 1) throw std::invalid_argument("bench: repeats must be positive");

  BenchReport report;
  report.k = k;
  report.tau = tau;
  report.kind = kind;
  report.repeats = repeats;
  report.seed = seed;

  for (int n : n_list) {
    const ComparatorNetwork net = build_for(kind, n, k);
    Rng rng(seed + static_cast<std::uint64_t>(n));
    const Vector s = rng.uniform_vector(n, -10.0, 10.0);

    const RelaxedPermutation topk = diffsortnet_topk(s, net, tau, k);
    const RelaxedPermutation full = diffsortnet_full(s, net, tau);
    const double diff = (topk.p - full.p.topRows(k)).cwiseAbs().maxCoeff();
    if (diff > 1e-9)
      throw std::runtime_error("bench: assembly orders disagree at n = " + std::to_string(n));

    BenchPoint point;
    point.n = n;
    point.k = k;
    point.checksum_topk = fnv1a_hex(topk.p);
    point.checksum_full = fnv1a_hex(full.p);

    auto [t_topk, it_topk] =
        time_median([&] { diffsortnet_topk(s, net, tau, k); }, repeats);
    auto [t_full, it_full] = time_median([&] { diffsortnet_full(s, net, tau); }, repeats);
    point.seconds_topk = t_topk;
    point.seconds_full = t_full;
    point.iters_topk = it_topk;
    point.iters_full = it_full;
    report.points.push_back(std::move(point));
  }

  if (report.points.size() >= 2) {
    std::vector<double> ns, tk, tf;
    for (const auto& p : report.points) {
      ns.push_back(p.n);
      tk.push_back(std::max(p.seconds_topk, 1e-12));
      tf.push_back(std::max(p.seconds_full, 1e-12));
    }
    report.exponent_topk = fit_log_exponent(ns, tk);
    report.exponent_full = fit_log_exponent(ns, tf);
  }
  return report;
}

}  // namespace softperm
