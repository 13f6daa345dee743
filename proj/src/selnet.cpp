#include "softperm/selnet.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>

namespace softperm {

namespace {

int ceil_log2(int m) {
  int p = 0;
  while ((1 << p) < m) ++p;
  return p;
}

int next_pow2(int m) { return 1 << ceil_log2(m); }

constexpr Scalar kNegInf = -std::numeric_limits<Scalar>::infinity();

}  // namespace

const char* to_string(NetworkKind kind) {
  switch (kind) {
    case NetworkKind::OddEvenSort: return "odd-even-sort";
    case NetworkKind::BitonicSort: return "bitonic-sort";
    case NetworkKind::ClassicSelection: return "classic-selection";
    case NetworkKind::SplitterSelection: return "splitter-selection";
  }
  return "unknown";
}

NetworkKind network_kind_from_string(const std::string& s) {
  if (s == "odd-even-sort" || s == "odd-even") return NetworkKind::OddEvenSort;
  if (s == "bitonic-sort" || s == "bitonic") return NetworkKind::BitonicSort;
  if (s == "classic-selection" || s == "classic") return NetworkKind::ClassicSelection;
  if (s == "splitter-selection" || s == "splitter") return NetworkKind::SplitterSelection;
  throw std::invalid_argument("unknown network kind: " + s);
}

std::size_t ComparatorNetwork::size() const {
  std::size_t total = 0;
  for (const auto& layer : layers) total += layer.size();
  return total;
}

int ComparatorNetwork::wires() const {
  int w = width;
  for (const auto& layer : layers)
    for (const auto& c : layer) w = std::max({w, c.lo + 1, c.hi + 1});
  return w;
}

void ComparatorNetwork::validate() const {
  const int w = wires();
  std::vector<int> seen(static_cast<size_t>(w), -1);
  for (int t = 0; t < depth(); ++t) {
    for (const auto& c : layers[static_cast<size_t>(t)]) {
      if (c.lo < 0 || c.hi < 0 || c.lo >= w || c.hi >= w || c.lo == c.hi)
        throw std::invalid_argument("ComparatorNetwork: bad wire pair");
      if (seen[static_cast<size_t>(c.lo)] == t || seen[static_cast<size_t>(c.hi)] == t)
        throw std::invalid_argument("ComparatorNetwork: wire used twice in one layer");
      seen[static_cast<size_t>(c.lo)] = t;
      seen[static_cast<size_t>(c.hi)] = t;
    }
  }
}

void LayerScheduler::place(int layer, int lo, int hi) {
  while (layer >= static_cast<int>(layers_.size())) layers_.emplace_back();
  layers_[static_cast<size_t>(layer)].push_back({lo, hi});
  ready_[static_cast<size_t>(lo)] = layer + 1;
  ready_[static_cast<size_t>(hi)] = layer + 1;
}

void LayerScheduler::push(int lo, int hi) {
  place(std::max(ready_[static_cast<size_t>(lo)], ready_[static_cast<size_t>(hi)]), lo, hi);
}

void LayerScheduler::push_block(const std::vector<OffsetComparator>& comps) {
  int start = 0;
  for (const auto& c : comps)
    start = std::max({start, ready_[static_cast<size_t>(c.lo)], ready_[static_cast<size_t>(c.hi)]});
  for (const auto& c : comps) place(start + c.offset, c.lo, c.hi);
}

std::vector<Comparator> build_splitter(const std::vector<int>& wires) {
  const int m = static_cast<int>(wires.size());
  std::vector<Comparator> layer;
  if (m < 2) return layer;
  const int s = 1 << (ceil_log2(m) - 1);
  for (int i = 0; i + s < m; ++i)
    layer.push_back({wires[static_cast<size_t>(i)], wires[static_cast<size_t>(i + s)]});
  return layer;
}

namespace {

// Splitters of the cascade over wires[first, last), recursing with growing
// layer offsets. Every wire's comparators are emitted in offset order.
void cascade_comparators(const std::vector<int>& wires, size_t first, size_t last, int offset,
                         std::vector<OffsetComparator>& out) {
  const int m = static_cast<int>(last - first);
  if (m < 2) return;
  const int s = 1 << (ceil_log2(m) - 1);
  for (int i = 0; i + s < m; ++i)
    out.push_back({offset, wires[first + static_cast<size_t>(i)],
                   wires[first + static_cast<size_t>(i + s)]});
  cascade_comparators(wires, first, first + static_cast<size_t>(s), offset + 1, out);
  cascade_comparators(wires, first + static_cast<size_t>(s), last, offset + 1, out);
}

std::vector<OffsetComparator> cascade_comparators(const std::vector<int>& wires) {
  std::vector<OffsetComparator> out;
  cascade_comparators(wires, 0, wires.size(), 0, out);
  return out;
}

}  // namespace

std::vector<std::vector<Comparator>> build_splitter_cascade(const std::vector<int>& wires) {
  int max_wire = 0;
  for (int w : wires) max_wire = std::max(max_wire, w + 1);
  LayerScheduler sched(max_wire);
  sched.push_block(cascade_comparators(wires));
  return sched.take();
}

std::vector<int> cascade_min_ranks(int m) {
  std::vector<int> ranks(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i)
    ranks[static_cast<size_t>(i)] = (1 << std::popcount(static_cast<unsigned>(i))) - 1;
  return ranks;
}

namespace {

// Renames every wire of `layers` through perm (old index -> new index).
void relabel_layers(std::vector<std::vector<Comparator>>& layers, const std::vector<int>& perm) {
  for (auto& layer : layers)
    for (auto& c : layer) {
      c.lo = perm[static_cast<size_t>(c.lo)];
      c.hi = perm[static_cast<size_t>(c.hi)];
    }
}

}  // namespace

ComparatorNetwork build_splitter_selection(int n, int k) {
  if (n < 1) throw std::invalid_argument("build_splitter_selection: n must be positive");
  if (k < 1 || k > n) throw std::invalid_argument("build_splitter_selection: need 1 <= k <= n");

  LayerScheduler sched(n);
  std::vector<int> min_rank(static_cast<size_t>(n), 0);
  std::vector<bool> active(static_cast<size_t>(n), true);

  auto done = [&] {
    std::vector<int> count(static_cast<size_t>(k), 0);
    for (int w = 0; w < n; ++w)
      if (active[static_cast<size_t>(w)]) count[static_cast<size_t>(min_rank[static_cast<size_t>(w)])]++;
    for (int r = 0; r < k; ++r)
      if (count[static_cast<size_t>(r)] != 1) return false;
    return true;
  };

  // Each pass sweeps r = k-1..0, cascades every group of active wires that
  // share minimum rank r, bumps their ranks by 2^popcount(position) - 1 and
  // drops wires whose rank reaches k.
  const int max_passes = 4 * (ceil_log2(std::max(n, 2)) + k + 2);
  int pass = 0;
  while (!done()) {
    if (++pass > max_passes)
      throw std::logic_error("build_splitter_selection: construction did not terminate");
    for (int r = k - 1; r >= 0; --r) {
      std::vector<int> group;
      for (int w = 0; w < n; ++w)
        if (active[static_cast<size_t>(w)] && min_rank[static_cast<size_t>(w)] == r)
          group.push_back(w);
      if (group.size() < 2) continue;
      sched.push_block(cascade_comparators(group));
      for (size_t i = 0; i < group.size(); ++i) {
        const int w = group[i];
        min_rank[static_cast<size_t>(w)] =
            r + (1 << std::popcount(static_cast<unsigned>(i))) - 1;
        if (min_rank[static_cast<size_t>(w)] >= k) active[static_cast<size_t>(w)] = false;
      }
    }
  }

  ComparatorNetwork net;
  net.width = n;
  net.k = k;
  net.kind = NetworkKind::SplitterSelection;
  net.layers = sched.take();

  // Rank r must sit on output wire r. If the surviving wires are not already
  // 0..k-1 in rank order, conjugate the whole network by a wire renaming;
  // the selection property only depends on the input multiset, so renaming
  // preserves it while moving the outputs.
  std::vector<int> perm(static_cast<size_t>(n), -1);
  bool identity = true;
  for (int w = 0; w < n; ++w)
    if (active[static_cast<size_t>(w)]) {
      perm[static_cast<size_t>(w)] = min_rank[static_cast<size_t>(w)];
      if (w != min_rank[static_cast<size_t>(w)]) identity = false;
    }
  if (!identity) {
    int next = k;
    for (int w = 0; w < n; ++w)
      if (perm[static_cast<size_t>(w)] < 0) perm[static_cast<size_t>(w)] = next++;
    relabel_layers(net.layers, perm);
  }
  return net;
}

namespace {

// Batcher odd-even mergesort over wires [lo, lo+len) of the scheduler,
// descending. Classic recursion; the scheduler recovers the usual
// p(p+1)/2 layering.
void oe_merge(int lo, int len, int stride, LayerScheduler& sched) {
  const int step = stride * 2;
  if (step < len) {
    oe_merge(lo, len, step, sched);
    oe_merge(lo + stride, len, step, sched);
    for (int i = lo + stride; i + stride < lo + len; i += step) sched.push(i, i + stride);
  } else {
    sched.push(lo, lo + stride);
  }
}

void oe_sort(int lo, int len, LayerScheduler& sched) {
  if (len <= 1) return;
  const int half = len / 2;
  oe_sort(lo, half, sched);
  oe_sort(lo + half, half, sched);
  oe_merge(lo, len, 1, sched);
}

// Descending bitonic clean of a block that already holds a bitonic sequence.
void bitonic_clean(int lo, int len, LayerScheduler& sched) {
  for (int s = len / 2; s >= 1; s /= 2)
    for (int j = 0; j < len; ++j)
      if ((j & s) == 0 && (j | s) < len) sched.push(lo + j, lo + j + s);
}

}  // namespace

ComparatorNetwork build_classic_selection(int n, int k) {
  if (n < 1) throw std::invalid_argument("build_classic_selection: n must be positive");
  if (k < 1 || k > n) throw std::invalid_argument("build_classic_selection: need 1 <= k <= n");

  const int padded = next_pow2(n);
  const int block = std::min(next_pow2(k), padded);
  LayerScheduler sched(padded);

  for (int b = 0; b < padded; b += block) oe_sort(b, block, sched);

  // Merge rounds: fold block b+gap into block b with one crossing layer
  // (making the pair bitonic) followed by a clean of the kept block.
  for (int gap = block; gap < padded; gap *= 2) {
    for (int b = 0; b + gap < padded; b += 2 * gap) {
      for (int j = 0; j < block; ++j) sched.push(b + j, b + gap + block - 1 - j);
      bitonic_clean(b, block, sched);
    }
  }

  ComparatorNetwork net;
  net.width = n;
  net.k = k;
  net.kind = NetworkKind::ClassicSelection;
  net.layers = sched.take();
  return net;
}

ComparatorNetwork build_full_sorter(int n, SortFlavor flavor) {
  if (n < 1) throw std::invalid_argument("build_full_sorter: n must be positive");
  const int padded = next_pow2(n);

  ComparatorNetwork net;
  net.width = n;
  net.k = n;
  net.kind = flavor == SortFlavor::Bitonic ? NetworkKind::BitonicSort : NetworkKind::OddEvenSort;

  if (flavor == SortFlavor::OddEven) {
    LayerScheduler sched(padded);
    oe_sort(0, padded, sched);
    net.layers = sched.take();
    return net;
  }

  // Iterative bitonic network, inverted so wire 0 ends with the maximum.
  std::vector<std::vector<Comparator>> layers;
  for (int blk = 2; blk <= padded; blk *= 2) {
    for (int s = blk / 2; s >= 1; s /= 2) {
      std::vector<Comparator> layer;
      for (int i = 0; i < padded; ++i) {
        const int j = i | s;
        if ((i & s) == 0 && j < padded) {
          if ((i & blk) == 0)
            layer.push_back({i, j});
          else
            layer.push_back({j, i});
        }
      }
      layers.push_back(std::move(layer));
    }
  }
  net.layers = std::move(layers);
  return net;
}

Vector evaluate_hard(const ComparatorNetwork& net, const Vector& values) {
  if (values.size() != net.width)
    throw std::invalid_argument("evaluate_hard: values length must equal network width");
  const int w = net.wires();
  Vector x = Vector::Constant(w, kNegInf);
  x.head(net.width) = values;
  for (const auto& layer : net.layers)
    for (const auto& c : layer) {
      const Scalar a = x(c.lo), b = x(c.hi);
      x(c.lo) = std::max(a, b);
      x(c.hi) = std::min(a, b);
    }
  return x.head(net.width);
}

bool verify_selection(const ComparatorNetwork& net, int n, int k) {
  if (n != net.width) throw std::invalid_argument("verify_selection: n must match network width");
  if (n > 20) throw std::invalid_argument("verify_selection: exhaustive check limited to n <= 20");
  if (k < 1 || k > n) throw std::invalid_argument("verify_selection: need 1 <= k <= n");

  const int w = net.wires();
  const std::uint64_t total = 1ull << n;
  std::vector<std::uint64_t> word(static_cast<size_t>(w));

  // 64 binary inputs per block; a comparator on 0/1 values is (or, and).
  for (std::uint64_t base = 0; base < total; base += 64) {
    const int lanes = static_cast<int>(std::min<std::uint64_t>(64, total - base));
    std::fill(word.begin(), word.end(), 0);
    for (int lane = 0; lane < lanes; ++lane) {
      const std::uint64_t input = base + static_cast<std::uint64_t>(lane);
      for (int wire = 0; wire < n; ++wire)
        word[static_cast<size_t>(wire)] |= ((input >> wire) & 1ull) << lane;
    }
    for (const auto& layer : net.layers)
      for (const auto& c : layer) {
        const std::uint64_t a = word[static_cast<size_t>(c.lo)];
        const std::uint64_t b = word[static_cast<size_t>(c.hi)];
        word[static_cast<size_t>(c.lo)] = a | b;
        word[static_cast<size_t>(c.hi)] = a & b;
      }
    for (int lane = 0; lane < lanes; ++lane) {
      const std::uint64_t input = base + static_cast<std::uint64_t>(lane);
      const int ones = std::popcount(input);
      for (int i = 0; i < k; ++i) {
        const bool expect = i < std::min(k, ones);
        const bool got = (word[static_cast<size_t>(i)] >> lane) & 1ull;
        if (got != expect) return false;
      }
    }
  }
  return true;
}

bool spot_check_selection(const ComparatorNetwork& net, int trials, Rng& rng) {
  const int n = net.width;
  const int k = net.k;
  for (int t = 0; t < trials; ++t) {
    Vector v = rng.uniform_vector(n, -100.0, 100.0);
    Vector sorted = v;
    std::sort(sorted.data(), sorted.data() + n, std::greater<Scalar>());
    const Vector out = evaluate_hard(net, v);
    for (int i = 0; i < k; ++i)
      if (out(i) != sorted(i)) return false;
  }
  return true;
}

std::vector<DepthTableRow> depth_table(const std::vector<int>& n_list,
                                       const std::vector<int>& k_list) {
  std::vector<DepthTableRow> rows;
  for (int n : n_list) {
    rows.push_back({n, 0, "full-sort", build_full_sorter(n, SortFlavor::Bitonic).depth()});
    for (int k : k_list)
      rows.push_back({n, k, "classic-selection", build_classic_selection(n, k).depth()});
    for (int k : k_list)
      rows.push_back({n, k, "splitter-selection", build_splitter_selection(n, k).depth()});
  }
  return rows;
}

namespace {

struct ReferenceRow {
  int n;
  int full_sort;
  int classic[8];
  int splitter[8];
};

constexpr ReferenceRow kReference[] = {
    {16, 10, {4, 7, 9, 9, 10, 10, 10, 10}, {4, 6, 7, 8, 10, 11, 12, 13}},
    {1024, 55, {10, 19, 27, 27, 34, 34, 34, 34}, {10, 14, 16, 18, 22, 25, 27, 29}},
    {10450, 105, {14, 27, 39, 39, 50, 50, 50, 50}, {14, 18, 20, 23, 27, 30, 32, 34}},
    {65536, 136, {16, 31, 45, 45, 58, 58, 58, 58}, {16, 20, 22, 25, 29, 32, 34, 36}},
};

}  // namespace

int reference_depth(int n, int k, const std::string& construction) {
  for (const auto& row : kReference) {
    if (row.n != n) continue;
    if (construction == "full-sort") return row.full_sort;
    if (k >= 1 && k <= 8) {
      if (construction == "classic-selection") return row.classic[k - 1];
      if (construction == "splitter-selection") return row.splitter[k - 1];
    }
  }
  return 0;
}

std::vector<int> reference_depth_table_n() { return {16, 1024, 10450, 65536}; }

std::vector<int> reference_depth_table_k() { return {1, 2, 3, 4, 5, 6, 7, 8}; }

std::string to_json(const ComparatorNetwork& net) {
  nlohmann::ordered_json doc;
  doc["width"] = net.width;
  if (net.is_selection()) doc["k"] = net.k;
  doc["kind"] = to_string(net.kind);
  auto layers = nlohmann::ordered_json::array();
  for (const auto& layer : net.layers) {
    auto jlayer = nlohmann::ordered_json::array();
    for (const auto& c : layer) jlayer.push_back({c.lo, c.hi});
    layers.push_back(std::move(jlayer));
  }
  doc["layers"] = std::move(layers);
  return doc.dump();
}

ComparatorNetwork network_from_json(const std::string& text) {
  const auto doc = nlohmann::json::parse(text);
  ComparatorNetwork net;
  net.width = doc.at("width").get<int>();
  net.kind = network_kind_from_string(doc.at("kind").get<std::string>());
  net.k = doc.contains("k") ? doc.at("k").get<int>() : net.width;
  for (const auto& jlayer : doc.at("layers")) {
    std::vector<Comparator> layer;
    for (const auto& jc : jlayer) layer.push_back({jc.at(0).get<int>(), jc.at(1).get<int>()});
    net.layers.push_back(std::move(layer));
  }
  net.validate();
  return net;
}

}  // namespace softperm
