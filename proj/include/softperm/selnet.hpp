#ifndef SOFTPERM_SELNET_HPP
#define SOFTPERM_SELNET_HPP

#include "softperm/core.hpp"

#include <string>
#include <vector>

namespace softperm {

// Conditional swap: after execution wire `lo` carries the larger of the two
// values (descending convention). `lo` need not be the smaller index.
struct Comparator {
  int lo = 0;
  int hi = 0;
};

enum class NetworkKind { OddEvenSort, BitonicSort, ClassicSelection, SplitterSelection };

const char* to_string(NetworkKind kind);
NetworkKind network_kind_from_string(const std::string& s);

// Layered comparator network. `width` is the logical input/output count;
// constructions that pad to a power of two reference sentinel wires with
// indices >= width, which carry -inf and are stripped from outputs.
struct ComparatorNetwork {
  int width = 0;
  int k = 0;  // selection size; == width for full sorters
  NetworkKind kind = NetworkKind::BitonicSort;
  std::vector<std::vector<Comparator>> layers;

  int depth() const { return static_cast<int>(layers.size()); }
  std::size_t size() const;
  // Physical wire count (max referenced wire + 1, at least width).
  int wires() const;
  bool is_selection() const {
    return kind == NetworkKind::ClassicSelection || kind == NetworkKind::SplitterSelection;
  }

  // Throws if a wire repeats within a layer or an index is out of range.
  void validate() const;
};

// Comparator bundled with its layer offset inside a block construct such as
// a splitter cascade.
struct OffsetComparator {
  int offset = 0;
  int lo = 0;
  int hi = 0;
};

// Packs comparators greedily: each lands in the earliest layer after every
// previous comparator sharing one of its wires. Comparators on disjoint
// wires commute, so any schedule respecting per-wire order is equivalent.
// push_block places a whole construct contiguously instead: it starts after
// every participating wire is free and keeps the construct's internal layer
// offsets, which is how the published selection-network depths count.
class LayerScheduler {
 public:
  explicit LayerScheduler(int n_wires) : ready_(static_cast<size_t>(n_wires), 0) {}

  void push(int lo, int hi);
  void push_block(const std::vector<OffsetComparator>& comps);
  std::vector<std::vector<Comparator>> take() { return std::move(layers_); }

 private:
  void place(int layer, int lo, int hi);

  std::vector<int> ready_;
  std::vector<std::vector<Comparator>> layers_;
};

// Single splitter layer over the given wires: stride s = 2^(ceil(log2 m) - 1),
// comparators (w[i], w[i+s]) directing the larger value to w[i]. Fewer than
// two wires yield an empty layer.
std::vector<Comparator> build_splitter(const std::vector<int>& wires);

// Recursive splitters down to singletons; depth = ceil(log2 m). After the
// cascade the value on position i has minimum rank 2^popcount(i) - 1.
std::vector<std::vector<Comparator>> build_splitter_cascade(const std::vector<int>& wires);

// Minimum ranks implied by a cascade over m wires: 2^popcount(i) - 1.
std::vector<int> cascade_min_ranks(int m);

// Selection network built from repeated splitter cascades over equal-min-rank
// wire groups, sweeping r = k-1..0 until each rank below k sits on exactly
// one wire. Rank r ends on output wire r. Handles arbitrary n natively.
ComparatorNetwork build_splitter_selection(int n, int k);

// Selection by sorted blocks of 2^ceil(log2 k) wires (odd-even mergesort)
// merged pairwise with bitonic merges of their tops. Pads to a power of two.
ComparatorNetwork build_classic_selection(int n, int k);

enum class SortFlavor { OddEven, Bitonic };

// Full descending sorter; pads non-powers-of-two with sentinel wires.
ComparatorNetwork build_full_sorter(int n, SortFlavor flavor);

// Applies the comparators exactly (max to lo); returns the first n wire
// values. values.size() must equal net.width.
Vector evaluate_hard(const ComparatorNetwork& net, const Vector& values);

// 0/1-principle check over all 2^n binary inputs: the first k outputs must be
// non-increasing and contain min(k, #ones) ones. Refuses n > 20.
bool verify_selection(const ComparatorNetwork& net, int n, int k);

// Random real-valued spot check against sort-then-take.
bool spot_check_selection(const ComparatorNetwork& net, int trials, Rng& rng);

struct DepthTableRow {
  int n = 0;
  int k = 0;  // 0 for the full-sort column
  std::string construction;
  int depth = 0;
};

// Builds every requested network and reports its depth. k_list applies to the
// two selection constructions; each n also gets a full-sort row.
std::vector<DepthTableRow> depth_table(const std::vector<int>& n_list,
                                       const std::vector<int>& k_list);

// Published depths the constructions are expected to reproduce, keyed like
// depth_table output. Returns 0 when the cell is not part of the reference.
int reference_depth(int n, int k, const std::string& construction);

std::vector<int> reference_depth_table_n();  // {16, 1024, 10450, 65536}
std::vector<int> reference_depth_table_k();  // {1..8}

// JSON document {"width","k","kind","layers"}; k is omitted for full sorts.
std::string to_json(const ComparatorNetwork& net);
ComparatorNetwork network_from_json(const std::string& text);

}  // namespace softperm

#endif  // SOFTPERM_SELNET_HPP
