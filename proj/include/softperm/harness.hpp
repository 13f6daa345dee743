#ifndef SOFTPERM_HARNESS_HPP
#define SOFTPERM_HARNESS_HPP

#include "softperm/core.hpp"
#include "softperm/loss.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace softperm {

enum class Split { Train, Val, Test };

struct Dataset {
  Matrix features;  // N x d
  std::vector<int> labels;
  int n_classes = 0;
  std::vector<Split> split;

  int size() const { return static_cast<int>(labels.size()); }
  int dims() const { return static_cast<int>(features.cols()); }
  std::vector<int> indices(Split s) const;
  void validate() const;
};

struct SyntheticSpec {
  int n_classes = 20;
  int dims = 16;
  int per_class = 100;
  Scalar sigma = 1.0;      // cluster spread; confusable pair means sit sigma/4 apart
  int confusable_pairs = 0;
  std::uint64_t seed = 1;
  Scalar train_frac = 0.7;
  Scalar val_frac = 0.15;
};

// Gaussian class clusters on well-separated random means; classes (2i, 2i+1)
// for i < confusable_pairs share near-identical means so top-1 is ambiguous
// while the pair is separable from everything else. Deterministic per seed.
Dataset generate_synthetic(const SyntheticSpec& spec);

// CSV with header f0,...,f{d-1},label and round-trip decimal formatting.
void save_csv(const std::string& path, const Dataset& data, Split split);
Dataset load_csv(const std::string& train_path, const std::string& val_path,
                 const std::string& test_path);

// Linear or one-hidden-layer classifier with rectifier activation.
struct ClassifierModel {
  int input_dim = 0;
  int n_classes = 0;
  int hidden = 0;
  Matrix w1;  // hidden x d (unused when hidden == 0)
  Vector b1;
  Matrix w2;  // n_classes x (hidden ? hidden : d)
  Vector b2;

  static ClassifierModel init(int input_dim, int n_classes, int hidden, Rng& rng);
  Vector logits(const Vector& x) const;
};

struct TrainConfig {
  PerClassRankDistributions pk;
  OperatorConfig operator_config;
  LossMode mode = LossMode::SmTopk;
  int truncation_m = 16;
  Scalar learning_rate = 1e-3;
  int batch_size = 100;
  int max_epochs = 200;
  int patience = 10;
  int hidden = 0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct MetricsRecord {
  int epoch = 0;
  Scalar train_loss = 0.0;
  std::vector<Scalar> train_acc;  // top-k accuracy for k = 1..K_max
  std::vector<Scalar> val_acc;
  std::vector<Scalar> test_acc;
};

struct TrainResult {
  ClassifierModel model;  // best validation model
  std::vector<MetricsRecord> history;
  int best_epoch = 0;
  Scalar best_val_criterion = 0.0;  // mean of validation top-1 and top-K_max
};

// Mini-batch Adam (beta1 0.9, beta2 0.999, eps 1e-8) on the configured loss
// with early stopping on the validation criterion. Bit-reproducible for a
// fixed (dataset, config, seed): fixed shuffle stream and summation order.
TrainResult train(const Dataset& data, const TrainConfig& config);

// Fraction of samples whose label ranks among the k largest logits (ties
// resolved toward lower class indices), for each requested k.
std::vector<Scalar> topk_accuracy(const ClassifierModel& model, const Dataset& data, Split split,
                                  const std::vector<int>& ks);

struct GridSearchResult {
  Scalar best_value = 0.0;
  TrainResult best_run;
  std::vector<std::pair<Scalar, Scalar>> evaluated;  // (value, val criterion)
};

// Factor-2 sweep lo, 2lo, 4lo, ... <= hi of the operator's smoothing
// parameter (temperature, or epsilon for Sinkhorn); ties prefer the smaller
// value.
GridSearchResult grid_search_temperature(const Dataset& data, const TrainConfig& config,
                                         Scalar lo, Scalar hi);

}  // namespace softperm

#endif  // SOFTPERM_HARNESS_HPP
