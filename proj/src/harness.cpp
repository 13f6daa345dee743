#include "softperm/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace softperm {

std::vector<int> Dataset::indices(Split s) const {
  std::vector<int> idx;
  for (int i = 0; i < size(); ++i)
    if (split[static_cast<size_t>(i)] == s) idx.push_back(i);
  return idx;
}

void Dataset::validate() const {
  if (features.rows() != size() || static_cast<int>(split.size()) != size())
    throw std::invalid_argument("dataset: inconsistent row counts");
  if (!features.allFinite()) throw std::invalid_argument("dataset: non-finite feature");
  for (int l : labels)
    if (l < 0 || l >= n_classes) throw std::invalid_argument("dataset: label out of range");
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n_classes < 1 || spec.dims < 1 || spec.per_class < 1)
    throw std::invalid_argument("synthetic: sizes must be positive");
  if (spec.sigma < 0.0) throw std::invalid_argument("synthetic: sigma must be >= 0");
  if (2 * spec.confusable_pairs > spec.n_classes)
    throw std::invalid_argument("synthetic: too many confusable pairs");

  Rng rng(spec.seed);
  const Scalar separation = 1.0 + 4.0 * spec.sigma;

  Matrix means(spec.n_classes, spec.dims);
  for (int c = 0; c < spec.n_classes; ++c) {
    Vector dir(spec.dims);
    for (int j = 0; j < spec.dims; ++j) dir(j) = rng.normal();
    means.row(c) = (separation / dir.norm()) * dir.transpose();
  }
  // Pair (2i, 2i+1): the second mean moves next to the first, sigma/4 away.
  for (int i = 0; i < spec.confusable_pairs; ++i) {
    Vector dir(spec.dims);
    for (int j = 0; j < spec.dims; ++j) dir(j) = rng.normal();
    means.row(2 * i + 1) =
        means.row(2 * i) + (spec.sigma / 4.0 / dir.norm()) * dir.transpose();
  }

  const int total = spec.n_classes * spec.per_class;
  Dataset data;
  data.features.resize(total, spec.dims);
  data.labels.resize(static_cast<size_t>(total));
  data.split.resize(static_cast<size_t>(total));
  data.n_classes = spec.n_classes;

  const int n_train = static_cast<int>(spec.train_frac * spec.per_class);
  const int n_val = static_cast<int>(spec.val_frac * spec.per_class);
  int row = 0;
  for (int c = 0; c < spec.n_classes; ++c)
    for (int i = 0; i < spec.per_class; ++i, ++row) {
      for (int j = 0; j < spec.dims; ++j)
        data.features(row, j) = means(c, j) + spec.sigma * rng.normal();
      data.labels[static_cast<size_t>(row)] = c;
      data.split[static_cast<size_t>(row)] =
          i < n_train ? Split::Train : (i < n_train + n_val ? Split::Val : Split::Test);
    }
  data.validate();
  return data;
}

void save_csv(const std::string& path, const Dataset& data, Split split) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  for (int j = 0; j < data.dims(); ++j) out << "f" << j << ",";
  out << "label\n";
  char buf[64];
  for (int i = 0; i < data.size(); ++i) {
    if (data.split[static_cast<size_t>(i)] != split) continue;
    for (int j = 0; j < data.dims(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", data.features(i, j));
      out << buf << ",";
    }
    out << data.labels[static_cast<size_t>(i)] << "\n";
  }
}

namespace {

void load_csv_into(const std::string& path, Split split, std::vector<std::vector<Scalar>>& rows,
                   std::vector<int>& labels, std::vector<Split>& splits, int& dims) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty CSV: " + path);
  int header_cols = 1;
  for (char ch : line)
    if (ch == ',') ++header_cols;
  const int d = header_cols - 1;
  if (dims < 0)
    dims = d;
  else if (dims != d)
    throw std::runtime_error("CSV dimension mismatch: " + path);

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<Scalar> row;
    row.reserve(static_cast<size_t>(d));
    std::stringstream ss(line);
    std::string cell;
    for (int j = 0; j < d; ++j) {
      if (!std::getline(ss, cell, ',')) throw std::runtime_error("short CSV row: " + path);
      row.push_back(std::stod(cell));
    }
    if (!std::getline(ss, cell)) throw std::runtime_error("missing label: " + path);
    rows.push_back(std::move(row));
    labels.push_back(std::stoi(cell));
    splits.push_back(split);
  }
}

}  // namespace

Dataset load_csv(const std::string& train_path, const std::string& val_path,
                 const std::string& test_path) {
  std::vector<std::vector<Scalar>> rows;
  std::vector<int> labels;
  std::vector<Split> splits;
  int dims = -1;
  load_csv_into(train_path, Split::Train, rows, labels, splits, dims);
  load_csv_into(val_path, Split::Val, rows, labels, splits, dims);
  load_csv_into(test_path, Split::Test, rows, labels, splits, dims);

  Dataset data;
  data.features.resize(static_cast<int>(rows.size()), dims);
  for (size_t i = 0; i < rows.size(); ++i)
    for (int j = 0; j < dims; ++j) data.features(static_cast<int>(i), j) = rows[i][static_cast<size_t>(j)];
  data.labels = std::move(labels);
  data.split = std::move(splits);
  data.n_classes = 0;
  for (int l : data.labels) data.n_classes = std::max(data.n_classes, l + 1);
  data.validate();
  return data;
}

ClassifierModel ClassifierModel::init(int input_dim, int n_classes, int hidden, Rng& rng) {
  ClassifierModel m;
  m.input_dim = input_dim;
  m.n_classes = n_classes;
  m.hidden = hidden;
  const int top_in = hidden > 0 ? hidden : input_dim;
  if (hidden > 0) {
    m.w1.resize(hidden, input_dim);
    const Scalar scale1 = std::sqrt(2.0 / input_dim);
    for (int i = 0; i < hidden; ++i)
      for (int j = 0; j < input_dim; ++j) m.w1(i, j) = scale1 * rng.normal();
    m.b1 = Vector::Zero(hidden);
  }
  m.w2.resize(n_classes, top_in);
  const Scalar scale2 = std::sqrt(2.0 / top_in);
  for (int i = 0; i < n_classes; ++i)
    for (int j = 0; j < top_in; ++j) m.w2(i, j) = scale2 * rng.normal();
  m.b2 = Vector::Zero(n_classes);
  return m;
}

Vector ClassifierModel::logits(const Vector& x) const {
  if (hidden > 0) {
    Vector h = (w1 * x + b1).cwiseMax(0.0);
    return w2 * h + b2;
  }
  return w2 * x + b2;
}

void TrainConfig::validate() const {
  operator_config.validate();
  if (learning_rate <= 0.0) throw std::invalid_argument("train config: learning_rate must be positive");
  if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be positive");
  if (max_epochs < 1) throw std::invalid_argument("train config: max_epochs must be positive");
  if (patience < 0) throw std::invalid_argument("train config: patience must be >= 0");
  if (truncation_m < 1) throw std::invalid_argument("train config: m must be positive");
  if (hidden < 0) throw std::invalid_argument("train config: hidden must be >= 0");
}

namespace {

struct AdamState {
  Matrix mw1, vw1, mw2, vw2;
  Vector mb1, vb1, mb2, vb2;
  int t = 0;

  explicit AdamState(const ClassifierModel& m) {
    if (m.hidden > 0) {
      mw1 = Matrix::Zero(m.w1.rows(), m.w1.cols());
      vw1 = mw1;
      mb1 = Vector::Zero(m.b1.size());
      vb1 = mb1;
    }
    mw2 = Matrix::Zero(m.w2.rows(), m.w2.cols());
    vw2 = mw2;
    mb2 = Vector::Zero(m.b2.size());
    vb2 = mb2;
  }
};

constexpr Scalar kBeta1 = 0.9;
constexpr Scalar kBeta2 = 0.999;
constexpr Scalar kAdamEps = 1e-8;

template <typename T>
void adam_update(T& param, T& m, T& v, const T& grad, Scalar lr, int t) {
  m = kBeta1 * m + (1.0 - kBeta1) * grad;
  v = kBeta2 * v + (1.0 - kBeta2) * grad.cwiseProduct(grad);
  const Scalar c1 = 1.0 - std::pow(kBeta1, t);
  const Scalar c2 = 1.0 - std::pow(kBeta2, t);
  param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + kAdamEps);
}

struct Gradients {
  Matrix w1, w2;
  Vector b1, b2;

  explicit Gradients(const ClassifierModel& m) { reset(m); }
  void reset(const ClassifierModel& m) {
    if (m.hidden > 0) {
      w1 = Matrix::Zero(m.w1.rows(), m.w1.cols());
      b1 = Vector::Zero(m.b1.size());
    }
    w2 = Matrix::Zero(m.w2.rows(), m.w2.cols());
    b2 = Vector::Zero(m.b2.size());
  }
};

// Accumulates d loss / d params for one sample given d loss / d logits.
void backward_sample(const ClassifierModel& model, const Vector& x, const Vector& d_logits,
                     Gradients& g) {
  if (model.hidden > 0) {
    const Vector pre = model.w1 * x + model.b1;
    const Vector h = pre.cwiseMax(0.0);
    g.w2 += d_logits * h.transpose();
    g.b2 += d_logits;
    Vector dh = model.w2.transpose() * d_logits;
    for (int i = 0; i < dh.size(); ++i)
      if (pre(i) <= 0.0) dh(i) = 0.0;
    g.w1 += dh * x.transpose();
    g.b1 += dh;
  } else {
    g.w2 += d_logits * x.transpose();
    g.b2 += d_logits;
  }
}

}  // namespace

std::vector<Scalar> topk_accuracy(const ClassifierModel& model, const Dataset& data, Split split,
                                  const std::vector<int>& ks) {
  const std::vector<int> idx = data.indices(split);
  std::vector<int> hits(ks.size(), 0);
  for (int i : idx) {
    const Vector s = model.logits(data.features.row(i).transpose());
    const int y = data.labels[static_cast<size_t>(i)];
    // Rank of the label under descending order with ties to lower indices.
    int rank = 0;
    for (int j = 0; j < s.size(); ++j) {
      if (j == y) continue;
      if (s(j) > s(y) || (s(j) == s(y) && j < y)) ++rank;
    }
    for (size_t q = 0; q < ks.size(); ++q)
      if (rank < ks[q]) hits[q]++;
  }
  std::vector<Scalar> acc(ks.size(), 0.0);
  for (size_t q = 0; q < ks.size(); ++q)
    acc[q] = idx.empty() ? 0.0 : static_cast<Scalar>(hits[q]) / static_cast<Scalar>(idx.size());
  return acc;
}

TrainResult train(const Dataset& data, const TrainConfig& config) {
  config.validate();
  data.validate();

  const int k_max = std::max(1, config.pk.k_max());
  if (k_max > data.n_classes)
    throw std::invalid_argument("train config: pk reaches beyond the class count");

  std::vector<int> ks(static_cast<size_t>(k_max));
  for (int k = 1; k <= k_max; ++k) ks[static_cast<size_t>(k - 1)] = k;

  Rng rng(config.seed);
  ClassifierModel model = ClassifierModel::init(data.dims(), data.n_classes, config.hidden, rng);
  AdamState adam(model);
  Gradients grads(model);
  NetworkCache nets;

  std::vector<int> train_idx = data.indices(Split::Train);
  if (train_idx.empty()) throw std::invalid_argument("train: empty training split");

  TrainResult result;
  result.best_val_criterion = -1.0;
  ClassifierModel best_model = model;
  int wait = 0;

  const int m_trunc = std::min(config.truncation_m, data.n_classes);

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    // Fisher-Yates on the fixed stream keeps runs bit-reproducible.
    for (int i = static_cast<int>(train_idx.size()) - 1; i > 0; --i)
      std::swap(train_idx[static_cast<size_t>(i)], train_idx[static_cast<size_t>(rng.uniform_int(i + 1))]);

    Scalar loss_sum = 0.0;
    for (size_t start = 0; start < train_idx.size(); start += static_cast<size_t>(config.batch_size)) {
      const size_t stop = std::min(train_idx.size(), start + static_cast<size_t>(config.batch_size));
      grads.reset(model);
      for (size_t b = start; b < stop; ++b) {
        const int i = train_idx[b];
        const Vector x = data.features.row(i).transpose();
        const int y = data.labels[static_cast<size_t>(i)];
        const Vector s = model.logits(x);
        const LossResult lr = loss_forward_backward(s, y, config.pk.for_class(y),
                                                    config.operator_config, m_trunc, config.mode,
                                                    nets);
        if (!std::isfinite(lr.loss))
          throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch));
        loss_sum += lr.loss;
        backward_sample(model, x, lr.grad, grads);
      }
      const Scalar inv = 1.0 / static_cast<Scalar>(stop - start);
      adam.t++;
      if (model.hidden > 0) {
        adam_update<Matrix>(model.w1, adam.mw1, adam.vw1, Matrix(inv * grads.w1),
                            config.learning_rate, adam.t);
        adam_update<Vector>(model.b1, adam.mb1, adam.vb1, Vector(inv * grads.b1),
                            config.learning_rate, adam.t);
      }
      adam_update<Matrix>(model.w2, adam.mw2, adam.vw2, Matrix(inv * grads.w2),
                          config.learning_rate, adam.t);
      adam_update<Vector>(model.b2, adam.mb2, adam.vb2, Vector(inv * grads.b2),
                          config.learning_rate, adam.t);
    }

    MetricsRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<Scalar>(train_idx.size());
    rec.train_acc = topk_accuracy(model, data, Split::Train, ks);
    rec.val_acc = topk_accuracy(model, data, Split::Val, ks);
    rec.test_acc = topk_accuracy(model, data, Split::Test, ks);
    result.history.push_back(rec);

    const Scalar crit =
        0.5 * (rec.val_acc.front() + rec.val_acc.back());
    if (crit > result.best_val_criterion) {
      result.best_val_criterion = crit;
      result.best_epoch = epoch;
      best_model = model;
      wait = 0;
    } else if (++wait > config.patience) {
      break;
    }
  }

  result.model = std::move(best_model);
  return result;
}

GridSearchResult grid_search_temperature(const Dataset& data, const TrainConfig& config,
                                         Scalar lo, Scalar hi) {
  if (lo <= 0.0 || hi < lo) throw std::invalid_argument("grid search: need 0 < lo <= hi");

  GridSearchResult result;
  Scalar best_crit = -1.0;
  for (Scalar value = lo; value <= hi * (1.0 + 1e-12); value *= 2.0) {
    TrainConfig c = config;
    if (c.operator_config.op == RankOperator::Sinkhorn)
      c.operator_config.sinkhorn.epsilon = value;
    else
      c.operator_config.temperature = value;
    TrainResult run = train(data, c);
    result.evaluated.emplace_back(value, run.best_val_criterion);
    if (run.best_val_criterion > best_crit) {
      best_crit = run.best_val_criterion;
      result.best_value = value;
      result.best_run = std::move(run);
    }
  }
  return result;
}

}  // namespace softperm
