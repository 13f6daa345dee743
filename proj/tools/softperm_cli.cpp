// Command-line front end: network generation, the depth table, the two-order
// assembly benchmark, desk-scale training, gradient checking and synthetic
// data generation. All JSON outputs are deterministic byte streams for a
// fixed seed; wall-clock timings are kept out of them.

#include "softperm/bench.hpp"
#include "softperm/gradsuite.hpp"
#include "softperm/harness.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace {

using namespace softperm;
using ordered_json = nlohmann::ordered_json;

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << text;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> values;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) values.push_back(std::stoi(cell));
  if (values.empty()) throw std::invalid_argument("empty integer list");
  return values;
}

std::vector<Scalar> parse_scalar_list(const std::string& text) {
  std::vector<Scalar> values;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) values.push_back(std::stod(cell));
  return values;
}

// ---------------------------------------------------------------------------
// gen-net

int cmd_gen_net(int n, int k, const std::string& kind_str, const std::string& out_path,
                bool verify_flag) {
  const NetworkKind kind = network_kind_from_string(kind_str);
  ComparatorNetwork net;
  switch (kind) {
    case NetworkKind::SplitterSelection: net = build_splitter_selection(n, k); break;
    case NetworkKind::ClassicSelection: net = build_classic_selection(n, k); break;
    case NetworkKind::BitonicSort: net = build_full_sorter(n, SortFlavor::Bitonic); break;
    case NetworkKind::OddEvenSort: net = build_full_sorter(n, SortFlavor::OddEven); break;
  }
  net.validate();

  std::string status;
  bool ok = true;
  if (net.wires() <= 20) {
    ok = verify_selection(net, net.width, net.k);
    status = ok ? "verified (exhaustive)" : "FAILED (exhaustive)";
  } else {
    Rng rng(271828);
    ok = spot_check_selection(net, verify_flag ? 1000 : 200, rng);
    status = ok ? "verified (sampled)" : "FAILED (sampled)";
  }

  if (!out_path.empty()) write_file(out_path, to_json(net) + "\n");
  std::printf("kind=%s n=%d k=%d depth=%d size=%zu %s\n", to_string(net.kind), net.width, net.k,
              net.depth(), net.size(), status.c_str());
  return ok ? 0 : 1;
}

// ---------------------------------------------------------------------------
// depth-table

int cmd_depth_table(bool check, const std::string& json_path) {
  const std::vector<int> ns = reference_depth_table_n();
  const std::vector<int> ks = reference_depth_table_k();
  const std::vector<DepthTableRow> rows = depth_table(ns, ks);

  std::printf("%8s  %-18s  %3s  %5s\n", "n", "construction", "k", "depth");
  std::vector<std::string> mismatches;
  std::string json_lines;
  for (const auto& row : rows) {
    const int expected = reference_depth(row.n, row.k, row.construction);
    const bool bad = check && expected != 0 && expected != row.depth;
    std::printf("%8d  %-18s  %3d  %5d%s\n", row.n, row.construction.c_str(), row.k, row.depth,
                bad ? "  MISMATCH" : "");
    if (bad)
      mismatches.push_back(row.construction + " n=" + std::to_string(row.n) +
                           " k=" + std::to_string(row.k) + ": got " + std::to_string(row.depth) +
                           ", expected " + std::to_string(expected));
    ordered_json j;
    j["n"] = row.n;
    j["k"] = row.k;
    j["construction"] = row.construction;
    j["depth"] = row.depth;
    json_lines += j.dump() + "\n";
  }
  if (!json_path.empty()) write_file(json_path, json_lines);

  if (!mismatches.empty()) {
    for (const auto& m : mismatches) std::fprintf(stderr, "mismatch: %s\n", m.c_str());
    return 1;
  }
  if (check) std::printf("all %zu cells match the reference table\n", rows.size());
  return 0;
}

// ---------------------------------------------------------------------------
// bench-eq3

int cmd_bench(const std::string& n_list_str, int k, Scalar tau, int repeats,
              const std::string& kind_str, std::uint64_t seed, const std::string& json_path,
              const std::string& timing_json_path) {
  const std::vector<int> ns = parse_int_list(n_list_str);
  const BenchReport report = bench_eq3(ns, k, tau, repeats, network_kind_from_string(kind_str), seed);

  std::printf("%8s  %12s  %12s  %8s\n", "n", "topk [s]", "full [s]", "ratio");
  for (const auto& p : report.points)
    std::printf("%8d  %12.6g  %12.6g  %8.2f\n", p.n, p.seconds_topk, p.seconds_full,
                p.seconds_full / p.seconds_topk);
  std::printf("fitted exponents: topk %.3f, full %.3f (gap %.3f)\n", report.exponent_topk,
              report.exponent_full, report.exponent_full - report.exponent_topk);

  if (!json_path.empty()) {
    // Deterministic fields only; timings go to --timing-json.
    std::string lines;
    for (const auto& p : report.points) {
      ordered_json j;
      j["n"] = p.n;
      j["k"] = p.k;
      j["kind"] = to_string(report.kind);
      j["seed"] = report.seed;
      j["equivalent"] = true;
      j["checksum_topk"] = p.checksum_topk;
      j["checksum_full"] = p.checksum_full;
      lines += j.dump() + "\n";
    }
    write_file(json_path, lines);
  }
  if (!timing_json_path.empty()) {
    std::string lines;
    for (const auto& p : report.points) {
      ordered_json j;
      j["n"] = p.n;
      j["k"] = p.k;
      j["median_seconds_topk"] = p.seconds_topk;
      j["median_seconds_full"] = p.seconds_full;
      j["iters_topk"] = p.iters_topk;
      j["iters_full"] = p.iters_full;
      lines += j.dump() + "\n";
    }
    write_file(timing_json_path, lines);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// train

std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!key.empty()) kv[key] = value;
  }
  return kv;
}

int cmd_train(const std::string& config_path) {
  const auto kv = parse_config_file(config_path);
  auto get = [&](const std::string& key, const std::string& fallback) {
    auto it = kv.find(key);
    return it == kv.end() ? fallback : it->second;
  };
  auto require = [&](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw std::invalid_argument("config: missing required key '" + key + "'");
    return it->second;
  };

  Dataset data;
  if (get("synthetic", "false") == "true") {
    SyntheticSpec spec;
    spec.n_classes = std::stoi(get("classes", "20"));
    spec.dims = std::stoi(get("dims", "16"));
    spec.per_class = std::stoi(get("per_class", "100"));
    spec.sigma = std::stod(get("sigma", "1.0"));
    spec.confusable_pairs = std::stoi(get("pairs", "0"));
    spec.seed = std::stoull(get("data_seed", "1"));
    data = generate_synthetic(spec);
  } else {
    data = load_csv(require("train_csv"), require("val_csv"), require("test_csv"));
  }

  TrainConfig config;
  try {
    config.pk.fallback = make_rank_distribution(parse_scalar_list(require("pk")));
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument("config key 'pk': " + std::string(e.what()));
  }
  for (const auto& [key, value] : kv) {
    if (key.rfind("pk_class.", 0) != 0) continue;
    const int cls = std::stoi(key.substr(9));
    try {
      config.pk.per_class[cls] = make_rank_distribution(parse_scalar_list(value));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config key '" + key + "': " + std::string(e.what()));
    }
  }
  config.operator_config.op = rank_operator_from_string(get("operator", "diffsortnet"));
  config.operator_config.temperature = std::stod(get("temperature", "1.0"));
  config.operator_config.sinkhorn.epsilon = std::stod(get("epsilon", "0.01"));
  config.operator_config.sinkhorn.tol = std::stod(get("sinkhorn_tol", "1e-6"));
  config.operator_config.sinkhorn.max_iters = std::stoi(get("sinkhorn_iters", "500"));
  config.operator_config.network_kind = network_kind_from_string(get("network", "splitter"));
  config.mode = loss_mode_from_string(get("loss", "sm-topk"));
  config.truncation_m = std::stoi(get("m", std::to_string(default_truncation(data.n_classes))));
  config.learning_rate = std::stod(get("lr", "1e-3"));
  config.batch_size = std::stoi(get("batch", "100"));
  config.max_epochs = std::stoi(get("epochs", "200"));
  config.patience = std::stoi(get("patience", "10"));
  config.hidden = std::stoi(get("hidden", "0"));
  config.seed = std::stoull(get("seed", "1"));

  const TrainResult result = train(data, config);

  std::string lines;
  for (const auto& rec : result.history) {
    ordered_json j;
    j["epoch"] = rec.epoch;
    j["train_loss"] = rec.train_loss;
    j["train_acc"] = rec.train_acc;
    j["val_acc"] = rec.val_acc;
    j["test_acc"] = rec.test_acc;
    lines += j.dump() + "\n";
  }
  const std::string metrics_out = get("metrics_out", "");
  if (!metrics_out.empty())
    write_file(metrics_out, lines);
  else
    std::fputs(lines.c_str(), stdout);

  const auto& last = result.history[static_cast<size_t>(result.best_epoch)];
  std::fprintf(stderr, "best epoch %d  val top-1 %.4f  val top-%zu %.4f\n", result.best_epoch,
               last.val_acc.front(), last.val_acc.size(), last.val_acc.back());
  return 0;
}

// ---------------------------------------------------------------------------
// gradcheck

int cmd_gradcheck(const std::string& op_str, int n, int k, int trials, Scalar step, Scalar tol,
                  std::uint64_t seed, const std::string& json_path) {
  GradSuiteSpec spec;
  if (op_str != "all") spec.operators = {rank_operator_from_string(op_str)};
  spec.max_n = n;
  spec.max_k = k;
  spec.trials = trials;
  spec.step = step;
  spec.seed = seed;

  const GradSuiteResult result = run_gradient_suite(spec);
  std::printf("gradcheck: %d cases, worst rel err %.3e (operator %s, mode %s, n=%d, coord %d)\n",
              result.cases, result.worst_rel_err, to_string(result.worst.op),
              to_string(result.worst.mode), result.worst.n, result.worst.report.worst_index);
  if (!json_path.empty()) {
    ordered_json j;
    j["cases"] = result.cases;
    j["worst_rel_err"] = result.worst_rel_err;
    j["worst_operator"] = to_string(result.worst.op);
    j["worst_mode"] = to_string(result.worst.mode);
    j["worst_n"] = result.worst.n;
    write_file(json_path, j.dump() + "\n");
  }
  return result.worst_rel_err < tol ? 0 : 1;
}

// ---------------------------------------------------------------------------
// gen-data

int cmd_gen_data(int classes, int dims, int per_class, Scalar sigma, int pairs,
                 std::uint64_t seed, const std::string& prefix) {
  SyntheticSpec spec;
  spec.n_classes = classes;
  spec.dims = dims;
  spec.per_class = per_class;
  spec.sigma = sigma;
  spec.confusable_pairs = pairs;
  spec.seed = seed;
  const Dataset data = generate_synthetic(spec);
  save_csv(prefix + ".train.csv", data, Split::Train);
  save_csv(prefix + ".val.csv", data, Split::Val);
  save_csv(prefix + ".test.csv", data, Split::Test);
  std::printf("wrote %s.{train,val,test}.csv  (%d samples, %d classes, %d dims)\n", prefix.c_str(),
              data.size(), data.n_classes, data.dims());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"differentiable top-k ranking operators, selection networks and losses"};
  app.require_subcommand(1);

  // gen-net
  auto* gen_net = app.add_subcommand("gen-net", "construct a comparator network and write JSON");
  int gn_n = 16, gn_k = 5;
  std::string gn_kind = "splitter", gn_out;
  bool gn_verify = false;
  gen_net->add_option("--n", gn_n, "input width")->required();
  gen_net->add_option("--k", gn_k, "selection size (ignored for full sorters)");
  gen_net->add_option("--kind", gn_kind, "splitter | classic | bitonic | odd-even");
  gen_net->add_option("--out", gn_out, "output JSON path");
  gen_net->add_flag("--verify", gn_verify, "more random trials when exhaustive checking is off");

  // depth-table
  auto* table = app.add_subcommand("depth-table", "depths of all constructions");
  bool dt_check = false;
  std::string dt_json;
  table->add_flag("--check", dt_check, "exit nonzero unless every cell matches the reference");
  table->add_option("--json", dt_json, "write JSON lines to this path");

  // bench-eq3
  auto* bench = app.add_subcommand("bench-eq3", "time the two assembly orders of P");
  std::string be_nlist = "16,64,256,1024", be_kind = "splitter", be_json, be_timing;
  int be_k = 5, be_repeats = 5;
  double be_tau = 1.0;
  std::uint64_t be_seed = 7;
  bench->add_option("--n-list", be_nlist, "comma-separated widths");
  bench->add_option("--k", be_k, "rows to materialize");
  bench->add_option("--tau", be_tau, "temperature");
  bench->add_option("--repeats", be_repeats, "timing repeats (median)");
  bench->add_option("--kind", be_kind, "network kind");
  bench->add_option("--seed", be_seed, "score seed");
  bench->add_option("--json", be_json, "deterministic results (JSON lines)");
  bench->add_option("--timing-json", be_timing, "wall-clock timings (JSON lines)");

  // train
  auto* tr = app.add_subcommand("train", "train a classifier from a config file");
  std::string tr_config;
  tr->add_option("--config", tr_config, "key = value config file")->required();

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "finite-difference suite over the loss pipeline");
  std::string gc_op = "all", gc_json;
  int gc_n = 16, gc_k = 5, gc_trials = 100;
  double gc_step = 1e-6, gc_tol = 1e-4;
  std::uint64_t gc_seed = 2024;
  gc->add_option("--operator", gc_op, "neuralsort | softsort | sinkhorn | diffsortnet | all");
  gc->add_option("--n", gc_n, "maximum score length");
  gc->add_option("--k", gc_k, "maximum K_max");
  gc->add_option("--trials", gc_trials, "instances per operator and mode");
  gc->add_option("--step", gc_step, "finite-difference step");
  gc->add_option("--tol", gc_tol, "pass threshold on the worst relative error");
  gc->add_option("--seed", gc_seed, "instance seed");
  gc->add_option("--json", gc_json, "summary JSON path");

  // gen-data
  auto* gd = app.add_subcommand("gen-data", "write a synthetic dataset as CSV splits");
  int gd_classes = 20, gd_dims = 16, gd_per = 100, gd_pairs = 0;
  double gd_sigma = 1.0;
  std::uint64_t gd_seed = 1;
  std::string gd_prefix = "dataset";
  gd->add_option("--classes", gd_classes, "class count");
  gd->add_option("--dims", gd_dims, "feature dimensions");
  gd->add_option("--per-class", gd_per, "samples per class");
  gd->add_option("--sigma", gd_sigma, "cluster spread");
  gd->add_option("--pairs", gd_pairs, "confusable class pairs");
  gd->add_option("--seed", gd_seed, "generator seed");
  gd->add_option("--out-prefix", gd_prefix, "output path prefix");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen_net->parsed()) return cmd_gen_net(gn_n, gn_k, gn_kind, gn_out, gn_verify);
    if (table->parsed()) return cmd_depth_table(dt_check, dt_json);
    if (bench->parsed())
      return cmd_bench(be_nlist, be_k, be_tau, be_repeats, be_kind, be_seed, be_json, be_timing);
    if (tr->parsed()) return cmd_train(tr_config);
    if (gc->parsed())
      return cmd_gradcheck(gc_op, gc_n, gc_k, gc_trials, gc_step, gc_tol, gc_seed, gc_json);
    if (gd->parsed())
      return cmd_gen_data(gd_classes, gd_dims, gd_per, gd_sigma, gd_pairs, gd_seed, gd_prefix);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
