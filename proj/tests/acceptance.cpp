// Acceptance suite: one line per criterion, nonzero exit if any fails.
// argv[1] must point at the CLI binary (used for the determinism checks and
// the depth-table gate).

#include "softperm/bench.hpp"
#include "softperm/gradsuite.hpp"
#include "softperm/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

using namespace softperm;

namespace {

std::string g_cli;
int g_failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  std::printf("%s  criterion %d: %s  (%s)\n", ok ? "PASS" : "FAIL", id, name.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!ok) g_failures++;
}

double elapsed_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = g_cli + " " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

std::vector<int> argsort_desc(const Vector& s) {
  std::vector<int> idx(static_cast<size_t>(s.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return s(a) > s(b); });
  return idx;
}

Scalar min_gap(const Vector& s) {
  Scalar g = std::numeric_limits<Scalar>::infinity();
  for (int i = 0; i < s.size(); ++i)
    for (int j = i + 1; j < s.size(); ++j) g = std::min(g, std::abs(s(i) - s(j)));
  return g;
}

Vector gapped_scores(Rng& rng, int n, Scalar gap) {
  for (;;) {
    Vector s = rng.uniform_vector(n, -5.0, 5.0);
    if (n < 2 || min_gap(s) >= gap) return s;
  }
}

// --------------------------------------------------------------------------

void criterion_1_depth_table() {
  const auto t0 = std::chrono::steady_clock::now();
  int mismatches = 0;
  for (int n : reference_depth_table_n()) {
    if (build_full_sorter(n, SortFlavor::Bitonic).depth() != reference_depth(n, 0, "full-sort"))
      mismatches++;
    for (int k : reference_depth_table_k()) {
      if (build_classic_selection(n, k).depth() != reference_depth(n, k, "classic-selection"))
        mismatches++;
      if (build_splitter_selection(n, k).depth() != reference_depth(n, k, "splitter-selection"))
        mismatches++;
    }
  }
  const int cli_rc = run_cli("depth-table --check");
  const double secs = elapsed_since(t0);
  char detail[160];
  std::snprintf(detail, sizeof(detail), "%d mismatching cells, cli --check rc=%d, %.2fs",
                mismatches, cli_rc, secs);
  report(1, "depth-table reproduction", mismatches == 0 && cli_rc == 0 && secs < 60.0, detail);
}

void criterion_2_selection_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  for (int n = 1; n <= 16 && ok; ++n) {
    for (int k = 1; k <= n && ok; ++k) {
      ok = ok && verify_selection(build_splitter_selection(n, k), n, k);
      ok = ok && verify_selection(build_classic_selection(n, k), n, k);
    }
    ok = ok && verify_selection(build_full_sorter(n, SortFlavor::Bitonic), n, n);
    ok = ok && verify_selection(build_full_sorter(n, SortFlavor::OddEven), n, n);
  }

  Rng rng(100);
  int spots = 0;
  for (const auto& [n, k, trials] :
       std::vector<std::tuple<int, int, int>>{{100, 5, 300}, {100, 8, 200}, {1024, 5, 300},
                                              {1024, 1, 200}}) {
    ok = ok && spot_check_selection(build_splitter_selection(n, k), trials / 2, rng);
    ok = ok && spot_check_selection(build_classic_selection(n, k), trials / 2, rng);
    spots += trials;
  }
  char detail[160];
  std::snprintf(detail, sizeof(detail), "exhaustive n<=16 all k, %d random spot checks, %.2fs",
                spots, elapsed_since(t0));
  report(2, "selection correctness", ok, detail);
}

void criterion_3_gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  GradSuiteSpec spec;  // 4 operators x 2 loss modes x 100 instances, n<=16, k<=5
  spec.step = 1e-6;
  const GradSuiteResult result = run_gradient_suite(spec);
  const double secs = elapsed_since(t0);
  char detail[200];
  std::snprintf(detail, sizeof(detail), "%d cases, worst rel err %.3e (%s/%s), %.2fs",
                result.cases, result.worst_rel_err, to_string(result.worst.op),
                to_string(result.worst.mode), secs);
  report(3, "gradient suite vs finite differences", result.worst_rel_err < 1e-4 && secs < 120.0,
         detail);
}

void criterion_4_stochasticity() {
  Rng rng(200);
  NetworkCache nets;
  bool rows_ok = true, cols_ok = true, layers_ok = true;

  for (RankOperator op : {RankOperator::NeuralSort, RankOperator::SoftSort,
                          RankOperator::Sinkhorn, RankOperator::DiffSortNet}) {
    for (int trial = 0; trial < 25; ++trial) {
      const int n = 4 + rng.uniform_int(13);
      const int k = 1 + rng.uniform_int(std::min(n, 5));
      OperatorConfig config;
      config.op = op;
      config.temperature = 0.05 * std::pow(4.0, rng.uniform_int(4));
      config.sinkhorn.tol = 1e-8;
      config.sinkhorn.max_iters = 5000;
      const auto perm = rank_topk(rng.uniform_vector(n, -50, 50), k, config, nets);
      for (int i = 0; i < perm.p.rows(); ++i)
        rows_ok = rows_ok && std::abs(perm.p.row(i).sum() - 1.0) <= 1e-6;
    }
  }

  for (int n : {8, 12, 16, 27}) {
    SinkhornParams params;
    params.tol = 1e-8;
    params.max_iters = 5000;
    const auto plan = sinkhorn_sort(rng.uniform_vector(n, -5, 5), params);
    for (int j = 0; j < n; ++j) cols_ok = cols_ok && std::abs(plan.p.col(j).sum() - 1.0) <= 1e-6;

    const auto net = build_full_sorter(n, SortFlavor::Bitonic);
    const Vector s = rng.uniform_vector(n, -5, 5);
    const auto perm = diffsortnet_topk(s, net, 0.7, n);
    for (int j = 0; j < n; ++j) cols_ok = cols_ok && std::abs(perm.p.col(j).sum() - 1.0) <= 1e-6;

    OperatorTape tape;
    diffsortnet_topk(s, net, 0.7, n, &tape);
    for (const auto& comps : tape.comp_layers) {
      const SparseLayerMatrix layer = relaxed_layer_matrix(tape.wires, comps);
      try {
        layer.validate(1e-12);
      } catch (const std::exception&) {
        layers_ok = false;
      }
      const Matrix dense = layer.to_dense();
      for (int j = 0; j < dense.cols(); ++j)
        layers_ok = layers_ok && std::abs(dense.col(j).sum() - 1.0) <= 1e-12;
    }
  }

  char detail[160];
  std::snprintf(detail, sizeof(detail), "rows %s, columns %s, layers %s",
                rows_ok ? "ok" : "BAD", cols_ok ? "ok" : "BAD", layers_ok ? "ok" : "BAD");
  report(4, "stochasticity invariants", rows_ok && cols_ok && layers_ok, detail);
}

void criterion_5_hard_limit() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(300);
  NetworkCache nets;
  int checked = 0;
  bool ok = true;
  for (int trial = 0; trial < 500 && ok; ++trial) {
    const int n = 2 + trial % 31;
    const Vector s = gapped_scores(rng, n, 1e-2);
    const Scalar gap = min_gap(s);
    const auto order = argsort_desc(s);
    for (RankOperator op : {RankOperator::NeuralSort, RankOperator::SoftSort,
                            RankOperator::Sinkhorn, RankOperator::DiffSortNet}) {
      OperatorConfig config;
      config.op = op;
      config.temperature = 1e-3 * gap;
      config.network_kind = NetworkKind::BitonicSort;  // full sort: all n rows exist
      config.sinkhorn.epsilon = 1e-3 * gap / (s.maxCoeff() - s.minCoeff());
      config.sinkhorn.tol = 1e-7;
      config.sinkhorn.max_iters = 4000;
      const auto perm = rank_topk(s, n, config, nets);
      for (int i = 0; i < n && ok; ++i) {
        int arg = 0;
        perm.p.row(i).maxCoeff(&arg);
        ok = arg == order[static_cast<size_t>(i)];
      }
    }
    ++checked;
  }
  char detail[120];
  std::snprintf(detail, sizeof(detail), "%d vectors x 4 operators, %.2fs", checked,
                elapsed_since(t0));
  report(5, "hard-limit convergence to argsort", ok, detail);
}

void criterion_6_eq3() {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  double gap = 0.0;
  std::string note;
  try {
    const BenchReport rep =
        bench_eq3({16, 64, 256, 1024}, 5, 1.0, 5, NetworkKind::SplitterSelection, 99);
    gap = rep.exponent_full - rep.exponent_topk;
    ok = gap >= 0.8;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "equivalent at 1e-9; exponents %.2f vs %.2f (gap %.2f), %.1fs",
                  rep.exponent_topk, rep.exponent_full, gap, elapsed_since(t0));
    note = buf;
  } catch (const std::exception& e) {
    ok = false;
    note = std::string("equivalence failed: ") + e.what();
  }
  report(6, "back-to-front product: equivalence and scaling", ok, note);
}

void criterion_7_loss_reductions() {
  Rng rng(400);
  NetworkCache nets;
  bool reduction_ok = true;
  const auto pk1 = make_rank_distribution({1, 0, 0, 0, 0});
  for (RankOperator op : {RankOperator::NeuralSort, RankOperator::SoftSort,
                          RankOperator::Sinkhorn, RankOperator::DiffSortNet}) {
    OperatorConfig config;
    config.op = op;
    for (int trial = 0; trial < 25; ++trial) {
      const int n = 6 + rng.uniform_int(10);
      const Vector s = rng.uniform_vector(n, -4, 4);
      const int y = rng.uniform_int(n);
      const auto res = loss_forward_backward(s, y, pk1, config, std::min(8, n),
                                             LossMode::SmTopk, nets);
      const auto ce = softmax_ce(s, y);
      reduction_ok = reduction_ok && std::abs(res.loss - ce.loss) <= 1e-9 &&
                     (res.grad - ce.grad).cwiseAbs().maxCoeff() <= 1e-9;
    }
  }

  const auto w = rank_weights(make_rank_distribution({0.5, 0.5, 0, 0, 0}));
  const bool weights_ok = w == std::vector<Scalar>{1.0, 0.5, 0.0, 0.0, 0.0};

  char detail[120];
  std::snprintf(detail, sizeof(detail), "softmax reduction %s, fig-1 weights %s",
                reduction_ok ? "ok" : "BAD", weights_ok ? "exact" : "BAD");
  report(7, "loss reductions", reduction_ok && weights_ok, detail);
}

struct PairedAccuracies {
  std::vector<Scalar> top1, top5;
  Scalar mean1() const { return std::accumulate(top1.begin(), top1.end(), 0.0) / top1.size(); }
  Scalar mean5() const { return std::accumulate(top5.begin(), top5.end(), 0.0) / top5.size(); }
};

void criterion_8_desk_scale() {
  const auto t0 = std::chrono::steady_clock::now();

  auto run = [&](std::uint64_t seed, LossMode mode, RankOperator op,
                 const std::vector<Scalar>& pk_raw, PairedAccuracies& out) {
    SyntheticSpec spec;
    spec.n_classes = 20;
    spec.dims = 16;
    spec.per_class = 300;
    spec.sigma = 2.0;
    spec.confusable_pairs = 10;
    spec.seed = seed;
    spec.train_frac = 0.5;
    spec.val_frac = 0.15;
    const Dataset data = generate_synthetic(spec);

    TrainConfig config;
    config.pk.fallback = make_rank_distribution(pk_raw);
    config.mode = mode;
    config.operator_config.op = op;
    config.operator_config.temperature = 1.0;
    config.operator_config.network_kind = NetworkKind::SplitterSelection;
    config.operator_config.sinkhorn.epsilon = 0.1;
    config.operator_config.sinkhorn.tol = 1e-4;
    config.operator_config.sinkhorn.max_iters = 100;
    config.truncation_m = 8;
    config.learning_rate = 1e-3;
    config.batch_size = 100;
    config.max_epochs = 60;
    config.patience = 8;
    config.seed = seed + 1000;

    const TrainResult result = train(data, config);
    const auto acc = topk_accuracy(result.model, data, Split::Test, {1, 5});
    out.top1.push_back(acc[0]);
    out.top5.push_back(acc[1]);
  };

  PairedAccuracies base, pure5, sink55, diff55;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    run(seed, LossMode::SoftmaxBaseline, RankOperator::Sinkhorn, {1, 0, 0, 0, 0}, base);
    run(seed, LossMode::PureTopk, RankOperator::Sinkhorn, {0, 0, 0, 0, 1}, pure5);
    run(seed, LossMode::SmTopk, RankOperator::Sinkhorn, {0.5, 0, 0, 0, 0.5}, sink55);
    run(seed, LossMode::SmTopk, RankOperator::DiffSortNet, {0.5, 0, 0, 0, 0.5}, diff55);
  }

  const bool a_top1 = pure5.mean1() <= base.mean1() - 0.10;
  const bool a_top5 = pure5.mean5() >= base.mean5() - 0.02;
  const bool b_top5 = sink55.mean5() >= base.mean5() && diff55.mean5() >= base.mean5();
  const bool b_top1 = std::abs(sink55.mean1() - base.mean1()) <= 0.01 &&
                      std::abs(diff55.mean1() - base.mean1()) <= 0.01;
  const double secs = elapsed_since(t0);

  char detail[320];
  std::snprintf(detail, sizeof(detail),
                "baseline %.3f|%.3f, pure-top5 %.3f|%.3f, sinkhorn-.5 %.3f|%.3f, "
                "diffsort-.5 %.3f|%.3f, %.0fs",
                base.mean1(), base.mean5(), pure5.mean1(), pure5.mean5(), sink55.mean1(),
                sink55.mean5(), diff55.mean1(), diff55.mean5(), secs);
  report(8, "desk-scale learning directions", a_top1 && a_top5 && b_top5 && b_top1 && secs < 600.0,
         detail);
}

void criterion_9_determinism() {
  bool ok = true;
  std::string note = "all JSON outputs byte-identical";

  auto twice = [&](const std::string& args_a, const std::string& args_b, const std::string& fa,
                   const std::string& fb, const std::string& what) {
    if (run_cli(args_a) != 0 || run_cli(args_b) != 0) {
      ok = false;
      note = what + ": nonzero exit";
      return;
    }
    const std::string a = read_file(fa);
    const std::string b = read_file(fb);
    if (a.empty() || a != b) {
      ok = false;
      note = what + ": outputs differ";
    }
  };

  twice("gen-net --n 64 --k 5 --kind splitter --out acc9_net_a.json",
        "gen-net --n 64 --k 5 --kind splitter --out acc9_net_b.json", "acc9_net_a.json",
        "acc9_net_b.json", "gen-net");
  twice("depth-table --json acc9_table_a.json", "depth-table --json acc9_table_b.json",
        "acc9_table_a.json", "acc9_table_b.json", "depth-table");
  twice("gen-data --classes 5 --dims 4 --per-class 12 --sigma 0.7 --pairs 2 --seed 3 "
        "--out-prefix acc9_data_a",
        "gen-data --classes 5 --dims 4 --per-class 12 --sigma 0.7 --pairs 2 --seed 3 "
        "--out-prefix acc9_data_b",
        "acc9_data_a.train.csv", "acc9_data_b.train.csv", "gen-data");
  twice("gradcheck --operator softsort --n 8 --trials 3 --json acc9_gc_a.json",
        "gradcheck --operator softsort --n 8 --trials 3 --json acc9_gc_b.json", "acc9_gc_a.json",
        "acc9_gc_b.json", "gradcheck");
  twice("bench-eq3 --n-list 16,32 --k 3 --repeats 2 --json acc9_bench_a.json",
        "bench-eq3 --n-list 16,32 --k 3 --repeats 2 --json acc9_bench_b.json",
        "acc9_bench_a.json", "acc9_bench_b.json", "bench-eq3");

  {
    std::ofstream cfg("acc9_train.cfg");
    cfg << "synthetic = true\nclasses = 6\ndims = 6\nper_class = 30\nsigma = 0.8\npairs = 2\n"
           "data_seed = 4\npk = 0.5,0,0,0,0.5\noperator = diffsortnet\nloss = sm-topk\n"
           "m = 6\nepochs = 6\npatience = 3\nbatch = 25\nseed = 2\n";
  }
  {
    std::ofstream a("acc9_train_a.cfg"), b("acc9_train_b.cfg");
    a << read_file("acc9_train.cfg") << "metrics_out = acc9_metrics_a.jsonl\n";
    b << read_file("acc9_train.cfg") << "metrics_out = acc9_metrics_b.jsonl\n";
  }
  twice("train --config acc9_train_a.cfg", "train --config acc9_train_b.cfg",
        "acc9_metrics_a.jsonl", "acc9_metrics_b.jsonl", "train");

  report(9, "CLI determinism", ok, note);
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: acceptance <path-to-cli>\n");
    return 2;
  }
  g_cli = argv[1];

  criterion_1_depth_table();
  criterion_2_selection_correctness();
  criterion_3_gradient_suite();
  criterion_4_stochasticity();
  criterion_5_hard_limit();
  criterion_6_eq3();
  criterion_7_loss_reductions();
  criterion_8_desk_scale();
  criterion_9_determinism();

  if (g_failures == 0) std::printf("all acceptance criteria passed\n");
  return g_failures == 0 ? 0 : 1;
}
