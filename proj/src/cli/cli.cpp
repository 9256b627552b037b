#include "falkon/cli.hpp"

#include <cblas.h>
#include <lapacke.h>

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <optional>
#include <ostream>
#include <random>

#include "falkon/falkon.hpp"
#include "falkon/gsc.hpp"
#include "falkon/io.hpp"
#include "falkon/metrics.hpp"
#include "falkon/model_file.hpp"

namespace falkon {

namespace {

using Json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Common {
  std::size_t workers = 1;
  double budget_mb = 32.0;
  int precision = 64;
  bool json = false;
};

struct TrainArgs {
  std::string data, format, out;
  std::string kernel = "gaussian";
  std::string loss = "squared";
  double sigma = 1.0;
  double lambda = 1e-6;
  std::size_t m = 1000;
  std::size_t iters = 10;
  std::size_t newton_steps = 9;
  std::uint64_t seed = 0;
};

struct PredictArgs {
  std::string model, data, format, out;
  std::string metric = "rmse";
};

struct BenchArgs {
  std::string kind;
  std::size_t size = 1024;
  std::size_t tile = 128;
  std::size_t dim = 8;
  std::size_t inducing = 1000;
  double delay_ms = 5.0;
  std::uint64_t seed = 0;
};

// Names the step a runtime error came from.
struct Phase {
  std::string name = "startup";
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--workers", c.workers, "worker count (FALKON_WORKERS overrides)")
      ->check(CLI::PositiveNumber);
  app->add_option("--budget-mb", c.budget_mb, "scratch memory per worker in MiB")
      ->check(CLI::PositiveNumber);
  app->add_option("--precision", c.precision, "working precision in bits")
      ->check(CLI::IsMember({32, 64}));
  app->add_flag("--json", c.json, "print the report as JSON");
}

std::size_t resolve_workers(const Common& c) {
  if (const char* env = std::getenv("FALKON_WORKERS"); env && *env) {
    char* end = nullptr;
    const auto v = std::strtoull(env, &end, 10);
    if (*end != '\0' || v == 0) throw InvalidArgument("FALKON_WORKERS must be a positive integer");
    return static_cast<std::size_t>(v);
  }
  return c.workers;
}

template <typename T>
ooc::MemoryBudget make_budget(const Common& c) {
  ooc::MemoryBudget b;
  b.workers = resolve_workers(c);
  b.scratch_elements_per_worker =
      static_cast<std::size_t>(c.budget_mb * 1024.0 * 1024.0 / static_cast<double>(sizeof(T)));
  b.validate();
  return b;
}

void print_report(std::ostream& out, const Json& report, bool json) {
  if (json) {
    out << report.dump() << '\n';
    return;
  }
  for (const auto& [key, value] : report.items())
    out << key << '=' << (value.is_string() ? value.get<std::string>() : value.dump()) << '\n';
}

DataFormat data_format(const std::string& format, const std::string& path) {
  return format.empty() ? format_from_path(path) : parse_format(format);
}

KernelSpec kernel_spec(const TrainArgs& a) {
  KernelSpec k = a.kernel == "linear" ? KernelSpec::linear() : KernelSpec::gaussian(a.sigma);
  k.validate();
  return k;
}

template <typename T>
Json train(const TrainArgs& a, const Common& c, Phase& phase) {
  phase.name = "loading data";
  auto data = load_dataset<T>(a.data, data_format(a.format, a.data));
  const auto loss_name = a.loss;
  if (loss_name != "squared") canonicalize_labels(data.y);

  phase.name = "training";
  const auto budget = make_budget<T>(c);
  const std::size_t m = std::min(a.m, data.n());
  FalkonModel<T> model;
  if (loss_name == "squared") {
    FalkonOptions o;
    o.kernel = kernel_spec(a);
    o.lam = a.lambda;
    o.m = m;
    o.iterations = a.iters;
    o.seed = a.seed;
    o.budget = budget;
    model = falkon_fit(data, o);
  } else {
    GscOptions o;
    o.kernel = kernel_spec(a);
    o.m = m;
    o.seed = a.seed;
    o.budget = budget;
    const auto path = NewtonPath::geometric(a.lambda, a.newton_steps, 1.0, 10, a.iters);
    model = gsc_falkon_fit(data, GscLoss::from_name(loss_name), path, o).model;
  }

  phase.name = "evaluating the training fit";
  const auto t0 = Clock::now();
  PredictOptions po;
  po.budget = budget;
  const auto pred = predict(model, data.view(), po);
  const double predict_seconds = seconds_since(t0);
  const auto metric = loss_name == "squared" ? MetricKind::kRmse : MetricKind::kCError;
  const auto report = compute_metric(metric, pred, data.y);

  if (!a.out.empty()) {
    phase.name = "saving the model";
    save_model(a.out, model);
  }

  Json j;
  j["command"] = "train";
  j["n"] = data.n();
  j["d"] = data.d();
  j["m"] = model.m();
  j["kernel"] = model.kernel.name();
  j["lambda"] = a.lambda;
  j["loss"] = loss_name;
  j["precision"] = c.precision;
  j["workers"] = budget.workers;
  j["budget_elements"] = budget.scratch_elements_per_worker;
  j["batch_rows"] = model.info.plan.q;
  j["inducing_chunk"] = model.info.plan.r;
  j["batches"] = model.info.plan.batches;
  j["iterations"] = model.info.iterations;
  j["preconditioner_seconds"] = model.info.preconditioner_seconds;
  j["iterations_seconds"] = model.info.solve_seconds;
  j["predict_seconds"] = predict_seconds;
  j["metric"] = metric_name(report.kind);
  j["value"] = report.value;
  j["n_eval"] = report.n_eval;
  if (!a.out.empty()) j["model"] = a.out;
  return j;
}

template <typename T>
std::pair<std::vector<double>, Dataset<T>> predict_file(const PredictArgs& a, const Common& c,
                                                        Phase& phase, double& seconds) {
  phase.name = "loading the model";
  const auto model = load_model<T>(a.model);
  phase.name = "loading data";
  auto data = load_dataset<T>(a.data, data_format(a.format, a.data),
                              std::holds_alternative<SparseMatrix<T>>(model.inducing.x) ? model.d() : 0);
  phase.name = "predicting";
  PredictOptions po;
  po.budget = make_budget<T>(c);
  const auto t0 = Clock::now();
  auto pred = predict(model, data.view(), po);
  seconds = seconds_since(t0);
  return {std::move(pred), std::move(data)};
}

template <typename T>
Json predict_cmd(const PredictArgs& a, const Common& c, Phase& phase, std::ostream& out) {
  double seconds = 0.0;
  const auto [pred, data] = predict_file<T>(a, c, phase, seconds);
  phase.name = "writing predictions";
  std::ofstream file;
  if (!a.out.empty()) {
    file.open(a.out);
    if (!file) throw InvalidArgument("cannot write '" + a.out + "'");
  }
  std::ostream& dst = a.out.empty() ? out : file;
  dst << std::setprecision(17);
  for (double p : pred) dst << p << '\n';
  if (a.out.empty()) return nullptr;
  Json j;
  j["command"] = "predict";
  j["n"] = pred.size();
  j["predict_seconds"] = seconds;
  j["out"] = a.out;
  return j;
}

template <typename T>
Json evaluate(const PredictArgs& a, const Common& c, Phase& phase) {
  const auto kind = parse_metric(a.metric);
  double seconds = 0.0;
  auto [pred, data] = predict_file<T>(a, c, phase, seconds);
  phase.name = "computing the metric";
  if (kind == MetricKind::kCError || kind == MetricKind::kOneMinusAuc) canonicalize_labels(data.y);
  auto report = compute_metric(kind, pred, data.y);
  report.timings.emplace_back("predict", seconds);
  Json j;
  j["command"] = "evaluate";
  j["metric"] = metric_name(report.kind);
  j["value"] = report.value;
  j["n_eval"] = report.n_eval;
  for (const auto& [phase_name, s] : report.timings) j[phase_name + "_seconds"] = s;
  return j;
}

// Well-conditioned SPD matrix: B B^T / n + I.
DenseMatrix<double> random_spd(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  DenseMatrix<double> b(n, n), a(n, n);
  for (auto& v : b.values()) v = dist(rng);
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, static_cast<int>(n), static_cast<int>(n),
              static_cast<int>(n), 1.0 / static_cast<double>(n), b.data(), static_cast<int>(n),
              b.data(), static_cast<int>(n), 0.0, a.data(), static_cast<int>(n));
  for (std::size_t i = 0; i < n; ++i) a(i, i) += 1.0;
  return a;
}

double max_abs_triangle(const DenseMatrix<double>& x, const DenseMatrix<double>& y, bool upper) {
  double worst = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = upper ? i : 0; j < (upper ? x.cols() : i + 1); ++j)
      worst = std::max(worst, std::abs(x(i, j) - y(i, j)));
  return worst;
}

std::uint64_t peak_scratch(const ooc::TransferLedger& ledger) {
  const auto peaks = ledger.peak_scratch_per_worker();
  return peaks.empty() ? 0 : *std::max_element(peaks.begin(), peaks.end());
}

Json bench(const BenchArgs& a, const Common& c, Phase& phase) {
  Json j;
  j["command"] = "bench";
  j["kernel"] = a.kind;
  const std::size_t workers = resolve_workers(c);
  j["workers"] = workers;
  if (a.kind == "cholesky" || a.kind == "lauum") {
    const std::size_t n = a.size, t = std::min(a.tile, a.size);
    ooc::MemoryBudget budget;
    budget.workers = workers;
    // Tiles plus a row panel: the same bound plan_tiles uses.
    budget.scratch_elements_per_worker = ((n + t - 1) / t + 1) * t * t;
    const auto layout = ooc::make_tile_layout(n, t, workers);
    ooc::TransferLedger ledger(workers);
    j["size"] = n;
    j["tile"] = t;
    j["budget_elements"] = budget.scratch_elements_per_worker;
    phase.name = "preparing the input";
    auto a0 = random_spd(n, a.seed);
    const int ni = static_cast<int>(n);
    if (a.kind == "cholesky") {
      auto ours = a0, ref = a0;
      phase.name = "tiled factorization";
      auto t0 = Clock::now();
      ooc::ooc_cholesky_inplace(ours, layout, budget, ledger, ooc::Uplo::kLower);
      j["ooc_seconds"] = seconds_since(t0);
      phase.name = "reference factorization";
      t0 = Clock::now();
      if (LAPACKE_dpotrf(LAPACK_ROW_MAJOR, 'L', ni, ref.data(), ni) != 0)
        throw Error("reference factorization failed");
      j["reference_seconds"] = seconds_since(t0);
      j["max_abs_error"] = max_abs_triangle(ours, ref, false);
    } else {
      // Upper Cholesky factor of an SPD matrix as a well-scaled triangle.
      if (LAPACKE_dpotrf(LAPACK_ROW_MAJOR, 'U', ni, a0.data(), ni) != 0)
        throw Error("input factorization failed");
      auto ours = a0, ref = a0;
      phase.name = "tiled LAUUM";
      auto t0 = Clock::now();
      ooc::ooc_lauum_inplace(ours, layout, budget, ledger, ooc::Uplo::kUpper);
      j["ooc_seconds"] = seconds_since(t0);
      DenseMatrix<double> outside(n, n);
      t0 = Clock::now();
      ooc::ooc_lauum_outofplace(a0, outside, layout, budget, ledger, ooc::Uplo::kUpper);
      j["ooc_outofplace_seconds"] = seconds_since(t0);
      phase.name = "reference LAUUM";
      t0 = Clock::now();
      LAPACKE_dlauum(LAPACK_ROW_MAJOR, 'U', ni, ref.data(), ni);
      j["reference_seconds"] = seconds_since(t0);
      j["max_abs_error"] = max_abs_triangle(ours, ref, true);
      j["max_abs_error_outofplace"] = max_abs_triangle(outside, ref, true);
    }
    j["peak_scratch_elements"] = peak_scratch(ledger);
    j["host_to_scratch_elements"] = ledger.host_to_scratch_elements();
    j["scratch_to_host_elements"] = ledger.scratch_to_host_elements();
    return j;
  }

  phase.name = "preparing the input";
  const std::size_t n = a.size, d = a.dim;
  std::mt19937_64 rng(a.seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  DenseMatrix<double> x(n, d);
  for (auto& v : x.values()) v = dist(rng);
  const std::size_t m = std::min(a.inducing, n);
  const auto rows = sample_without_replacement(n, m, a.seed);
  const auto xm = std::get<DenseMatrix<double>>(gather_rows<double>(x.view(), rows));
  std::vector<double> v(m);
  for (auto& e : v) e = dist(rng);
  StreamContext<double> ctx{x.view(), xm.view(), KernelSpec::gaussian(std::sqrt(double(d)))};
  ctx.budget = make_budget<double>(c);
  j["n"] = n;
  j["d"] = d;
  j["m"] = m;

  if (a.kind == "mvm") {
    ctx.plan = fit_plan_to_scratch<double>(ctx.x, ctx.x_m, ctx.budget.scratch_elements_per_worker,
                                           ctx.policy, 1, false);
    phase.name = "fused product";
    ctx.pipeline.fused_thin = true;
    auto t0 = Clock::now();
    const auto fused = knm_forward(ctx, v);
    const double fused_s = seconds_since(t0);
    phase.name = "materialized product";
    ctx.pipeline.fused_thin = false;
    t0 = Clock::now();
    const auto plain = knm_forward(ctx, v);
    const double plain_s = seconds_since(t0);
    double diff = 0.0;
    for (std::size_t i = 0; i < n; ++i) diff = std::max(diff, std::abs(fused[i] - plain[i]));
    j["batches"] = ctx.plan.batches;
    j["fused_seconds"] = fused_s;
    j["materialized_seconds"] = plain_s;
    j["ratio"] = fused_s / plain_s;
    j["max_abs_difference"] = diff;
    return j;
  }

  // pipeline: 16 batches with equal injected stage delays.
  const std::size_t batches = 16;
  const std::size_t q = (n + batches - 1) / batches;
  ctx.plan = BatchPlan{q, m, d, (n + q - 1) / q};
  const auto delay = std::chrono::microseconds(static_cast<std::int64_t>(a.delay_ms * 1000.0));
  ctx.pipeline.load_delay = ctx.pipeline.compute_delay = ctx.pipeline.store_delay = delay;
  phase.name = "overlapped pipeline";
  ctx.pipeline.overlap = true;
  auto t0 = Clock::now();
  const auto overlapped = knm_vec_product(ctx, v);
  const double overlap_s = seconds_since(t0);
  phase.name = "serial pipeline";
  ctx.pipeline.overlap = false;
  t0 = Clock::now();
  const auto serial = knm_vec_product(ctx, v);
  const double serial_s = seconds_since(t0);
  j["batches"] = ctx.plan.batches;
  j["stage_delay_ms"] = a.delay_ms;
  j["overlapped_seconds"] = overlap_s;
  j["serial_seconds"] = serial_s;
  j["ratio"] = overlap_s / serial_s;
  j["results_identical"] = overlapped == serial;
  return j;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Nystrom kernel ridge regression and logistic regression"};
  app.require_subcommand(1);
  Common common;
  TrainArgs ta;
  PredictArgs pa;
  BenchArgs ba;

  auto* train_cmd = app.add_subcommand("train", "fit a model");
  train_cmd->add_option("--data", ta.data, "training data")->required();
  train_cmd->add_option("--format", ta.format, "csv, fbin or libsvm (default: by extension)")
      ->check(CLI::IsMember({"csv", "fbin", "libsvm", "svm"}));
  train_cmd->add_option("--kernel", ta.kernel)->check(CLI::IsMember({"gaussian", "linear"}));
  train_cmd->add_option("--sigma", ta.sigma, "gaussian length-scale")->check(CLI::PositiveNumber);
  train_cmd->add_option("--lambda", ta.lambda, "regularization")->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--m", ta.m, "inducing points")->check(CLI::PositiveNumber);
  train_cmd->add_option("--iters", ta.iters, "CG iterations (final step for Newton losses)")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--loss", ta.loss)->check(CLI::IsMember({"squared", "logistic", "robust"}));
  train_cmd->add_option("--newton-steps", ta.newton_steps, "outer steps of the Newton path")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--seed", ta.seed);
  train_cmd->add_option("--out", ta.out, "model file");
  add_common(train_cmd, common);

  auto* predict_sub = app.add_subcommand("predict", "predict with a saved model");
  auto* evaluate_sub = app.add_subcommand("evaluate", "score a saved model on labelled data");
  for (auto* sub : {predict_sub, evaluate_sub}) {
    sub->add_option("--model", pa.model)->required();
    sub->add_option("--data", pa.data)->required();
    sub->add_option("--format", pa.format)->check(CLI::IsMember({"csv", "fbin", "libsvm", "svm"}));
    add_common(sub, common);
  }
  predict_sub->add_option("--out", pa.out, "prediction file (default: stdout)");
  evaluate_sub->add_option("--metric", pa.metric)
      ->check(CLI::IsMember({"rmse", "rel-rmse", "c-error", "one-minus-auc"}));

  auto* bench_sub = app.add_subcommand("bench", "linear-algebra microbenchmarks");
  bench_sub->add_option("kind", ba.kind)
      ->required()
      ->check(CLI::IsMember({"cholesky", "lauum", "mvm", "pipeline"}));
  bench_sub->add_option("--size", ba.size, "matrix side or row count")->check(CLI::PositiveNumber);
  bench_sub->add_option("--tile", ba.tile, "tile side")->check(CLI::PositiveNumber);
  bench_sub->add_option("--dim", ba.dim, "features (mvm, pipeline)")->check(CLI::PositiveNumber);
  bench_sub->add_option("--inducing", ba.inducing, "inducing rows (mvm, pipeline)")
      ->check(CLI::PositiveNumber);
  bench_sub->add_option("--delay-ms", ba.delay_ms, "stage delay (pipeline)")
      ->check(CLI::NonNegativeNumber);
  bench_sub->add_option("--seed", ba.seed);
  add_common(bench_sub, common);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  Phase phase;
  try {
    Json report;
    const bool single = common.precision == 32;
    if (train_cmd->parsed()) {
      report = single ? train<float>(ta, common, phase) : train<double>(ta, common, phase);
    } else if (predict_sub->parsed()) {
      report = single ? predict_cmd<float>(pa, common, phase, out)
                      : predict_cmd<double>(pa, common, phase, out);
    } else if (evaluate_sub->parsed()) {
      report = single ? evaluate<float>(pa, common, phase) : evaluate<double>(pa, common, phase);
    } else {
      report = bench(ba, common, phase);
    }
    if (!report.is_null()) print_report(out, report, common.json);
    return 0;
  } catch (const std::exception& e) {
    err << "error while " << phase.name << ": " << e.what() << '\n';
    return 1;
  }
}

}  // namespace falkon
