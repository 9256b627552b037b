#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "falkon/error.hpp"
#include "falkon/falkon.hpp"

using namespace falkon;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

namespace {

template <typename T>
DenseMatrix<T> random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  DenseMatrix<T> m(rows, cols);
  for (auto& v : m.values()) v = static_cast<T>(dist(rng));
  return m;
}

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

Vec as_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), v.size()); }

double rel(const Vec& a, const Vec& b) { return (a - b).norm() / b.norm(); }

template <typename T>
RowMat kernel_oracle(const KernelSpec& k, const MatrixView<T>& a, const MatrixView<T>& b) {
  const auto block = eval_kernel_block<T>(k, a, b);
  RowMat out(block.rows(), block.cols());
  for (std::size_t i = 0; i < block.rows(); ++i)
    for (std::size_t j = 0; j < block.cols(); ++j) out(i, j) = block(i, j);
  return out;
}

template <typename T>
StreamContext<T> context(const MatrixView<T>& x, const MatrixView<T>& xm, const KernelSpec& k,
                         std::size_t q, std::size_t r, std::size_t workers = 1,
                         ooc::TransferLedger* ledger = nullptr) {
  StreamContext<T> ctx{x, xm, k};
  ctx.budget.workers = workers;
  ctx.ledger = ledger;
  ctx.plan = BatchPlan{q, r, view_cols(x), (view_rows(x) + q - 1) / q};
  return ctx;
}

Dataset<double> regression_data(std::size_t n, std::size_t d, std::uint64_t seed) {
  Dataset<double> data{random_matrix<double>(n, d, seed), {}};
  const auto& x = std::get<DenseMatrix<double>>(data.x);
  std::mt19937_64 rng(seed + 1);
  std::normal_distribution<double> noise(0.0, 0.1);
  data.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) data.y[i] = std::sin(x(i, 0)) + 0.5 * x(i, 1) + noise(rng);
  return data;
}

CgConfig steps(std::size_t t, std::optional<double> tol = std::nullopt) {
  CgConfig cfg;
  cfg.max_iters = t;
  cfg.residual_tol = tol;
  return cfg;
}

}  // namespace

TEST_CASE("inducing sampling") {
  SUBCASE("m = n selects every row") {
    auto idx = sample_without_replacement(37, 37, 5);
    std::sort(idx.begin(), idx.end());
    for (std::size_t i = 0; i < 37; ++i) CHECK(idx[i] == i);
  }
  SUBCASE("deterministic and distinct") {
    for (std::size_t m : {1, 3, 10, 400}) {
      const auto a = sample_without_replacement(1000, m, 42);
      CHECK(a == sample_without_replacement(1000, m, 42));
      CHECK(std::set<std::size_t>(a.begin(), a.end()).size() == m);
      CHECK(*std::max_element(a.begin(), a.end()) < 1000);
    }
    CHECK(sample_without_replacement(1000, 10, 1) != sample_without_replacement(1000, 10, 2));
  }
  SUBCASE("inclusion frequency is m/n") {
    std::vector<int> hits(5, 0);
    for (std::uint64_t s = 0; s < 10000; ++s)
      for (auto i : sample_without_replacement(5, 2, s)) ++hits[i];
    for (int h : hits) CHECK(std::abs(h / 10000.0 - 0.4) <= 0.02);
  }
  SUBCASE("rows follow the indices") {
    Dataset<double> data{random_matrix<double>(20, 3, 1), std::vector<double>(20, 0.0)};
    auto ind = subsample_inducing(data, 6, 9);
    const auto& xm = std::get<DenseMatrix<double>>(ind.x);
    const auto& x = std::get<DenseMatrix<double>>(data.x);
    for (std::size_t j = 0; j < 6; ++j)
      for (std::size_t k = 0; k < 3; ++k) CHECK(xm(j, k) == x(ind.indices[j], k));
    Dataset<double> sparse{SparseMatrix<double>::from_dense(x), data.y};
    auto ind_s = subsample_inducing(sparse, 6, 9);
    CHECK(ind_s.indices == ind.indices);
    CHECK(std::get<SparseMatrix<double>>(ind_s.x).to_dense() == xm);
    CHECK_THROWS_AS(subsample_inducing(data, 21, 0), InvalidArgument);
    CHECK_THROWS_AS(subsample_inducing(data, 0, 0), InvalidArgument);
  }
}

TEST_CASE("plan_batches") {
  // Exhaustive search with the documented tie-breaking.
  auto brute = [](std::size_t n, std::size_t m, std::size_t d, std::size_t G) {
    BatchPlan best;
    double best_score = -1;
    for (std::size_t q = 1; q <= n; ++q)
      for (std::size_t s = 1; s <= d; ++s) {
        if (q * s + d * s > G) continue;
        const double score = double(q) * m * s / double(q * s + d * s);
        const bool better =
            score > best_score + 1e-12 ||
            (std::abs(score - best_score) <= 1e-12 &&
             (q > best.q || (q == best.q && s > best.s)));
        if (better) {
          best_score = score;
          best = BatchPlan{q, m, s, (n + q - 1) / q};
        }
      }
    return best;
  };
  SUBCASE("unconstrained budget is a single batch") {
    const auto p = plan_batches(300, 20, 7, (300 + 7) * 7);
    CHECK(p.q == 300);
    CHECK(p.s == 7);
    CHECK(p.batches == 1);
  }
  SUBCASE("matches exhaustive search") {
    CHECK(plan_batches(100, 50, 10, 1000) == brute(100, 50, 10, 1000));
    for (std::size_t n : {1, 5, 17, 40})
      for (std::size_t d : {1, 2, 6, 13})
        for (std::size_t G : {d + 1, 2 * d + 3, std::size_t{50}, std::size_t{97}, std::size_t{400}}) {
          CAPTURE(n);
          CAPTURE(d);
          CAPTURE(G);
          CHECK(plan_batches(n, 9, d, G) == brute(n, 9, d, G));
        }
  }
  SUBCASE("one feature takes the largest q") {
    const auto p = plan_batches(1000, 10, 1, 101);
    CHECK(p.q == 100);
    CHECK(p.batches == 10);
  }
  SUBCASE("infeasible") { CHECK_THROWS_AS(plan_batches(10, 5, 8, 8), BudgetExceeded); }
}

TEST_CASE("plan fitted to scratch") {
  const auto x = random_matrix<double>(5000, 6, 2);
  const auto xm = random_matrix<double>(300, 6, 3);
  for (std::size_t G : {2000, 20000, 200000, 4000000}) {
    CAPTURE(G);
    const auto p = fit_plan_to_scratch<double>(x.view(), xm.view(), G, {});
    CHECK(stream_footprint_bytes<double>(x.view(), xm.view(), p.q, p.r, {}, 2, true) <=
          G * sizeof(double));
    CHECK(p.s == 6);
    CHECK(p.batches == (5000 + p.q - 1) / p.q);
    if (G >= 200000) CHECK(p.r == 300);
  }
  CHECK(fit_plan_to_scratch<double>(x.view(), xm.view(), 4000000, {}).q == 5000);
  CHECK(fit_plan_to_scratch<double>(x.view(), xm.view(), 2000, {}).r < 300);
  CHECK_THROWS_AS(fit_plan_to_scratch<double>(x.view(), xm.view(), 10, {}), BudgetExceeded);
}

TEST_CASE("K_nm^T K_nm v") {
  const auto x = random_matrix<double>(200, 4, 4);
  const auto xm = random_matrix<double>(40, 4, 5);
  const auto k = KernelSpec::gaussian(1.7);
  const RowMat knm = kernel_oracle<double>(k, x.view(), xm.view());
  const auto v = random_vector(40, 6);
  const Vec expect = knm.transpose() * (knm * as_vec(v));

  CHECK(knm_vec_product(context<double>(x.view(), xm.view(), k, 200, 40), std::vector<double>(40))
        == std::vector<double>(40, 0.0));
  const auto single = knm_vec_product(context<double>(x.view(), xm.view(), k, 200, 40), v);
  CHECK(rel(as_vec(single), expect) < 1e-12);
  for (std::size_t q : {7, 64, 200})
    for (std::size_t r : {40, 13})
      for (std::size_t workers : {1, 2, 3}) {
        CAPTURE(q);
        CAPTURE(r);
        CAPTURE(workers);
        ooc::TransferLedger ledger(workers);
        auto ctx = context<double>(x.view(), xm.view(), k, q, r, workers, &ledger);
        const auto got = knm_vec_product(ctx, v);
        CHECK(rel(as_vec(got), as_vec(single)) < 1e-10);
        CHECK(ledger.host_knm_elements() == 0);
        for (auto peak : ledger.peak_scratch_per_worker())
          CHECK(peak <= ctx.budget.scratch_elements_per_worker);
        // Ordered reduction: identical bits for any worker count or schedule.
        auto serial = ctx;
        serial.pipeline.overlap = false;
        serial.budget.workers = 1;
        CHECK(knm_vec_product(serial, v) == got);
      }
}

TEST_CASE("sparse rows stream like dense rows") {
  auto xd = random_matrix<double>(150, 20, 7);
  std::mt19937_64 rng(8);
  for (auto& v : xd.values())
    if (rng() % 4) v = 0;
  const auto xs = SparseMatrix<double>::from_dense(xd);
  const auto xm = random_matrix<double>(30, 20, 9);
  const auto k = KernelSpec::gaussian(4.0);
  const auto v = random_vector(30, 10);
  const auto dense = knm_vec_product(context<double>(xd.view(), xm.view(), k, 16, 30, 2), v);
  const auto sparse = knm_vec_product(context<double>(xs.view(), xm.view(), k, 16, 30, 2), v);
  CHECK(dense == sparse);
}

TEST_CASE("K_nm^T w") {
  const auto x = random_matrix<double>(120, 3, 11);
  const auto xm = random_matrix<double>(25, 3, 12);
  const auto k = KernelSpec::gaussian(1.0);
  const RowMat knm = kernel_oracle<double>(k, x.view(), xm.view());
  auto ctx = context<double>(x.view(), xm.view(), k, 17, 25, 2);
  CHECK(knm_transpose_vec(ctx, std::vector<double>(120)) == std::vector<double>(25, 0.0));
  std::vector<double> e(120, 0.0);
  e[33] = 1.0;
  CHECK(rel(as_vec(knm_transpose_vec(ctx, e)), knm.row(33).transpose()) < 1e-15);
  const auto w = random_vector(120, 13);
  ctx.plan.r = 8;
  CHECK(rel(as_vec(knm_transpose_vec(ctx, w)), knm.transpose() * as_vec(w)) < 1e-10);
  CHECK_THROWS_AS(knm_transpose_vec(ctx, std::vector<double>(119)), DimensionMismatch);
}

TEST_CASE("K_nm v, fused and materialized") {
  const auto x = random_matrix<double>(130, 5, 14);
  const auto xm = random_matrix<double>(20, 5, 15);
  const auto k = KernelSpec::gaussian(2.0);
  const RowMat knm = kernel_oracle<double>(k, x.view(), xm.view());
  const auto v = random_vector(20, 16);
  auto ctx = context<double>(x.view(), xm.view(), k, 32, 20, 2);
  const auto fused = knm_forward(ctx, v);
  ctx.pipeline.fused_thin = false;
  const auto materialized = knm_forward(ctx, v);
  CHECK(rel(as_vec(fused), knm * as_vec(v)) < 1e-12);
  CHECK(rel(as_vec(materialized), knm * as_vec(v)) < 1e-12);
}

TEST_CASE("streaming errors") {
  const auto x = random_matrix<double>(100, 3, 17);
  const auto xm = random_matrix<double>(10, 3, 18);
  const auto k = KernelSpec::gaussian(1.0);
  SUBCASE("plan exceeding the budget") {
    auto ctx = context<double>(x.view(), xm.view(), k, 100, 10);
    ctx.budget.scratch_elements_per_worker = 500;
    CHECK_THROWS_AS(knm_vec_product(ctx, random_vector(10, 1)), BudgetExceeded);
  }
  SUBCASE("feature mismatch") {
    const auto other = random_matrix<double>(10, 4, 19);
    CHECK_THROWS_AS(knm_vec_product(context<double>(x.view(), other.view(), k, 10, 10),
                                    random_vector(10, 1)),
                    DimensionMismatch);
    CHECK_THROWS_AS(knm_vec_product(context<double>(x.view(), xm.view(), k, 10, 10),
                                    random_vector(9, 1)),
                    DimensionMismatch);
  }
  SUBCASE("a failing batch stops every worker") {
    for (bool overlap : {true, false}) {
      auto ctx = context<double>(x.view(), xm.view(), k, 7, 10, 3);
      ctx.pipeline.overlap = overlap;
      BatchProgram program;
      const auto v = random_vector(10, 2);
      program.forward = {v};
      program.backward = [](const BatchForward& f, std::span<double>) {
        if (f.batch == 5) throw LossContractViolation("boom");
      };
      CHECK_THROWS_AS(run_stream(ctx, program), LossContractViolation);
    }
  }
}

TEST_CASE("injected delays leave results unchanged") {
  const auto x = random_matrix<double>(64, 3, 20);
  const auto xm = random_matrix<double>(12, 3, 21);
  const auto v = random_vector(12, 22);
  auto ctx = context<double>(x.view(), xm.view(), KernelSpec::gaussian(1.0), 8, 12);
  const auto base = knm_vec_product(ctx, v);
  ctx.pipeline.load_delay = ctx.pipeline.compute_delay = ctx.pipeline.store_delay =
      std::chrono::microseconds(500);
  CHECK(knm_vec_product(ctx, v) == base);
}

TEST_CASE("conjugate gradient") {
  const std::vector<double> b{1.0, -2.0, 3.0};
  SUBCASE("identity") {
    auto res = conjugate_gradient([](std::span<const double> v) {
      return std::vector<double>(v.begin(), v.end());
    }, b, steps(5));
    CHECK(res.iterations == 1);
    CHECK(res.converged);
    CHECK(res.x == b);
  }
  SUBCASE("scaled identity") {
    auto res = conjugate_gradient([](std::span<const double> v) {
      std::vector<double> o(v.begin(), v.end());
      for (auto& x : o) x *= 2.0;
      return o;
    }, b, steps(5));
    CHECK(res.iterations == 1);
    for (std::size_t i = 0; i < 3; ++i) CHECK(res.x[i] == doctest::Approx(b[i] / 2));
  }
  SUBCASE("random SPD against a direct solve") {
    const RowMat g = RowMat::Random(20, 20);
    const RowMat a = g * g.transpose() + 0.5 * RowMat::Identity(20, 20);
    const auto rhs = random_vector(20, 23);
    auto op = [&](std::span<const double> v) {
      const Vec out = a * Eigen::Map<const Vec>(v.data(), 20);
      return std::vector<double>(out.data(), out.data() + 20);
    };
    CgConfig cfg;
    cfg.max_iters = 20;
    cfg.record_history = true;
    auto res = conjugate_gradient(op, rhs, cfg);
    const Vec direct = a.llt().solve(as_vec(rhs));
    CHECK(rel(as_vec(res.x), direct) < 1e-8);
    CHECK(res.residual_norms.size() == res.iterations + 1);

    // Warm start at the solution needs no progress; tolerance stops early.
    auto warm = conjugate_gradient(op, rhs, steps(3, 1e-6),
                                   std::vector<double>(direct.data(), direct.data() + 20));
    CHECK(warm.iterations <= 1);
    std::size_t seen = 0;
    auto tol = conjugate_gradient(op, rhs, steps(100, 1e-3), {},
                                  [&](std::size_t it, std::span<const double>) { seen = it; });
    CHECK(tol.converged);
    CHECK(seen == tol.iterations);
    CHECK(tol.iterations < 20);
  }
  SUBCASE("non-finite operator output") {
    auto op = [](std::span<const double> v) {
      return std::vector<double>(v.size(), std::nan(""));
    };
    try {
      conjugate_gradient(op, b, steps(4));
      FAIL("expected divergence");
    } catch (const DivergenceError& e) {
      CHECK(e.iteration() == 1);
    }
  }
  SUBCASE("zero right-hand side") {
    auto res = conjugate_gradient([](std::span<const double> v) {
      return std::vector<double>(v.begin(), v.end());
    }, std::vector<double>(3, 0.0), steps(5));
    CHECK(res.iterations == 0);
    CHECK(res.x == std::vector<double>(3, 0.0));
  }
  CHECK_THROWS_AS(conjugate_gradient([](std::span<const double> v) {
    return std::vector<double>(v.begin(), v.end());
  }, b, steps(0)), InvalidArgument);
}

TEST_CASE("preconditioned operator against the explicit reduced system") {
  const auto data = regression_data(200, 4, 24);
  const auto ind = subsample_inducing(data, 30, 25);
  const auto k = KernelSpec::gaussian(2.0);
  const double lam = 1e-3;
  const auto prec = build_preconditioner<double>(ind.view(), k, lam, 200);
  auto ctx = context<double>(data.view(), ind.view(), k, 64, 30, 2);

  const RowMat knm = kernel_oracle<double>(k, data.view(), ind.view());
  const RowMat kmm = kernel_oracle<double>(k, ind.view(), ind.view());
  const auto t_dense = prec.factor_dense(Factor::kT);
  const RowMat t = Eigen::Map<const RowMat>(t_dense.data(), 30, 30);
  const auto a_dense = prec.factor_dense(Factor::kA);
  const RowMat a = Eigen::Map<const RowMat>(a_dense.data(), 30, 30);
  const RowMat p = t.inverse() * a.inverse();
  const RowMat op = p.transpose() * (knm.transpose() * knm + lam * 200 * kmm) * p;

  CHECK(linop_apply(prec, ctx, lam, std::vector<double>(30)) == std::vector<double>(30, 0.0));
  for (std::uint64_t s = 0; s < 3; ++s) {
    const auto b1 = random_vector(30, 100 + s), b2 = random_vector(30, 200 + s);
    const auto l1 = linop_apply(prec, ctx, lam, b1), l2 = linop_apply(prec, ctx, lam, b2);
    CHECK(rel(as_vec(l1), op * as_vec(b1)) < 1e-8);
    const double lhs = as_vec(l1).dot(as_vec(b2)), rhs = as_vec(b1).dot(as_vec(l2));
    CHECK(std::abs(lhs - rhs) <= 1e-8 * std::abs(lhs));
  }
  const auto r = falkon_rhs(prec, ctx, data.y);
  CHECK(rel(as_vec(r), p.transpose() * knm.transpose() * as_vec(data.y)) < 1e-8);

  // CG decreases the quadratic 0.5 b^T L b - r^T b at every step.
  std::vector<double> energy;
  auto lin = [&](std::span<const double> b) { return linop_apply(prec, ctx, lam, b); };
  conjugate_gradient(lin, r, steps(30), {}, [&](std::size_t, std::span<const double> b) {
    const auto lb = lin(b);
    double e = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) e += 0.5 * b[i] * lb[i] - r[i] * b[i];
    energy.push_back(e);
  });
  REQUIRE(energy.size() >= 2);
  for (std::size_t i = 1; i < energy.size(); ++i)
    CHECK(energy[i] <= energy[i - 1] + 1e-12 * std::abs(energy[i - 1]));
}

TEST_CASE("fit") {
  SUBCASE("one point") {
    Dataset<double> data{DenseMatrix<double>(1, 2, std::vector<double>{0.3, -0.1}), {2.5}};
    FalkonOptions o;
    o.kernel = KernelSpec::gaussian(1.0);
    o.lam = 0.2;
    o.m = 1;
    o.iterations = 3;
    const auto model = falkon_fit(data, o);
    REQUIRE(model.alpha.size() == 1);
    CHECK(model.alpha[0] == doctest::Approx(2.5 / 1.2).epsilon(1e-12));
    CHECK(model.inducing.indices == std::vector<std::size_t>{0});
  }
  SUBCASE("exact CG matches the dense reduced solve") {
    const auto data = regression_data(500, 3, 26);
    FalkonOptions o;
    o.kernel = KernelSpec::gaussian(1.5);
    o.lam = 1e-3;
    o.m = 50;
    o.iterations = 50;
    o.seed = 3;
    o.budget.workers = 2;
    const auto model = falkon_fit(data, o);
    const RowMat knm = kernel_oracle<double>(o.kernel, data.view(), model.inducing.view());
    const RowMat kmm = kernel_oracle<double>(o.kernel, model.inducing.view(),
                                             model.inducing.view());
    const RowMat h = knm.transpose() * knm + o.lam * 500 * kmm;
    const Vec direct = h.ldlt().solve(knm.transpose() * as_vec(data.y));
    CHECK(rel(as_vec(model.alpha), direct) < 1e-6);
    CHECK(model.info.iterations <= 50);

    // Different feasible plans give the same model.
    auto o2 = o;
    o2.plan = BatchPlan{37, 11, 3, 14};
    o2.budget.workers = 3;
    const auto other = falkon_fit(data, o2);
    CHECK(rel(as_vec(other.alpha), as_vec(model.alpha)) < 1e-8);
    CHECK(falkon_fit(data, o).alpha == model.alpha);

    // Predictions follow the model's definition.
    const auto xt = random_matrix<double>(77, 3, 27);
    const RowMat kt = kernel_oracle<double>(o.kernel, MatrixView<double>(xt.view()),
                                            model.inducing.view());
    const auto pred = predict(model, MatrixView<double>(xt.view()));
    CHECK(rel(as_vec(pred), kt * as_vec(model.alpha)) < 1e-10);
  }
  SUBCASE("residual history and ledger") {
    const auto data = regression_data(3000, 3, 28);
    ooc::TransferLedger ledger(1);
    FalkonOptions o;
    o.kernel = KernelSpec::gaussian(1.0);
    o.lam = 1e-4;
    o.m = 100;
    o.iterations = 15;
    o.ledger = &ledger;
    o.budget.scratch_elements_per_worker = 30000;
    const auto model = falkon_fit(data, o);
    CHECK(model.info.plan.batches >= 8);
    CHECK(ledger.host_knm_elements() == 0);
    CHECK(ledger.host_total_count(ooc::HostBuffer::kPreconditioner) == 1);
    CHECK(ledger.peak_scratch(0) <= 30000);
    const auto& h = model.info.residual_norms;
    REQUIRE(h.size() == model.info.iterations + 1);
    for (std::size_t i = 1; i < h.size(); ++i) CHECK(h[i] <= 1.05 * h[i - 1]);
  }
  SUBCASE("argument checks") {
    const auto data = regression_data(20, 2, 29);
    FalkonOptions o;
    o.m = 5;
    o.lam = -1;
    CHECK_THROWS_AS(falkon_fit(data, o), InvalidArgument);
    o.lam = 1e-3;
    o.iterations = 0;
    CHECK_THROWS_AS(falkon_fit(data, o), InvalidArgument);
    o.iterations = 2;
    o.m = 21;
    CHECK_THROWS_AS(falkon_fit(data, o), InvalidArgument);
    auto bad = data;
    bad.y.pop_back();
    o.m = 5;
    CHECK_THROWS_AS(falkon_fit(bad, o), DimensionMismatch);
  }
}

TEST_CASE("predict") {
  SUBCASE("zero coefficients") {
    FalkonModel<double> model;
    model.inducing.x = random_matrix<double>(6, 2, 30);
    model.alpha.assign(6, 0.0);
    model.kernel = KernelSpec::gaussian(1.0);
    const auto x = random_matrix<double>(9, 2, 31);
    CHECK(predict(model, MatrixView<double>(x.view())) == std::vector<double>(9, 0.0));
    const auto wrong = random_matrix<double>(9, 3, 31);
    CHECK_THROWS_AS(predict(model, MatrixView<double>(wrong.view())), DimensionMismatch);
  }
  SUBCASE("orthonormal inducing rows under the linear kernel") {
    FalkonModel<double> model;
    model.inducing.x = DenseMatrix<double>::identity(5);
    model.alpha = random_vector(5, 32);
    model.kernel = KernelSpec::linear();
    const auto eye = DenseMatrix<double>::identity(5);
    const auto pred = predict(model, MatrixView<double>(eye.view()));
    for (std::size_t i = 0; i < 5; ++i) CHECK(pred[i] == doctest::Approx(model.alpha[i]));
  }
}
