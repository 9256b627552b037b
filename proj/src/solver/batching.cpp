#include "falkon/batching.hpp"

#include <atomic>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "falkon/ooc/tiles.hpp"
#include "staging.hpp"

namespace falkon {

BatchPlan plan_batches(std::size_t n, std::size_t m, std::size_t d, std::size_t G) {
  if (n == 0 || m == 0 || d == 0) throw InvalidArgument("batch planning needs n, m, d >= 1");
  if (G < 1 + d)
    throw BudgetExceeded("budget of " + std::to_string(G) + " elements cannot hold one row and " +
                         std::to_string(d) + " feature columns");
  // The ratio reduces to q*r / (q + d), increasing in q; s only enters the
  // constraint, so q takes all the room left at s = 1 and s the rest.
  BatchPlan plan;
  plan.q = std::min(n, G - d);
  plan.r = m;
  plan.s = std::min(d, G / (plan.q + d));
  plan.batches = (n + plan.q - 1) / plan.q;
  return plan;
}

template <typename T>
std::size_t stream_footprint_bytes(const MatrixView<T>& x, const MatrixView<T>& x_m,
                                   std::size_t q, std::size_t r, const PrecisionPolicy& policy,
                                   std::size_t forward_vectors, bool backward) {
  const std::size_t n = view_rows(x), m = view_rows(x_m), d = view_cols(x);
  q = std::min(q, n);
  r = std::min(r, m);
  const std::size_t staged = detail::max_staged_bytes(x, q);
  const std::size_t inducing =
      r >= m ? detail::staged_bytes(x_m, 0, m) : detail::max_staged_bytes(x_m, r);
  const std::size_t out_slot = sizeof(double) * (forward_vectors * q + (backward ? m : 0));
  return 2 * staged + inducing + q * r * sizeof(T) + kernel_workspace_bytes<T>(q, r, d, policy) +
         sizeof(double) * q + 2 * out_slot;
}

template <typename T>
BatchPlan fit_plan_to_scratch(const MatrixView<T>& x, const MatrixView<T>& x_m,
                              std::size_t scratch_elements, const PrecisionPolicy& policy,
                              std::size_t forward_vectors, bool backward) {
  const std::size_t n = view_rows(x), m = view_rows(x_m), d = view_cols(x);
  if (n == 0 || m == 0) throw InvalidArgument("batch planning needs n, m >= 1");
  const std::size_t cap = scratch_elements * sizeof(T);
  auto fits = [&](std::size_t q, std::size_t r) {
    return stream_footprint_bytes<T>(x, x_m, q, r, policy, forward_vectors, backward) <= cap;
  };
  std::optional<BatchPlan> best;
  double best_score = -1.0;
  for (std::size_t r = m;; r = (r + 1) / 2) {
    if (fits(1, r)) {
      std::size_t lo = 1, hi = n;
      while (lo < hi) {
        const std::size_t mid = lo + (hi - lo + 1) / 2;
        if (fits(mid, r)) lo = mid;
        else hi = mid - 1;
      }
      const double score = static_cast<double>(lo) * static_cast<double>(r) /
                           static_cast<double>(lo + d);
      if (score > best_score) {
        best_score = score;
        best = BatchPlan{lo, r, d, (n + lo - 1) / lo};
      }
    }
    if (r == 1) break;
  }
  if (!best)
    throw BudgetExceeded("scratch budget of " + std::to_string(scratch_elements) +
                         " elements cannot stream a single row");
  return *best;
}

namespace {

using ooc::OperationAborted;
using ooc::ScratchArena;
using ooc::ScratchBuffer;
constexpr auto kPoll = std::chrono::milliseconds(20);

// State shared by all workers of one run: the reduction ticket.
struct Shared {
  std::mutex mu;
  std::condition_variable cv;
  std::size_t next = 0;
  std::atomic<bool> aborted{false};

  void abort() {
    aborted = true;
    std::lock_guard lock(mu);
    cv.notify_all();
  }
};

// Waits on `cv` until `ready` holds; throws when either flag is raised.
template <typename Ready>
void wait_until(std::unique_lock<std::mutex>& lock, std::condition_variable& cv,
                const std::atomic<bool>& local, const std::atomic<bool>& global, Ready ready) {
  while (!ready()) {
    if (local || global) throw OperationAborted();
    cv.wait_for(lock, kPoll);
  }
}

// Depth-2 queue between two stages of a worker.
template <typename Item>
class Channel {
 public:
  Channel(const std::atomic<bool>& local, const std::atomic<bool>& global)
      : local_(local), global_(global) {}

  void push(Item item) {
    std::unique_lock lock(mu_);
    wait_until(lock, cv_, local_, global_, [&] { return items_.size() < 2; });
    items_.push_back(std::move(item));
    cv_.notify_all();
  }

  std::optional<Item> pop() {
    std::unique_lock lock(mu_);
    wait_until(lock, cv_, local_, global_, [&] { return !items_.empty() || closed_; });
    if (items_.empty()) return std::nullopt;
    Item item = std::move(items_.front());
    items_.pop_front();
    cv_.notify_all();
    return item;
  }

  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    cv_.notify_all();
  }

  void wake() {
    std::lock_guard lock(mu_);
    cv_.notify_all();
  }

 private:
  const std::atomic<bool>& local_;
  const std::atomic<bool>& global_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Item> items_;
  bool closed_ = false;
};

// Buffer tokens: a stage may only allocate a buffer while holding one.
class Tokens {
 public:
  Tokens(std::size_t count, const std::atomic<bool>& local, const std::atomic<bool>& global)
      : count_(count), local_(local), global_(global) {}

  void acquire() {
    std::unique_lock lock(mu_);
    wait_until(lock, cv_, local_, global_, [&] { return count_ > 0; });
    --count_;
  }

  void release() {
    std::lock_guard lock(mu_);
    ++count_;
    cv_.notify_all();
  }

  void wake() {
    std::lock_guard lock(mu_);
    cv_.notify_all();
  }

 private:
  std::size_t count_;
  const std::atomic<bool>& local_;
  const std::atomic<bool>& global_;
  std::mutex mu_;
  std::condition_variable cv_;
};

template <typename T>
struct Loaded {
  std::size_t batch = 0, begin = 0, count = 0;
  detail::StagedRows<T> rows;
};

struct Computed {
  std::size_t batch = 0, begin = 0, count = 0;
  ScratchBuffer<double> forward;  // forward_vectors x count
  ScratchBuffer<double> partial;  // K_b^T g_b, length m or empty
};

void pause(std::chrono::microseconds d) {
  if (d.count() > 0) std::this_thread::sleep_for(d);
}

template <typename T>
class StreamWorker {
 public:
  StreamWorker(const StreamContext<T>& ctx, const BatchProgram& program, std::size_t p,
               std::size_t batches, Shared& shared, std::vector<double>& out)
      : ctx_(ctx),
        program_(program),
        p_(p),
        batches_(batches),
        shared_(shared),
        out_(out),
        n_(view_rows(ctx.x)),
        m_(view_rows(ctx.x_m)),
        d_(view_cols(ctx.x)),
        q_(std::min(ctx.plan.q, n_)),
        r_(std::min(ctx.plan.r, m_)),
        k_(program.forward.size()),
        arena_(p, ctx.budget.scratch_elements_per_worker, sizeof(T), ctx.ledger) {
    fused_ = !program.backward && k_ == 1 && r_ == m_ && ctx.pipeline.fused_thin &&
             d_ <= kThinDataThreshold && std::holds_alternative<DenseView<T>>(ctx.x) &&
             std::holds_alternative<DenseView<T>>(ctx.x_m);
  }

  void run() {
    if (!ctx_.pipeline.overlap) {
      for (std::size_t b = p_; b < batches_; b += ctx_.budget.workers) {
        Computed c = compute(load(b));
        store(c);
      }
      return;
    }
    run_overlapped();
  }

 private:
  void run_overlapped() {
    std::atomic<bool> local{false};
    std::mutex err_mu;
    std::exception_ptr primary, aborted;
    Tokens staged_slots(2, local, shared_.aborted), out_slots(2, local, shared_.aborted);
    Channel<Loaded<T>> loaded(local, shared_.aborted);
    Channel<Computed> computed(local, shared_.aborted);
    auto fail = [&] {
      {
        std::lock_guard lock(err_mu);
        try {
          throw;
        } catch (const OperationAborted&) {
          if (!aborted) aborted = std::current_exception();
        } catch (...) {
          if (!primary) primary = std::current_exception();
        }
      }
      local = true;
      staged_slots.wake();
      out_slots.wake();
      loaded.wake();
      computed.wake();
    };

    std::thread loader([&] {
      try {
        for (std::size_t b = p_; b < batches_; b += ctx_.budget.workers) {
          staged_slots.acquire();
          loaded.push(load(b));
        }
        loaded.close();
      } catch (...) {
        fail();
      }
    });
    std::thread storer([&] {
      try {
        while (auto c = computed.pop()) {
          store(*c);
          c.reset();
          out_slots.release();
        }
      } catch (...) {
        fail();
      }
    });
    try {
      while (auto l = loaded.pop()) {
        out_slots.acquire();
        Computed c = compute(std::move(*l));
        l.reset();
        staged_slots.release();
        computed.push(std::move(c));
      }
      computed.close();
    } catch (...) {
      fail();
    }
    loader.join();
    storer.join();
    if (primary) std::rethrow_exception(primary);
    if (aborted) std::rethrow_exception(aborted);
  }

  Loaded<T> load(std::size_t b) {
    const std::size_t begin = b * q_, count = std::min(q_, n_ - begin);
    Loaded<T> l{b, begin, count, detail::StagedRows<T>(arena_, ctx_.x, begin, count, ctx_.ledger)};
    pause(ctx_.pipeline.load_delay);
    return l;
  }

  const MatrixView<T>& inducing_rows() {
    if (!inducing_) inducing_.emplace(arena_, ctx_.x_m, 0, m_, ctx_.ledger);
    return inducing_->view();
  }

  void charge_vectors(std::size_t elements) {
    if (ctx_.ledger) ctx_.ledger->charge_host_to_scratch(elements);
  }

  // Kernel block of the batch rows against inducing rows j0..j0+rc.
  ScratchBuffer<T> kernel_block(const MatrixView<T>& rows, std::size_t count, std::size_t j0,
                                std::size_t rc) {
    auto block = arena_.allocate<T>(count * rc);
    std::optional<detail::StagedRows<T>> chunk;
    const MatrixView<T>* cols = nullptr;
    if (rc == m_) {
      cols = &inducing_rows();
    } else {
      chunk.emplace(arena_, ctx_.x_m, j0, rc, ctx_.ledger);
      cols = &chunk->view();
    }
    auto workspace = arena_.charge(kernel_workspace_bytes<T>(count, rc, d_, ctx_.policy));
    eval_kernel_block_into<T>(ctx_.kernel, rows, *cols, ctx_.policy, block.span());
    return block;
  }

  void forward_products(const T* block, std::size_t count, std::size_t j0, std::size_t rc,
                        double* fwd) {
    charge_vectors(k_ * rc);
    for (std::size_t kk = 0; kk < k_; ++kk) {
      const double* f = program_.forward[kk].data() + j0;
      double* dst = fwd + kk * count;
      for (std::size_t i = 0; i < count; ++i) {
        const T* row = block + i * rc;
        double s = 0.0;
        for (std::size_t j = 0; j < rc; ++j) s += static_cast<double>(row[j]) * f[j];
        dst[i] += s;
      }
    }
  }

  static void backward_product(const T* block, std::size_t count, std::size_t rc,
                               const double* back, double* partial) {
    for (std::size_t i = 0; i < count; ++i) {
      const double g = back[i];
      if (g == 0.0) continue;
      const T* row = block + i * rc;
      for (std::size_t j = 0; j < rc; ++j) partial[j] += static_cast<double>(row[j]) * g;
    }
  }

  BatchForward forward_view(const Computed& c) const {
    BatchForward f{c.batch, c.begin, c.count, {}};
    for (std::size_t kk = 0; kk < k_; ++kk)
      f.values.emplace_back(c.forward.data() + kk * c.count, c.count);
    return f;
  }

  Computed compute(Loaded<T> l) {
    const std::size_t count = l.count;
    Computed c{l.batch, l.begin, count, arena_.allocate<double>(k_ * count),
               arena_.allocate<double>(program_.backward ? m_ : 0)};
    const MatrixView<T>& rows = l.rows.view();
    if (fused_) {
      charge_vectors(m_);
      const auto& xm = inducing_rows();
      auto workspace = arena_.charge(kernel_workspace_bytes<T>(count, m_, d_, ctx_.policy) +
                                     sizeof(double) * count);
      const auto f = kernel_vecmul_fused<T>(ctx_.kernel, std::get<DenseView<T>>(rows),
                                            std::get<DenseView<T>>(xm), program_.forward[0],
                                            ctx_.policy);
      std::copy(f.begin(), f.end(), c.forward.data());
    } else if (r_ == m_) {
      auto block = kernel_block(rows, count, 0, m_);
      forward_products(block.data(), count, 0, m_, c.forward.data());
      if (program_.backward) {
        auto back = arena_.allocate<double>(count);
        program_.backward(forward_view(c), back.span());
        backward_product(block.data(), count, m_, back.data(), c.partial.data());
      }
    } else {
      // Inducing rows in chunks of r: every forward product must be complete
      // before the backward weights exist, so chunks are evaluated twice.
      if (k_ > 0) {
        for (std::size_t j0 = 0; j0 < m_; j0 += r_) {
          const std::size_t rc = std::min(r_, m_ - j0);
          auto block = kernel_block(rows, count, j0, rc);
          forward_products(block.data(), count, j0, rc, c.forward.data());
        }
      }
      if (program_.backward) {
        auto back = arena_.allocate<double>(count);
        program_.backward(forward_view(c), back.span());
        for (std::size_t j0 = 0; j0 < m_; j0 += r_) {
          const std::size_t rc = std::min(r_, m_ - j0);
          auto block = kernel_block(rows, count, j0, rc);
          backward_product(block.data(), count, rc, back.data(), c.partial.data() + j0);
        }
      }
    }
    pause(ctx_.pipeline.compute_delay);
    return c;
  }

  void store(const Computed& c) {
    pause(ctx_.pipeline.store_delay);
    static const std::atomic<bool> never{false};
    {
      std::unique_lock lock(shared_.mu);
      wait_until(lock, shared_.cv, never, shared_.aborted, [&] { return shared_.next == c.batch; });
    }
    // Only the ticket holder gets here, so the reduction needs no lock.
    for (std::size_t j = 0; j < c.partial.size(); ++j) out_[j] += c.partial[j];
    if (program_.consume) program_.consume(forward_view(c));
    if (ctx_.ledger) ctx_.ledger->charge_scratch_to_host(c.forward.size() + c.partial.size());
    std::lock_guard lock(shared_.mu);
    ++shared_.next;
    shared_.cv.notify_all();
  }

  const StreamContext<T>& ctx_;
  const BatchProgram& program_;
  std::size_t p_, batches_;
  Shared& shared_;
  std::vector<double>& out_;
  std::size_t n_, m_, d_, q_, r_, k_;
  bool fused_ = false;
  ScratchArena arena_;
  std::optional<detail::StagedRows<T>> inducing_;
};

}  // namespace

template <typename T>
std::vector<double> run_stream(const StreamContext<T>& ctx, const BatchProgram& program) {
  ctx.kernel.validate();
  ctx.budget.validate();
  const std::size_t n = view_rows(ctx.x), m = view_rows(ctx.x_m);
  if (view_cols(ctx.x) != view_cols(ctx.x_m))
    throw DimensionMismatch("data has " + std::to_string(view_cols(ctx.x)) +
                            " features, inducing rows have " +
                            std::to_string(view_cols(ctx.x_m)));
  if (m == 0) throw InvalidArgument("streaming needs at least one inducing row");
  for (const auto& f : program.forward)
    if (f.size() != m)
      throw DimensionMismatch("vector of length " + std::to_string(f.size()) +
                              " against " + std::to_string(m) + " inducing rows");
  std::vector<double> out(program.backward ? m : 0, 0.0);
  if (n == 0) return out;
  if (ctx.plan.q == 0 || ctx.plan.r == 0) throw InvalidArgument("batch plan extents must be >= 1");

  const std::size_t need = stream_footprint_bytes<T>(ctx.x, ctx.x_m, ctx.plan.q, ctx.plan.r,
                                                     ctx.policy, program.forward.size(),
                                                     static_cast<bool>(program.backward));
  const std::size_t cap = ctx.budget.scratch_elements_per_worker * sizeof(T);
  if (need > cap)
    throw BudgetExceeded("batch plan q=" + std::to_string(ctx.plan.q) +
                         " r=" + std::to_string(ctx.plan.r) + " needs " + std::to_string(need) +
                         " scratch bytes per worker, budget is " + std::to_string(cap));
  if (ctx.ledger) ctx.ledger->ensure_workers(ctx.budget.workers);

  const std::size_t q = std::min(ctx.plan.q, n);
  const std::size_t batches = (n + q - 1) / q;
  Shared shared;
  ooc::run_workers(
      ctx.budget.workers,
      [&](std::size_t p) { StreamWorker<T>(ctx, program, p, batches, shared, out).run(); },
      [&] { shared.abort(); });
  return out;
}

template <typename T>
std::vector<double> knm_vec_product(const StreamContext<T>& ctx, std::span<const double> v) {
  BatchProgram program;
  program.forward = {v};
  program.backward = [](const BatchForward& f, std::span<double> back) {
    std::copy(f.values[0].begin(), f.values[0].end(), back.begin());
  };
  return run_stream(ctx, program);
}

template <typename T>
std::vector<double> knm_transpose_vec(const StreamContext<T>& ctx, std::span<const double> w) {
  if (w.size() != view_rows(ctx.x))
    throw DimensionMismatch("vector of length " + std::to_string(w.size()) +
                            " against " + std::to_string(view_rows(ctx.x)) + " rows");
  BatchProgram program;
  program.backward = [w](const BatchForward& f, std::span<double> back) {
    std::copy_n(w.begin() + static_cast<std::ptrdiff_t>(f.begin), f.count, back.begin());
  };
  return run_stream(ctx, program);
}

template <typename T>
std::vector<double> knm_forward(const StreamContext<T>& ctx, std::span<const double> v) {
  std::vector<double> out(view_rows(ctx.x), 0.0);
  BatchProgram program;
  program.forward = {v};
  program.consume = [&out](const BatchForward& f) {
    std::copy(f.values[0].begin(), f.values[0].end(),
              out.begin() + static_cast<std::ptrdiff_t>(f.begin));
  };
  run_stream(ctx, program);
  return out;
}

#define FALKON_INSTANTIATE_BATCHING(T)                                                        \
  template std::size_t stream_footprint_bytes<T>(const MatrixView<T>&, const MatrixView<T>&,  \
                                                 std::size_t, std::size_t,                   \
                                                 const PrecisionPolicy&, std::size_t, bool);  \
  template BatchPlan fit_plan_to_scratch<T>(const MatrixView<T>&, const MatrixView<T>&,       \
                                            std::size_t, const PrecisionPolicy&, std::size_t, \
                                            bool);                                            \
  template std::vector<double> run_stream<T>(const StreamContext<T>&, const BatchProgram&);   \
  template std::vector<double> knm_vec_product<T>(const StreamContext<T>&,                    \
                                                  std::span<const double>);                   \
  template std::vector<double> knm_transpose_vec<T>(const StreamContext<T>&,                  \
                                                    std::span<const double>);                 \
  template std::vector<double> knm_forward<T>(const StreamContext<T>&, std::span<const double>);

FALKON_INSTANTIATE_BATCHING(float)
FALKON_INSTANTIATE_BATCHING(double)

}  // namespace falkon
