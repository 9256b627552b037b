#include "falkon/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace falkon {

void KernelSpec::validate() const {
  if (kind == KernelKind::kGaussian && !(sigma > 0.0 && std::isfinite(sigma)))
    throw InvalidArgument("gaussian kernel requires sigma > 0");
}

std::string KernelSpec::name() const {
  if (kind == KernelKind::kLinear) return "linear";
  std::ostringstream os;
  os << "gaussian(sigma=" << sigma << ")";
  return os.str();
}

namespace {

// Columns of x2 processed per packed chunk. Keeps the packed panel near
// 64K accumulator elements.
// Columns of x2 evaluated together; never more than the block has.
std::size_t column_chunk(std::size_t d, std::size_t r) {
  return std::min(std::clamp<std::size_t>(65536 / std::max<std::size_t>(d, 1), 8, 256),
                  std::max<std::size_t>(r, 1));
}

template <typename T>
bool uses_high_accumulation(const PrecisionPolicy& policy) {
  return std::is_same_v<T, double> || policy.accumulate_norms_high;
}

// Sums run over ascending feature index in every code path, so dense and
// sparse encodings of the same data give identical results.
template <typename T, typename Acc>
std::vector<Acc> squared_norms_as(const MatrixView<T>& x) {
  std::vector<Acc> out(view_rows(x), Acc{0});
  if (const auto* d = std::get_if<DenseView<T>>(&x)) {
    for (std::size_t i = 0; i < d->rows; ++i) {
      Acc s{0};
      for (T v : d->row(i)) s += static_cast<Acc>(v) * static_cast<Acc>(v);
      out[i] = s;
    }
  } else {
    const auto& s = std::get<CsrView<T>>(x);
    for (std::size_t i = 0; i < s.rows; ++i) {
      Acc acc{0};
      for (T v : s.row_values(i)) acc += static_cast<Acc>(v) * static_cast<Acc>(v);
      out[i] = acc;
    }
  }
  return out;
}

template <typename T, typename Acc>
class BlockEvaluator {
 public:
  BlockEvaluator(const KernelSpec& kernel, const MatrixView<T>& x1,
                 const MatrixView<T>& x2)
      : gaussian_(kernel.kind == KernelKind::kGaussian),
        gamma_(static_cast<Acc>(kernel.gamma())),
        x1_(x1),
        x2_(x2),
        d_(view_cols(x1)) {
    if (view_cols(x1) != view_cols(x2))
      throw DimensionMismatch("kernel inputs have " + std::to_string(view_cols(x1)) +
                              " and " + std::to_string(view_cols(x2)) + " features");
    kernel.validate();
    if (gaussian_) {
      n1_ = squared_norms_as<T, Acc>(x1);
      n2_ = squared_norms_as<T, Acc>(x2);
    }
  }

  std::size_t rows() const { return view_rows(x1_); }
  std::size_t cols() const { return view_rows(x2_); }

  // Calls sink(i, j0, values, count) for every row i and column chunk
  // starting at j0. `values` holds kernel entries in working precision.
  template <typename Sink>
  void for_each_chunk(Sink&& sink) const {
    const std::size_t q = rows();
    const std::size_t r = cols();
    if (q == 0 || r == 0) return;
    const std::size_t chunk = column_chunk(d_, r);
    std::vector<Acc> acc(chunk);
    std::vector<T> vals(chunk);

    if (const auto* dense2 = std::get_if<DenseView<T>>(&x2_)) {
      std::vector<Acc> panel(chunk * d_);
      for (std::size_t j0 = 0; j0 < r; j0 += chunk) {
        const std::size_t jc = std::min(chunk, r - j0);
        for (std::size_t jj = 0; jj < jc; ++jj) {
          auto src = dense2->row(j0 + jj);
          for (std::size_t k = 0; k < d_; ++k)
            panel[k * jc + jj] = static_cast<Acc>(src[k]);
        }
        for (std::size_t i = 0; i < q; ++i) {
          std::fill_n(acc.begin(), jc, Acc{0});
          accumulate_row(i, panel.data(), jc, acc.data());
          finalize(i, j0, jc, acc.data(), vals.data());
          sink(i, j0, vals.data(), jc);
        }
      }
      return;
    }

    const auto& sparse2 = std::get<CsrView<T>>(x2_);
    for (std::size_t j0 = 0; j0 < r; j0 += chunk) {
      const std::size_t jc = std::min(chunk, r - j0);
      for (std::size_t i = 0; i < q; ++i) {
        for (std::size_t jj = 0; jj < jc; ++jj) acc[jj] = sparse_dot(i, sparse2, j0 + jj);
        finalize(i, j0, jc, acc.data(), vals.data());
        sink(i, j0, vals.data(), jc);
      }
    }
  }

 private:
  void accumulate_row(std::size_t i, const Acc* panel, std::size_t jc, Acc* acc) const {
    if (const auto* d1 = std::get_if<DenseView<T>>(&x1_)) {
      const T* row = d1->data + i * d1->ld;
      for (std::size_t k = 0; k < d_; ++k) {
        const Acc a = static_cast<Acc>(row[k]);
        const Acc* p = panel + k * jc;
        for (std::size_t jj = 0; jj < jc; ++jj) acc[jj] += a * p[jj];
      }
      return;
    }
    const auto& s1 = std::get<CsrView<T>>(x1_);
    auto idx = s1.row_indices(i);
    auto val = s1.row_values(i);
    for (std::size_t p = 0; p < idx.size(); ++p) {
      const Acc a = static_cast<Acc>(val[p]);
      const Acc* col = panel + static_cast<std::size_t>(idx[p]) * jc;
      for (std::size_t jj = 0; jj < jc; ++jj) acc[jj] += a * col[jj];
    }
  }

  Acc sparse_dot(std::size_t i, const CsrView<T>& s2, std::size_t j) const {
    auto idx2 = s2.row_indices(j);
    auto val2 = s2.row_values(j);
    Acc s{0};
    if (const auto* d1 = std::get_if<DenseView<T>>(&x1_)) {
      const T* row = d1->data + i * d1->ld;
      for (std::size_t p = 0; p < idx2.size(); ++p)
        s += static_cast<Acc>(row[idx2[p]]) * static_cast<Acc>(val2[p]);
      return s;
    }
    const auto& s1 = std::get<CsrView<T>>(x1_);
    auto idx1 = s1.row_indices(i);
    auto val1 = s1.row_values(i);
    std::size_t a = 0, b = 0;
    while (a < idx1.size() && b < idx2.size()) {
      if (idx1[a] < idx2[b]) {
        ++a;
      } else if (idx2[b] < idx1[a]) {
        ++b;
      } else {
        s += static_cast<Acc>(val1[a]) * static_cast<Acc>(val2[b]);
        ++a;
        ++b;
      }
    }
    return s;
  }

  void finalize(std::size_t i, std::size_t j0, std::size_t jc, const Acc* dot,
                T* out) const {
    if (!gaussian_) {
      for (std::size_t jj = 0; jj < jc; ++jj) out[jj] = static_cast<T>(dot[jj]);
      return;
    }
    const Acc ni = n1_[i];
    for (std::size_t jj = 0; jj < jc; ++jj) {
      Acc dist = ni + n2_[j0 + jj] - Acc{2} * dot[jj];
      if (dist < Acc{0}) dist = Acc{0};
      // The cancellation-prone sum above is done in Acc; only the scaled
      // distance is rounded to working precision before exponentiation.
      T v = std::exp(-static_cast<T>(gamma_ * dist));
      out[jj] = v < std::numeric_limits<T>::min() ? T{0} : v;
    }
  }

  bool gaussian_;
  Acc gamma_;
  MatrixView<T> x1_;
  MatrixView<T> x2_;
  std::size_t d_;
  std::vector<Acc> n1_, n2_;
};

template <typename T, typename Fn>
void with_evaluator(const KernelSpec& kernel, const MatrixView<T>& x1,
                    const MatrixView<T>& x2, const PrecisionPolicy& policy, Fn&& fn) {
  if (uses_high_accumulation<T>(policy)) {
    BlockEvaluator<T, double> ev(kernel, x1, x2);
    fn(ev);
  } else {
    BlockEvaluator<T, T> ev(kernel, x1, x2);
    fn(ev);
  }
}

}  // namespace

template <typename T>
std::vector<double> row_squared_norms(const MatrixView<T>& x) {
  return squared_norms_as<T, double>(x);
}

template <typename T>
void eval_kernel_block_into(const KernelSpec& kernel, const MatrixView<T>& x1,
                            const MatrixView<T>& x2, const PrecisionPolicy& policy,
                            std::span<T> out) {
  const std::size_t q = view_rows(x1);
  const std::size_t r = view_rows(x2);
  if (out.size() < q * r)
    throw DimensionMismatch("kernel output buffer smaller than q*r");
  with_evaluator(kernel, x1, x2, policy, [&](const auto& ev) {
    ev.for_each_chunk([&](std::size_t i, std::size_t j0, const T* vals, std::size_t jc) {
      std::copy_n(vals, jc, out.data() + i * r + j0);
    });
  });
}

template <typename T>
DenseMatrix<T> eval_kernel_block(const KernelSpec& kernel, const MatrixView<T>& x1,
                                 const MatrixView<T>& x2, const PrecisionPolicy& policy) {
  DenseMatrix<T> out(view_rows(x1), view_rows(x2));
  eval_kernel_block_into<T>(kernel, x1, x2, policy, out.values());
  return out;
}

template <typename T>
DenseMatrix<T> kernel_block_sparse(const KernelSpec& kernel, const CsrView<T>& x1,
                                   const CsrView<T>& x2, const PrecisionPolicy& policy) {
  return eval_kernel_block<T>(kernel, MatrixView<T>(x1), MatrixView<T>(x2), policy);
}

template <typename T>
std::vector<double> kernel_vecmul_fused(const KernelSpec& kernel, const DenseView<T>& x1,
                                        const DenseView<T>& x2, std::span<const double> v,
                                        const PrecisionPolicy& policy,
                                        std::size_t thin_threshold) {
  if (x1.cols > thin_threshold)
    throw InvalidArgument("fused kernel-vector product needs d <= " +
                          std::to_string(thin_threshold) + ", got " +
                          std::to_string(x1.cols));
  if (v.size() != x2.rows)
    throw DimensionMismatch("vector length " + std::to_string(v.size()) +
                            " does not match " + std::to_string(x2.rows) + " columns");
  std::vector<double> out(x1.rows, 0.0);
  with_evaluator(kernel, MatrixView<T>(x1), MatrixView<T>(x2), policy,
                 [&](const auto& ev) {
                   ev.for_each_chunk([&](std::size_t i, std::size_t j0, const T* vals,
                                         std::size_t jc) {
                     double s = 0.0;
                     for (std::size_t jj = 0; jj < jc; ++jj)
                       s += static_cast<double>(vals[jj]) * v[j0 + jj];
                     out[i] += s;
                   });
                 });
  return out;
}

template <typename T>
std::vector<double> kernel_vecmul_materialized(const KernelSpec& kernel,
                                               const MatrixView<T>& x1,
                                               const MatrixView<T>& x2,
                                               std::span<const double> v,
                                               const PrecisionPolicy& policy,
                                               std::size_t row_batch) {
  const std::size_t q = view_rows(x1);
  const std::size_t r = view_rows(x2);
  if (v.size() != r)
    throw DimensionMismatch("vector length " + std::to_string(v.size()) +
                            " does not match " + std::to_string(r) + " columns");
  row_batch = std::max<std::size_t>(row_batch, 1);
  std::vector<double> out(q, 0.0);
  std::vector<T> block(std::min(row_batch, q) * r);
  for (std::size_t b = 0; b < q; b += row_batch) {
    const std::size_t rows = std::min(row_batch, q - b);
    eval_kernel_block_into<T>(kernel, view_rows_range(x1, b, rows), x2, policy,
                              std::span<T>(block.data(), rows * r));
    for (std::size_t i = 0; i < rows; ++i) {
      const T* k = block.data() + i * r;
      double s = 0.0;
      for (std::size_t j = 0; j < r; ++j) s += static_cast<double>(k[j]) * v[j];
      out[b + i] = s;
    }
  }
  return out;
}

template <typename T>
std::size_t kernel_workspace_bytes(std::size_t q, std::size_t r, std::size_t d,
                                   const PrecisionPolicy& policy) {
  const std::size_t acc = uses_high_accumulation<T>(policy) ? sizeof(double) : sizeof(T);
  const std::size_t chunk = column_chunk(d, r);
  return acc * (q + r + chunk * d + chunk) + sizeof(T) * chunk;
}

#define FALKON_INSTANTIATE_KERNEL(T)                                                   \
  template std::vector<double> row_squared_norms<T>(const MatrixView<T>&);             \
  template void eval_kernel_block_into<T>(const KernelSpec&, const MatrixView<T>&,     \
                                          const MatrixView<T>&, const PrecisionPolicy&, \
                                          std::span<T>);                                \
  template DenseMatrix<T> eval_kernel_block<T>(const KernelSpec&, const MatrixView<T>&, \
                                               const MatrixView<T>&,                    \
                                               const PrecisionPolicy&);                 \
  template DenseMatrix<T> kernel_block_sparse<T>(const KernelSpec&, const CsrView<T>&,  \
                                                 const CsrView<T>&,                     \
                                                 const PrecisionPolicy&);               \
  template std::vector<double> kernel_vecmul_fused<T>(                                 \
      const KernelSpec&, const DenseView<T>&, const DenseView<T>&,                      \
      std::span<const double>, const PrecisionPolicy&, std::size_t);                    \
  template std::vector<double> kernel_vecmul_materialized<T>(                          \
      const KernelSpec&, const MatrixView<T>&, const MatrixView<T>&,                    \
      std::span<const double>, const PrecisionPolicy&, std::size_t);                    \
  template std::size_t kernel_workspace_bytes<T>(std::size_t, std::size_t, std::size_t, \
                                                 const PrecisionPolicy&);

FALKON_INSTANTIATE_KERNEL(float)
FALKON_INSTANTIATE_KERNEL(double)

}  // namespace falkon
