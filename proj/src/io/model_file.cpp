#include "falkon/model_file.hpp"

#include <array>
#include <fstream>
#include <limits>

#include "io/binary.hpp"

namespace falkon {

using detail::get;
using detail::put;

namespace {

constexpr std::array<char, 4> kMagic{'F', 'L', 'K', 'N'};
constexpr const char* kSource = "model file";

}  // namespace

template <typename T>
void write_model(std::ostream& out, const FalkonModel<T>& model) {
  const std::size_t m = model.m(), d = model.d();
  if (model.inducing.m() != m)
    throw DimensionMismatch("model has " + std::to_string(m) + " coefficients for " +
                            std::to_string(model.inducing.m()) + " inducing rows");
  const bool sparse = std::holds_alternative<SparseMatrix<T>>(model.inducing.x);
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kModelFileVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.kernel.kind));
  put<std::uint32_t>(out, sparse ? 1 : 0);
  put<double>(out, model.kernel.sigma);
  put<std::uint64_t>(out, d);
  put<std::uint64_t>(out, m);
  put<double>(out, model.lam);
  put<std::uint64_t>(out, model.iterations);
  put<std::uint64_t>(out, model.seed);
  const DenseMatrix<T> rows = sparse ? std::get<SparseMatrix<T>>(model.inducing.x).to_dense()
                                     : std::get<DenseMatrix<T>>(model.inducing.x);
  for (T v : rows.values()) put<double>(out, static_cast<double>(v));
  for (double a : model.alpha) put<double>(out, a);
  for (std::size_t j = 0; j < m; ++j)
    put<std::uint64_t>(out, j < model.inducing.indices.size() ? model.inducing.indices[j] : 0);
  if (!out) throw InvalidArgument("writing the model failed");
}

template <typename T>
FalkonModel<T> read_model(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic)
    throw ParseError("not a model file (bad magic)");
  const auto version = get<std::uint32_t>(in, kSource);
  if (version != kModelFileVersion)
    throw ParseError("unsupported model file version " + std::to_string(version));
  const auto kind = get<std::uint32_t>(in, kSource);
  if (kind > static_cast<std::uint32_t>(KernelKind::kLinear))
    throw ParseError("unknown kernel kind " + std::to_string(kind));
  const auto storage = get<std::uint32_t>(in, kSource);
  if (storage > 1) throw ParseError("unknown inducing storage " + std::to_string(storage));

  FalkonModel<T> model;
  model.kernel.kind = static_cast<KernelKind>(kind);
  model.kernel.sigma = get<double>(in, kSource);
  const auto d = get<std::uint64_t>(in, kSource);
  const auto m = get<std::uint64_t>(in, kSource);
  if (m == 0 || d == 0 || m > (std::uint64_t{1} << 40) / d)
    throw ParseError("implausible model size m=" + std::to_string(m) + " d=" + std::to_string(d));
  model.lam = get<double>(in, kSource);
  model.iterations = get<std::uint64_t>(in, kSource);
  model.seed = get<std::uint64_t>(in, kSource);

  DenseMatrix<T> rows(m, d);
  for (auto& v : rows.values()) v = static_cast<T>(get<double>(in, kSource));
  model.alpha.resize(m);
  detail::get_array(in, model.alpha.data(), m, kSource);
  model.inducing.indices.resize(m);
  for (auto& i : model.inducing.indices) i = get<std::uint64_t>(in, kSource);
  if (storage == 1)
    model.inducing.x = SparseMatrix<T>::from_dense(rows);
  else
    model.inducing.x = std::move(rows);
  model.inducing.seed = model.seed;
  model.kernel.validate();
  return model;
}

template <typename T>
void save_model(const std::string& path, const FalkonModel<T>& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write '" + path + "'");
  write_model(out, model);
}

template <typename T>
FalkonModel<T> load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return read_model<T>(in);
}

#define FALKON_INSTANTIATE_MODEL_FILE(T)                                    \
  template void write_model<T>(std::ostream&, const FalkonModel<T>&);       \
  template FalkonModel<T> read_model<T>(std::istream&);                     \
  template void save_model<T>(const std::string&, const FalkonModel<T>&);   \
  template FalkonModel<T> load_model<T>(const std::string&);

FALKON_INSTANTIATE_MODEL_FILE(float)
FALKON_INSTANTIATE_MODEL_FILE(double)

}  // namespace falkon
