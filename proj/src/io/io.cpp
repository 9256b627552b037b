#include "falkon/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>

#include "io/binary.hpp"

namespace falkon {

namespace {

using detail::get;
using detail::put;

std::string lower_ext(const std::string& path) {
  const auto dot = path.find_last_of('.');
  if (dot == std::string::npos) return {};
  std::string ext = path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Parses a whole field as a finite double; nullopt when it is not a number.
std::optional<double> number(std::string_view s, const std::string& where) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec == std::errc::result_out_of_range) throw ParseError(where + ": numeric overflow");
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  if (!std::isfinite(v)) throw ParseError(where + ": value is not finite");
  return v;
}

template <typename T>
T narrow(double v, const std::string& where) {
  if (std::abs(v) > static_cast<double>(std::numeric_limits<T>::max()))
    throw ParseError(where + ": value overflows the working precision");
  return static_cast<T>(v);
}

std::ifstream open_in(const std::string& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return in;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) return out;
    start = pos + 1;
  }
}

template <typename T>
Dataset<T> load_csv(const std::string& path, std::size_t min_features) {
  auto in = open_in(path);
  std::string line;
  std::vector<T> values;
  std::vector<double> y;
  std::size_t cols = 0, lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = trim(line);
    if (body.empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    const auto fields = split(body, ',');
    std::vector<double> row;
    row.reserve(fields.size());
    bool numeric = true;
    for (auto f : fields) {
      const auto v = number(f, where);
      if (!v) {
        numeric = false;
        break;
      }
      row.push_back(*v);
    }
    if (!numeric) {
      if (y.empty() && cols == 0) {
        cols = fields.size();  // header line
        continue;
      }
      throw ParseError(where + ": malformed row");
    }
    if (row.size() < 2) throw ParseError(where + ": need at least one feature and a target");
    if (cols == 0) cols = row.size();
    if (row.size() != cols)
      throw ParseError(where + ": inconsistent column count (" + std::to_string(row.size()) +
                       " vs " + std::to_string(cols) + ")");
    for (std::size_t j = 0; j + 1 < row.size(); ++j) values.push_back(narrow<T>(row[j], where));
    y.push_back(row.back());
  }
  if (y.empty()) throw ParseError(path + ": no data rows");
  const std::size_t d = cols - 1;
  DenseMatrix<T> x(y.size(), std::max(d, min_features));
  for (std::size_t i = 0; i < y.size(); ++i)
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(i * d), d, x.row(i).begin());
  return {std::move(x), std::move(y)};
}

template <typename T>
Dataset<T> load_libsvm(const std::string& path, std::size_t min_features) {
  auto in = open_in(path);
  std::string line;
  std::vector<Index> offsets{0}, indices;
  std::vector<T> values;
  std::vector<double> y;
  std::size_t cols = min_features, lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view body(line);
    if (const auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
    body = trim(body);
    if (body.empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    std::istringstream tokens{std::string(body)};
    std::string tok;
    tokens >> tok;
    const auto label = number(tok, where);
    if (!label) throw ParseError(where + ": malformed target '" + tok + "'");
    y.push_back(*label);
    Index last = -1;
    while (tokens >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos) throw ParseError(where + ": malformed entry '" + tok + "'");
      std::uint64_t idx = 0;
      const auto [p, ec] = std::from_chars(tok.data(), tok.data() + colon, idx);
      if (ec == std::errc::result_out_of_range ||
          idx > static_cast<std::uint64_t>(std::numeric_limits<Index>::max()))
        throw ParseError(where + ": feature index overflow");
      if (ec != std::errc{} || p != tok.data() + colon || idx == 0)
        throw ParseError(where + ": malformed feature index in '" + tok + "'");
      const auto v = number(std::string_view(tok).substr(colon + 1), where);
      if (!v) throw ParseError(where + ": malformed value in '" + tok + "'");
      const auto col = static_cast<Index>(idx - 1);
      if (col <= last) throw ParseError(where + ": feature indices must increase");
      last = col;
      indices.push_back(col);
      values.push_back(narrow<T>(*v, where));
      cols = std::max(cols, static_cast<std::size_t>(col) + 1);
    }
    offsets.push_back(static_cast<Index>(indices.size()));
  }
  if (y.empty()) throw ParseError(path + ": no data rows");
  return {SparseMatrix<T>(y.size(), cols, std::move(offsets), std::move(indices), std::move(values)),
          std::move(y)};
}

template <typename T>
Dataset<T> load_fbin(const std::string& path, std::size_t min_features) {
  auto in = open_in(path, std::ios::binary);
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::uint64_t>(in.tellg());
  in.seekg(0);
  const auto n = get<std::uint64_t>(in, path);
  const auto d = get<std::uint64_t>(in, path);
  const std::uint64_t cap = std::numeric_limits<std::uint64_t>::max() / 4;
  if (n == 0 || d == 0) throw ParseError(path + ": empty dataset header");
  if (n > cap / d || n * d > cap - n)
    throw ParseError(path + ": header counts overflow");
  if (size != 16 + 4 * (n * d + n))
    throw ParseError(path + ": size " + std::to_string(size) + " does not match header n=" +
                     std::to_string(n) + " d=" + std::to_string(d));
  DenseMatrix<T> x(n, std::max<std::size_t>(d, min_features));
  std::vector<float> row(d);
  for (std::size_t i = 0; i < n; ++i) {
    detail::get_array(in, row.data(), d, path);
    for (std::size_t j = 0; j < d; ++j) {
      if (!std::isfinite(row[j])) throw ParseError(path + ": value is not finite");
      x(i, j) = static_cast<T>(row[j]);
    }
  }
  std::vector<float> targets(n);
  detail::get_array(in, targets.data(), n, path);
  std::vector<double> y(targets.begin(), targets.end());
  return {std::move(x), std::move(y)};
}

}  // namespace

DataFormat parse_format(const std::string& name) {
  if (name == "csv") return DataFormat::kCsv;
  if (name == "fbin") return DataFormat::kFbin;
  if (name == "libsvm" || name == "svm") return DataFormat::kLibsvm;
  throw InvalidArgument("unknown data format '" + name + "'");
}

DataFormat format_from_path(const std::string& path) {
  const auto ext = lower_ext(path);
  if (ext == "csv" || ext == "fbin" || ext == "libsvm" || ext == "svm") return parse_format(ext);
  throw InvalidArgument("cannot infer the data format of '" + path + "'; pass --format");
}

template <typename T>
Dataset<T> load_dataset(const std::string& path, DataFormat format, std::size_t min_features) {
  switch (format) {
    case DataFormat::kCsv: return load_csv<T>(path, min_features);
    case DataFormat::kFbin: return load_fbin<T>(path, min_features);
    default: return load_libsvm<T>(path, min_features);
  }
}

template <typename T>
void save_fbin(const std::string& path, const Dataset<T>& data) {
  data.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write '" + path + "'");
  put<std::uint64_t>(out, data.n());
  put<std::uint64_t>(out, data.d());
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, DenseMatrix<T>>) {
          for (T v : m.values()) put<float>(out, static_cast<float>(v));
        } else {
          const auto dense = m.to_dense();
          for (T v : dense.values()) put<float>(out, static_cast<float>(v));
        }
      },
      data.x);
  for (double v : data.y) put<float>(out, static_cast<float>(v));
  if (!out) throw InvalidArgument("write to '" + path + "' failed");
}

void canonicalize_labels(std::vector<double>& y) {
  const bool zero_one = std::all_of(y.begin(), y.end(), [](double v) { return v == 0.0 || v == 1.0; });
  const bool signs = std::all_of(y.begin(), y.end(), [](double v) { return v == -1.0 || v == 1.0; });
  if (signs) return;
  if (!zero_one) throw InvalidArgument("labels are not binary (expected {0, 1} or {-1, +1})");
  for (auto& v : y) v = v == 0.0 ? -1.0 : 1.0;
}

template <typename T>
Standardization column_statistics(const Dataset<T>& data) {
  const std::size_t n = data.n(), d = data.d();
  Standardization s{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
  const auto* x = std::get_if<DenseMatrix<T>>(&data.x);
  if (!x || n == 0) return s;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) s.means[j] += (*x)(i, j);
  for (auto& m : s.means) m /= static_cast<double>(n);
  std::vector<double> var(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double c = (*x)(i, j) - s.means[j];
      var[j] += c * c;
    }
  for (std::size_t j = 0; j < d; ++j) {
    const double sd = std::sqrt(var[j] / static_cast<double>(n));
    s.stds[j] = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

template <typename T>
void apply_standardization(Dataset<T>& data, const Standardization& s) {
  auto* x = std::get_if<DenseMatrix<T>>(&data.x);
  if (!x) return;
  if (s.means.size() != x->cols() || s.stds.size() != x->cols())
    throw DimensionMismatch("standardization has " + std::to_string(s.means.size()) +
                            " columns, data has " + std::to_string(x->cols()));
  for (std::size_t i = 0; i < x->rows(); ++i)
    for (std::size_t j = 0; j < x->cols(); ++j)
      (*x)(i, j) = static_cast<T>(((*x)(i, j) - s.means[j]) / s.stds[j]);
}

template <typename T>
Standardization standardize(Dataset<T>& data) {
  auto s = column_statistics(data);
  apply_standardization(data, s);
  return s;
}

template <typename T>
Dataset<T> subset(const Dataset<T>& data, std::span<const std::size_t> rows) {
  Dataset<T> out{gather_rows(data.view(), rows), {}};
  out.y.reserve(rows.size());
  for (std::size_t r : rows) out.y.push_back(data.y.at(r));
  return out;
}

template <typename T>
Split<T> train_test_split(const Dataset<T>& data, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw InvalidArgument("test fraction must lie in (0, 1)");
  const std::size_t n = data.n();
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  if (n_test == 0 || n_test >= n)
    throw InvalidArgument("split of " + std::to_string(n) + " rows leaves an empty part");
  const auto perm = sample_without_replacement(n, n, seed);
  Split<T> s;
  s.test_rows.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
  s.train_rows.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_test), perm.end());
  std::sort(s.test_rows.begin(), s.test_rows.end());
  std::sort(s.train_rows.begin(), s.train_rows.end());
  s.train = subset(data, std::span<const std::size_t>(s.train_rows));
  s.test = subset(data, std::span<const std::size_t>(s.test_rows));
  return s;
}

#define FALKON_INSTANTIATE_IO(T)                                                         \
  template Dataset<T> load_dataset<T>(const std::string&, DataFormat, std::size_t);      \
  template void save_fbin<T>(const std::string&, const Dataset<T>&);                     \
  template Standardization column_statistics<T>(const Dataset<T>&);                      \
  template void apply_standardization<T>(Dataset<T>&, const Standardization&);           \
  template Standardization standardize<T>(Dataset<T>&);                                  \
  template Dataset<T> subset<T>(const Dataset<T>&, std::span<const std::size_t>);        \
  template Split<T> train_test_split<T>(const Dataset<T>&, double, std::uint64_t);

FALKON_INSTANTIATE_IO(float)
FALKON_INSTANTIATE_IO(double)

}  // namespace falkon
