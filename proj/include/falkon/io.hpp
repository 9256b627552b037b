#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "falkon/dataset.hpp"

namespace falkon {

enum class DataFormat { kCsv, kFbin, kLibsvm };

/// "csv", "fbin" or "libsvm" (also "svm").
DataFormat parse_format(const std::string& name);
/// Format implied by the file extension; throws InvalidArgument when unknown.
DataFormat format_from_path(const std::string& path);

/// Reads a dataset. csv: one row per line, last column the target, an optional
/// non-numeric header line. fbin: n and d as 64-bit little-endian counts, n*d
/// row-major float32 features, then n float32 targets. libsvm: "target
/// index:value ..." with 1-based, increasing indices; feature k lands in
/// column k - 1 and the result is sparse.
///
/// `min_features` pads the column count (libsvm files only name the columns
/// they use). Throws ParseError on malformed input.
template <typename T>
Dataset<T> load_dataset(const std::string& path, DataFormat format, std::size_t min_features = 0);

template <typename T>
void save_fbin(const std::string& path, const Dataset<T>& data);

/// Maps {0, 1} labels to {-1, +1}; labels already in {-1, +1} are kept.
/// Throws InvalidArgument for anything else.
void canonicalize_labels(std::vector<double>& y);

struct Standardization {
  std::vector<double> means;
  std::vector<double> stds;  // population std, 1 for constant columns
};

/// Per-column statistics of dense data; sparse data gets means 0, stds 1.
template <typename T>
Standardization column_statistics(const Dataset<T>& data);

/// x <- (x - mean) / std on dense data. Sparse data is left unscaled.
template <typename T>
void apply_standardization(Dataset<T>& data, const Standardization& s);

/// column_statistics followed by apply_standardization.
template <typename T>
Standardization standardize(Dataset<T>& data);

/// Rows `rows` of data, in that order.
template <typename T>
Dataset<T> subset(const Dataset<T>& data, std::span<const std::size_t> rows);

template <typename T>
struct Split {
  Dataset<T> train, test;
  std::vector<std::size_t> train_rows, test_rows;
};

/// Random disjoint split with round(test_fraction * n) test rows, fixed by
/// seed. Throws InvalidArgument unless 0 < test_fraction < 1 and both parts
/// are non-empty.
template <typename T>
Split<T> train_test_split(const Dataset<T>& data, double test_fraction, std::uint64_t seed);

}  // namespace falkon
