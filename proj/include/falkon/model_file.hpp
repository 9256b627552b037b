#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "falkon/falkon.hpp"

namespace falkon {

/// Binary model layout, all little-endian:
///   "FLKN", u32 version, u32 kernel kind, u32 inducing storage (0 dense,
///   1 sparse), f64 sigma, u64 d, u64 m, f64 lambda, u64 iterations,
///   u64 seed, m*d f64 inducing rows, m f64 alpha, m u64 inducing indices.
inline constexpr std::uint32_t kModelFileVersion = 1;

template <typename T>
void write_model(std::ostream& out, const FalkonModel<T>& model);
/// Throws ParseError on a bad magic, an unknown version or a short file.
template <typename T>
FalkonModel<T> read_model(std::istream& in);

template <typename T>
void save_model(const std::string& path, const FalkonModel<T>& model);
template <typename T>
FalkonModel<T> load_model(const std::string& path);

}  // namespace falkon
