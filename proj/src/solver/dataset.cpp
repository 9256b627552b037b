#include "falkon/dataset.hpp"

#include <limits>
#include <numeric>
#include <random>
#include <unordered_map>

namespace falkon {

namespace {

// Uniform draw from [0, bound) by rejection on the top of the 64-bit range;
// std::uniform_int_distribution is implementation-defined and would make
// the sample depend on the standard library.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  for (;;) {
    const std::uint64_t x = rng();
    if (x < limit) return x % bound;
  }
}

}  // namespace

std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t m,
                                                    std::uint64_t seed) {
  if (m > n)
    throw InvalidArgument("cannot draw " + std::to_string(m) + " distinct rows from " +
                          std::to_string(n));
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> out(m);
  // Partial Fisher-Yates; a sparse map stands in for the permuted prefix
  // when m is much smaller than n.
  if (m * 4 >= n) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(bounded(rng, n - i));
      std::swap(perm[i], perm[j]);
      out[i] = perm[i];
    }
    return out;
  }
  std::unordered_map<std::size_t, std::size_t> moved;
  auto at = [&](std::size_t k) {
    auto it = moved.find(k);
    return it == moved.end() ? k : it->second;
  };
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(bounded(rng, n - i));
    const std::size_t vi = at(i), vj = at(j);
    moved[j] = vi;
    out[i] = vj;
  }
  return out;
}

}  // namespace falkon
