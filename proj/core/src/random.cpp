#include "vqashap/random.hpp"

#include <limits>
#include <numeric>

namespace vqashap {

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  // Reject the tail that would bias the modulo.
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() -
      std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % bound;
}

std::vector<std::size_t> sample_permutation(std::uint64_t seed,
                                            std::uint64_t index, std::size_t n) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  auto rng = make_stream(seed, index);
  shuffle_in_place(perm, rng);
  return perm;
}

}  // namespace vqashap
