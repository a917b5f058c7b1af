#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace vqashap {

// mt19937_64 and seed_seq are fully specified by the standard, unlike the
// std:: distributions, so every draw below is reproducible across standard
// libraries.

// Independent engine for stream `index` under `seed`.
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t index);

// Uniform integer in [0, bound) by rejection; bound must be > 0.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound);

// Fisher-Yates with uniform_below.
template <typename T>
void shuffle_in_place(std::vector<T>& items, std::mt19937_64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_below(rng, i));
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

// Uniform permutation of 0..n-1, a pure function of (seed, index).
std::vector<std::size_t> sample_permutation(std::uint64_t seed,
                                            std::uint64_t index, std::size_t n);

}  // namespace vqashap
