#include "vqashap/shapley.hpp"

#include <algorithm>
#include <bit>
#include <atomic>
#include <cmath>
#include <thread>

#include "vqashap/parallel.hpp"
#include "vqashap/random.hpp"

namespace vqashap {

namespace {

std::size_t resolve_concurrency(std::size_t requested,
                                const RewardFunction& reward) {
  const std::size_t hint = std::max<std::size_t>(1, reward.max_concurrency());
  return requested == 0 ? hint : std::min(requested, hint);
}

// Calls the reward with retries and checks the response shape. Non-finite
// logits are a hard error; retrying a deterministic model cannot fix them.
class CheckedReward {
 public:
  CheckedReward(RewardFunction& reward, std::size_t max_retries)
      : reward_(reward), max_retries_(max_retries) {}

  RewardVector operator()(const MaskVector& mask) {
    std::string last_error;
    for (std::size_t attempt = 0; attempt <= max_retries_; ++attempt) {
      RewardVector r;
      try {
        r = reward_.evaluate(mask);
      } catch (const std::exception& e) {
        last_error = e.what();
        continue;
      }
      calls_.fetch_add(1, std::memory_order_relaxed);
      if (r.size() != reward_.num_classes()) {
        throw Error(ErrorCode::kShapeMismatch,
                    "reward returned " + std::to_string(r.size()) +
                        " logits, expected " +
                        std::to_string(reward_.num_classes()));
      }
      if (!r.all_finite()) {
        throw Error(ErrorCode::kNonFiniteReward,
                    "reward returned non-finite logits for mask " +
                        mask.to_string());
      }
      return r;
    }
    throw Error(ErrorCode::kRewardFailure,
                "reward failed after " + std::to_string(max_retries_ + 1) +
                    " attempts: " + last_error);
  }

  std::size_t calls() const { return calls_.load(); }

 private:
  RewardFunction& reward_;
  std::size_t max_retries_;
  std::atomic<std::size_t> calls_{0};
};

std::vector<std::vector<double>> zeros(std::size_t rows, std::size_t cols) {
  return std::vector<std::vector<double>>(rows, std::vector<double>(cols, 0.0));
}

}  // namespace

AttributionResult exact_shapley(RewardFunction& reward,
                                const ModalityLayout& layout,
                                const ExactConfig& config) {
  const std::size_t m = layout.size();
  const CoalitionRange coalitions(m, config.cap);
  const std::size_t n_c = reward.num_classes();
  CheckedReward checked(reward, config.max_retries);

  const std::uint64_t count = coalitions.count();
  std::vector<RewardVector> table(count);
  parallel_for(count, resolve_concurrency(config.max_concurrency, reward),
               [&](std::size_t s) {
                 table[s] = checked(MaskVector::from_pattern(s, m));
               });

  // Stratified form of the coalition weights: phi_i is the mean over sizes s
  // of the mean marginal contribution of i to coalitions of size s. For
  // dyadic rewards (as in the synthetic models) every step is exact.
  std::vector<std::vector<std::vector<double>>> by_size(
      m, std::vector<std::vector<double>>(m, std::vector<double>(n_c, 0.0)));
  for (std::uint64_t s = 0; s < count; ++s) {
    const auto size = static_cast<std::size_t>(std::popcount(s));
    if (size == m) continue;
    const auto& base = table[s].logits;
    for (std::size_t i = 0; i < m; ++i) {
      const std::uint64_t bit = std::uint64_t{1} << i;
      if (s & bit) continue;
      const auto& with_i = table[s | bit].logits;
      auto& acc = by_size[i][size];
      for (std::size_t c = 0; c < n_c; ++c) acc[c] += with_i[c] - base[c];
    }
  }

  // binom[s] = C(m-1, s), exact in a double for m <= 64.
  std::vector<double> binom(m, 1.0);
  for (std::size_t s = 1; s < m; ++s) {
    binom[s] = binom[s - 1] * static_cast<double>(m - s) / static_cast<double>(s);
  }
  auto values = zeros(m, n_c);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t c = 0; c < n_c; ++c) {
      double sum = 0.0;
      for (std::size_t size = 0; size < m; ++size) sum += by_size[i][size][c] / binom[size];
      values[i][c] = sum / static_cast<double>(m);
    }
  }

  AttributionResult result;
  result.layout = layout;
  result.values = std::move(values);
  result.iterations = static_cast<std::size_t>(count);
  result.evaluations = checked.calls();
  result.estimator = Estimator::kExact;
  result.reproducible = reward.deterministic();
  result.empty_reward = table.front();
  result.full_reward = table.back();
  return result;
}

std::size_t walks_for_budget(std::size_t iterations, std::size_t num_features) {
  if (num_features == 0) return 0;
  return std::max<std::size_t>(1, iterations / num_features);
}

std::vector<std::size_t> walk_permutation(std::uint64_t seed, std::size_t walk,
                                          std::size_t num_features,
                                          bool antithetic) {
  if (!antithetic) return sample_permutation(seed, walk, num_features);
  auto perm = sample_permutation(seed, walk / 2, num_features);
  if (walk % 2 == 1) std::reverse(perm.begin(), perm.end());
  return perm;
}

AttributionResult monte_carlo_shapley(RewardFunction& reward,
                                      const ModalityLayout& layout,
                                      const EstimatorConfig& config) {
  if (config.iterations < 1) {
    throw Error(ErrorCode::kInvalidArgument, "iterations must be >= 1");
  }
  const std::size_t m = layout.size();
  const std::size_t n_c = reward.num_classes();
  const std::size_t concurrency =
      resolve_concurrency(config.max_concurrency, reward);
  const bool deterministic = reward.deterministic();
  // A nondeterministic reward makes memoisation change the estimator.
  const bool use_cache = config.cache_enabled && deterministic;
  const std::size_t total_walks = walks_for_budget(config.iterations, m);

  CheckedReward checked(reward, config.max_retries);
  RewardCache cache;
  auto values = zeros(m, n_c);
  std::size_t completed = 0;

  auto snapshot = [&](std::size_t walks) {
    AttributionResult r;
    r.layout = layout;
    r.values = values;
    if (walks > 0) {
      for (auto& row : r.values) {
        for (double& v : row) v /= static_cast<double>(walks);
      }
    }
    r.iterations = config.iterations;
    r.seed = config.seed;
    r.evaluations = checked.calls();
    r.estimator = Estimator::kMonteCarlo;
    r.reproducible = deterministic;
    return r;
  };
  auto fail = [&](const Error& e) -> RewardFailure {
    AttributionResult partial = snapshot(completed);
    partial.iterations = completed * m;
    return RewardFailure(std::string(e.what()) + " (after " +
                             std::to_string(completed) + " of " +
                             std::to_string(total_walks) + " walks)",
                         std::move(partial));
  };

  RewardVector empty_reward;
  RewardVector full_reward;
  try {
    empty_reward = checked(MaskVector(m, false));
    full_reward = m == 0 ? empty_reward : checked(MaskVector(m, true));
  } catch (const Error& e) {
    throw fail(e);
  }

  // Walks are evaluated chunk by chunk; within a chunk every coalition is
  // known up front (prefixes of fixed orderings), so evaluation order is free
  // while accumulation below follows walk order.
  const std::size_t walks_per_chunk =
      std::max<std::size_t>(1, 4096 / std::max<std::size_t>(1, m));
  for (std::size_t chunk_begin = 0; chunk_begin < total_walks;
       chunk_begin += walks_per_chunk) {
    const std::size_t chunk_end =
        std::min(total_walks, chunk_begin + walks_per_chunk);

    std::vector<std::vector<std::size_t>> perms;
    std::vector<std::vector<std::size_t>> prefix_slot;  // [walk][k], k < m-1
    std::vector<MaskVector> slot_masks;
    std::unordered_map<MaskVector, std::size_t, MaskHash> slot_of;
    for (std::size_t w = chunk_begin; w < chunk_end; ++w) {
      perms.push_back(walk_permutation(config.seed, w, m, config.antithetic));
      const auto& perm = perms.back();
      std::vector<std::size_t> slots;
      MaskVector mask(m, false);
      for (std::size_t k = 0; k + 1 < m; ++k) {
        mask = mask.with(perm[k], true);
        if (use_cache) {
          auto [it, inserted] = slot_of.try_emplace(mask, slot_masks.size());
          if (inserted) slot_masks.push_back(mask);
          slots.push_back(it->second);
        } else {
          slots.push_back(slot_masks.size());
          slot_masks.push_back(mask);
        }
      }
      prefix_slot.push_back(std::move(slots));
    }

    std::vector<RewardVector> slot_rewards(slot_masks.size());
    try {
      parallel_for(slot_masks.size(), concurrency, [&](std::size_t s) {
        slot_rewards[s] =
            use_cache ? cache.get_or_compute(slot_masks[s],
                                             [&] { return checked(slot_masks[s]); })
                      : checked(slot_masks[s]);
      });
    } catch (const Error& e) {
      throw fail(e);
    }

    for (std::size_t w = 0; w < perms.size(); ++w) {
      const auto& perm = perms[w];
      const RewardVector* prev = &empty_reward;
      for (std::size_t k = 0; k < m; ++k) {
        const RewardVector* cur =
            k + 1 == m ? &full_reward : &slot_rewards[prefix_slot[w][k]];
        auto& row = values[perm[k]];
        for (std::size_t c = 0; c < n_c; ++c) {
          row[c] += cur->logits[c] - prev->logits[c];
        }
        prev = cur;
      }
      ++completed;
    }
  }

  AttributionResult result = snapshot(completed);
  result.empty_reward = std::move(empty_reward);
  result.full_reward = std::move(full_reward);
  return result;
}

double estimator_mse(const AttributionResult& candidate,
                     const AttributionResult& reference) {
  if (candidate.num_features() != reference.num_features() ||
      candidate.num_classes() != reference.num_classes()) {
    throw Error(ErrorCode::kShapeMismatch,
                "cannot compare attributions of different shapes");
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < candidate.num_features(); ++i) {
    if (candidate.values[i].size() != reference.values[i].size()) {
      throw Error(ErrorCode::kShapeMismatch, "ragged attribution matrix");
    }
    for (std::size_t c = 0; c < candidate.values[i].size(); ++c) {
      const double d = candidate.values[i][c] - reference.values[i][c];
      sum += d * d;
      ++n;
    }
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

}  // namespace vqashap
