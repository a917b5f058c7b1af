#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <future>
#include <mutex>
#include <optional>
#include <unordered_map>
#include <vector>

#include "vqashap/errors.hpp"
#include "vqashap/masking.hpp"
#include "vqashap/types.hpp"

namespace vqashap {

// The cooperative game: maps a coalition (mask) to one reward per class.
// evaluate() may be called concurrently from up to max_concurrency()
// threads.
class RewardFunction {
 public:
  virtual ~RewardFunction() = default;

  virtual RewardVector evaluate(const MaskVector& mask) = 0;
  virtual std::size_t num_classes() const = 0;
  virtual bool deterministic() const { return true; }
  virtual std::size_t max_concurrency() const { return 1; }
};

class FunctionReward final : public RewardFunction {
 public:
  using Fn = std::function<RewardVector(const MaskVector&)>;

  FunctionReward(std::size_t num_classes, Fn fn, bool deterministic = true,
                 std::size_t max_concurrency = 1)
      : num_classes_(num_classes),
        fn_(std::move(fn)),
        deterministic_(deterministic),
        max_concurrency_(max_concurrency) {}

  RewardVector evaluate(const MaskVector& mask) override { return fn_(mask); }
  std::size_t num_classes() const override { return num_classes_; }
  bool deterministic() const override { return deterministic_; }
  std::size_t max_concurrency() const override { return max_concurrency_; }

 private:
  std::size_t num_classes_;
  Fn fn_;
  bool deterministic_;
  std::size_t max_concurrency_;
};

// Wraps a reward so that features cleared in `background` are masked on
// every call, whatever the coalition says.
class BackgroundMaskedReward final : public RewardFunction {
 public:
  BackgroundMaskedReward(RewardFunction& inner, MaskVector background)
      : inner_(inner), background_(std::move(background)) {}

  RewardVector evaluate(const MaskVector& mask) override {
    return inner_.evaluate(mask.intersect(background_));
  }
  std::size_t num_classes() const override { return inner_.num_classes(); }
  bool deterministic() const override { return inner_.deterministic(); }
  std::size_t max_concurrency() const override {
    return inner_.max_concurrency();
  }

 private:
  RewardFunction& inner_;
  MaskVector background_;
};

// Thread-safe memo table with at-most-once evaluation per distinct mask.
// A failed evaluation is not cached, so a later call retries it.
class RewardCache {
 public:
  template <typename Compute>
  RewardVector get_or_compute(const MaskVector& mask, Compute&& compute) {
    std::promise<RewardVector> promise;
    std::shared_future<RewardVector> future;
    bool owner = false;
    {
      std::lock_guard lock(mutex_);
      auto it = entries_.find(mask);
      if (it == entries_.end()) {
        future = promise.get_future().share();
        entries_.emplace(mask, future);
        owner = true;
      } else {
        future = it->second;
      }
    }
    if (owner) {
      try {
        promise.set_value(compute());
      } catch (...) {
        promise.set_exception(std::current_exception());
        std::lock_guard lock(mutex_);
        entries_.erase(mask);
        throw;
      }
    }
    return future.get();
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
  }

 private:
  mutable std::mutex mutex_;
  std::unordered_map<MaskVector, std::shared_future<RewardVector>, MaskHash>
      entries_;
};

struct EstimatorConfig {
  // Budget in coalition evaluations; one permutation walk costs M.
  std::size_t iterations = 5000;
  std::uint64_t seed = 0;
  // Pair each sampled permutation with its reverse.
  bool antithetic = true;
  bool cache_enabled = true;
  // Extra attempts after a failed reward call.
  std::size_t max_retries = 3;
  // 0 defers to the reward's max_concurrency() hint.
  std::size_t max_concurrency = 0;
};

struct ExactConfig {
  std::size_t cap = kDefaultExactCap;
  std::size_t max_concurrency = 0;
  std::size_t max_retries = 3;
};

// Raised when a reward keeps failing; carries the estimate accumulated
// over the permutation walks completed before the failure.
class RewardFailure : public Error {
 public:
  RewardFailure(const std::string& message, AttributionResult partial)
      : Error(ErrorCode::kRewardFailure, message), partial_(std::move(partial)) {}

  const AttributionResult& partial() const { return partial_; }

 private:
  AttributionResult partial_;
};

// Shapley values of every feature for every class by enumerating all 2^M
// coalitions once and applying the coalition weights
// |S|!(M-|S|-1)!/M!.
AttributionResult exact_shapley(RewardFunction& reward,
                                const ModalityLayout& layout,
                                const ExactConfig& config = {});

// Number of permutation walks a budget buys for M features.
std::size_t walks_for_budget(std::size_t iterations, std::size_t num_features);

// Ordering visited by walk `walk`. With antithetic pairing, walk 2k is the
// k-th sampled permutation and walk 2k+1 is its reverse.
std::vector<std::size_t> walk_permutation(std::uint64_t seed, std::size_t walk,
                                          std::size_t num_features,
                                          bool antithetic);

// Permutation-sampling estimate of the Shapley values for all classes
// jointly. Results depend only on (config.seed, config, reward, layout), not
// on how many evaluations run in parallel.
AttributionResult monte_carlo_shapley(RewardFunction& reward,
                                      const ModalityLayout& layout,
                                      const EstimatorConfig& config);

// Mean over all (feature, class) entries of the squared difference.
double estimator_mse(const AttributionResult& candidate,
                     const AttributionResult& reference);

}  // namespace vqashap
