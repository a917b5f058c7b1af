#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <thread>

#include "oracles.hpp"
#include "vqashap/errors.hpp"
#include "vqashap/parallel.hpp"
#include "vqashap/random.hpp"
#include "vqashap/shapley.hpp"

using namespace vqashap;
using namespace vqashap::testing;

namespace {

void expect_values_near(const std::vector<std::vector<double>>& got,
                        const std::vector<std::vector<double>>& want, double tol) {
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    ASSERT_EQ(got[i].size(), want[i].size());
    for (std::size_t c = 0; c < got[i].size(); ++c) {
      EXPECT_NEAR(got[i][c], want[i][c], tol) << "feature " << i << " class " << c;
    }
  }
}

std::vector<std::vector<double>> column(std::vector<double> v) {
  std::vector<std::vector<double>> out;
  for (double x : v) out.push_back({x});
  return out;
}

AttributionResult exact(const Game& g) {
  auto r = g.reward();
  return exact_shapley(*r, flat_layout(g.players));
}

AttributionResult sampled(const Game& g, std::size_t iterations, std::uint64_t seed,
                          std::size_t concurrency = 1, bool cache = true) {
  auto r = g.reward(concurrency);
  EstimatorConfig cfg;
  cfg.iterations = iterations;
  cfg.seed = seed;
  cfg.cache_enabled = cache;
  return monte_carlo_shapley(*r, flat_layout(g.players), cfg);
}

// Counts calls and optionally fails the first `fail_first` of them.
class CountingReward final : public RewardFunction {
 public:
  CountingReward(Game g, int fail_first = 0, bool deterministic = true)
      : game_(std::move(g)), fail_first_(fail_first), deterministic_(deterministic) {}

  RewardVector evaluate(const MaskVector& m) override {
    const int n = calls_.fetch_add(1);
    if (n < fail_first_) throw std::runtime_error("flaky");
    std::uint64_t p = 0;
    for (std::size_t i = 0; i < m.size(); ++i) p |= std::uint64_t{m[i]} << i;
    return RewardVector{game_.value(p)};
  }
  std::size_t num_classes() const override { return game_.classes; }
  bool deterministic() const override { return deterministic_; }
  int calls() const { return calls_.load(); }

 private:
  Game game_;
  int fail_first_;
  bool deterministic_;
  std::atomic<int> calls_{0};
};

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInvalidArgument;
}

}  // namespace

// Exact oracle ----------------------------------------------------------------

TEST(ExactShapley, AdditiveGame) {
  const auto g = additive_game({{3, -1}});
  expect_values_near(exact(g).values, column({3, -1}), 1e-12);
  expect_values_near(permutation_average(g), column({3, -1}), 1e-12);
}

TEST(ExactShapley, SymmetricTwoPlayerGame) {
  const Game g{2, 1, [](std::uint64_t p) { return std::vector<double>{p == 3 ? 2.0 : 0.0}; }};
  expect_values_near(exact(g).values, column({1, 1}), 1e-12);
}

TEST(ExactShapley, InteractionGameMatchesPermutationAverage) {
  const auto g = example_interaction_game();
  expect_values_near(permutation_average(g), column({3, 2, 2}), 1e-12);
  expect_values_near(exact(g).values, column({3, 2, 2}), 1e-12);
}

TEST(ExactShapley, RandomTablesMatchPermutationAverage) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t m = 1 + seed % 7;
    const auto g = random_table_game(m, 3, seed);
    expect_values_near(exact(g).values, permutation_average(g), 1e-9);
  }
}

TEST(ExactShapley, EvaluatesEachCoalitionOnce) {
  CountingReward r(random_table_game(6, 2, 1));
  const auto res = exact_shapley(r, flat_layout(6));
  EXPECT_EQ(r.calls(), 64);
  EXPECT_EQ(res.evaluations, 64u);
  EXPECT_EQ(res.estimator, Estimator::kExact);
  ASSERT_TRUE(res.empty_reward && res.full_reward);
}

TEST(ExactShapley, ParallelEvaluationGivesIdenticalValues) {
  const auto g = random_table_game(9, 2, 4);
  auto serial = g.reward(1);
  auto wide = g.reward(8);
  EXPECT_EQ(exact_shapley(*serial, flat_layout(9)).values,
            exact_shapley(*wide, flat_layout(9)).values);
}

TEST(ExactShapley, CapAndNonFiniteErrors) {
  const auto g = additive_game({std::vector<double>(21, 1.0)});
  auto r = g.reward();
  EXPECT_EQ(code_of([&] { exact_shapley(*r, flat_layout(21)); }), ErrorCode::kCapExceeded);
  EXPECT_EQ(code_of([&] { exact_shapley(*r, flat_layout(21), {.cap = 8}); }),
            ErrorCode::kCapExceeded);

  FunctionReward nan_reward(1, [](const MaskVector& m) {
    return RewardVector{{m.popcount() == 2 ? std::nan("") : 1.0}};
  });
  EXPECT_EQ(code_of([&] { exact_shapley(nan_reward, flat_layout(3)); }),
            ErrorCode::kNonFiniteReward);
}

TEST(ExactShapley, WrongLogitCountIsAShapeError) {
  FunctionReward r(2, [](const MaskVector&) { return RewardVector{{1.0}}; });
  EXPECT_EQ(code_of([&] { exact_shapley(r, flat_layout(2)); }), ErrorCode::kShapeMismatch);
}

TEST(ExactShapley, ZeroFeatures) {
  FunctionReward r(2, [](const MaskVector&) { return RewardVector{{1.0, 2.0}}; });
  const auto res = exact_shapley(r, flat_layout(0));
  EXPECT_TRUE(res.values.empty());
  EXPECT_EQ(res.evaluations, 1u);
}

// Axioms on the exact oracle ----------------------------------------------------

TEST(ShapleyAxioms, Efficiency) {
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    const auto g = random_table_game(2 + seed % 8, 2, 100 + seed);
    const auto res = exact(g);
    const auto full = g.value((std::uint64_t{1} << g.players) - 1);
    const auto empty = g.value(0);
    for (std::size_t c = 0; c < g.classes; ++c) {
      double sum = 0.0;
      for (const auto& row : res.values) sum += row[c];
      EXPECT_NEAR(sum, full[c] - empty[c], 1e-9);
    }
  }
}

TEST(ShapleyAxioms, Symmetry) {
  // Value depends on players 0 and 2 only through whether either is present.
  const Game g{4, 1, [](std::uint64_t p) {
                 const bool a = has(p, 0), b = has(p, 2);
                 return std::vector<double>{3.0 * (a + b) - 1.5 * (a && b) + 2.0 * has(p, 1) +
                                            (has(p, 1) && has(p, 3) ? 5.0 : 0.0)};
               }};
  const auto res = exact(g);
  EXPECT_NEAR(res.values[0][0], res.values[2][0], 1e-12);
  EXPECT_NEAR(res.values[3][0], 2.5, 1e-12);
}

TEST(ShapleyAxioms, Linearity) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto r = random_table_game(5, 2, seed);
    const auto t = random_interaction_game(5, 2, seed + 50);
    const double a = 1.5 - static_cast<double>(seed), b = 0.25 * static_cast<double>(seed);
    const auto lhs = exact(combine(r, a, t, b)).values;
    const auto er = exact(r).values, et = exact(t).values;
    for (std::size_t i = 0; i < 5; ++i) {
      for (std::size_t c = 0; c < 2; ++c) {
        EXPECT_NEAR(lhs[i][c], a * er[i][c] + b * et[i][c], 1e-9);
      }
    }
  }
}

TEST(ShapleyAxioms, NullPlayerIsExactlyZero) {
  // Player 2 never changes the value.
  const Game base = random_table_game(4, 2, 77);
  const Game g{5, 2, [base](std::uint64_t p) {
                 const std::uint64_t low = p & 0b11, high = (p >> 3) & 0b11;
                 return base.value(low | (high << 2));
               }};
  const auto ex = exact(g);
  EXPECT_EQ(ex.values[2][0], 0.0);
  EXPECT_EQ(ex.values[2][1], 0.0);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto mc = sampled(g, 500, seed);
    EXPECT_EQ(mc.values[2][0], 0.0);
    EXPECT_EQ(mc.values[2][1], 0.0);
  }
}

TEST(ShapleyAxioms, MissingnessUnderBackgroundMask) {
  const auto g = random_table_game(6, 2, 5);
  auto inner = g.reward();
  const auto background = MaskVector::from_string("110101");
  BackgroundMaskedReward r(*inner, background);
  const auto ex = exact_shapley(r, flat_layout(6));
  for (std::size_t i : {2u, 4u}) {
    EXPECT_EQ(ex.values[i][0], 0.0);
    EXPECT_EQ(ex.values[i][1], 0.0);
  }
  const auto mc = monte_carlo_shapley(r, flat_layout(6), {.iterations = 300, .seed = 3});
  for (std::size_t i : {2u, 4u}) {
    EXPECT_EQ(mc.values[i][0], 0.0);
    EXPECT_EQ(mc.values[i][1], 0.0);
  }
}

// Monte Carlo estimator ---------------------------------------------------------

TEST(MonteCarloShapley, AdditiveGameIsExactAtAnyBudget) {
  const auto g = additive_game({{3, -1}});
  for (std::uint64_t seed : {0ull, 1ull, 99ull, 123456789ull}) {
    expect_values_near(sampled(g, 100, seed).values, column({3, -1}), 1e-9);
    expect_values_near(sampled(g, 1, seed).values, column({3, -1}), 1e-9);
  }
}

TEST(MonteCarloShapley, InteractionGameSeedSeven) {
  const auto res = sampled(example_interaction_game(), 5000, 7);
  expect_values_near(res.values, column({3, 2, 2}), 0.05);
  EXPECT_EQ(res.iterations, 5000u);
  EXPECT_EQ(res.seed, 7u);
  EXPECT_EQ(res.estimator, Estimator::kMonteCarlo);
}

TEST(MonteCarloShapley, SingleIterationIsOneWalk) {
  const auto g = random_table_game(5, 2, 8);
  const auto res = sampled(g, 1, 42);
  const auto perm = walk_permutation(42, 0, 5, true);
  std::vector<std::vector<double>> want(5, std::vector<double>(2));
  std::uint64_t p = 0;
  auto prev = g.value(p);
  for (std::size_t k : perm) {
    p |= std::uint64_t{1} << k;
    const auto cur = g.value(p);
    for (std::size_t c = 0; c < 2; ++c) want[k][c] = cur[c] - prev[c];
    prev = cur;
  }
  EXPECT_EQ(res.values, want);
}

TEST(MonteCarloShapley, EfficiencyHoldsForEverySample) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto g = random_table_game(7, 3, seed);
    const auto res = sampled(g, 70 + seed * 13, seed);
    const auto full = g.value(127), empty = g.value(0);
    for (std::size_t c = 0; c < 3; ++c) {
      double sum = 0.0;
      for (const auto& row : res.values) sum += row[c];
      EXPECT_NEAR(sum, full[c] - empty[c], 1e-6);
    }
  }
}

TEST(MonteCarloShapley, SameSeedSameResult) {
  const auto g = random_table_game(8, 2, 3);
  EXPECT_EQ(sampled(g, 400, 11), sampled(g, 400, 11));
  EXPECT_NE(sampled(g, 400, 11).values, sampled(g, 400, 12).values);
}

TEST(MonteCarloShapley, ResultIndependentOfParallelism) {
  const auto g = random_table_game(10, 3, 21);
  const auto serial = sampled(g, 3000, 5, 1);
  for (std::size_t workers : {2u, 3u, 8u}) {
    EXPECT_EQ(sampled(g, 3000, 5, workers), serial);
  }
}

TEST(MonteCarloShapley, CacheDoesNotChangeValues) {
  const auto g = random_table_game(6, 2, 13);
  CountingReward with(g), without(g);
  const auto a = monte_carlo_shapley(with, flat_layout(6), {.iterations = 2000, .seed = 1});
  const auto b = monte_carlo_shapley(without, flat_layout(6),
                                     {.iterations = 2000, .seed = 1, .cache_enabled = false});
  EXPECT_EQ(a.values, b.values);
  EXPECT_LE(a.evaluations, b.evaluations);
  EXPECT_LT(with.calls(), without.calls());
  EXPECT_LE(with.calls(), 64);
}

TEST(MonteCarloShapley, EvaluationBudgetWithoutCache) {
  const auto g = random_table_game(5, 1, 2);
  CountingReward r(g);
  const auto res = monte_carlo_shapley(r, flat_layout(5),
                                       {.iterations = 50, .seed = 0, .cache_enabled = false});
  // 10 walks of 4 interior prefixes each, plus the pinned empty and full coalitions.
  EXPECT_EQ(r.calls(), 10 * 4 + 2);
  EXPECT_EQ(res.evaluations, 42u);
}

TEST(MonteCarloShapley, NondeterministicRewardDisablesCache) {
  const auto g = random_table_game(5, 1, 2);
  CountingReward r(g, 0, false);
  const auto res = monte_carlo_shapley(r, flat_layout(5), {.iterations = 50, .seed = 0});
  EXPECT_FALSE(res.reproducible);
  EXPECT_EQ(r.calls(), 42);
}

TEST(MonteCarloShapley, TransientFailuresAreRetried) {
  CountingReward r(example_interaction_game(), 3);
  const auto res = monte_carlo_shapley(r, flat_layout(3), {.iterations = 30, .seed = 0});
  expect_values_near(res.values, column({3, 2, 2}), 1e-9);
}

TEST(MonteCarloShapley, PersistentFailureCarriesPartialResult) {
  const auto g = random_table_game(4, 1, 1);
  std::atomic<int> calls{0};
  FunctionReward r(1, [&](const MaskVector& m) {
    if (++calls > 30) throw std::runtime_error("adapter died");
    std::uint64_t p = 0;
    for (std::size_t i = 0; i < m.size(); ++i) p |= std::uint64_t{m[i]} << i;
    return RewardVector{g.value(p)};
  });
  try {
    monte_carlo_shapley(r, flat_layout(4),
                        {.iterations = 4000, .seed = 0, .cache_enabled = false});
    FAIL() << "expected failure";
  } catch (const RewardFailure& f) {
    EXPECT_EQ(f.code(), ErrorCode::kRewardFailure);
    EXPECT_EQ(f.partial().values.size(), 4u);
    EXPECT_LT(f.partial().iterations, 4000u);
    // 3 retries after the first failing call.
    EXPECT_EQ(calls.load(), 34);
  }
}

TEST(MonteCarloShapley, NonFiniteLogitsAreNotRetried) {
  std::atomic<int> calls{0};
  FunctionReward r(1, [&](const MaskVector& m) {
    ++calls;
    return RewardVector{{m.popcount() == 1 ? HUGE_VAL : 0.0}};
  });
  try {
    monte_carlo_shapley(r, flat_layout(3), {.iterations = 3, .seed = 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kRewardFailure);
    EXPECT_NE(std::string(e.what()).find("non-finite"), std::string::npos);
  }
  EXPECT_EQ(calls.load(), 3);
}

TEST(MonteCarloShapley, RejectsZeroIterations) {
  auto r = example_interaction_game().reward();
  EXPECT_EQ(code_of([&] {
              monte_carlo_shapley(*r, flat_layout(3), {.iterations = 0});
            }),
            ErrorCode::kInvalidArgument);
}

TEST(MonteCarloShapley, WideLayoutBeyondExactCap) {
  FunctionReward r(1, [](const MaskVector& m) {
    return RewardVector{{0.5 * static_cast<double>(m.popcount())}};
  });
  const auto res = monte_carlo_shapley(r, flat_layout(40), {.iterations = 400, .seed = 2});
  for (const auto& row : res.values) EXPECT_NEAR(row[0], 0.5, 1e-12);
}

TEST(WalkBudget, IterationsCountEvaluations) {
  EXPECT_EQ(walks_for_budget(5000, 3), 1666u);
  EXPECT_EQ(walks_for_budget(100, 3), 33u);
  EXPECT_EQ(walks_for_budget(5000, 30), 166u);
  EXPECT_EQ(walks_for_budget(1, 30), 1u);
  EXPECT_EQ(walks_for_budget(10, 0), 0u);
}

TEST(WalkPermutation, AntitheticPairsAreReverses) {
  for (std::size_t k = 0; k < 10; ++k) {
    auto a = walk_permutation(9, 2 * k, 7, true);
    auto b = walk_permutation(9, 2 * k + 1, 7, true);
    std::reverse(b.begin(), b.end());
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, sample_permutation(9, k, 7));
  }
  EXPECT_EQ(walk_permutation(9, 3, 7, false), sample_permutation(9, 3, 7));
}

// Estimator MSE ---------------------------------------------------------------

TEST(EstimatorMse, Examples) {
  AttributionResult a;
  a.values = {{1, 2}, {3, 4}, {5, 6}};
  EXPECT_EQ(estimator_mse(a, a), 0.0);
  AttributionResult b = a;
  for (auto& row : b.values) {
    for (double& v : row) v += 2.0;
  }
  EXPECT_EQ(estimator_mse(a, b), 4.0);
  AttributionResult c;
  c.values = {{1, 2}, {3, 4}};
  EXPECT_EQ(code_of([&] { estimator_mse(a, c); }), ErrorCode::kShapeMismatch);
}

TEST(EstimatorMse, ShrinksWithBudgetOnInteractionGame) {
  const auto g = example_interaction_game();
  const auto ref = exact(g);
  double low = 0.0, high = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    low += estimator_mse(sampled(g, 100, seed), ref) / 10.0;
    high += estimator_mse(sampled(g, 5000, seed), ref) / 10.0;
  }
  EXPECT_GT(low, high);
}

// Randomness and plumbing -------------------------------------------------------

TEST(SamplePermutation, IsAPermutationAndRoughlyUniform) {
  std::map<std::vector<std::size_t>, int> counts;
  for (std::uint64_t k = 0; k < 6000; ++k) {
    auto p = sample_permutation(1, k, 3);
    auto sorted = p;
    std::sort(sorted.begin(), sorted.end());
    ASSERT_EQ(sorted, (std::vector<std::size_t>{0, 1, 2}));
    ++counts[p];
  }
  ASSERT_EQ(counts.size(), 6u);
  double chi2 = 0.0;
  for (const auto& [perm, n] : counts) chi2 += (n - 1000.0) * (n - 1000.0) / 1000.0;
  // 5 degrees of freedom; 20.5 is the 0.999 quantile.
  EXPECT_LT(chi2, 20.5);
}

TEST(SamplePermutation, PinnedDraws) {
  // Each (seed, index) pair owns its own stream.
  const auto a = sample_permutation(0, 0, 8);
  EXPECT_EQ(sample_permutation(0, 0, 8), a);
  EXPECT_NE(sample_permutation(0, 1, 8), a);
  EXPECT_NE(sample_permutation(1, 0, 8), a);
}

TEST(UniformBelow, StaysInRange) {
  auto rng = make_stream(3, 4);
  for (std::uint64_t bound : {1ull, 2ull, 3ull, 7ull, 1000ull, (1ull << 63) + 5}) {
    for (int i = 0; i < 200; ++i) EXPECT_LT(uniform_below(rng, bound), bound);
  }
}

TEST(RewardCache, AtMostOnceUnderConcurrency) {
  RewardCache cache;
  std::atomic<int> computed{0};
  const auto mask = MaskVector::from_string("101");
  parallel_for(64, 8, [&](std::size_t) {
    const auto r = cache.get_or_compute(mask, [&] {
      ++computed;
      std::this_thread::sleep_for(std::chrono::milliseconds(2));
      return RewardVector{{1.0}};
    });
    EXPECT_EQ(r.logits[0], 1.0);
  });
  EXPECT_EQ(computed.load(), 1);
  EXPECT_EQ(cache.size(), 1u);
}

TEST(RewardCache, FailuresAreNotCached) {
  RewardCache cache;
  const auto mask = MaskVector::from_string("1");
  EXPECT_THROW(cache.get_or_compute(mask, []() -> RewardVector { throw std::runtime_error("x"); }),
               std::runtime_error);
  EXPECT_EQ(cache.size(), 0u);
  EXPECT_EQ(cache.get_or_compute(mask, [] { return RewardVector{{2.0}}; }).logits[0], 2.0);
}

TEST(ParallelFor, VisitsEachIndexOnceAndRethrowsLowestFailure) {
  std::vector<std::atomic<int>> hits(100);
  parallel_for(100, 4, [&](std::size_t i) { ++hits[i]; });
  for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  try {
    parallel_for(100, 1, [&](std::size_t i) {
      if (i == 7 || i == 50) throw std::runtime_error(std::to_string(i));
    });
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "7");
  }
}
