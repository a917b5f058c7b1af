#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vqashap/adapter.hpp"
#include "vqashap/masking.hpp"
#include "vqashap/shapley.hpp"
#include "vqashap/types.hpp"

namespace vqashap {

// Modality and sign masking ----------------------------------------------

struct MaskingRow {
  MaskSpec spec;
  double accuracy = 0.0;
  double delta = 0.0;  // accuracy - baseline
  // Mean over tuples of the fraction of each modality's features masked
  // (video, question, answer).
  std::array<double, 3> masked_fraction{};
  std::vector<std::size_t> predictions;  // dataset order
};

struct MaskingReport {
  double baseline = 0.0;  // accuracy with nothing masked
  std::vector<MaskingRow> rows;  // spec order
};

// Keys are tuple_ids.
using AttributionMap = std::map<std::string, AttributionResult>;

// Throws kMissingAttributions, naming the absent tuple_ids, when a sign spec
// lacks attributions.
MaskingReport run_masking_experiment(const Dataset& dataset,
                                     RewardProvider& provider,
                                     const std::vector<MaskSpec>& specs,
                                     const AttributionMap* attributions = nullptr);

// Answer replacement --------------------------------------------------------

enum class ReplacementMode { kEasy, kNewX };

struct ReplacementConfig {
  ReplacementMode mode = ReplacementMode::kEasy;
  std::size_t x = 5;  // kNewX only
  std::uint64_t seed = 0;
  bool type_compatibility = false;
};

// Each tuple keeps its ground-truth text; its negatives are swapped for the
// negatives of one uniformly drawn other tuple and positions are shuffled.
Dataset replace_answers_easy(const Dataset& dataset, std::uint64_t seed);

// Adds x distinct negatives drawn from other tuples' choices.
Dataset inject_new_negatives(const Dataset& dataset,
                             const ReplacementConfig& config);

Dataset replace_answers(const Dataset& dataset, const ReplacementConfig& config);

// Rank correlation ------------------------------------------------------

// Spearman's rho between two strict rankings of the same index set.
double spearman_correlation(const std::vector<std::size_t>& rank_a,
                            const std::vector<std::size_t>& rank_b);

// Frame indices by decreasing |phi| of the selected class; ties go to the
// lower index.
std::vector<std::size_t> rank_frames_by_attribution(
    const AttributionResult& attr, const ClassSelector& selector,
    std::size_t ground_truth);

// Iteration ablation ----------------------------------------------------

struct AblationReference {
  bool exact = true;
  std::size_t iterations = 0;  // Monte Carlo reference only
  std::uint64_t seed = 0;
  ExactConfig exact_config;
};

struct AblationPoint {
  std::size_t iterations = 0;
  double mean_mse = 0.0;
  std::vector<double> mse_per_seed;
};

// Mean MSE over `seeds` at every grid point against the reference, in grid
// order. A sampled reference needs iterations >= every grid point.
std::vector<AblationPoint> iteration_ablation(
    RewardFunction& reward, const ModalityLayout& layout,
    const std::vector<std::size_t>& grid, const AblationReference& reference,
    const std::vector<std::uint64_t>& seeds, EstimatorConfig base = {});

}  // namespace vqashap
