#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vqashap/experiments.hpp"
#include "vqashap/metrics.hpp"
#include "vqashap/types.hpp"

namespace vqashap {

// Heatmap ---------------------------------------------------------------

inline constexpr std::size_t kDefaultHeatmapWidth = 200;

// One row per tuple: normalised ground-truth attributions in layout order,
// cut to the first `truncate_to` features. Tuples without an attribution are
// skipped.
std::vector<std::vector<double>> heatmap_matrix(const Dataset& dataset,
                                                const AttributionMap& results,
                                                std::size_t truncate_to);

// Comma-separated, one line per row, shortest round-trip formatting.
std::string matrix_to_csv(const std::vector<std::vector<double>>& matrix);

// Binary PPM, one pixel per cell: blue for -1, white for 0, red for +1.
// Short rows are padded with grey.
std::string heatmap_ppm(const std::vector<std::vector<double>>& matrix);

// Word aggregation ------------------------------------------------------

struct WordStat {
  std::string word;  // lowercased
  std::size_t frequency = 0;
  double mean_value = 0.0;
};

// Question and answer elements across tuples that have attributions.
// Masked (whitespace) elements do not count. Values are normalised
// ground-truth attributions unless `raw`. Sorted by frequency descending,
// then word.
std::vector<WordStat> word_report(const Dataset& dataset,
                                  const AttributionMap& results, bool raw = false);
std::string word_report_csv(const std::vector<WordStat>& stats);

// Metric tables ---------------------------------------------------------

struct TupleMetrics {
  std::string tuple_id;
  ModalityScores scores;
};

struct MetricsTable {
  ClassBasis basis = ClassBasis::kGroundTruth;
  std::vector<TupleMetrics> tuples;  // dataset order
  ModalityScores aggregate;
  // Unmasked accuracy from the baseline logits stored with the results.
  std::optional<double> accuracy;
};

MetricsTable compute_metrics(const Dataset& dataset, const AttributionMap& results,
                             ClassBasis basis);

// tuple_id,basis,mc_v,mc_q,mc_a,pfc_v,pfc_q,pfc_a with a closing "mean" row;
// undefined scores are left empty.
std::string metrics_csv(const MetricsTable& table);

// Dataset-level summary: basis,mc_v,mc_q,mc_a,pfc_v,pfc_q,pfc_a,accuracy,
// included,excluded.
std::string summary_csv(std::span<const MetricsTable> tables);

// Experiments -----------------------------------------------------------

std::string masking_csv(const MaskingReport& report);
std::string masking_json(const MaskingReport& report);

std::string ablation_csv(const std::vector<AblationPoint>& curve);

// tuple_id,modality,feature,value with normalised ground-truth values.
std::string modality_values_csv(const Dataset& dataset,
                                const AttributionMap& results);

// Provenance ------------------------------------------------------------

struct RunManifest {
  std::string command;
  std::string dataset_path;
  std::string adapter;
  std::string estimator;  // "exact" or "monte_carlo"
  std::size_t iterations = 0;
  std::uint64_t seed = 0;
  bool antithetic = true;
  std::vector<std::string> outputs;
  std::string output_dir;
  std::map<std::string, std::string> options;
  std::string engine_version;
};

std::string manifest_to_json(const RunManifest& manifest);
RunManifest manifest_from_json(std::string_view text);

}  // namespace vqashap
