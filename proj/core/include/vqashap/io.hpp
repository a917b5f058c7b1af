#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "vqashap/types.hpp"

namespace vqashap {

std::string read_text_file(const std::filesystem::path& path);

// Writes to a sibling temporary file, then renames over `path`, so readers
// never observe a partially written file.
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view contents);

// Shortest decimal text that parses back to the same double ("0.5", "-1").
std::string format_double(double value);

// Dataset file: {"name", "tuples": [{"tuple_id", "frames", "question",
// "choices", "ground_truth", "question_type"}]}.
std::string dataset_to_json(const Dataset& dataset);
Dataset dataset_from_json(std::string_view text);
Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

// Attribution file: {"tuple_id", "estimator", "iterations", "seed",
// "evaluations", "layout": {"n_v", "n_q", "n_a", "choice_sizes"}, "values"}
// plus "reproducible" and "baseline" metadata.
std::string attribution_to_json(const AttributionResult& result);
AttributionResult attribution_from_json(std::string_view text);
AttributionResult load_attribution(const std::filesystem::path& path);
void save_attribution(const AttributionResult& result,
                      const std::filesystem::path& path);

// File name used for a tuple's attribution inside a results directory.
// Opaque ids are sanitised; a hash suffix keeps sanitised names distinct.
std::string attribution_file_name(std::string_view tuple_id);

}  // namespace vqashap
