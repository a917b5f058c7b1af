#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vqashap/types.hpp"

namespace vqashap {

// Per-tuple attributions with each class column scaled by its maximum
// absolute value into [-1, 1]; zeros stay zero and all-zero columns are
// left untouched.
struct NormalizedAttribution {
  std::vector<std::vector<double>> values;

  std::size_t num_features() const { return values.size(); }
  std::size_t num_classes() const {
    return values.empty() ? 0 : values.front().size();
  }
  std::vector<double> column(std::size_t c) const;
};

NormalizedAttribution normalize(const AttributionResult& attr);
NormalizedAttribution normalize(const NormalizedAttribution& attr);
std::vector<double> normalize_column(std::span<const double> column);

// Ground-truth logit, or the mean over all false logits.
enum class ClassBasis { kGroundTruth, kFalseMean };

std::string_view class_basis_name(ClassBasis b);
std::optional<ClassBasis> parse_class_basis(std::string_view name);

// (video, question, answer) shares.
using Triple = std::array<double, 3>;

struct ModalityScores {
  // nullopt marks an undefined score: every magnitude was zero.
  std::optional<Triple> mc;
  std::optional<Triple> pfc;
  ClassBasis class_basis = ClassBasis::kGroundTruth;
  // Aggregates only: tuples left out because their scores were undefined.
  std::size_t excluded = 0;
  std::size_t included = 0;
};

// Normalised attribution column the modality scores are computed from.
// The false-mean basis averages the raw false-class columns first and
// normalises the average.
std::vector<double> basis_column(const AttributionResult& attr,
                                 std::size_t ground_truth, ClassBasis basis);

// Share of total |value| held by each modality segment.
std::optional<Triple> modality_contribution(std::span<const double> normalized,
                                            const ModalityLayout& layout);

// Mean |value| per segment, as a share of the summed means. Empty segments
// have mean 0.
std::optional<Triple> per_feature_contribution(
    std::span<const double> normalized, const ModalityLayout& layout);

ModalityScores score_tuple(const AttributionResult& attr,
                           std::size_t ground_truth, ClassBasis basis);

// Component-wise mean over tuples with defined scores.
ModalityScores aggregate(std::span<const ModalityScores> per_tuple);

}  // namespace vqashap
