#include "vqashap/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "vqashap/errors.hpp"

namespace vqashap {

std::vector<double> NormalizedAttribution::column(std::size_t c) const {
  std::vector<double> out;
  out.reserve(values.size());
  for (const auto& row : values) out.push_back(row.at(c));
  return out;
}

std::vector<double> normalize_column(std::span<const double> column) {
  double max_abs = 0.0;
  for (double v : column) max_abs = std::max(max_abs, std::abs(v));
  std::vector<double> out(column.begin(), column.end());
  if (max_abs == 0.0) return out;
  for (double& v : out) v /= max_abs;
  return out;
}

namespace {

NormalizedAttribution normalize_matrix(
    const std::vector<std::vector<double>>& values) {
  NormalizedAttribution out;
  out.values = values;
  const std::size_t n_c = values.empty() ? 0 : values.front().size();
  for (std::size_t c = 0; c < n_c; ++c) {
    double max_abs = 0.0;
    for (const auto& row : values) max_abs = std::max(max_abs, std::abs(row[c]));
    if (max_abs == 0.0) continue;
    for (auto& row : out.values) row[c] /= max_abs;
  }
  return out;
}

}  // namespace

NormalizedAttribution normalize(const AttributionResult& attr) {
  return normalize_matrix(attr.values);
}

NormalizedAttribution normalize(const NormalizedAttribution& attr) {
  return normalize_matrix(attr.values);
}

std::string_view class_basis_name(ClassBasis b) {
  return b == ClassBasis::kGroundTruth ? "gt" : "false_mean";
}

std::optional<ClassBasis> parse_class_basis(std::string_view name) {
  if (name == "gt" || name == "ground_truth") return ClassBasis::kGroundTruth;
  if (name == "false_mean" || name == "false") return ClassBasis::kFalseMean;
  return std::nullopt;
}

std::vector<double> basis_column(const AttributionResult& attr,
                                 std::size_t ground_truth, ClassBasis basis) {
  const std::size_t n_c = attr.num_classes();
  if (ground_truth >= n_c) {
    throw Error(ErrorCode::kInvalidArgument,
                "ground truth " + std::to_string(ground_truth) +
                    " outside attribution of " + std::to_string(n_c) +
                    " classes");
  }
  if (basis == ClassBasis::kGroundTruth) {
    return normalize_column(attr.column(ground_truth));
  }
  if (n_c < 2) {
    throw Error(ErrorCode::kInvalidArgument,
                "false-logit basis needs at least one non-ground-truth class");
  }
  std::vector<double> mean(attr.num_features(), 0.0);
  for (std::size_t i = 0; i < attr.num_features(); ++i) {
    double sum = 0.0;
    for (std::size_t c = 0; c < n_c; ++c) {
      if (c != ground_truth) sum += attr.values[i][c];
    }
    mean[i] = sum / static_cast<double>(n_c - 1);
  }
  return normalize_column(mean);
}

namespace {

void check_layout(std::span<const double> values, const ModalityLayout& layout) {
  if (values.size() != layout.size()) {
    throw Error(ErrorCode::kShapeMismatch,
                "attribution column of " + std::to_string(values.size()) +
                    " entries does not match layout of " +
                    std::to_string(layout.size()));
  }
}

Triple segment_abs_sums(std::span<const double> values,
                        const ModalityLayout& layout) {
  Triple sums{0.0, 0.0, 0.0};
  for (Modality m : kModalities) {
    const IndexRange seg = layout.segment(m);
    double s = 0.0;
    for (std::size_t i = seg.begin; i < seg.end; ++i) s += std::abs(values[i]);
    sums[static_cast<std::size_t>(m)] = s;
  }
  return sums;
}

std::optional<Triple> shares(const Triple& parts) {
  const double total = parts[0] + parts[1] + parts[2];
  if (total == 0.0) return std::nullopt;
  return Triple{parts[0] / total, parts[1] / total, parts[2] / total};
}

}  // namespace

std::optional<Triple> modality_contribution(std::span<const double> normalized,
                                            const ModalityLayout& layout) {
  check_layout(normalized, layout);
  return shares(segment_abs_sums(normalized, layout));
}

std::optional<Triple> per_feature_contribution(
    std::span<const double> normalized, const ModalityLayout& layout) {
  check_layout(normalized, layout);
  Triple means = segment_abs_sums(normalized, layout);
  for (Modality m : kModalities) {
    const std::size_t n = layout.count(m);
    auto& v = means[static_cast<std::size_t>(m)];
    v = n == 0 ? 0.0 : v / static_cast<double>(n);
  }
  return shares(means);
}

ModalityScores score_tuple(const AttributionResult& attr,
                           std::size_t ground_truth, ClassBasis basis) {
  const auto column = basis_column(attr, ground_truth, basis);
  ModalityScores scores;
  scores.class_basis = basis;
  scores.mc = modality_contribution(column, attr.layout);
  scores.pfc = per_feature_contribution(column, attr.layout);
  scores.included = scores.mc ? 1 : 0;
  scores.excluded = scores.mc ? 0 : 1;
  return scores;
}

ModalityScores aggregate(std::span<const ModalityScores> per_tuple) {
  ModalityScores out;
  if (!per_tuple.empty()) out.class_basis = per_tuple.front().class_basis;
  Triple mc_sum{0, 0, 0};
  Triple pfc_sum{0, 0, 0};
  std::size_t mc_n = 0;
  std::size_t pfc_n = 0;
  for (const auto& s : per_tuple) {
    if (s.class_basis != out.class_basis) {
      throw Error(ErrorCode::kInvalidArgument,
                  "cannot aggregate scores computed on different class bases");
    }
    if (s.mc) {
      for (std::size_t k = 0; k < 3; ++k) mc_sum[k] += (*s.mc)[k];
      ++mc_n;
    }
    if (s.pfc) {
      for (std::size_t k = 0; k < 3; ++k) pfc_sum[k] += (*s.pfc)[k];
      ++pfc_n;
    }
    if (!s.mc) ++out.excluded;
  }
  out.included = mc_n;
  if (mc_n > 0) {
    for (double& v : mc_sum) v /= static_cast<double>(mc_n);
    out.mc = mc_sum;
  }
  if (pfc_n > 0) {
    for (double& v : pfc_sum) v /= static_cast<double>(pfc_n);
    out.pfc = pfc_sum;
  }
  return out;
}

}  // namespace vqashap
