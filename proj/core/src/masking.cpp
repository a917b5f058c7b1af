#include "vqashap/masking.hpp"

#include <charconv>

#include "vqashap/errors.hpp"

namespace vqashap {

namespace {

ClassSelector parse_class_selector(std::string_view text) {
  if (text == "gt") return ClassSelector::ground_truth();
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "class selector must be 'gt' or an index, got '" +
                    std::string(text) + "'");
  }
  return ClassSelector::fixed(value);
}

}  // namespace

MaskSpec parse_mask_spec(std::string_view text, bool protect_distractors) {
  if (text == "none") return MaskSpec::none();
  if (text == "all") return MaskSpec::all();
  if (auto m = parse_modality(text)) return MaskSpec::of_modality(*m);

  const bool neg = text.starts_with("neg:");
  const bool pos = text.starts_with("pos:");
  if (!neg && !pos) {
    throw Error(ErrorCode::kInvalidArgument,
                "unknown mask spec '" + std::string(text) +
                    "' (expected none|all|video|question|answer|neg:<class>|"
                    "pos:<class>)");
  }
  std::string_view rest = text.substr(4);
  std::optional<Modality> scope;
  if (auto colon = rest.find(':'); colon != std::string_view::npos) {
    scope = parse_modality(rest.substr(colon + 1));
    if (!scope) {
      throw Error(ErrorCode::kInvalidArgument,
                  "unknown modality scope in '" + std::string(text) + "'");
    }
    rest = rest.substr(0, colon);
  }
  return MaskSpec::of_sign(neg ? Sign::kNegative : Sign::kPositive,
                           parse_class_selector(rest), protect_distractors,
                           scope);
}

std::string format_mask_spec(const MaskSpec& spec) {
  switch (spec.kind) {
    case MaskKind::kNone: return "none";
    case MaskKind::kAll: return "all";
    case MaskKind::kModality: return std::string(modality_name(spec.modality));
    case MaskKind::kSign: {
      std::string out = spec.sign == Sign::kNegative ? "neg:" : "pos:";
      out += spec.class_selector.index
                 ? std::to_string(*spec.class_selector.index)
                 : std::string("gt");
      if (spec.scope) {
        out += ":";
        out += modality_name(*spec.scope);
      }
      return out;
    }
  }
  return "none";
}

MaskVector materialize_mask(const MaskSpec& spec, const ModalityLayout& layout,
                            const AttributionResult* attributions,
                            std::size_t ground_truth) {
  const std::size_t m = layout.size();
  switch (spec.kind) {
    case MaskKind::kNone:
      return MaskVector(m, true);
    case MaskKind::kAll:
      return MaskVector(m, false);
    case MaskKind::kModality: {
      std::vector<bool> bits(m, true);
      const IndexRange seg = layout.segment(spec.modality);
      for (std::size_t i = seg.begin; i < seg.end; ++i) bits[i] = false;
      return MaskVector(bits);
    }
    case MaskKind::kSign:
      break;
  }

  if (attributions == nullptr) {
    throw Error(ErrorCode::kMissingAttributions,
                "sign mask '" + format_mask_spec(spec) +
                    "' requires attributions");
  }
  if (attributions->num_features() != m) {
    throw Error(ErrorCode::kShapeMismatch,
                "attributions cover " +
                    std::to_string(attributions->num_features()) +
                    " features, layout has " + std::to_string(m));
  }
  const std::size_t c = spec.class_selector.resolve(ground_truth);
  if (c >= attributions->num_classes()) {
    throw Error(ErrorCode::kInvalidArgument,
                "class selector " + std::to_string(c) + " out of range for " +
                    std::to_string(attributions->num_classes()) + " classes");
  }
  if (spec.protect_non_ground_truth && !layout.has_choice_map() &&
      layout.n_answer() > 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "distractor protection needs a layout with a choice map");
  }

  std::vector<bool> bits(m, true);
  for (std::size_t i = 0; i < m; ++i) {
    const Modality mod = layout.modality_of(i);
    if (spec.scope && *spec.scope != mod) continue;
    if (spec.protect_non_ground_truth && mod == Modality::kAnswer &&
        layout.choice_of(i) != ground_truth) {
      continue;
    }
    const double v = attributions->values[i][c];
    // Zero is neither positive nor negative.
    const bool hit = spec.sign == Sign::kNegative ? v < 0.0 : v > 0.0;
    if (hit) bits[i] = false;
  }
  return MaskVector(bits);
}

std::vector<std::string> apply_text_mask(
    const std::vector<std::string>& elements, const std::vector<bool>& bits) {
  if (elements.size() != bits.size()) {
    throw Error(ErrorCode::kShapeMismatch,
                "text mask has " + std::to_string(bits.size()) + " bits for " +
                    std::to_string(elements.size()) + " elements");
  }
  std::vector<std::string> out;
  out.reserve(elements.size());
  for (std::size_t i = 0; i < elements.size(); ++i) {
    out.push_back(bits[i] ? elements[i] : std::string(kMaskedElement));
  }
  return out;
}

CoalitionRange::CoalitionRange(std::size_t num_features, std::size_t cap)
    : size_(num_features) {
  if (num_features > cap || num_features >= 63) {
    throw Error(ErrorCode::kCapExceeded,
                "exact enumeration over " + std::to_string(num_features) +
                    " features exceeds the cap of " + std::to_string(cap));
  }
}

}  // namespace vqashap
