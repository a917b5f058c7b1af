#pragma once

#include <cstddef>
#include <cstdint>
#include <iterator>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vqashap/types.hpp"

namespace vqashap {

inline constexpr std::size_t kDefaultExactCap = 20;

enum class MaskKind { kNone, kAll, kModality, kSign };
enum class Sign { kPositive, kNegative };

// Which class column drives a sign mask: the tuple's ground truth, or a
// fixed class index.
struct ClassSelector {
  std::optional<std::size_t> index;  // nullopt selects the ground truth

  static ClassSelector ground_truth() { return {}; }
  static ClassSelector fixed(std::size_t c) { return {c}; }
  std::size_t resolve(std::size_t ground_truth) const {
    return index.value_or(ground_truth);
  }
  friend bool operator==(const ClassSelector&, const ClassSelector&) = default;
};

struct MaskSpec {
  MaskKind kind = MaskKind::kNone;
  Modality modality = Modality::kVideo;  // kModality only
  Sign sign = Sign::kNegative;           // kSign only
  ClassSelector class_selector;          // kSign only
  // kSign only: restrict the sign mask to one modality segment.
  std::optional<Modality> scope;
  // kSign only: answer elements of non-ground-truth choices stay unmasked.
  bool protect_non_ground_truth = false;

  static MaskSpec none() { return {}; }
  static MaskSpec all() {
    MaskSpec s;
    s.kind = MaskKind::kAll;
    return s;
  }
  static MaskSpec of_modality(Modality m) {
    MaskSpec s;
    s.kind = MaskKind::kModality;
    s.modality = m;
    return s;
  }
  static MaskSpec of_sign(Sign s, ClassSelector c = ClassSelector::ground_truth(),
                          bool protect = false,
                          std::optional<Modality> scope = std::nullopt) {
    return {.kind = MaskKind::kSign,
            .sign = s,
            .class_selector = c,
            .scope = scope,
            .protect_non_ground_truth = protect};
  }

  bool needs_attributions() const { return kind == MaskKind::kSign; }
  friend bool operator==(const MaskSpec&, const MaskSpec&) = default;
};

// Textual form: none | all | video | question | answer | neg:<class> |
// pos:<class>[:<modality>], where <class> is "gt" or a class index.
MaskSpec parse_mask_spec(std::string_view text, bool protect_distractors = false);
std::string format_mask_spec(const MaskSpec& spec);

// Bit i = 0 means feature i is masked. `attributions` is required for sign
// masks and ignored otherwise; `ground_truth` resolves the gt selector and
// the distractor-protection rule.
MaskVector materialize_mask(const MaskSpec& spec, const ModalityLayout& layout,
                            const AttributionResult* attributions,
                            std::size_t ground_truth);

// Masked positions become a single space; length and order are preserved.
std::vector<std::string> apply_text_mask(
    const std::vector<std::string>& elements, const std::vector<bool>& bits);

// Restartable enumeration of all 2^M coalitions in increasing integer order
// of the bit pattern (bit i of the pattern is feature i).
class CoalitionRange {
 public:
  class Iterator {
   public:
    using iterator_category = std::input_iterator_tag;
    using value_type = MaskVector;
    using difference_type = std::ptrdiff_t;

    Iterator() = default;
    Iterator(std::uint64_t pattern, std::size_t size)
        : pattern_(pattern), size_(size) {}

    MaskVector operator*() const {
      return MaskVector::from_pattern(pattern_, size_);
    }
    Iterator& operator++() {
      ++pattern_;
      return *this;
    }
    Iterator operator++(int) {
      Iterator old = *this;
      ++pattern_;
      return old;
    }
    std::uint64_t pattern() const { return pattern_; }
    friend bool operator==(const Iterator& a, const Iterator& b) {
      return a.pattern_ == b.pattern_;
    }

   private:
    std::uint64_t pattern_ = 0;
    std::size_t size_ = 0;
  };

  CoalitionRange(std::size_t num_features, std::size_t cap = kDefaultExactCap);

  Iterator begin() const { return {0, size_}; }
  Iterator end() const { return {std::uint64_t{1} << size_, size_}; }
  std::uint64_t count() const { return std::uint64_t{1} << size_; }

 private:
  std::size_t size_;
};

inline CoalitionRange coalition_masks(const ModalityLayout& layout,
                                      std::size_t cap = kDefaultExactCap) {
  return CoalitionRange(layout.size(), cap);
}

}  // namespace vqashap
