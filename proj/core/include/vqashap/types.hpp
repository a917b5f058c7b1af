#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vqashap {

// Hard upper bound on answer choices: one label per letter A..Z.
inline constexpr std::size_t kMaxChoices = 26;

enum class Modality { kVideo = 0, kQuestion = 1, kAnswer = 2 };

inline constexpr std::array<Modality, 3> kModalities = {
    Modality::kVideo, Modality::kQuestion, Modality::kAnswer};

std::string_view modality_name(Modality m);
std::optional<Modality> parse_modality(std::string_view name);

// Label of the k-th answer choice: A, B, C, ... (extends past E when a
// tuple carries more than five options).
char choice_label(std::size_t choice_index);
std::vector<std::string> choice_labels(std::size_t num_choices);

// One multiple-choice instance. Frame handles are opaque references that
// only adapters interpret; textual elements are pre-split by the producer.
struct VqaTuple {
  std::string tuple_id;
  std::vector<std::string> frames;
  std::vector<std::string> question;
  std::vector<std::vector<std::string>> choices;
  std::size_t ground_truth = 0;
  std::optional<std::string> question_type;

  friend bool operator==(const VqaTuple&, const VqaTuple&) = default;
};

struct Dataset {
  std::string name;
  std::vector<VqaTuple> tuples;

  const VqaTuple* find(std::string_view tuple_id) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool contains(std::size_t i) const { return i >= begin && i < end; }
  friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

// Partition of the flat feature index space: frames, then question
// elements, then every choice's elements in choice order.
class ModalityLayout {
 public:
  ModalityLayout() = default;
  ModalityLayout(std::size_t n_video, std::size_t n_question,
                 std::size_t n_answer);
  // Answer segment split per choice; n_answer is the sum of choice_sizes.
  ModalityLayout(std::size_t n_video, std::size_t n_question,
                 std::vector<std::size_t> choice_sizes);

  std::size_t n_video() const { return n_video_; }
  std::size_t n_question() const { return n_question_; }
  std::size_t n_answer() const { return n_answer_; }
  std::size_t size() const { return n_video_ + n_question_ + n_answer_; }
  std::size_t count(Modality m) const { return segment(m).size(); }

  IndexRange segment(Modality m) const;
  Modality modality_of(std::size_t feature) const;

  bool has_choice_map() const { return !choice_sizes_.empty(); }
  const std::vector<std::size_t>& choice_sizes() const { return choice_sizes_; }
  // Choice owning a feature in the answer segment. Requires a choice map.
  std::size_t choice_of(std::size_t feature) const;
  IndexRange choice_segment(std::size_t choice) const;

  friend bool operator==(const ModalityLayout&,
                         const ModalityLayout&) = default;

 private:
  std::size_t n_video_ = 0;
  std::size_t n_question_ = 0;
  std::size_t n_answer_ = 0;
  std::vector<std::size_t> choice_sizes_;
};

// Simplified feature vector x' in {0,1}^M. Bit i == 1 keeps feature i.
class MaskVector {
 public:
  MaskVector() = default;
  explicit MaskVector(std::size_t size, bool value = false);
  explicit MaskVector(const std::vector<bool>& bits);

  // Low `size` bits of `pattern`; bit i of the integer is feature i.
  static MaskVector from_pattern(std::uint64_t pattern, std::size_t size);
  // Parses a feature-ordered string of '0'/'1' characters.
  static MaskVector from_string(std::string_view bits);

  std::size_t size() const { return size_; }
  bool operator[](std::size_t i) const {
    return (words_[i / 64] >> (i % 64)) & 1u;
  }
  std::size_t popcount() const;

  MaskVector with(std::size_t i, bool value) const;
  // Elementwise AND.
  MaskVector intersect(const MaskVector& other) const;
  std::vector<bool> bits() const;
  std::span<const std::uint64_t> words() const { return words_; }

  // Feature-ordered '0'/'1' rendering; feature 0 first.
  std::string to_string() const;

  std::size_t hash() const;
  friend bool operator==(const MaskVector&, const MaskVector&) = default;

 private:
  void set(std::size_t i, bool value);

  std::size_t size_ = 0;
  std::vector<std::uint64_t> words_;
};

struct MaskHash {
  std::size_t operator()(const MaskVector& m) const { return m.hash(); }
};

// One logit per answer choice, all finite.
struct RewardVector {
  std::vector<double> logits;

  std::size_t size() const { return logits.size(); }
  bool all_finite() const;
  // Index of the maximal logit; the lowest index wins ties.
  std::size_t argmax() const;

  friend bool operator==(const RewardVector&, const RewardVector&) = default;
};

enum class Estimator { kExact, kMonteCarlo };

std::string_view estimator_name(Estimator e);
std::optional<Estimator> parse_estimator(std::string_view name);

// Per-feature, per-class Shapley estimates, values[i][c].
struct AttributionResult {
  std::string tuple_id;
  ModalityLayout layout;
  std::vector<std::vector<double>> values;
  std::size_t iterations = 0;
  std::uint64_t seed = 0;
  std::size_t evaluations = 0;
  Estimator estimator = Estimator::kMonteCarlo;
  // False when the reward source declared itself nondeterministic.
  bool reproducible = true;
  // Rewards of the empty and full coalitions.
  std::optional<RewardVector> empty_reward;
  std::optional<RewardVector> full_reward;

  std::size_t num_features() const { return values.size(); }
  std::size_t num_classes() const {
    return values.empty() ? 0 : values.front().size();
  }
  std::vector<double> column(std::size_t c) const;

  friend bool operator==(const AttributionResult&,
                         const AttributionResult&) = default;
};

struct ValidationReport {
  std::vector<std::string> problems;

  bool ok() const { return problems.empty(); }
  bool mentions(std::string_view needle) const;
};

ValidationReport validate_tuple(const VqaTuple& tuple);
// Validates every tuple plus dataset-level invariants (unique ids).
ValidationReport validate_dataset(const Dataset& dataset);

ModalityLayout build_modality_layout(const VqaTuple& tuple);

// Masked elements are rendered as a single space.
inline constexpr std::string_view kMaskedElement = " ";
bool is_masked_element(std::string_view element);

}  // namespace vqashap
