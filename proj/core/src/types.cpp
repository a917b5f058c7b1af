#include "vqashap/types.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <functional>
#include <numeric>
#include <unordered_set>

#include "vqashap/errors.hpp"

namespace vqashap {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kValidation: return "validation";
    case ErrorCode::kCapExceeded: return "cap_exceeded";
    case ErrorCode::kShapeMismatch: return "shape_mismatch";
    case ErrorCode::kRewardFailure: return "reward_failure";
    case ErrorCode::kNonFiniteReward: return "non_finite_reward";
    case ErrorCode::kProtocol: return "protocol";
    case ErrorCode::kVersionMismatch: return "version_mismatch";
    case ErrorCode::kTimeout: return "timeout";
    case ErrorCode::kUnknownTuple: return "unknown_tuple";
    case ErrorCode::kPoolExhausted: return "pool_exhausted";
    case ErrorCode::kLabelOverflow: return "label_overflow";
    case ErrorCode::kMissingAttributions: return "missing_attributions";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

std::string_view modality_name(Modality m) {
  switch (m) {
    case Modality::kVideo: return "video";
    case Modality::kQuestion: return "question";
    case Modality::kAnswer: return "answer";
  }
  return "unknown";
}

std::optional<Modality> parse_modality(std::string_view name) {
  for (Modality m : kModalities) {
    if (modality_name(m) == name) return m;
  }
  return std::nullopt;
}

char choice_label(std::size_t choice_index) {
  if (choice_index >= kMaxChoices) {
    throw Error(ErrorCode::kLabelOverflow,
                "choice index " + std::to_string(choice_index) +
                    " has no letter label");
  }
  return static_cast<char>('A' + choice_index);
}

std::vector<std::string> choice_labels(std::size_t num_choices) {
  std::vector<std::string> labels;
  labels.reserve(num_choices);
  for (std::size_t k = 0; k < num_choices; ++k) {
    labels.emplace_back(1, choice_label(k));
  }
  return labels;
}

const VqaTuple* Dataset::find(std::string_view tuple_id) const {
  for (const auto& t : tuples) {
    if (t.tuple_id == tuple_id) return &t;
  }
  return nullptr;
}

// ModalityLayout ------------------------------------------------------------

ModalityLayout::ModalityLayout(std::size_t n_video, std::size_t n_question,
                               std::size_t n_answer)
    : n_video_(n_video), n_question_(n_question), n_answer_(n_answer) {}

ModalityLayout::ModalityLayout(std::size_t n_video, std::size_t n_question,
                               std::vector<std::size_t> choice_sizes)
    : n_video_(n_video),
      n_question_(n_question),
      n_answer_(std::accumulate(choice_sizes.begin(), choice_sizes.end(),
                                std::size_t{0})),
      choice_sizes_(std::move(choice_sizes)) {}

IndexRange ModalityLayout::segment(Modality m) const {
  switch (m) {
    case Modality::kVideo: return {0, n_video_};
    case Modality::kQuestion: return {n_video_, n_video_ + n_question_};
    case Modality::kAnswer: return {n_video_ + n_question_, size()};
  }
  return {};
}

Modality ModalityLayout::modality_of(std::size_t feature) const {
  if (feature >= size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "feature index " + std::to_string(feature) +
                    " outside layout of size " + std::to_string(size()));
  }
  if (feature < n_video_) return Modality::kVideo;
  if (feature < n_video_ + n_question_) return Modality::kQuestion;
  return Modality::kAnswer;
}

std::size_t ModalityLayout::choice_of(std::size_t feature) const {
  if (!has_choice_map()) {
    throw Error(ErrorCode::kInvalidArgument,
                "layout carries no per-choice answer map");
  }
  const IndexRange answers = segment(Modality::kAnswer);
  if (!answers.contains(feature)) {
    throw Error(ErrorCode::kInvalidArgument,
                "feature " + std::to_string(feature) + " is not an answer element");
  }
  std::size_t offset = feature - answers.begin;
  for (std::size_t c = 0; c < choice_sizes_.size(); ++c) {
    if (offset < choice_sizes_[c]) return c;
    offset -= choice_sizes_[c];
  }
  return choice_sizes_.size() - 1;  // unreachable for consistent layouts
}

IndexRange ModalityLayout::choice_segment(std::size_t choice) const {
  if (choice >= choice_sizes_.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "choice " + std::to_string(choice) + " outside layout");
  }
  std::size_t begin = n_video_ + n_question_;
  for (std::size_t c = 0; c < choice; ++c) begin += choice_sizes_[c];
  return {begin, begin + choice_sizes_[choice]};
}

// MaskVector ----------------------------------------------------------------

MaskVector::MaskVector(std::size_t size, bool value)
    : size_(size), words_((size + 63) / 64, value ? ~std::uint64_t{0} : 0) {
  if (value && size % 64 != 0) {
    words_.back() &= (std::uint64_t{1} << (size % 64)) - 1;
  }
}

MaskVector::MaskVector(const std::vector<bool>& bits)
    : MaskVector(bits.size(), false) {
  for (std::size_t i = 0; i < bits.size(); ++i) set(i, bits[i]);
}

MaskVector MaskVector::from_pattern(std::uint64_t pattern, std::size_t size) {
  if (size > 64) {
    throw Error(ErrorCode::kInvalidArgument,
                "integer bit patterns cover at most 64 features");
  }
  MaskVector m(size, false);
  if (size > 0) {
    const std::uint64_t keep =
        size == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << size) - 1;
    m.words_[0] = pattern & keep;
  }
  return m;
}

MaskVector MaskVector::from_string(std::string_view bits) {
  MaskVector m(bits.size(), false);
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] == '1') {
      m.set(i, true);
    } else if (bits[i] != '0') {
      throw Error(ErrorCode::kInvalidArgument,
                  "mask strings may only contain '0' and '1'");
    }
  }
  return m;
}

void MaskVector::set(std::size_t i, bool value) {
  const std::uint64_t bit = std::uint64_t{1} << (i % 64);
  if (value) {
    words_[i / 64] |= bit;
  } else {
    words_[i / 64] &= ~bit;
  }
}

std::size_t MaskVector::popcount() const {
  std::size_t n = 0;
  for (std::uint64_t w : words_) n += std::popcount(w);
  return n;
}

MaskVector MaskVector::with(std::size_t i, bool value) const {
  if (i >= size_) {
    throw Error(ErrorCode::kInvalidArgument, "mask index out of range");
  }
  MaskVector copy = *this;
  copy.set(i, value);
  return copy;
}

MaskVector MaskVector::intersect(const MaskVector& other) const {
  if (other.size_ != size_) {
    throw Error(ErrorCode::kShapeMismatch, "mask length mismatch");
  }
  MaskVector out = *this;
  for (std::size_t w = 0; w < words_.size(); ++w) out.words_[w] &= other.words_[w];
  return out;
}

std::vector<bool> MaskVector::bits() const {
  std::vector<bool> out(size_);
  for (std::size_t i = 0; i < size_; ++i) out[i] = (*this)[i];
  return out;
}

std::string MaskVector::to_string() const {
  std::string s(size_, '0');
  for (std::size_t i = 0; i < size_; ++i) {
    if ((*this)[i]) s[i] = '1';
  }
  return s;
}

std::size_t MaskVector::hash() const {
  // FNV-1a over the words, seeded with the length.
  std::uint64_t h = 1469598103934665603ULL ^ size_;
  for (std::uint64_t w : words_) {
    h ^= w;
    h *= 1099511628211ULL;
    h ^= h >> 29;
  }
  return static_cast<std::size_t>(h);
}

// RewardVector ----------------------------------------------------------------

bool RewardVector::all_finite() const {
  return std::all_of(logits.begin(), logits.end(),
                     [](double x) { return std::isfinite(x); });
}

std::size_t RewardVector::argmax() const {
  if (logits.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "argmax of an empty reward");
  }
  return static_cast<std::size_t>(
      std::max_element(logits.begin(), logits.end()) - logits.begin());
}

std::string_view estimator_name(Estimator e) {
  return e == Estimator::kExact ? "exact" : "monte_carlo";
}

std::optional<Estimator> parse_estimator(std::string_view name) {
  if (name == "exact") return Estimator::kExact;
  if (name == "monte_carlo") return Estimator::kMonteCarlo;
  return std::nullopt;
}

std::vector<double> AttributionResult::column(std::size_t c) const {
  if (c >= num_classes()) {
    throw Error(ErrorCode::kInvalidArgument,
                "class " + std::to_string(c) + " outside attribution of " +
                    std::to_string(num_classes()) + " classes");
  }
  std::vector<double> out;
  out.reserve(values.size());
  for (const auto& row : values) out.push_back(row[c]);
  return out;
}

// Validation --------------------------------------------------------------

bool ValidationReport::mentions(std::string_view needle) const {
  return std::any_of(problems.begin(), problems.end(), [&](const auto& p) {
    return p.find(needle) != std::string::npos;
  });
}

bool is_masked_element(std::string_view element) {
  return !element.empty() &&
         std::all_of(element.begin(), element.end(), [](unsigned char ch) {
           return std::isspace(ch) != 0;
         });
}

namespace {

void check_element(const std::string& element, const std::string& where,
                   ValidationReport& report) {
  if (element.empty()) {
    report.problems.push_back(where + ": element is empty");
    return;
  }
  const bool has_space =
      std::any_of(element.begin(), element.end(),
                  [](unsigned char ch) { return std::isspace(ch) != 0; });
  if (has_space) {
    report.problems.push_back(where + ": element contains whitespace ('" +
                              element + "')");
  }
}

}  // namespace

ValidationReport validate_tuple(const VqaTuple& tuple) {
  ValidationReport report;
  const std::string id = tuple.tuple_id.empty() ? "<unnamed>" : tuple.tuple_id;
  if (tuple.tuple_id.empty()) report.problems.push_back("tuple_id is empty");
  for (std::size_t i = 0; i < tuple.frames.size(); ++i) {
    if (tuple.frames[i].empty()) {
      report.problems.push_back(id + ": frames[" + std::to_string(i) +
                                "]: element is empty");
    }
  }
  if (tuple.question.empty()) {
    report.problems.push_back(id + ": question has no elements");
  }
  for (std::size_t i = 0; i < tuple.question.size(); ++i) {
    check_element(tuple.question[i], id + ": question[" + std::to_string(i) + "]",
                  report);
  }
  if (tuple.choices.size() < 2 || tuple.choices.size() > kMaxChoices) {
    report.problems.push_back(id + ": choice count " +
                              std::to_string(tuple.choices.size()) +
                              " outside [2, 26]");
  }
  for (std::size_t k = 0; k < tuple.choices.size(); ++k) {
    const auto& choice = tuple.choices[k];
    const std::string where = id + ": choices[" + std::to_string(k) + "]";
    if (choice.empty()) report.problems.push_back(where + " has no elements");
    for (std::size_t i = 0; i < choice.size(); ++i) {
      check_element(choice[i], where + "[" + std::to_string(i) + "]", report);
    }
  }
  if (tuple.ground_truth >= tuple.choices.size()) {
    report.problems.push_back(id + ": ground_truth out of range (" +
                              std::to_string(tuple.ground_truth) + " with " +
                              std::to_string(tuple.choices.size()) + " choices)");
  }
  return report;
}

ValidationReport validate_dataset(const Dataset& dataset) {
  ValidationReport report;
  std::unordered_set<std::string> seen;
  for (const auto& tuple : dataset.tuples) {
    auto sub = validate_tuple(tuple);
    report.problems.insert(report.problems.end(), sub.problems.begin(),
                           sub.problems.end());
    if (!seen.insert(tuple.tuple_id).second) {
      report.problems.push_back("duplicate tuple_id '" + tuple.tuple_id + "'");
    }
  }
  return report;
}

ModalityLayout build_modality_layout(const VqaTuple& tuple) {
  std::vector<std::size_t> sizes;
  sizes.reserve(tuple.choices.size());
  for (const auto& c : tuple.choices) sizes.push_back(c.size());
  return ModalityLayout(tuple.frames.size(), tuple.question.size(),
                        std::move(sizes));
}

}  // namespace vqashap
