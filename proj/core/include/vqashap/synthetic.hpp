#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vqashap/adapter.hpp"
#include "vqashap/types.hpp"

namespace vqashap {

// Reward models with known Shapley values, used as ground truth for the
// estimator and for the metric and experiment pipelines.
//
//   logit_c(x) = bias[c] + sum_i weights[c][i] * x_i
//              + sum over interaction terms t of class c: t.value * x_t.i * x_t.j
//
// Terms are added in that order (features ascending, then interactions in
// listed order) so other implementations can reproduce logits bit for bit.
enum class SyntheticKind { kAdditive, kInteraction, kTextBiased, kConstant };

std::string_view synthetic_kind_name(SyntheticKind k);
std::optional<SyntheticKind> parse_synthetic_kind(std::string_view name);

struct PairTerm {
  std::size_t cls = 0;
  std::size_t i = 0;
  std::size_t j = 0;
  double value = 0.0;

  friend bool operator==(const PairTerm&, const PairTerm&) = default;
};

struct SyntheticTupleModel {
  std::vector<double> bias;                  // [class]
  std::vector<std::vector<double>> weights;  // [class][feature]
  std::vector<PairTerm> interactions;

  std::size_t num_classes() const { return bias.size(); }
  RewardVector logits(const MaskVector& mask) const;
  // Closed-form Shapley value of feature i for class c:
  // w_ci + half the interaction mass on i.
  double shapley_value(std::size_t c, std::size_t i) const;

  friend bool operator==(const SyntheticTupleModel&,
                         const SyntheticTupleModel&) = default;
};

struct SyntheticModelSpec {
  SyntheticKind kind = SyntheticKind::kAdditive;
  std::map<std::string, SyntheticTupleModel> tuples;

  friend bool operator==(const SyntheticModelSpec&,
                         const SyntheticModelSpec&) = default;
};

// Checks shapes against the dataset and the kind's constraints (no
// interactions for additive, zero video weights for text_biased, zero
// weights for constant).
ValidationReport validate_synthetic(const SyntheticModelSpec& spec,
                                    const Dataset& dataset);

// {"kind": str, "tuples": {"<tuple_id>": {"bias": [...], "weights":
// [[...], ...], "interactions": [{"class", "i", "j", "value"}]}}}
std::string synthetic_to_json(const SyntheticModelSpec& spec);
SyntheticModelSpec synthetic_from_json(std::string_view text);
SyntheticModelSpec load_synthetic(const std::filesystem::path& path);

// In-process adapter over a synthetic model.
class SyntheticAdapter final : public Adapter {
 public:
  SyntheticAdapter(Dataset dataset, SyntheticModelSpec spec);

  AdapterHandshake handshake() override;
  EvaluateResponse evaluate(const EvaluateRequest& request) override;

  const SyntheticModelSpec& spec() const { return spec_; }
  const Dataset& dataset() const { return dataset_; }

 private:
  Dataset dataset_;
  SyntheticModelSpec spec_;
  std::map<std::string, std::size_t> feature_count_;
};

// Direct reward for one tuple's model, without the protocol round trip.
class SyntheticReward final : public RewardFunction {
 public:
  explicit SyntheticReward(SyntheticTupleModel model,
                           std::size_t max_concurrency = 1)
      : model_(std::move(model)), max_concurrency_(max_concurrency) {}

  RewardVector evaluate(const MaskVector& mask) override {
    return model_.logits(mask);
  }
  std::size_t num_classes() const override { return model_.num_classes(); }
  std::size_t max_concurrency() const override { return max_concurrency_; }

 private:
  SyntheticTupleModel model_;
  std::size_t max_concurrency_;
};

struct FixtureOptions {
  std::string name = "synthetic";
  std::size_t num_tuples = 20;
  std::size_t num_frames = 8;
  std::size_t num_question = 7;
  std::size_t num_choices = 5;
  std::size_t words_per_choice = 3;
  std::size_t num_question_types = 4;
  std::size_t interactions_per_class = 2;  // kInteraction only
  SyntheticKind kind = SyntheticKind::kTextBiased;
  std::uint64_t seed = 0;
};

struct Fixture {
  Dataset dataset;
  SyntheticModelSpec model;
};

// Deterministic dataset plus matching synthetic model. Biases are set so a
// distractor wins once the answers are masked. Weights are multiples of 1/256.
Fixture make_fixture(const FixtureOptions& options);

}  // namespace vqashap
