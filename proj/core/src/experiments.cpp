#include "vqashap/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "vqashap/errors.hpp"
#include "vqashap/parallel.hpp"
#include "vqashap/random.hpp"

namespace vqashap {

namespace {

using Choice = std::vector<std::string>;

std::vector<Choice> negatives_of(const VqaTuple& t) {
  std::vector<Choice> out;
  for (std::size_t c = 0; c < t.choices.size(); ++c) {
    if (c != t.ground_truth) out.push_back(t.choices[c]);
  }
  return out;
}

// Shuffles `choices` and returns the new position of index `tracked`.
std::size_t shuffle_tracking(std::vector<Choice>& choices, std::size_t tracked,
                             std::mt19937_64& rng) {
  std::vector<std::size_t> order(choices.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle_in_place(order, rng);
  std::vector<Choice> shuffled;
  shuffled.reserve(choices.size());
  std::size_t position = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (order[k] == tracked) position = k;
    shuffled.push_back(std::move(choices[order[k]]));
  }
  choices = std::move(shuffled);
  return position;
}

}  // namespace

MaskingReport run_masking_experiment(const Dataset& dataset,
                                     RewardProvider& provider,
                                     const std::vector<MaskSpec>& specs,
                                     const AttributionMap* attributions) {
  const bool needs_attr = std::any_of(specs.begin(), specs.end(), [](const auto& s) {
    return s.needs_attributions();
  });
  if (needs_attr) {
    std::vector<std::string> missing;
    for (const auto& t : dataset.tuples) {
      if (attributions == nullptr || !attributions->contains(t.tuple_id)) {
        missing.push_back(t.tuple_id);
      }
    }
    if (!missing.empty()) {
      std::string list;
      for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
      throw Error(ErrorCode::kMissingAttributions,
                  "sign masks need attributions; missing for " +
                      std::to_string(missing.size()) + " tuple(s): " + list);
    }
  }

  const std::size_t n = dataset.tuples.size();
  const std::size_t n_specs = specs.size();
  std::vector<std::size_t> baseline_pred(n);
  std::vector<std::vector<std::size_t>> pred(n_specs, std::vector<std::size_t>(n));
  std::vector<std::vector<std::array<double, 3>>> fraction(
      n_specs, std::vector<std::array<double, 3>>(n));

  parallel_for(n, provider.max_concurrency(), [&](std::size_t t) {
    const VqaTuple& tuple = dataset.tuples[t];
    const ModalityLayout layout = build_modality_layout(tuple);
    auto reward = provider.reward_for(tuple);
    auto predict = [&](const MaskVector& mask) {
      RewardVector r = reward->evaluate(mask);
      if (r.size() != tuple.choices.size()) {
        throw Error(ErrorCode::kShapeMismatch,
                    "reward for tuple '" + tuple.tuple_id + "' has " +
                        std::to_string(r.size()) + " classes");
      }
      if (!r.all_finite()) {
        throw Error(ErrorCode::kNonFiniteReward,
                    "non-finite logit for tuple '" + tuple.tuple_id + "'");
      }
      return r.argmax();
    };
    baseline_pred[t] = predict(MaskVector(layout.size(), true));
    for (std::size_t s = 0; s < n_specs; ++s) {
      const AttributionResult* attr = nullptr;
      if (specs[s].needs_attributions()) attr = &attributions->at(tuple.tuple_id);
      const MaskVector mask =
          materialize_mask(specs[s], layout, attr, tuple.ground_truth);
      pred[s][t] = specs[s].kind == MaskKind::kNone ? baseline_pred[t]
                                                    : predict(mask);
      for (Modality m : kModalities) {
        const IndexRange seg = layout.segment(m);
        if (seg.size() == 0) continue;
        std::size_t masked = 0;
        for (std::size_t i = seg.begin; i < seg.end; ++i) masked += !mask[i];
        fraction[s][t][static_cast<std::size_t>(m)] =
            static_cast<double>(masked) / static_cast<double>(seg.size());
      }
    }
  });

  auto accuracy = [&](const std::vector<std::size_t>& p) {
    if (n == 0) return 0.0;
    std::size_t correct = 0;
    for (std::size_t t = 0; t < n; ++t) {
      correct += p[t] == dataset.tuples[t].ground_truth;
    }
    return static_cast<double>(correct) / static_cast<double>(n);
  };

  MaskingReport report;
  report.baseline = accuracy(baseline_pred);
  for (std::size_t s = 0; s < n_specs; ++s) {
    MaskingRow row;
    row.spec = specs[s];
    row.accuracy = accuracy(pred[s]);
    row.delta = row.accuracy - report.baseline;
    for (std::size_t t = 0; t < n; ++t) {
      for (std::size_t m = 0; m < 3; ++m) row.masked_fraction[m] += fraction[s][t][m];
    }
    if (n > 0) {
      for (double& f : row.masked_fraction) f /= static_cast<double>(n);
    }
    row.predictions = std::move(pred[s]);
    report.rows.push_back(std::move(row));
  }
  return report;
}

Dataset replace_answers_easy(const Dataset& dataset, std::uint64_t seed) {
  const std::size_t n = dataset.tuples.size();
  if (n < 2) {
    throw Error(ErrorCode::kInvalidArgument,
                "easy replacement needs at least two tuples");
  }
  Dataset out = dataset;
  for (std::size_t t = 0; t < n; ++t) {
    const VqaTuple& recipient = dataset.tuples[t];
    const Choice& truth = recipient.choices[recipient.ground_truth];
    const std::size_t k = recipient.choices.size() - 1;

    std::vector<std::size_t> donors;
    for (std::size_t u = 0; u < n; ++u) {
      if (u == t) continue;
      const auto neg = negatives_of(dataset.tuples[u]);
      if (neg.size() < k) continue;
      if (std::find(neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(k),
                    truth) != neg.begin() + static_cast<std::ptrdiff_t>(k)) {
        continue;
      }
      donors.push_back(u);
    }
    if (donors.empty()) {
      throw Error(ErrorCode::kPoolExhausted,
                  "no donor tuple with " + std::to_string(k) +
                      " usable negatives for '" + recipient.tuple_id + "'");
    }
    auto rng = make_stream(seed, t);
    const std::size_t donor = donors[uniform_below(rng, donors.size())];
    auto neg = negatives_of(dataset.tuples[donor]);
    neg.resize(k);

    std::vector<Choice> choices;
    choices.reserve(k + 1);
    choices.push_back(truth);
    for (auto& c : neg) choices.push_back(std::move(c));
    VqaTuple& target = out.tuples[t];
    target.ground_truth = shuffle_tracking(choices, 0, rng);
    target.choices = std::move(choices);
  }
  return out;
}

Dataset inject_new_negatives(const Dataset& dataset,
                             const ReplacementConfig& config) {
  if (config.mode != ReplacementMode::kNewX) {
    throw Error(ErrorCode::kInvalidArgument, "injection needs mode new_x");
  }
  if (config.x < 1) {
    throw Error(ErrorCode::kInvalidArgument, "new_x needs x >= 1");
  }
  const std::size_t n = dataset.tuples.size();
  Dataset out = dataset;
  for (std::size_t t = 0; t < n; ++t) {
    const VqaTuple& recipient = dataset.tuples[t];
    const std::size_t total = recipient.choices.size() + config.x;
    if (total > kMaxChoices) {
      throw Error(ErrorCode::kLabelOverflow,
                  "tuple '" + recipient.tuple_id + "' would have " +
                      std::to_string(total) + " choices; labels stop at Z");
    }
    if (config.type_compatibility && !recipient.question_type) {
      throw Error(ErrorCode::kInvalidArgument,
                  "type-compatible injection needs a question_type on '" +
                      recipient.tuple_id + "'");
    }

    std::set<Choice> seen(recipient.choices.begin(), recipient.choices.end());
    std::vector<Choice> pool;
    for (std::size_t u = 0; u < n; ++u) {
      if (u == t) continue;
      const VqaTuple& other = dataset.tuples[u];
      if (config.type_compatibility && other.question_type != recipient.question_type) {
        continue;
      }
      for (const auto& c : other.choices) {
        if (seen.insert(c).second) pool.push_back(c);
      }
    }
    if (pool.size() < config.x) {
      throw Error(ErrorCode::kPoolExhausted,
                  "tuple '" + recipient.tuple_id + "' has " +
                      std::to_string(pool.size()) +
                      " candidate negatives, needs " + std::to_string(config.x));
    }

    auto rng = make_stream(config.seed, t);
    for (std::size_t k = 0; k < config.x; ++k) {
      const auto j = k + static_cast<std::size_t>(uniform_below(rng, pool.size() - k));
      std::swap(pool[k], pool[j]);
    }
    std::vector<Choice> choices = recipient.choices;
    for (std::size_t k = 0; k < config.x; ++k) choices.push_back(std::move(pool[k]));
    VqaTuple& target = out.tuples[t];
    target.ground_truth = shuffle_tracking(choices, recipient.ground_truth, rng);
    target.choices = std::move(choices);
  }
  return out;
}

Dataset replace_answers(const Dataset& dataset, const ReplacementConfig& config) {
  return config.mode == ReplacementMode::kEasy
             ? replace_answers_easy(dataset, config.seed)
             : inject_new_negatives(dataset, config);
}

double spearman_correlation(const std::vector<std::size_t>& rank_a,
                            const std::vector<std::size_t>& rank_b) {
  const std::size_t n = rank_a.size();
  if (n < 2 || rank_b.size() != n) {
    throw Error(ErrorCode::kInvalidArgument,
                "rankings must have equal length of at least 2");
  }
  auto positions = [n](const std::vector<std::size_t>& ranking) {
    std::vector<std::size_t> pos(n, n);
    for (std::size_t k = 0; k < n; ++k) {
      if (ranking[k] >= n || pos[ranking[k]] != n) {
        throw Error(ErrorCode::kInvalidArgument,
                    "ranking is not a permutation of 0.." + std::to_string(n - 1));
      }
      pos[ranking[k]] = k;
    }
    return pos;
  };
  const auto pa = positions(rank_a);
  const auto pb = positions(rank_b);
  double sum_d2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(pa[i]) - static_cast<double>(pb[i]);
    sum_d2 += d * d;
  }
  const double nn = static_cast<double>(n);
  return 1.0 - 6.0 * sum_d2 / (nn * (nn * nn - 1.0));
}

std::vector<std::size_t> rank_frames_by_attribution(
    const AttributionResult& attr, const ClassSelector& selector,
    std::size_t ground_truth) {
  const std::size_t n_v = attr.layout.n_video();
  if (n_v == 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "tuple '" + attr.tuple_id + "' has no frames to rank");
  }
  const std::size_t c = selector.resolve(ground_truth);
  if (c >= attr.num_classes()) {
    throw Error(ErrorCode::kInvalidArgument,
                "class " + std::to_string(c) + " out of range");
  }
  const IndexRange seg = attr.layout.segment(Modality::kVideo);
  std::vector<std::size_t> order(n_v);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(attr.values[seg.begin + a][c]) >
           std::abs(attr.values[seg.begin + b][c]);
  });
  return order;
}

std::vector<AblationPoint> iteration_ablation(
    RewardFunction& reward, const ModalityLayout& layout,
    const std::vector<std::size_t>& grid, const AblationReference& reference,
    const std::vector<std::uint64_t>& seeds, EstimatorConfig base) {
  if (grid.empty() || seeds.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "ablation needs a non-empty grid and seed list");
  }
  AttributionResult ref;
  if (reference.exact) {
    ref = exact_shapley(reward, layout, reference.exact_config);
  } else {
    const std::size_t top = *std::max_element(grid.begin(), grid.end());
    if (reference.iterations < top) {
      throw Error(ErrorCode::kInvalidArgument,
                  "reference iterations " + std::to_string(reference.iterations) +
                      " below grid maximum " + std::to_string(top));
    }
    EstimatorConfig cfg = base;
    cfg.iterations = reference.iterations;
    cfg.seed = reference.seed;
    ref = monte_carlo_shapley(reward, layout, cfg);
  }

  std::vector<AblationPoint> curve;
  curve.reserve(grid.size());
  for (std::size_t iterations : grid) {
    AblationPoint point;
    point.iterations = iterations;
    for (std::uint64_t seed : seeds) {
      EstimatorConfig cfg = base;
      cfg.iterations = iterations;
      cfg.seed = seed;
      point.mse_per_seed.push_back(
          estimator_mse(monte_carlo_shapley(reward, layout, cfg), ref));
    }
    point.mean_mse = std::accumulate(point.mse_per_seed.begin(),
                                     point.mse_per_seed.end(), 0.0) /
                     static_cast<double>(seeds.size());
    curve.push_back(std::move(point));
  }
  return curve;
}

}  // namespace vqashap
