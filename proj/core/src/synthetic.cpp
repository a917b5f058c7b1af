#include "vqashap/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <thread>

#include "json.hpp"
#include "vqashap/errors.hpp"
#include "vqashap/io.hpp"
#include "vqashap/random.hpp"

namespace vqashap {

using nlohmann::json;

std::string_view synthetic_kind_name(SyntheticKind k) {
  switch (k) {
    case SyntheticKind::kAdditive: return "additive";
    case SyntheticKind::kInteraction: return "interaction";
    case SyntheticKind::kTextBiased: return "text_biased";
    case SyntheticKind::kConstant: return "constant";
  }
  return "additive";
}

std::optional<SyntheticKind> parse_synthetic_kind(std::string_view name) {
  for (auto k : {SyntheticKind::kAdditive, SyntheticKind::kInteraction,
                 SyntheticKind::kTextBiased, SyntheticKind::kConstant}) {
    if (synthetic_kind_name(k) == name) return k;
  }
  return std::nullopt;
}

RewardVector SyntheticTupleModel::logits(const MaskVector& mask) const {
  RewardVector r;
  r.logits.resize(bias.size());
  for (std::size_t c = 0; c < bias.size(); ++c) {
    double v = bias[c];
    const auto& w = weights[c];
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (mask[i]) v += w[i];
    }
    r.logits[c] = v;
  }
  for (const auto& t : interactions) {
    if (mask[t.i] && mask[t.j]) r.logits[t.cls] += t.value;
  }
  return r;
}

double SyntheticTupleModel::shapley_value(std::size_t c, std::size_t i) const {
  double v = weights.at(c).at(i);
  for (const auto& t : interactions) {
    if (t.cls == c && (t.i == i || t.j == i)) v += 0.5 * t.value;
  }
  return v;
}

ValidationReport validate_synthetic(const SyntheticModelSpec& spec,
                                    const Dataset& dataset) {
  ValidationReport report;
  for (const auto& tuple : dataset.tuples) {
    auto it = spec.tuples.find(tuple.tuple_id);
    if (it == spec.tuples.end()) {
      report.problems.push_back("no synthetic model for tuple '" +
                                tuple.tuple_id + "'");
      continue;
    }
    const auto& model = it->second;
    const auto layout = build_modality_layout(tuple);
    const std::string id = "synthetic model '" + tuple.tuple_id + "'";
    if (model.bias.size() != tuple.choices.size() ||
        model.weights.size() != tuple.choices.size()) {
      report.problems.push_back(id + ": class count differs from choice count");
      continue;
    }
    for (const auto& w : model.weights) {
      if (w.size() != layout.size()) {
        report.problems.push_back(id + ": weight vector length " +
                                  std::to_string(w.size()) + " != M " +
                                  std::to_string(layout.size()));
      }
    }
    for (const auto& t : model.interactions) {
      if (t.cls >= model.num_classes() || t.i >= layout.size() ||
          t.j >= layout.size() || t.i == t.j) {
        report.problems.push_back(id + ": interaction term out of range");
      }
    }
    if (!report.ok()) continue;
    switch (spec.kind) {
      case SyntheticKind::kAdditive:
        if (!model.interactions.empty()) {
          report.problems.push_back(id + ": additive model has interactions");
        }
        break;
      case SyntheticKind::kTextBiased: {
        const IndexRange video = layout.segment(Modality::kVideo);
        for (const auto& w : model.weights) {
          for (std::size_t i = video.begin; i < video.end; ++i) {
            if (w[i] != 0.0) {
              report.problems.push_back(id + ": text_biased model weights video");
              break;
            }
          }
        }
        for (const auto& t : model.interactions) {
          if (video.contains(t.i) || video.contains(t.j)) {
            report.problems.push_back(id + ": text_biased interaction on video");
          }
        }
        break;
      }
      case SyntheticKind::kConstant: {
        bool nonzero = !model.interactions.empty();
        for (const auto& w : model.weights) {
          nonzero |= std::any_of(w.begin(), w.end(),
                                 [](double x) { return x != 0.0; });
        }
        if (nonzero) {
          report.problems.push_back(id + ": constant model has nonzero weights");
        }
        break;
      }
      case SyntheticKind::kInteraction:
        break;
    }
  }
  return report;
}

std::string synthetic_to_json(const SyntheticModelSpec& spec) {
  json tuples = json::object();
  for (const auto& [id, model] : spec.tuples) {
    json terms = json::array();
    for (const auto& t : model.interactions) {
      terms.push_back({{"class", t.cls}, {"i", t.i}, {"j", t.j}, {"value", t.value}});
    }
    tuples[id] = {{"bias", model.bias},
                  {"weights", model.weights},
                  {"interactions", std::move(terms)}};
  }
  json doc;
  doc["kind"] = std::string(synthetic_kind_name(spec.kind));
  doc["tuples"] = std::move(tuples);
  return doc.dump(1) + "\n";
}

SyntheticModelSpec synthetic_from_json(std::string_view text) {
  SyntheticModelSpec spec;
  try {
    const json doc = json::parse(text.begin(), text.end());
    const auto kind = parse_synthetic_kind(doc.at("kind").get<std::string>());
    if (!kind) throw Error(ErrorCode::kValidation, "unknown synthetic kind");
    spec.kind = *kind;
    for (const auto& [id, jm] : doc.at("tuples").items()) {
      SyntheticTupleModel model;
      model.bias = jm.at("bias").get<std::vector<double>>();
      model.weights = jm.at("weights").get<std::vector<std::vector<double>>>();
      if (auto it = jm.find("interactions"); it != jm.end()) {
        for (const auto& jt : *it) {
          model.interactions.push_back(
              {jt.at("class").get<std::size_t>(), jt.at("i").get<std::size_t>(),
               jt.at("j").get<std::size_t>(), jt.at("value").get<double>()});
        }
      }
      spec.tuples.emplace(id, std::move(model));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kValidation,
                std::string("invalid synthetic model spec: ") + e.what());
  }
  return spec;
}

SyntheticModelSpec load_synthetic(const std::filesystem::path& path) {
  return synthetic_from_json(read_text_file(path));
}

// SyntheticAdapter ----------------------------------------------------------

SyntheticAdapter::SyntheticAdapter(Dataset dataset, SyntheticModelSpec spec)
    : dataset_(std::move(dataset)), spec_(std::move(spec)) {
  const auto report = validate_synthetic(spec_, dataset_);
  if (!report.ok()) {
    std::string msg = "synthetic model does not fit the dataset:";
    for (const auto& p : report.problems) msg += "\n  " + p;
    throw Error(ErrorCode::kValidation, msg);
  }
  for (const auto& t : dataset_.tuples) {
    feature_count_[t.tuple_id] = build_modality_layout(t).size();
  }
}

AdapterHandshake SyntheticAdapter::handshake() {
  AdapterHandshake caps;
  caps.deterministic = true;
  caps.max_concurrency =
      std::max<std::size_t>(1, std::thread::hardware_concurrency());
  caps.supports_batching = false;
  return caps;
}

EvaluateResponse SyntheticAdapter::evaluate(const EvaluateRequest& request) {
  EvaluateResponse response;
  response.request_id = request.request_id;
  auto count = feature_count_.find(request.tuple_id);
  auto model = spec_.tuples.find(request.tuple_id);
  if (count == feature_count_.end() || model == spec_.tuples.end()) {
    response.body = ProtocolError{std::string(protocol_codes::kUnknownTuple),
                                  "unknown tuple_id '" + request.tuple_id + "'"};
    return response;
  }
  try {
    const MaskVector mask = decode_mask_hex(request.mask_hex, count->second);
    response.body = model->second.logits(mask);
  } catch (const Error& e) {
    response.body =
        ProtocolError{std::string(protocol_codes::kMaskLength), e.what()};
  }
  return response;
}

// Fixtures ----------------------------------------------------------------

namespace {

constexpr std::array<std::string_view, 48> kVocabulary = {
    "person", "cup",    "table",  "knife",  "pan",    "door",   "red",
    "blue",   "opens",  "closes", "picks",  "puts",   "left",   "right",
    "counter", "drawer", "plate", "water",  "washes", "cuts",   "onion",
    "bread",  "fridge", "moves",  "looks",  "towel",  "spoon",  "bowl",
    "stirs",  "pours",  "walks",  "sits",   "chair",  "phone",  "book",
    "reads",  "green",  "small",  "large",  "box",    "bag",    "carries",
    "cooks",  "egg",    "salt",   "lid",    "tap",    "shelf"};

constexpr std::array<std::string_view, 10> kQuestionWords = {
    "what", "did", "the", "person", "do", "after", "before", "with", "the",
    "object"};

// Uniform multiple of 1/256 in [lo, hi].
double draw(std::mt19937_64& rng, double lo, double hi) {
  const auto lo_q = static_cast<std::int64_t>(std::ceil(lo * 256.0));
  const auto hi_q = static_cast<std::int64_t>(std::floor(hi * 256.0));
  const auto span = static_cast<std::uint64_t>(hi_q - lo_q + 1);
  return static_cast<double>(lo_q + static_cast<std::int64_t>(
                                        uniform_below(rng, span))) /
         256.0;
}

double round_up_256(double x) { return std::ceil(x * 256.0) / 256.0; }

std::vector<std::string> random_phrase(std::mt19937_64& rng, std::size_t words) {
  std::vector<std::string> out;
  for (std::size_t w = 0; w < words; ++w) {
    out.emplace_back(kVocabulary[uniform_below(rng, kVocabulary.size())]);
  }
  return out;
}

}  // namespace

Fixture make_fixture(const FixtureOptions& o) {
  if (o.num_choices < 2 || o.num_choices > kMaxChoices || o.num_question < 1 ||
      o.words_per_choice < 1) {
    throw Error(ErrorCode::kInvalidArgument, "fixture options out of range");
  }
  Fixture fx;
  fx.dataset.name = o.name;
  fx.model.kind = o.kind;

  for (std::size_t t = 0; t < o.num_tuples; ++t) {
    auto rng = make_stream(o.seed, t);
    VqaTuple tuple;
    tuple.tuple_id = o.name + "-" + std::to_string(t);
    for (std::size_t f = 0; f < o.num_frames; ++f) {
      tuple.frames.push_back("video" + std::to_string(t) + "/frame" +
                             std::to_string(f));
    }
    for (std::size_t q = 0; q < o.num_question; ++q) {
      tuple.question.emplace_back(kQuestionWords[q % kQuestionWords.size()]);
    }
    tuple.question.back() += "?";
    while (tuple.choices.size() < o.num_choices) {
      auto phrase = random_phrase(rng, o.words_per_choice);
      if (std::find(tuple.choices.begin(), tuple.choices.end(), phrase) ==
          tuple.choices.end()) {
        tuple.choices.push_back(std::move(phrase));
      }
    }
    tuple.ground_truth = uniform_below(rng, o.num_choices);
    if (o.num_question_types > 0) {
      tuple.question_type = "type" + std::to_string(t % o.num_question_types);
    }

    const ModalityLayout layout = build_modality_layout(tuple);
    const std::size_t m = layout.size();
    const std::size_t n_c = o.num_choices;
    SyntheticTupleModel model;
    model.bias.assign(n_c, 0.0);
    model.weights.assign(n_c, std::vector<double>(m, 0.0));
    for (std::size_t c = 0; c < n_c; ++c) model.bias[c] = draw(rng, -0.25, 0.25);

    if (o.kind != SyntheticKind::kConstant) {
      for (std::size_t c = 0; c < n_c; ++c) {
        auto& w = model.weights[c];
        if (o.kind != SyntheticKind::kTextBiased) {
          const IndexRange video = layout.segment(Modality::kVideo);
          for (std::size_t i = video.begin; i < video.end; ++i) {
            w[i] = draw(rng, -0.125, 0.25);
          }
        }
        const IndexRange question = layout.segment(Modality::kQuestion);
        for (std::size_t i = question.begin; i < question.end; ++i) {
          w[i] = draw(rng, -0.125, 0.125);
        }
        for (std::size_t k = 0; k < n_c; ++k) {
          const IndexRange seg = layout.choice_segment(k);
          for (std::size_t i = seg.begin; i < seg.end; ++i) {
            w[i] = k == c ? draw(rng, 0.25, 1.0) : draw(rng, -0.25, 0.0625);
          }
        }
      }
      if (o.kind == SyntheticKind::kInteraction) {
        for (std::size_t c = 0; c < n_c; ++c) {
          for (std::size_t p = 0; p < o.interactions_per_class && m >= 2; ++p) {
            std::size_t i = uniform_below(rng, m);
            std::size_t j = uniform_below(rng, m - 1);
            if (j >= i) ++j;
            model.interactions.push_back(
                {c, std::min(i, j), std::max(i, j), draw(rng, -1.0, 1.0)});
          }
        }
      }

      // With the answers masked, a distractor must win.
      const std::size_t favoured = (tuple.ground_truth + 1) % n_c;
      std::vector<bool> no_answers(m, true);
      const IndexRange answers = layout.segment(Modality::kAnswer);
      for (std::size_t i = answers.begin; i < answers.end; ++i) no_answers[i] = false;
      const auto masked = model.logits(MaskVector(no_answers)).logits;
      double rival = -1e300;
      for (std::size_t c = 0; c < n_c; ++c) {
        if (c != favoured) rival = std::max(rival, masked[c]);
      }
      model.bias[favoured] += round_up_256(std::max(0.0, rival - masked[favoured]) + 0.5);

      // Unmasked, the ground truth wins on four tuples out of five.
      if (t % 5 != 4) {
        const auto full = model.logits(MaskVector(m, true)).logits;
        double best_other = -1e300;
        for (std::size_t c = 0; c < n_c; ++c) {
          if (c != tuple.ground_truth) best_other = std::max(best_other, full[c]);
        }
        const double gap = best_other - full[tuple.ground_truth] + 0.5;
        if (gap > 0.0) {
          const IndexRange own = layout.choice_segment(tuple.ground_truth);
          const double step = round_up_256(gap / static_cast<double>(own.size()));
          for (std::size_t i = own.begin; i < own.end; ++i) {
            model.weights[tuple.ground_truth][i] += step;
          }
        }
      }
    }

    fx.model.tuples.emplace(tuple.tuple_id, std::move(model));
    fx.dataset.tuples.push_back(std::move(tuple));
  }
  return fx;
}

}  // namespace vqashap
