#include "vqashap/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>
#include <unistd.h>

#include "json.hpp"
#include "vqashap/errors.hpp"

namespace vqashap {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file_atomic(const fs::path& path, std::string_view contents) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) {
      throw Error(ErrorCode::kIo, "cannot create directory '" +
                                      path.parent_path().string() +
                                      "': " + ec.message());
    }
  }
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error(ErrorCode::kIo, "cannot write '" + tmp.string() + "'");
    }
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out.flush()) {
      throw Error(ErrorCode::kIo, "short write to '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorCode::kIo, "cannot rename onto '" + path.string() + "'");
  }
}

std::string format_double(double value) {
  if (value == 0.0) return "0";  // folds -0 into 0
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{}) {
    throw Error(ErrorCode::kInvalidArgument, "cannot format double");
  }
  return std::string(buf.data(), end);
}

namespace {

template <typename T>
T required(const json& j, const char* key, std::string_view context) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw Error(ErrorCode::kValidation, std::string(context) +
                                            ": missing field '" + key + "'");
  }
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kValidation, std::string(context) + ": field '" +
                                            key + "': " + e.what());
  }
}

json parse_json(std::string_view text, std::string_view what) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kValidation,
                std::string(what) + " is not valid JSON: " + e.what());
  }
}

json reward_json(const RewardVector& r) { return r.logits; }

}  // namespace

// Dataset ---------------------------------------------------------------------

std::string dataset_to_json(const Dataset& dataset) {
  json tuples = json::array();
  for (const auto& t : dataset.tuples) {
    json jt;
    jt["tuple_id"] = t.tuple_id;
    jt["frames"] = t.frames;
    jt["question"] = t.question;
    jt["choices"] = t.choices;
    jt["ground_truth"] = t.ground_truth;
    jt["question_type"] =
        t.question_type ? json(*t.question_type) : json(nullptr);
    tuples.push_back(std::move(jt));
  }
  json doc;
  doc["name"] = dataset.name;
  doc["tuples"] = std::move(tuples);
  return doc.dump(2) + "\n";
}

Dataset dataset_from_json(std::string_view text) {
  const json doc = parse_json(text, "dataset");
  if (!doc.is_object()) {
    throw Error(ErrorCode::kValidation, "dataset must be a JSON object");
  }
  Dataset dataset;
  dataset.name = required<std::string>(doc, "name", "dataset");
  const auto tuples = required<json>(doc, "tuples", "dataset");
  if (!tuples.is_array()) {
    throw Error(ErrorCode::kValidation, "dataset: 'tuples' must be an array");
  }
  for (const auto& jt : tuples) {
    VqaTuple t;
    t.tuple_id = required<std::string>(jt, "tuple_id", "tuple");
    const std::string ctx = "tuple '" + t.tuple_id + "'";
    t.frames = required<std::vector<std::string>>(jt, "frames", ctx);
    t.question = required<std::vector<std::string>>(jt, "question", ctx);
    t.choices =
        required<std::vector<std::vector<std::string>>>(jt, "choices", ctx);
    const auto gt = required<long long>(jt, "ground_truth", ctx);
    if (gt < 0) {
      throw Error(ErrorCode::kValidation, ctx + ": ground_truth is negative");
    }
    t.ground_truth = static_cast<std::size_t>(gt);
    if (auto it = jt.find("question_type"); it != jt.end() && !it->is_null()) {
      t.question_type = it->get<std::string>();
    }
    dataset.tuples.push_back(std::move(t));
  }
  return dataset;
}

Dataset load_dataset(const fs::path& path) {
  Dataset d = dataset_from_json(read_text_file(path));
  const auto report = validate_dataset(d);
  if (!report.ok()) {
    std::string msg = "invalid dataset '" + path.string() + "':";
    for (const auto& p : report.problems) msg += "\n  " + p;
    throw Error(ErrorCode::kValidation, msg);
  }
  return d;
}

void save_dataset(const Dataset& dataset, const fs::path& path) {
  write_file_atomic(path, dataset_to_json(dataset));
}

// AttributionResult -------------------------------------------------------

std::string attribution_to_json(const AttributionResult& r) {
  json doc;
  doc["tuple_id"] = r.tuple_id;
  doc["estimator"] = std::string(estimator_name(r.estimator));
  doc["iterations"] = r.iterations;
  doc["seed"] = r.seed;
  doc["evaluations"] = r.evaluations;
  doc["reproducible"] = r.reproducible;
  json layout;
  layout["n_v"] = r.layout.n_video();
  layout["n_q"] = r.layout.n_question();
  layout["n_a"] = r.layout.n_answer();
  if (r.layout.has_choice_map()) layout["choice_sizes"] = r.layout.choice_sizes();
  doc["layout"] = std::move(layout);
  if (r.empty_reward || r.full_reward) {
    json baseline;
    if (r.empty_reward) baseline["empty"] = reward_json(*r.empty_reward);
    if (r.full_reward) baseline["full"] = reward_json(*r.full_reward);
    doc["baseline"] = std::move(baseline);
  }
  doc["values"] = r.values;
  return doc.dump() + "\n";
}

AttributionResult attribution_from_json(std::string_view text) {
  const json doc = parse_json(text, "attribution result");
  AttributionResult r;
  r.tuple_id = required<std::string>(doc, "tuple_id", "attribution");
  const std::string ctx = "attribution '" + r.tuple_id + "'";
  const auto est = parse_estimator(required<std::string>(doc, "estimator", ctx));
  if (!est) throw Error(ErrorCode::kValidation, ctx + ": unknown estimator");
  r.estimator = *est;
  r.iterations = required<std::size_t>(doc, "iterations", ctx);
  r.seed = required<std::uint64_t>(doc, "seed", ctx);
  r.evaluations = required<std::size_t>(doc, "evaluations", ctx);
  if (auto it = doc.find("reproducible"); it != doc.end()) {
    r.reproducible = it->get<bool>();
  }
  const auto layout = required<json>(doc, "layout", ctx);
  const auto n_v = required<std::size_t>(layout, "n_v", ctx);
  const auto n_q = required<std::size_t>(layout, "n_q", ctx);
  const auto n_a = required<std::size_t>(layout, "n_a", ctx);
  if (auto it = layout.find("choice_sizes"); it != layout.end()) {
    r.layout = ModalityLayout(n_v, n_q, it->get<std::vector<std::size_t>>());
    if (r.layout.n_answer() != n_a) {
      throw Error(ErrorCode::kValidation,
                  ctx + ": choice_sizes disagree with n_a");
    }
  } else {
    r.layout = ModalityLayout(n_v, n_q, n_a);
  }
  if (auto it = doc.find("baseline"); it != doc.end()) {
    if (auto e = it->find("empty"); e != it->end()) {
      r.empty_reward = RewardVector{e->get<std::vector<double>>()};
    }
    if (auto f = it->find("full"); f != it->end()) {
      r.full_reward = RewardVector{f->get<std::vector<double>>()};
    }
  }
  r.values = required<std::vector<std::vector<double>>>(doc, "values", ctx);
  if (r.values.size() != r.layout.size()) {
    throw Error(ErrorCode::kShapeMismatch,
                ctx + ": value rows do not match the layout size");
  }
  for (const auto& row : r.values) {
    if (row.size() != r.num_classes()) {
      throw Error(ErrorCode::kShapeMismatch, ctx + ": ragged value matrix");
    }
  }
  return r;
}

AttributionResult load_attribution(const fs::path& path) {
  return attribution_from_json(read_text_file(path));
}

void save_attribution(const AttributionResult& result, const fs::path& path) {
  write_file_atomic(path, attribution_to_json(result));
}

std::string attribution_file_name(std::string_view tuple_id) {
  std::string name;
  bool changed = tuple_id.empty();
  for (char ch : tuple_id) {
    const bool safe = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') ||
                      (ch >= '0' && ch <= '9') || ch == '-' || ch == '_' ||
                      ch == '.';
    name += safe ? ch : '_';
    changed |= !safe;
  }
  if (name.empty() || name.front() == '.') {
    name.insert(name.begin(), '_');
    changed = true;
  }
  if (changed) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : tuple_id) {
      h ^= ch;
      h *= 1099511628211ULL;
    }
    char suffix[17];
    std::snprintf(suffix, sizeof suffix, "%016llx",
                  static_cast<unsigned long long>(h));
    name += "-";
    name += suffix;
  }
  return name + ".json";
}

}  // namespace vqashap
