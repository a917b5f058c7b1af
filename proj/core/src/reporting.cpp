#include "vqashap/reporting.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "json.hpp"
#include "vqashap/errors.hpp"
#include "vqashap/io.hpp"

namespace vqashap {

namespace {

using ordered_json = nlohmann::ordered_json;

std::vector<double> gt_column(const AttributionResult& attr, const VqaTuple& tuple) {
  if (attr.num_features() != build_modality_layout(tuple).size()) {
    throw Error(ErrorCode::kShapeMismatch,
                "attribution for '" + tuple.tuple_id +
                    "' does not match the dataset tuple");
  }
  return basis_column(attr, tuple.ground_truth, ClassBasis::kGroundTruth);
}

std::string fmt_opt(const std::optional<Triple>& t, std::size_t k) {
  return t ? format_double((*t)[k]) : std::string();
}

std::string lowercase(std::string s) {
  for (char& ch : s) {
    ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  }
  return s;
}

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char ch) { return std::isspace(ch) != 0; });
}

void append_scores(std::string& out, const ModalityScores& s) {
  for (std::size_t k = 0; k < 3; ++k) out += "," + fmt_opt(s.mc, k);
  for (std::size_t k = 0; k < 3; ++k) out += "," + fmt_opt(s.pfc, k);
}

}  // namespace

std::vector<std::vector<double>> heatmap_matrix(const Dataset& dataset,
                                                const AttributionMap& results,
                                                std::size_t truncate_to) {
  std::vector<std::vector<double>> matrix;
  for (const auto& tuple : dataset.tuples) {
    auto it = results.find(tuple.tuple_id);
    if (it == results.end()) continue;
    auto row = gt_column(it->second, tuple);
    if (row.size() > truncate_to) row.resize(truncate_to);
    matrix.push_back(std::move(row));
  }
  return matrix;
}

std::string matrix_to_csv(const std::vector<std::vector<double>>& matrix) {
  std::string out;
  for (const auto& row : matrix) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k > 0) out += ',';
      out += format_double(row[k]);
    }
    out += '\n';
  }
  return out;
}

std::string heatmap_ppm(const std::vector<std::vector<double>>& matrix) {
  std::size_t width = 0;
  for (const auto& row : matrix) width = std::max(width, row.size());
  const std::size_t height = matrix.size();
  std::string out = "P6\n" + std::to_string(width) + " " +
                    std::to_string(height) + "\n255\n";
  out.reserve(out.size() + width * height * 3);
  for (const auto& row : matrix) {
    for (std::size_t k = 0; k < width; ++k) {
      unsigned char r = 128, g = 128, b = 128;
      if (k < row.size()) {
        const double v = std::clamp(row[k], -1.0, 1.0);
        const auto fade = static_cast<unsigned char>(
            std::lround(255.0 * (1.0 - std::abs(v))));
        r = v < 0 ? fade : 255;
        g = fade;
        b = v > 0 ? fade : 255;
      }
      out.push_back(static_cast<char>(r));
      out.push_back(static_cast<char>(g));
      out.push_back(static_cast<char>(b));
    }
  }
  return out;
}

std::vector<WordStat> word_report(const Dataset& dataset,
                                  const AttributionMap& results, bool raw) {
  struct Acc {
    std::size_t count = 0;
    double sum = 0.0;
  };
  std::map<std::string, Acc> acc;
  for (const auto& tuple : dataset.tuples) {
    auto it = results.find(tuple.tuple_id);
    if (it == results.end()) continue;
    const AttributionResult& attr = it->second;
    const auto column = raw ? attr.column(tuple.ground_truth) : gt_column(attr, tuple);
    if (column.size() != build_modality_layout(tuple).size()) {
      throw Error(ErrorCode::kShapeMismatch,
                  "attribution for '" + tuple.tuple_id +
                      "' does not match the dataset tuple");
    }
    std::vector<const std::string*> words;
    for (const auto& w : tuple.question) words.push_back(&w);
    for (const auto& choice : tuple.choices) {
      for (const auto& w : choice) words.push_back(&w);
    }
    const std::size_t offset = tuple.frames.size();
    for (std::size_t k = 0; k < words.size(); ++k) {
      if (blank(*words[k])) continue;
      Acc& a = acc[lowercase(*words[k])];
      ++a.count;
      a.sum += column[offset + k];
    }
  }
  std::vector<WordStat> stats;
  stats.reserve(acc.size());
  for (const auto& [word, a] : acc) {
    stats.push_back({word, a.count, a.sum / static_cast<double>(a.count)});
  }
  std::stable_sort(stats.begin(), stats.end(), [](const auto& x, const auto& y) {
    return x.frequency > y.frequency;
  });
  return stats;
}

std::string word_report_csv(const std::vector<WordStat>& stats) {
  std::string out = "word,frequency,mean_value\n";
  for (const auto& s : stats) {
    std::string word = s.word;
    if (word.find_first_of(",\"\n") != std::string::npos) {
      std::string quoted = "\"";
      for (char ch : word) {
        if (ch == '"') quoted += '"';
        quoted += ch;
      }
      word = quoted + "\"";
    }
    out += word + "," + std::to_string(s.frequency) + "," +
           format_double(s.mean_value) + "\n";
  }
  return out;
}

MetricsTable compute_metrics(const Dataset& dataset, const AttributionMap& results,
                             ClassBasis basis) {
  MetricsTable table;
  table.basis = basis;
  std::vector<ModalityScores> scores;
  std::size_t with_baseline = 0;
  std::size_t correct = 0;
  for (const auto& tuple : dataset.tuples) {
    auto it = results.find(tuple.tuple_id);
    if (it == results.end()) continue;
    const AttributionResult& attr = it->second;
    if (attr.num_features() != build_modality_layout(tuple).size()) {
      throw Error(ErrorCode::kShapeMismatch,
                  "attribution for '" + tuple.tuple_id +
                      "' does not match the dataset tuple");
    }
    ModalityScores s = score_tuple(attr, tuple.ground_truth, basis);
    table.tuples.push_back({tuple.tuple_id, s});
    scores.push_back(s);
    if (attr.full_reward) {
      ++with_baseline;
      correct += attr.full_reward->argmax() == tuple.ground_truth;
    }
  }
  table.aggregate = aggregate(scores);
  table.aggregate.class_basis = basis;
  if (with_baseline > 0 && with_baseline == table.tuples.size()) {
    table.accuracy = static_cast<double>(correct) / static_cast<double>(with_baseline);
  }
  return table;
}

std::string metrics_csv(const MetricsTable& table) {
  const std::string basis(class_basis_name(table.basis));
  std::string out = "tuple_id,basis,mc_v,mc_q,mc_a,pfc_v,pfc_q,pfc_a\n";
  for (const auto& t : table.tuples) {
    out += t.tuple_id + "," + basis;
    append_scores(out, t.scores);
    out += '\n';
  }
  out += "mean," + basis;
  append_scores(out, table.aggregate);
  out += '\n';
  return out;
}

std::string summary_csv(std::span<const MetricsTable> tables) {
  std::string out =
      "basis,mc_v,mc_q,mc_a,pfc_v,pfc_q,pfc_a,accuracy,included,excluded\n";
  for (const auto& t : tables) {
    out += std::string(class_basis_name(t.basis));
    append_scores(out, t.aggregate);
    out += "," + (t.accuracy ? format_double(*t.accuracy) : std::string()) + "," +
           std::to_string(t.aggregate.included) + "," +
           std::to_string(t.aggregate.excluded) + "\n";
  }
  return out;
}

std::string masking_csv(const MaskingReport& report) {
  std::string out =
      "mask,accuracy,delta,masked_video,masked_question,masked_answer\n";
  for (const auto& row : report.rows) {
    out += format_mask_spec(row.spec) + "," + format_double(row.accuracy) + "," +
           format_double(row.delta);
    for (double f : row.masked_fraction) out += "," + format_double(f);
    out += '\n';
  }
  return out;
}

std::string masking_json(const MaskingReport& report) {
  ordered_json j;
  j["baseline"] = report.baseline;
  j["rows"] = ordered_json::array();
  for (const auto& row : report.rows) {
    ordered_json r;
    r["mask"] = format_mask_spec(row.spec);
    r["accuracy"] = row.accuracy;
    r["delta"] = row.delta;
    r["masked_fraction"] = {{"video", row.masked_fraction[0]},
                            {"question", row.masked_fraction[1]},
                            {"answer", row.masked_fraction[2]}};
    r["predictions"] = row.predictions;
    j["rows"].push_back(std::move(r));
  }
  return j.dump(2) + "\n";
}

std::string ablation_csv(const std::vector<AblationPoint>& curve) {
  std::string out = "iterations,mean_mse";
  const std::size_t seeds = curve.empty() ? 0 : curve.front().mse_per_seed.size();
  for (std::size_t s = 0; s < seeds; ++s) out += ",mse_" + std::to_string(s);
  out += '\n';
  for (const auto& p : curve) {
    out += std::to_string(p.iterations) + "," + format_double(p.mean_mse);
    for (double m : p.mse_per_seed) out += "," + format_double(m);
    out += '\n';
  }
  return out;
}

std::string modality_values_csv(const Dataset& dataset,
                                const AttributionMap& results) {
  std::string out = "tuple_id,modality,feature,value\n";
  for (const auto& tuple : dataset.tuples) {
    auto it = results.find(tuple.tuple_id);
    if (it == results.end()) continue;
    const auto column = gt_column(it->second, tuple);
    const ModalityLayout& layout = it->second.layout;
    for (std::size_t i = 0; i < column.size(); ++i) {
      out += tuple.tuple_id + "," +
             std::string(modality_name(layout.modality_of(i))) + "," +
             std::to_string(i) + "," + format_double(column[i]) + "\n";
    }
  }
  return out;
}

std::string manifest_to_json(const RunManifest& m) {
  ordered_json j;
  j["command"] = m.command;
  j["dataset"] = m.dataset_path;
  j["adapter"] = m.adapter;
  j["estimator"] = {{"kind", m.estimator},
                    {"iterations", m.iterations},
                    {"seed", m.seed},
                    {"antithetic", m.antithetic}};
  j["outputs"] = m.outputs;
  j["output_dir"] = m.output_dir;
  j["options"] = ordered_json::object();
  for (const auto& [k, v] : m.options) j["options"][k] = v;
  j["engine_version"] = m.engine_version;
  return j.dump(2) + "\n";
}

RunManifest manifest_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.dataset_path = j.at("dataset").get<std::string>();
    m.adapter = j.at("adapter").get<std::string>();
    const auto& e = j.at("estimator");
    m.estimator = e.at("kind").get<std::string>();
    m.iterations = e.at("iterations").get<std::size_t>();
    m.seed = e.at("seed").get<std::uint64_t>();
    m.antithetic = e.at("antithetic").get<bool>();
    m.outputs = j.at("outputs").get<std::vector<std::string>>();
    m.output_dir = j.at("output_dir").get<std::string>();
    m.options = j.at("options").get<std::map<std::string, std::string>>();
    m.engine_version = j.at("engine_version").get<std::string>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kValidation, std::string("bad manifest: ") + e.what());
  }
}

}  // namespace vqashap
