#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "vqashap/errors.hpp"
#include "vqashap/io.hpp"
#include "vqashap/metrics.hpp"
#include "vqashap/reporting.hpp"
#include "vqashap/shapley.hpp"
#include "vqashap/synthetic.hpp"

using namespace vqashap;

namespace {

VqaTuple text_tuple(std::string id, std::vector<std::string> frames,
                    std::vector<std::string> question,
                    std::vector<std::vector<std::string>> choices, std::size_t gt = 0) {
  VqaTuple t;
  t.tuple_id = std::move(id);
  t.frames = std::move(frames);
  t.question = std::move(question);
  t.choices = std::move(choices);
  t.ground_truth = gt;
  return t;
}

// Ground-truth column set to `gt_values`, every other class filled with 7.
AttributionResult attr_for(const VqaTuple& t, const std::vector<double>& gt_values) {
  AttributionResult r;
  r.tuple_id = t.tuple_id;
  r.layout = build_modality_layout(t);
  r.values.assign(gt_values.size(), std::vector<double>(t.choices.size(), 7.0));
  for (std::size_t i = 0; i < gt_values.size(); ++i) r.values[i][t.ground_truth] = gt_values[i];
  return r;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST(Heatmap, SingleRowExample) {
  const auto t = text_tuple("a", {"f0"}, {"why"}, {{"x"}});
  Dataset ds{"d", {t}};
  const AttributionMap results{{"a", attr_for(t, {0.5, -1, 0})}};
  EXPECT_EQ(matrix_to_csv(heatmap_matrix(ds, results, kDefaultHeatmapWidth)), "0.5,-1,0\n");
  EXPECT_EQ(matrix_to_csv(heatmap_matrix(ds, results, 2)), "0.5,-1\n");
}

TEST(Heatmap, RowsAreNormalisedGroundTruth) {
  const auto t = text_tuple("a", {"f0", "f1"}, {"q"}, {{"x"}, {"y"}}, 1);
  Dataset ds{"d", {t}};
  const AttributionMap results{{"a", attr_for(t, {2, -4, 0, 1, 3})}};
  EXPECT_EQ(heatmap_matrix(ds, results, 200),
            (std::vector<std::vector<double>>{{0.5, -1, 0, 0.25, 0.75}}));
}

TEST(Heatmap, CsvKeepsFullPrecision) {
  const auto t = text_tuple("a", {"f0"}, {"q"}, {{"x"}});
  Dataset ds{"d", {t}};
  const AttributionMap results{{"a", attr_for(t, {1.0, 1.0 / 3.0, -0.1})}};
  const auto matrix = heatmap_matrix(ds, results, 200);
  const auto csv = matrix_to_csv(matrix);
  std::vector<double> parsed;
  std::istringstream in(csv);
  for (std::string cell; std::getline(in, cell, ',');) parsed.push_back(std::stod(cell));
  EXPECT_EQ(parsed, matrix[0]);
  EXPECT_NE(csv.find("0.3333333333333333"), std::string::npos);
}

TEST(Heatmap, DatasetOrderAndMissingTuplesSkipped) {
  const auto a = text_tuple("a", {"f"}, {"q"}, {{"x"}});
  const auto b = text_tuple("b", {"f"}, {"q"}, {{"x"}});
  const auto c = text_tuple("c", {"f"}, {"q"}, {{"x"}});
  Dataset ds{"d", {c, a, b}};
  const AttributionMap results{{"a", attr_for(a, {1, 0, 0})}, {"c", attr_for(c, {0, 0, -2})}};
  EXPECT_EQ(matrix_to_csv(heatmap_matrix(ds, results, 200)), "0,0,-1\n1,0,0\n");
}

TEST(Heatmap, MismatchedAttributionIsRejected) {
  const auto t = text_tuple("a", {"f0"}, {"q"}, {{"x"}});
  Dataset ds{"d", {t}};
  const AttributionMap results{{"a", attr_for(t, {1, 0})}};
  EXPECT_THROW(heatmap_matrix(ds, results, 200), Error);
}

TEST(Heatmap, FiftyTupleFixtureTruncatesTo200) {
  FixtureOptions opt;
  opt.num_tuples = 50;
  opt.num_frames = 90;
  opt.num_question = 40;
  opt.num_choices = 5;
  opt.words_per_choice = 20;
  opt.kind = SyntheticKind::kAdditive;
  opt.seed = 5;
  const auto fx = make_fixture(opt);
  AttributionMap results;
  for (const auto& t : fx.dataset.tuples) {
    const auto& m = fx.model.tuples.at(t.tuple_id);
    AttributionResult r;
    r.tuple_id = t.tuple_id;
    r.layout = build_modality_layout(t);
    r.values.resize(r.layout.size());
    for (std::size_t i = 0; i < r.values.size(); ++i) {
      for (std::size_t c = 0; c < t.choices.size(); ++c) r.values[i].push_back(m.shapley_value(c, i));
    }
    results.emplace(t.tuple_id, std::move(r));
  }
  const auto matrix = heatmap_matrix(fx.dataset, results, kDefaultHeatmapWidth);
  ASSERT_EQ(matrix.size(), 50u);
  for (const auto& row : matrix) EXPECT_EQ(row.size(), 200u);
  const auto csv_lines = lines_of(matrix_to_csv(matrix));
  ASSERT_EQ(csv_lines.size(), 50u);
  for (const auto& line : csv_lines) EXPECT_EQ(std::count(line.begin(), line.end(), ','), 199);
}

TEST(HeatmapPpm, HeaderAndColours) {
  const std::vector<std::vector<double>> matrix{{-1, 0, 1}, {0.5}};
  const auto ppm = heatmap_ppm(matrix);
  const std::string header = "P6\n3 2\n255\n";
  ASSERT_EQ(ppm.size(), header.size() + 3 * 2 * 3);
  EXPECT_EQ(ppm.substr(0, header.size()), header);
  auto pixel = [&](std::size_t row, std::size_t col) {
    const std::size_t at = header.size() + (row * 3 + col) * 3;
    return std::array<int, 3>{static_cast<unsigned char>(ppm[at]),
                              static_cast<unsigned char>(ppm[at + 1]),
                              static_cast<unsigned char>(ppm[at + 2])};
  };
  EXPECT_EQ(pixel(0, 0), (std::array<int, 3>{0, 0, 255}));
  EXPECT_EQ(pixel(0, 1), (std::array<int, 3>{255, 255, 255}));
  EXPECT_EQ(pixel(0, 2), (std::array<int, 3>{255, 0, 0}));
  EXPECT_EQ(pixel(1, 0), (std::array<int, 3>{255, 128, 128}));
  EXPECT_EQ(pixel(1, 1), (std::array<int, 3>{128, 128, 128}));
}

TEST(WordReport, SingleOccurrence) {
  const auto t = text_tuple("a", {}, {"Dog"}, {{"cat"}});
  Dataset ds{"d", {t}};
  const AttributionMap results{{"a", attr_for(t, {0.4, 1.0})}};
  const auto stats = word_report(ds, results, true);
  ASSERT_EQ(stats.size(), 2u);
  EXPECT_EQ(stats[1].word, "dog");
  EXPECT_EQ(stats[1].frequency, 1u);
  EXPECT_EQ(stats[1].mean_value, 0.4);
}

TEST(WordReport, OppositeValuesAverageToZero) {
  const auto a = text_tuple("a", {"f"}, {"run"}, {{"x"}});
  const auto b = text_tuple("b", {"f"}, {"RUN"}, {{"y"}});
  Dataset ds{"d", {a, b}};
  const AttributionMap results{{"a", attr_for(a, {0, 0.4, 0})}, {"b", attr_for(b, {0, -0.4, 0})}};
  const auto stats = word_report(ds, results, true);
  ASSERT_FALSE(stats.empty());
  EXPECT_EQ(stats[0].word, "run");
  EXPECT_EQ(stats[0].frequency, 2u);
  EXPECT_EQ(stats[0].mean_value, 0.0);
}

TEST(WordReport, MaskedElementsAreNotCounted) {
  const auto t = text_tuple("a", {}, {" ", "sky", " "}, {{"blue", " "}});
  Dataset ds{"d", {t}};
  const AttributionMap results{{"a", attr_for(t, {9, 0.25, 9, -0.5, 9})}};
  const auto stats = word_report(ds, results, true);
  ASSERT_EQ(stats.size(), 2u);
  for (const auto& s : stats) EXPECT_FALSE(s.word.empty() || s.word == " ");
  EXPECT_EQ(stats[0].word, "blue");
  EXPECT_EQ(stats[0].mean_value, -0.5);
  EXPECT_EQ(stats[1].word, "sky");
  EXPECT_EQ(stats[1].mean_value, 0.25);
}

TEST(WordReport, SortedByFrequencyThenWord) {
  const auto a = text_tuple("a", {}, {"b", "a", "c"}, {{"c"}});
  const auto b = text_tuple("b", {}, {"a", "c"}, {{"z"}});
  Dataset ds{"d", {a, b}};
  const AttributionMap results{{"a", attr_for(a, {1, 1, 1, 1})}, {"b", attr_for(b, {1, 1, 1})}};
  const auto stats = word_report(ds, results, true);
  std::vector<std::pair<std::string, std::size_t>> got;
  for (const auto& s : stats) got.emplace_back(s.word, s.frequency);
  EXPECT_EQ(got, (std::vector<std::pair<std::string, std::size_t>>{
                     {"c", 3}, {"a", 2}, {"b", 1}, {"z", 1}}));
}

TEST(WordReport, DefaultUsesNormalisedValues) {
  const auto t = text_tuple("a", {"f"}, {"up"}, {{"down"}});
  Dataset ds{"d", {t}};
  const AttributionMap results{{"a", attr_for(t, {-4, 2, 1})}};
  const auto stats = word_report(ds, results);
  ASSERT_EQ(stats.size(), 2u);
  EXPECT_EQ(stats[0].word, "down");
  EXPECT_EQ(stats[0].mean_value, 0.25);
  EXPECT_EQ(stats[1].mean_value, 0.5);
}

TEST(WordReport, CsvQuotesSpecialCharacters) {
  const std::vector<WordStat> stats{{"plain", 3, 0.5}, {"a,b", 1, -1}, {"say \"hi\"", 1, 0}};
  EXPECT_EQ(word_report_csv(stats),
            "word,frequency,mean_value\n"
            "plain,3,0.5\n"
            "\"a,b\",1,-1\n"
            "\"say \"\"hi\"\"\",1,0\n");
}

TEST(MetricsCsv, LayoutAndUndefinedScores) {
  const auto a = text_tuple("a", {"f"}, {"q"}, {{"x"}, {"y"}});
  const auto z = text_tuple("z", {"f"}, {"q"}, {{"x"}, {"y"}});
  Dataset ds{"d", {a, z}};
  auto attr_a = attr_for(a, {2, -1, 2, 0});
  attr_a.full_reward = RewardVector{{2, 1}};
  auto attr_z = attr_for(z, {0, 0, 0, 0});
  attr_z.full_reward = RewardVector{{0, 1}};
  const AttributionMap results{{"a", attr_a}, {"z", attr_z}};
  const auto table = compute_metrics(ds, results, ClassBasis::kGroundTruth);
  ASSERT_TRUE(table.accuracy.has_value());
  EXPECT_EQ(*table.accuracy, 0.5);
  EXPECT_EQ(metrics_csv(table),
            "tuple_id,basis,mc_v,mc_q,mc_a,pfc_v,pfc_q,pfc_a\n"
            "a,gt,0.4,0.2,0.4,0.5,0.25,0.25\n"
            "z,gt,,,,,,\n"
            "mean,gt,0.4,0.2,0.4,0.5,0.25,0.25\n");
  const std::vector<MetricsTable> tables{table};
  EXPECT_EQ(summary_csv(tables),
            "basis,mc_v,mc_q,mc_a,pfc_v,pfc_q,pfc_a,accuracy,included,excluded\n"
            "gt,0.4,0.2,0.4,0.5,0.25,0.25,0.5,1,1\n");
}

TEST(MetricsCsv, AccuracyNeedsEveryBaseline) {
  const auto a = text_tuple("a", {"f"}, {"q"}, {{"x"}, {"y"}});
  const auto b = text_tuple("b", {"f"}, {"q"}, {{"x"}, {"y"}});
  Dataset ds{"d", {a, b}};
  auto attr_a = attr_for(a, {1, 1, 1, 1});
  attr_a.full_reward = RewardVector{{2, 1}};
  const AttributionMap results{{"a", attr_a}, {"b", attr_for(b, {1, 1, 1, 1})}};
  EXPECT_FALSE(compute_metrics(ds, results, ClassBasis::kFalseMean).accuracy.has_value());
  const auto summary = lines_of(summary_csv(std::vector<MetricsTable>{
      compute_metrics(ds, results, ClassBasis::kFalseMean)}));
  ASSERT_EQ(summary.size(), 2u);
  EXPECT_EQ(summary[1].rfind("false_mean,", 0), 0u);
  EXPECT_NE(summary[1].find(",,2,0"), std::string::npos);
}

TEST(ExperimentCsv, MaskingAndAblation) {
  MaskingReport report;
  report.baseline = 0.75;
  MaskingRow none;
  none.spec = MaskSpec::none();
  none.accuracy = 0.75;
  none.predictions = {0, 1};
  MaskingRow video;
  video.spec = MaskSpec::of_modality(Modality::kVideo);
  video.accuracy = 0.5;
  video.delta = -0.25;
  video.masked_fraction = {1, 0, 0};
  video.predictions = {1, 1};
  report.rows = {none, video};
  EXPECT_EQ(masking_csv(report),
            "mask,accuracy,delta,masked_video,masked_question,masked_answer\n"
            "none,0.75,0,0,0,0\n"
            "video,0.5,-0.25,1,0,0\n");
  const auto json = masking_json(report);
  EXPECT_NE(json.find("\"baseline\": 0.75"), std::string::npos);
  EXPECT_NE(json.find("\"mask\": \"video\""), std::string::npos);

  const std::vector<AblationPoint> curve{{100, 0.5, {0.25, 0.75}}, {1000, 0, {0, 0}}};
  EXPECT_EQ(ablation_csv(curve),
            "iterations,mean_mse,mse_0,mse_1\n"
            "100,0.5,0.25,0.75\n"
            "1000,0,0,0\n");
  EXPECT_EQ(ablation_csv({}), "iterations,mean_mse\n");
}

TEST(ModalityValuesCsv, OneRowPerFeature) {
  const auto t = text_tuple("a", {"f0", "f1"}, {"q"}, {{"x"}, {"y"}}, 1);
  Dataset ds{"d", {t}};
  const AttributionMap results{{"a", attr_for(t, {2, -4, 0, 1, 3})}};
  EXPECT_EQ(modality_values_csv(ds, results),
            "tuple_id,modality,feature,value\n"
            "a,video,0,0.5\n"
            "a,video,1,-1\n"
            "a,question,2,0\n"
            "a,answer,3,0.25\n"
            "a,answer,4,0.75\n");
}

TEST(Manifest, RoundTrip) {
  RunManifest m;
  m.command = "attribute";
  m.dataset_path = "data/x/dataset.json";
  m.adapter = "synthetic:data/x/model.json";
  m.estimator = "monte_carlo";
  m.iterations = 5000;
  m.seed = std::numeric_limits<std::uint64_t>::max();
  m.antithetic = false;
  m.outputs = {"attributions", "heatmap.csv"};
  m.output_dir = "out";
  m.options = {{"truncate", "200"}, {"basis", "gt"}};
  m.engine_version = "1.2.3";
  const auto text = manifest_to_json(m);
  const auto back = manifest_from_json(text);
  EXPECT_EQ(back.command, m.command);
  EXPECT_EQ(back.dataset_path, m.dataset_path);
  EXPECT_EQ(back.adapter, m.adapter);
  EXPECT_EQ(back.estimator, m.estimator);
  EXPECT_EQ(back.iterations, m.iterations);
  EXPECT_EQ(back.seed, m.seed);
  EXPECT_EQ(back.antithetic, m.antithetic);
  EXPECT_EQ(back.outputs, m.outputs);
  EXPECT_EQ(back.output_dir, m.output_dir);
  EXPECT_EQ(back.options, m.options);
  EXPECT_EQ(back.engine_version, m.engine_version);
  EXPECT_EQ(manifest_to_json(back), text);
}

TEST(Manifest, RejectsIncompleteDocuments) {
  EXPECT_THROW(manifest_from_json("{}"), Error);
  EXPECT_THROW(manifest_from_json("not json"), Error);
  EXPECT_THROW(manifest_from_json(R"({"command":1})"), Error);
}
