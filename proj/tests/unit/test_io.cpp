#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "json.hpp"
#include "vqashap/errors.hpp"
#include "vqashap/io.hpp"
#include "vqashap/synthetic.hpp"

using namespace vqashap;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("vqashap_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_EQ(format_double(-1.0), "-1");
  EXPECT_EQ(format_double(0.0), "0");
  EXPECT_EQ(format_double(-0.0), "0");
  EXPECT_EQ(format_double(0.1), "0.1");
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> dist(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = dist(rng);
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
}

TEST(DatasetJson, RoundTripPreservesEverything) {
  FixtureOptions opt;
  opt.num_tuples = 6;
  Dataset d = make_fixture(opt).dataset;
  d.tuples[2].question_type.reset();
  const Dataset back = dataset_from_json(dataset_to_json(d));
  EXPECT_EQ(back, d);
  EXPECT_EQ(dataset_to_json(back), dataset_to_json(d));
}

TEST(DatasetJson, DocumentedFieldNames) {
  const auto j = nlohmann::json::parse(
      dataset_to_json(Dataset{"n", {VqaTuple{"a", {"f"}, {"q"}, {{"x"}, {"y"}}, 1, "why"}}}));
  EXPECT_EQ(j.at("name"), "n");
  const auto& t = j.at("tuples").at(0);
  EXPECT_EQ(t.at("tuple_id"), "a");
  EXPECT_EQ(t.at("frames"), nlohmann::json::array({"f"}));
  EXPECT_EQ(t.at("question"), nlohmann::json::array({"q"}));
  EXPECT_EQ(t.at("choices").size(), 2u);
  EXPECT_EQ(t.at("ground_truth"), 1);
  EXPECT_EQ(t.at("question_type"), "why");
}

TEST(DatasetJson, MalformedInputIsAValidationError) {
  EXPECT_EQ(code_of([] { dataset_from_json("{"); }), ErrorCode::kValidation);
  EXPECT_EQ(code_of([] { dataset_from_json("[]"); }), ErrorCode::kValidation);
  EXPECT_EQ(code_of([] { dataset_from_json(R"({"name":"x"})"); }), ErrorCode::kValidation);
  EXPECT_EQ(code_of([] {
              dataset_from_json(R"({"name":"x","tuples":[{"tuple_id":"a","frames":[],
                "question":["q"],"choices":[["a"],["b"]],"ground_truth":-1}]})");
            }),
            ErrorCode::kValidation);
}

TEST(LoadDataset, RejectsInvalidTuples) {
  const auto dir = scratch("load");
  Dataset d{"x", {VqaTuple{"a", {}, {"q"}, {{"a"}, {"b"}}, 4, std::nullopt}}};
  save_dataset(d, dir / "d.json");
  try {
    load_dataset(dir / "d.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kValidation);
    EXPECT_NE(std::string(e.what()).find("ground_truth out of range"), std::string::npos);
  }
  EXPECT_EQ(code_of([&] { load_dataset(dir / "missing.json"); }), ErrorCode::kIo);
}

TEST(AttributionJson, RoundTrip) {
  AttributionResult r;
  r.tuple_id = "t/1";
  r.layout = ModalityLayout(1, 1, std::vector<std::size_t>{1, 2});
  r.values = {{0.5, -1.0}, {0.1, 0.0}, {1e-300, 3.0}, {-2.25, 7.0}, {4.5e10, -0.125}};
  r.iterations = 5000;
  r.seed = 18446744073709551615ULL;
  r.evaluations = 123;
  r.estimator = Estimator::kExact;
  r.reproducible = false;
  r.empty_reward = RewardVector{{1.0, 2.0}};
  r.full_reward = RewardVector{{0.25, -3.0}};
  const auto back = attribution_from_json(attribution_to_json(r));
  EXPECT_EQ(back, r);
}

TEST(AttributionJson, DocumentedFieldNames) {
  AttributionResult r;
  r.tuple_id = "x";
  r.layout = ModalityLayout(2, 1, 0);
  r.values = {{1.0}, {2.0}, {3.0}};
  const auto j = nlohmann::json::parse(attribution_to_json(r));
  for (const char* key : {"tuple_id", "estimator", "iterations", "seed", "evaluations",
                          "layout", "values"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j.at("estimator"), "monte_carlo");
  EXPECT_EQ(j.at("layout").at("n_v"), 2);
  EXPECT_EQ(j.at("layout").at("n_q"), 1);
  EXPECT_EQ(j.at("layout").at("n_a"), 0);
}

TEST(AttributionJson, MinimalDocumentWithoutExtras) {
  const auto r = attribution_from_json(
      R"({"tuple_id":"m","estimator":"exact","iterations":0,"seed":0,"evaluations":8,
          "layout":{"n_v":1,"n_q":1,"n_a":1},"values":[[1],[2],[3]]})");
  EXPECT_EQ(r.layout, ModalityLayout(1, 1, 1));
  EXPECT_TRUE(r.reproducible);
  EXPECT_FALSE(r.full_reward);
}

TEST(AttributionJson, ShapeErrors) {
  EXPECT_EQ(code_of([] {
              attribution_from_json(
                  R"({"tuple_id":"m","estimator":"exact","iterations":0,"seed":0,
                  "evaluations":8,"layout":{"n_v":1,"n_q":1,"n_a":1},"values":[[1],[2]]})");
            }),
            ErrorCode::kShapeMismatch);
  EXPECT_EQ(code_of([] {
              attribution_from_json(
                  R"({"tuple_id":"m","estimator":"exact","iterations":0,"seed":0,
                  "evaluations":8,"layout":{"n_v":1,"n_q":1,"n_a":0},"values":[[1,2],[2]]})");
            }),
            ErrorCode::kShapeMismatch);
  EXPECT_EQ(code_of([] {
              attribution_from_json(
                  R"({"tuple_id":"m","estimator":"guess","iterations":0,"seed":0,
                  "evaluations":8,"layout":{"n_v":1,"n_q":1,"n_a":0},"values":[[1],[2]]})");
            }),
            ErrorCode::kValidation);
}

TEST(AttributionFileName, SafeIdsAreKept) {
  EXPECT_EQ(attribution_file_name("synthetic-07"), "synthetic-07.json");
  EXPECT_EQ(attribution_file_name("a_b.c"), "a_b.c.json");
}

TEST(AttributionFileName, UnsafeIdsStayDistinct) {
  const auto a = attribution_file_name("a/b");
  const auto b = attribution_file_name("a_b");
  const auto c = attribution_file_name("a:b");
  EXPECT_NE(a, b);
  EXPECT_NE(a, c);
  EXPECT_EQ(a.find('/'), std::string::npos);
  EXPECT_NE(attribution_file_name(".."), "...json");
  EXPECT_NE(attribution_file_name(""), ".json");
}

TEST(WriteFileAtomic, ReplacesContentsAndLeavesNoTemporaries) {
  const auto dir = scratch("atomic");
  write_file_atomic(dir / "f.txt", "one");
  write_file_atomic(dir / "f.txt", "two");
  EXPECT_EQ(read_text_file(dir / "f.txt"), "two");
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++files;
  EXPECT_EQ(files, 1u);
  write_file_atomic(dir / "nested" / "deeper" / "g.txt", "x");
  EXPECT_EQ(read_text_file(dir / "nested" / "deeper" / "g.txt"), "x");
}
