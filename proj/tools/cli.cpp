#include "cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <filesystem>
#include <iostream>
#include <optional>

#include "json.hpp"
#include "vqashap/adapter.hpp"
#include "vqashap/errors.hpp"
#include "vqashap/experiments.hpp"
#include "vqashap/io.hpp"
#include "vqashap/masking.hpp"
#include "vqashap/metrics.hpp"
#include "vqashap/reporting.hpp"
#include "vqashap/shapley.hpp"
#include "vqashap/synthetic.hpp"
#include "vqashap/version.hpp"

namespace vqashap {

namespace {

namespace fs = std::filesystem;

// Bad or missing arguments that the parser itself cannot catch.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::uint64_t seed = 0;
  std::size_t iterations = 5000;
  std::string adapter;
  std::string out;
};

struct Context {
  Globals& g;
  std::ostream& out;
  std::ostream& err;
};

const std::string& require(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string(flag) + " is required");
  return value;
}

RunManifest base_manifest(const std::string& command, const std::string& dataset,
                          const Globals& g) {
  RunManifest m;
  m.command = command;
  m.dataset_path = dataset;
  m.adapter = g.adapter;
  m.estimator = std::string(estimator_name(Estimator::kMonteCarlo));
  m.iterations = g.iterations;
  m.seed = g.seed;
  m.output_dir = g.out;
  m.engine_version = kEngineVersion;
  return m;
}

class OutputDir {
 public:
  explicit OutputDir(const std::string& dir) : dir_(dir) {
    fs::create_directories(dir_);
  }
  void write(const std::string& name, std::string_view contents) {
    write_file_atomic(dir_ / name, contents);
    names_.push_back(name);
  }
  void write_manifest(RunManifest manifest) {
    manifest.outputs = names_;
    write_file_atomic(dir_ / "manifest.json", manifest_to_json(manifest));
  }
  const fs::path& path() const { return dir_; }

 private:
  fs::path dir_;
  std::vector<std::string> names_;
};

AttributionMap load_results(const fs::path& dir, const Dataset& dataset) {
  AttributionMap results;
  std::vector<std::string> missing;
  for (const auto& t : dataset.tuples) {
    const fs::path file = dir / attribution_file_name(t.tuple_id);
    if (!fs::exists(file)) {
      missing.push_back(t.tuple_id);
      continue;
    }
    AttributionResult r = load_attribution(file);
    if (r.tuple_id != t.tuple_id) {
      throw Error(ErrorCode::kValidation, file.string() + " holds tuple '" +
                                              r.tuple_id + "', expected '" +
                                              t.tuple_id + "'");
    }
    results.emplace(t.tuple_id, std::move(r));
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
    throw Error(ErrorCode::kMissingAttributions,
                "no attribution file in " + dir.string() + " for tuple(s): " +
                    list + "; run `attribute` first");
  }
  return results;
}

AdapterOptions adapter_options(double timeout_s) {
  AdapterOptions o;
  if (timeout_s > 0) {
    o.request_timeout = std::chrono::milliseconds(
        static_cast<std::int64_t>(timeout_s * 1000.0));
  }
  return o;
}

// attribute ----------------------------------------------------------------

struct AttributeOpts {
  std::string dataset;
  bool exact = false;
  std::size_t cap = kDefaultExactCap;
  bool force = false;
  bool no_antithetic = false;
  bool no_cache = false;
  std::size_t jobs = 0;
  double timeout_s = 0;
};

int cmd_attribute(Context& ctx, const AttributeOpts& o) {
  const std::string& out_dir = require(ctx.g.out, "--out");
  require(ctx.g.adapter, "--adapter");
  const Dataset dataset = load_dataset(o.dataset);
  auto adapter = make_adapter(ctx.g.adapter, dataset, adapter_options(o.timeout_s));
  AdapterRewardProvider provider(adapter);
  if (!provider.deterministic()) {
    ctx.err << "warning: adapter is nondeterministic; results are not "
               "reproducible and memoisation is off\n";
  }

  OutputDir out(out_dir);
  RunManifest manifest = base_manifest("attribute", o.dataset, ctx.g);
  manifest.estimator = std::string(
      estimator_name(o.exact ? Estimator::kExact : Estimator::kMonteCarlo));
  manifest.antithetic = !o.no_antithetic;
  manifest.options["cache"] = o.no_cache ? "off" : "on";
  if (o.exact) manifest.options["cap"] = std::to_string(o.cap);
  std::vector<std::string> names;
  for (const auto& t : dataset.tuples) names.push_back(attribution_file_name(t.tuple_id));
  manifest.outputs = names;
  write_file_atomic(out.path() / "manifest.json", manifest_to_json(manifest));

  std::size_t done = 0, skipped = 0;
  for (const auto& tuple : dataset.tuples) {
    const fs::path file = out.path() / attribution_file_name(tuple.tuple_id);
    const fs::path partial_file = fs::path(file.string() + ".partial");
    if (fs::exists(file) && !o.force) {
      ++skipped;
      continue;
    }
    auto reward = provider.reward_for(tuple);
    const ModalityLayout layout = build_modality_layout(tuple);
    AttributionResult result;
    try {
      if (o.exact) {
        result = exact_shapley(*reward, layout,
                               {.cap = o.cap, .max_concurrency = o.jobs});
      } else {
        EstimatorConfig cfg;
        cfg.iterations = ctx.g.iterations;
        cfg.seed = ctx.g.seed;
        cfg.antithetic = !o.no_antithetic;
        cfg.cache_enabled = !o.no_cache;
        cfg.max_concurrency = o.jobs;
        result = monte_carlo_shapley(*reward, layout, cfg);
      }
    } catch (const RewardFailure& f) {
      AttributionResult partial = f.partial();
      partial.tuple_id = tuple.tuple_id;
      save_attribution(partial, partial_file);
      ctx.err << "error: tuple '" << tuple.tuple_id << "': " << f.what()
              << "\npartial estimate kept in " << partial_file.string() << "\n";
      return kExitFailure;
    }
    result.tuple_id = tuple.tuple_id;
    save_attribution(result, file);
    fs::remove(partial_file);
    ++done;
    ctx.err << "[" << done + skipped << "/" << dataset.tuples.size() << "] "
            << tuple.tuple_id << " (" << result.evaluations << " evaluations)\n";
  }
  ctx.out << "attributed " << done << " tuple(s), skipped " << skipped
          << " existing\n";
  return kExitOk;
}

// metrics ------------------------------------------------------------------

struct MetricsOpts {
  std::string dataset;
  std::string results;
  std::string basis = "both";
};

int cmd_metrics(Context& ctx, const MetricsOpts& o) {
  OutputDir out(require(ctx.g.out, "--out"));
  const Dataset dataset = load_dataset(o.dataset);
  const AttributionMap results = load_results(o.results, dataset);

  std::vector<ClassBasis> bases;
  if (o.basis == "both") {
    bases = {ClassBasis::kGroundTruth, ClassBasis::kFalseMean};
  } else if (auto b = parse_class_basis(o.basis)) {
    bases = {*b};
  } else {
    throw UsageError("--basis must be gt, false_mean or both");
  }

  std::vector<MetricsTable> tables;
  for (ClassBasis b : bases) {
    tables.push_back(compute_metrics(dataset, results, b));
    out.write("metrics_" + std::string(class_basis_name(b)) + ".csv",
              metrics_csv(tables.back()));
  }
  const std::string summary = summary_csv(tables);
  out.write("summary.csv", summary);
  out.write("modality_values.csv", modality_values_csv(dataset, results));

  RunManifest manifest = base_manifest("metrics", o.dataset, ctx.g);
  manifest.options["results"] = o.results;
  manifest.options["basis"] = o.basis;
  out.write_manifest(manifest);
  ctx.out << summary;
  return kExitOk;
}

// experiment ---------------------------------------------------------------

struct ExperimentOpts {
  std::string dataset;
  std::string results;
  std::string config;
  std::vector<std::string> masks;
  bool protect = false;
  double timeout_s = 0;
};

void apply_experiment_config(ExperimentOpts& o, Globals& g) {
  if (o.config.empty()) return;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(o.config));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kValidation,
                "bad experiment config " + o.config + ": " + e.what());
  }
  auto fill = [&](std::string& field, const char* key) {
    if (field.empty() && j.contains(key)) field = j.at(key).get<std::string>();
  };
  fill(o.dataset, "dataset");
  fill(o.results, "results");
  fill(g.adapter, "adapter");
  fill(g.out, "out");
  if (o.masks.empty() && j.contains("masks")) {
    o.masks = j.at("masks").get<std::vector<std::string>>();
  }
  if (!o.protect && j.contains("protect_distractors")) {
    o.protect = j.at("protect_distractors").get<bool>();
  }
}

int cmd_experiment(Context& ctx, ExperimentOpts o) {
  apply_experiment_config(o, ctx.g);
  require(o.dataset, "--dataset");
  require(ctx.g.adapter, "--adapter");
  const std::string out_dir = require(ctx.g.out, "--out");
  if (o.masks.empty()) o.masks = {"none", "all", "video", "question", "answer"};

  std::vector<MaskSpec> specs;
  try {
    for (const auto& m : o.masks) specs.push_back(parse_mask_spec(m, o.protect));
  } catch (const Error& e) {
    throw UsageError(e.what());
  }

  const Dataset dataset = load_dataset(o.dataset);
  std::optional<AttributionMap> attributions;
  const bool needs_attr = std::any_of(specs.begin(), specs.end(), [](const auto& s) {
    return s.needs_attributions();
  });
  if (needs_attr) {
    if (o.results.empty()) {
      throw UsageError("sign masks need --results with attribution files");
    }
    attributions = load_results(o.results, dataset);
  }

  auto adapter = make_adapter(ctx.g.adapter, dataset, adapter_options(o.timeout_s));
  AdapterRewardProvider provider(adapter);
  const MaskingReport report = run_masking_experiment(
      dataset, provider, specs, attributions ? &*attributions : nullptr);

  OutputDir out(out_dir);
  const std::string csv = masking_csv(report);
  out.write("masking.csv", csv);
  out.write("masking.json", masking_json(report));
  RunManifest manifest = base_manifest("experiment", o.dataset, ctx.g);
  std::string mask_list;
  for (const auto& s : specs) {
    mask_list += (mask_list.empty() ? "" : ",") + format_mask_spec(s);
  }
  manifest.options["masks"] = mask_list;
  if (!o.results.empty()) manifest.options["results"] = o.results;
  out.write_manifest(manifest);
  ctx.out << csv;
  return kExitOk;
}

// replace-answers ----------------------------------------------------------

struct ReplaceOpts {
  std::string dataset;
  std::string mode = "easy";
  std::size_t x = 5;
  bool type_compatible = false;
};

int cmd_replace(Context& ctx, const ReplaceOpts& o) {
  OutputDir out(require(ctx.g.out, "--out"));
  const Dataset dataset = load_dataset(o.dataset);
  ReplacementConfig cfg;
  cfg.seed = ctx.g.seed;
  cfg.x = o.x;
  cfg.type_compatibility = o.type_compatible;
  cfg.mode = o.mode == "easy" ? ReplacementMode::kEasy : ReplacementMode::kNewX;
  Dataset replaced = replace_answers(dataset, cfg);
  replaced.name = dataset.name + (o.mode == "easy" ? "-easy" : "-new" + std::to_string(o.x));
  out.write("dataset.json", dataset_to_json(replaced));
  RunManifest manifest = base_manifest("replace-answers", o.dataset, ctx.g);
  manifest.options["mode"] = o.mode;
  if (o.mode != "easy") manifest.options["x"] = std::to_string(o.x);
  manifest.options["type_compatibility"] = o.type_compatible ? "true" : "false";
  out.write_manifest(manifest);
  ctx.out << "wrote " << replaced.tuples.size() << " tuple(s) to "
          << (out.path() / "dataset.json").string() << "\n";
  return kExitOk;
}

// ablate-iterations --------------------------------------------------------

struct AblateOpts {
  std::string dataset;
  std::string tuple;
  std::vector<std::size_t> grid{10, 100, 1000, 5000};
  std::size_t num_seeds = 10;
  std::string reference = "exact";
  std::optional<std::uint64_t> reference_seed;
  std::size_t cap = kDefaultExactCap;
};

int cmd_ablate(Context& ctx, const AblateOpts& o) {
  OutputDir out(require(ctx.g.out, "--out"));
  require(ctx.g.adapter, "--adapter");
  const Dataset dataset = load_dataset(o.dataset);
  const VqaTuple* tuple =
      o.tuple.empty() ? (dataset.tuples.empty() ? nullptr : &dataset.tuples.front())
                      : dataset.find(o.tuple);
  if (tuple == nullptr) throw UsageError("tuple '" + o.tuple + "' not in dataset");
  if (o.num_seeds == 0) throw UsageError("--seeds must be at least 1");

  AblationReference ref;
  if (o.reference == "exact") {
    ref.exact = true;
    ref.exact_config.cap = o.cap;
  } else {
    std::size_t n = 0;
    const auto* end = o.reference.data() + o.reference.size();
    auto [p, ec] = std::from_chars(o.reference.data(), end, n);
    if (ec != std::errc() || p != end) {
      throw UsageError("--reference must be 'exact' or an iteration count");
    }
    ref.exact = false;
    ref.iterations = n;
    ref.seed = o.reference_seed.value_or(ctx.g.seed + o.num_seeds);
  }
  std::vector<std::uint64_t> seeds;
  for (std::size_t s = 0; s < o.num_seeds; ++s) seeds.push_back(ctx.g.seed + s);

  auto adapter = make_adapter(ctx.g.adapter, dataset);
  AdapterRewardProvider provider(adapter);
  auto reward = provider.reward_for(*tuple);
  const auto curve = iteration_ablation(*reward, build_modality_layout(*tuple),
                                        o.grid, ref, seeds);
  const std::string csv = ablation_csv(curve);
  out.write("ablation.csv", csv);
  RunManifest manifest = base_manifest("ablate-iterations", o.dataset, ctx.g);
  manifest.options["tuple"] = tuple->tuple_id;
  manifest.options["reference"] = o.reference;
  std::string grid;
  for (auto g : o.grid) grid += (grid.empty() ? "" : ",") + std::to_string(g);
  manifest.options["grid"] = grid;
  manifest.options["seeds"] = std::to_string(o.num_seeds);
  out.write_manifest(manifest);
  ctx.out << csv;
  return kExitOk;
}

// heatmap / word-report ----------------------------------------------------

struct ResultsOpts {
  std::string dataset;
  std::string results;
  std::size_t truncate = kDefaultHeatmapWidth;
  bool raw = false;
};

int cmd_heatmap(Context& ctx, const ResultsOpts& o) {
  OutputDir out(require(ctx.g.out, "--out"));
  if (o.truncate == 0) throw UsageError("--truncate must be at least 1");
  const Dataset dataset = load_dataset(o.dataset);
  const AttributionMap results = load_results(o.results, dataset);
  const auto matrix = heatmap_matrix(dataset, results, o.truncate);
  out.write("heatmap.csv", matrix_to_csv(matrix));
  out.write("heatmap.ppm", heatmap_ppm(matrix));
  RunManifest manifest = base_manifest("heatmap", o.dataset, ctx.g);
  manifest.options["results"] = o.results;
  manifest.options["truncate"] = std::to_string(o.truncate);
  out.write_manifest(manifest);
  ctx.out << "heatmap " << matrix.size() << " row(s)\n";
  return kExitOk;
}

int cmd_word_report(Context& ctx, const ResultsOpts& o) {
  OutputDir out(require(ctx.g.out, "--out"));
  const Dataset dataset = load_dataset(o.dataset);
  const AttributionMap results = load_results(o.results, dataset);
  const auto stats = word_report(dataset, results, o.raw);
  out.write("words.csv", word_report_csv(stats));
  RunManifest manifest = base_manifest("word-report", o.dataset, ctx.g);
  manifest.options["results"] = o.results;
  manifest.options["values"] = o.raw ? "raw" : "normalized";
  out.write_manifest(manifest);
  ctx.out << stats.size() << " distinct word(s)\n";
  return kExitOk;
}

// rank-corr ----------------------------------------------------------------

struct RankOpts {
  std::string dataset;
  std::string results;
  std::string rankings;
  std::string cls = "gt";
};

int cmd_rank_corr(Context& ctx, const RankOpts& o) {
  OutputDir out(require(ctx.g.out, "--out"));
  const Dataset dataset = load_dataset(o.dataset);
  ClassSelector selector;
  if (o.cls != "gt") {
    std::size_t c = 0;
    const auto* end = o.cls.data() + o.cls.size();
    auto [p, ec] = std::from_chars(o.cls.data(), end, c);
    if (ec != std::errc() || p != end) {
      throw UsageError("--class must be 'gt' or a class index");
    }
    selector = ClassSelector::fixed(c);
  }

  std::map<std::string, std::vector<std::size_t>> external;
  try {
    external = nlohmann::json::parse(read_text_file(o.rankings))
                   .get<std::map<std::string, std::vector<std::size_t>>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kValidation,
                "rankings must map tuple_id to a frame permutation: " +
                    std::string(e.what()));
  }
  Dataset subset;
  subset.name = dataset.name;
  for (const auto& t : dataset.tuples) {
    if (external.contains(t.tuple_id)) subset.tuples.push_back(t);
  }
  const AttributionMap results = load_results(o.results, subset);

  std::string csv = "tuple_id,rho\n";
  double sum = 0.0;
  for (const auto& t : subset.tuples) {
    const auto mine =
        rank_frames_by_attribution(results.at(t.tuple_id), selector, t.ground_truth);
    const double rho = spearman_correlation(external.at(t.tuple_id), mine);
    sum += rho;
    csv += t.tuple_id + "," + format_double(rho) + "\n";
  }
  if (!subset.tuples.empty()) {
    csv += "mean," + format_double(sum / static_cast<double>(subset.tuples.size())) + "\n";
  }
  out.write("rank_corr.csv", csv);
  RunManifest manifest = base_manifest("rank-corr", o.dataset, ctx.g);
  manifest.options["results"] = o.results;
  manifest.options["rankings"] = o.rankings;
  manifest.options["class"] = o.cls;
  out.write_manifest(manifest);
  ctx.out << csv;
  return kExitOk;
}

// make-fixture / serve -----------------------------------------------------

struct FixtureOpts {
  FixtureOptions f;
  std::string kind = "text_biased";
};

int cmd_make_fixture(Context& ctx, FixtureOpts o) {
  OutputDir out(require(ctx.g.out, "--out"));
  const auto kind = parse_synthetic_kind(o.kind);
  if (!kind) {
    throw UsageError("--kind must be additive, interaction, text_biased or constant");
  }
  o.f.kind = *kind;
  o.f.seed = ctx.g.seed;
  const Fixture fixture = make_fixture(o.f);
  out.write("dataset.json", dataset_to_json(fixture.dataset));
  out.write("model.json", synthetic_to_json(fixture.model));
  RunManifest manifest = base_manifest("make-fixture", "", ctx.g);
  manifest.options["kind"] = o.kind;
  manifest.options["tuples"] = std::to_string(o.f.num_tuples);
  out.write_manifest(manifest);
  ctx.out << "fixture with " << fixture.dataset.tuples.size() << " tuple(s) in "
          << out.path().string() << "\n";
  return kExitOk;
}

struct ServeOpts {
  std::string dataset;
  std::string model;
};

int cmd_serve(Context& ctx, const ServeOpts& o) {
  const Dataset dataset = load_dataset(o.dataset);
  SyntheticModelSpec spec = load_synthetic(o.model);
  const ValidationReport report = validate_synthetic(spec, dataset);
  if (!report.ok()) {
    throw Error(ErrorCode::kValidation, "model does not fit dataset: " +
                                            report.problems.front());
  }
  SyntheticAdapter adapter(dataset, std::move(spec));
  AdapterServer server(adapter);
  server.serve(std::cin, ctx.out);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Shapley attribution engine for multiple-choice video QA",
               "vqashap"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(kEngineVersion));

  Globals g;
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--iterations", g.iterations,
                 "Coalition evaluations per tuple")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--adapter", g.adapter,
                 "exec:<cmd> | http:<url> | synthetic:<model.json>");
  app.add_option("--out", g.out, "Output directory");

  Context ctx{g, out, err};
  std::function<int()> action;

  AttributeOpts attribute;
  auto* sub = app.add_subcommand("attribute", "Shapley values for every tuple");
  sub->add_option("--dataset", attribute.dataset)->required()->check(CLI::ExistingFile);
  sub->add_flag("--exact", attribute.exact, "Enumerate all coalitions");
  sub->add_option("--cap", attribute.cap, "Largest M for --exact")->capture_default_str();
  sub->add_flag("--force", attribute.force, "Recompute existing result files");
  sub->add_flag("--no-antithetic", attribute.no_antithetic);
  sub->add_flag("--no-cache", attribute.no_cache);
  sub->add_option("--jobs", attribute.jobs, "Concurrent evaluations (0: adapter hint)");
  sub->add_option("--timeout", attribute.timeout_s, "Per-request timeout in seconds");
  sub->callback([&] { action = [&] { return cmd_attribute(ctx, attribute); }; });

  MetricsOpts metrics;
  sub = app.add_subcommand("metrics", "Modality contribution tables");
  sub->add_option("--dataset", metrics.dataset)->required()->check(CLI::ExistingFile);
  sub->add_option("--results", metrics.results)->required()->check(CLI::ExistingDirectory);
  sub->add_option("--basis", metrics.basis, "gt | false_mean | both")->capture_default_str();
  sub->callback([&] { action = [&] { return cmd_metrics(ctx, metrics); }; });

  ExperimentOpts experiment;
  sub = app.add_subcommand("experiment", "Masking accuracy study");
  sub->add_option("--dataset", experiment.dataset)->check(CLI::ExistingFile);
  sub->add_option("--results", experiment.results)->check(CLI::ExistingDirectory);
  sub->add_option("--config", experiment.config, "Experiment manifest (JSON)")
      ->check(CLI::ExistingFile);
  sub->add_option("--mask", experiment.masks,
                  "none | all | video | question | answer | neg:<gt|k>[:<modality>] "
                  "| pos:<gt|k>[:<modality>]");
  sub->add_flag("--protect-distractors", experiment.protect,
                "Sign masks leave non-ground-truth answers intact");
  sub->add_option("--timeout", experiment.timeout_s, "Per-request timeout in seconds");
  sub->callback([&] { action = [&] { return cmd_experiment(ctx, experiment); }; });

  ReplaceOpts replace;
  sub = app.add_subcommand("replace-answers", "Easy or New-x negative replacement");
  sub->add_option("--dataset", replace.dataset)->required()->check(CLI::ExistingFile);
  sub->add_option("--mode", replace.mode)
      ->check(CLI::IsMember({"easy", "new"}))
      ->capture_default_str();
  sub->add_option("--x", replace.x, "New negatives per tuple")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_flag("--type-compatible", replace.type_compatible,
                "Draw negatives only from tuples with the same question_type");
  sub->callback([&] { action = [&] { return cmd_replace(ctx, replace); }; });

  AblateOpts ablate;
  sub = app.add_subcommand("ablate-iterations", "Estimator MSE against iterations");
  sub->add_option("--dataset", ablate.dataset)->required()->check(CLI::ExistingFile);
  sub->add_option("--tuple", ablate.tuple, "Tuple to study (default: first)");
  sub->add_option("--grid", ablate.grid)->delimiter(',')->capture_default_str();
  sub->add_option("--seeds", ablate.num_seeds, "Seeds per grid point")->capture_default_str();
  sub->add_option("--reference", ablate.reference, "exact | <iterations>")
      ->capture_default_str();
  sub->add_option("--reference-seed", ablate.reference_seed);
  sub->add_option("--cap", ablate.cap)->capture_default_str();
  sub->callback([&] { action = [&] { return cmd_ablate(ctx, ablate); }; });

  ResultsOpts heatmap;
  sub = app.add_subcommand("heatmap", "Normalised attribution matrix");
  sub->add_option("--dataset", heatmap.dataset)->required()->check(CLI::ExistingFile);
  sub->add_option("--results", heatmap.results)->required()->check(CLI::ExistingDirectory);
  sub->add_option("--truncate", heatmap.truncate)->capture_default_str();
  sub->callback([&] { action = [&] { return cmd_heatmap(ctx, heatmap); }; });

  ResultsOpts words;
  sub = app.add_subcommand("word-report", "Word frequency and mean attribution");
  sub->add_option("--dataset", words.dataset)->required()->check(CLI::ExistingFile);
  sub->add_option("--results", words.results)->required()->check(CLI::ExistingDirectory);
  sub->add_flag("--raw", words.raw, "Use unnormalised values");
  sub->callback([&] { action = [&] { return cmd_word_report(ctx, words); }; });

  RankOpts rank;
  sub = app.add_subcommand("rank-corr", "Spearman correlation of frame rankings");
  sub->add_option("--dataset", rank.dataset)->required()->check(CLI::ExistingFile);
  sub->add_option("--results", rank.results)->required()->check(CLI::ExistingDirectory);
  sub->add_option("--rankings", rank.rankings, "JSON object: tuple_id -> permutation")
      ->required()
      ->check(CLI::ExistingFile);
  sub->add_option("--class", rank.cls, "gt | <class index>")->capture_default_str();
  sub->callback([&] { action = [&] { return cmd_rank_corr(ctx, rank); }; });

  FixtureOpts fixture;
  sub = app.add_subcommand("make-fixture", "Synthetic dataset and model");
  sub->add_option("--name", fixture.f.name)->capture_default_str();
  sub->add_option("--tuples", fixture.f.num_tuples)->capture_default_str();
  sub->add_option("--frames", fixture.f.num_frames)->capture_default_str();
  sub->add_option("--question-words", fixture.f.num_question)->capture_default_str();
  sub->add_option("--choices", fixture.f.num_choices)->capture_default_str();
  sub->add_option("--choice-words", fixture.f.words_per_choice)->capture_default_str();
  sub->add_option("--question-types", fixture.f.num_question_types)->capture_default_str();
  sub->add_option("--kind", fixture.kind)->capture_default_str();
  sub->callback([&] { action = [&] { return cmd_make_fixture(ctx, fixture); }; });

  ServeOpts serve;
  sub = app.add_subcommand("serve", "Serve a synthetic model on stdin/stdout");
  sub->add_option("--dataset", serve.dataset)->required()->check(CLI::ExistingFile);
  sub->add_option("--model", serve.model)->required()->check(CLI::ExistingFile);
  sub->callback([&] { action = [&] { return cmd_serve(ctx, serve); }; });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    return action();
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error (" << error_code_name(e.code()) << "): " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace vqashap
