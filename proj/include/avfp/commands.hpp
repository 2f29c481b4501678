#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "avfp/catalog.hpp"
#include "avfp/embedder.hpp"
#include "avfp/evaluation.hpp"
#include "avfp/feature_store.hpp"
#include "avfp/protocol.hpp"
#include "avfp/synthbench.hpp"
#include "avfp/trainer.hpp"

namespace avfp {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitIo = 2;

// Declarative run configuration. JSON keys mirror the field names; see
// README for the schema. `seed` is mandatory in config files.
struct RunConfig {
  std::string run_id = "run";
  std::filesystem::path output_dir = "runs";
  std::uint64_t seed = 1;
  int workers = 1;

  // Data: either manifest + store files, or a synthetic benchmark corpus.
  std::optional<std::filesystem::path> identities_csv;
  std::optional<std::filesystem::path> videos_csv;
  std::optional<std::filesystem::path> features;
  std::optional<std::filesystem::path> adjacency;
  std::optional<BenchmarkOptions> synthetic;

  // Protocol.
  double eval_fraction = 0.3;
  TrialConvention convention = TrialConvention::ExcludeIdentical;
  std::optional<std::filesystem::path> split;  // fixed split file instead of make_split

  EmbedderConfig embedder;
  TrainHyper train;
  bool zscore_fusion = false;

  // "intra-intra", "cross-generator", "cross-dataset", "all" or "custom".
  std::string matrix = "intra-intra";
  std::vector<std::string> models{"model"};
  std::vector<ExperimentSpec> experiments;  // used when matrix == "custom"
  std::vector<Attribute> fairness_attributes{Attribute::Gender, Attribute::Ethnicity, Attribute::AgeRange};

  // Paths in the file are resolved relative to `base`.
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base = {});
  nlohmann::json to_json() const;
};

RunConfig load_run_config(const std::filesystem::path& path);

// Worker count from AVFP_WORKERS, else 1.
int default_workers();

struct Corpus {
  Catalog catalog;
  FeatureStore store{FeatureKind::Embedding, 1};
  std::optional<AdjacencyGraph> graph;
};

// Loads manifest + store, or builds the synthetic corpus.
Corpus load_corpus(const RunConfig& config);

// Experiment specs implied by config.matrix over the catalog's datasets and
// generators.
std::vector<ExperimentSpec> expand_matrix(const RunConfig& config, const Catalog& catalog);

// Embedder config with the input width filled in from the store (and the
// graph encoder width when a graph is used).
EmbedderConfig effective_embedder(const RunConfig& config, const Corpus& corpus);

// Development videos for a training setup: both identities on the
// development side, matching dataset and (unless nullopt) generator.
std::vector<std::string> development_videos(const Catalog& catalog, const Split& split, Dataset dataset,
                                            std::optional<Generator> generator);

// ---------------------------------------------------------------------------
// Subcommands. Each writes human-readable progress to `log` and returns an
// exit code; I/O failures map to kExitIo.

// Checks the manifest's video counts against `expected` (the published
// database statistics when nullopt). Sides come from the split file when
// given, else from make_split with default options.
int cmd_validate(const std::filesystem::path& identities_csv, const std::filesystem::path& videos_csv,
                 const std::optional<std::filesystem::path>& split_json, std::ostream& log,
                 const std::optional<CountTable>& expected = std::nullopt);

struct SynthCommand {
  std::filesystem::path out_dir;
  bool canonical = false;  // canonical manifest only, no features
  bool benchmark = false;  // multi-generator, two-dataset corpus
  SynthOptions options;
  BenchmarkOptions benchmark_options;
};
int cmd_synth(const SynthCommand& command, std::ostream& log);

// Imports one CSV per video (<video_id>.csv, one row per frame) from a
// directory into a store file.
int cmd_import(const std::filesystem::path& csv_dir, const std::filesystem::path& out_store, FeatureKind kind,
               double fps, std::ostream& log);

// Writes <run>/split/split.json and <run>/trials/trials.csv.
int cmd_trials(const RunConfig& config, std::ostream& log);

int cmd_train(const RunConfig& config, Dataset dataset, std::optional<Generator> generator,
              const std::string& model_name, const std::filesystem::path& checkpoint, std::ostream& log);

int cmd_score(const RunConfig& config, const std::vector<std::filesystem::path>& checkpoints,
              const std::filesystem::path& trials_csv, const std::filesystem::path& out_csv, std::ostream& log);

int cmd_evaluate(const std::filesystem::path& scores_csv, const std::string& condition,
                 const std::filesystem::path& out_dir, std::ostream& log);

int cmd_fairness(const std::filesystem::path& scores_csv, const std::filesystem::path& identities_csv,
                 const std::filesystem::path& videos_csv, const std::string& condition,
                 const std::vector<Attribute>& attributes, const std::filesystem::path& out_dir, std::ostream& log);

// Full experiment matrix: split, trials, training, scoring, evaluation,
// delta tables, fairness and rendering under <output_dir>/<run_id>/.
// Completed jobs leave markers and are reused on a rerun with the same
// effective config. Failing jobs are reported and make the exit code 1.
int cmd_run(const RunConfig& config, std::ostream& log);

std::filesystem::path run_directory(const RunConfig& config);

}  // namespace avfp
