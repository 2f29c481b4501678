#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "avfp/catalog.hpp"

namespace avfp {

// Identity-disjoint development/evaluation partition.
struct Split {
  std::set<std::string> development;
  std::set<std::string> evaluation;

  SideMap sides() const;
  bool is_evaluation(const std::string& id) const { return evaluation.count(id) != 0; }
  bool is_development(const std::string& id) const { return development.count(id) != 0; }
};

// A video belongs to a side only when its driver and target both do.
bool on_side(const AvatarVideo& v, const std::set<std::string>& side);

struct SplitOptions {
  double eval_fraction = 0.3;
  bool stratify_gender = true;
  bool stratify_ethnicity = true;
  bool stratify_age = true;
  std::uint64_t seed = 1;
};

struct SplitReport {
  Split split;
  // Per dataset: true when whole cross-reenactment components were kept
  // together, false when identities were assigned individually.
  std::map<Dataset, bool> component_mode;
  // Cross videos whose driver and target ended on different sides; they
  // belong to neither side.
  std::size_t straddling_videos = 0;
  // attribute=value -> (evaluation identities, all identities), annotated only.
  std::map<std::string, std::pair<int, int>> strata;
  // Largest |eval count - proportional share| over stratification cells.
  double max_cell_imbalance = 0.0;
};

// Per dataset, the evaluation side gets about eval_fraction of identities.
// Identities linked through cross-reenactments are kept together when that
// still lands within max(2, 10%) of the target size; otherwise identities
// are stratified individually (largest cell first, seeded tie-breaks).
SplitReport make_split(const Catalog& catalog, const SplitOptions& options);

void save_split_json(const Split& split, const std::filesystem::path& path);
Split load_split_json(const std::filesystem::path& path);
void check_split(const Split& split, const Catalog& catalog);

// ---------------------------------------------------------------------------
// Trials

enum class TrialConvention { ExcludeIdentical, IncludeIdentical };
std::string_view to_string(TrialConvention c);
TrialConvention parse_convention(std::string_view s);

struct Trial {
  std::int64_t trial_id = 0;
  Dataset dataset = Dataset::CremaD;
  Generator generator = Generator::Gaga;
  std::string enroll_video;
  std::string test_video;
  int label = 0;  // 1 genuine, 0 impostor

  bool operator==(const Trial&) const = default;
};

struct TrialCountKey {
  Dataset dataset;
  Generator generator;
  auto operator<=>(const TrialCountKey&) const = default;
};

struct TrialCount {
  std::int64_t genuine = 0;
  std::int64_t impostor = 0;
};

struct TrialList {
  std::vector<Trial> trials;
  std::map<TrialCountKey, TrialCount> counts;
};

// Exhaustive genuine (self x self, same identity) and impostor (self of
// identity X x cross with target X and another driver) pairs within each
// generator, over evaluation-side videos. Sorted by (dataset, generator,
// enrollment id, test id); trial ids number that order from 1.
TrialList generate_trials(const Catalog& catalog, const Split& split, TrialConvention convention);

// Label implied by catalog fields; nullopt when the pair is not a valid trial.
std::optional<int> trial_label(const AvatarVideo& enroll, const AvatarVideo& test);

void save_trials_csv(const std::vector<Trial>& trials, const std::filesystem::path& path);
std::vector<Trial> load_trials_csv(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Experiment matrix

enum class Scenario { IntraIntra, IntraCrossGenerator, CrossDatasetIntra };
std::string_view to_string(Scenario s);
Scenario parse_scenario(std::string_view s);

struct ExperimentSpec {
  Scenario scenario = Scenario::IntraIntra;
  Dataset train_dataset = Dataset::CremaD;
  std::optional<Generator> train_generator;  // nullopt = all generators
  Dataset eval_dataset = Dataset::CremaD;
  Generator eval_generator = Generator::Gaga;
  std::vector<std::string> models{"model"};
  int window_len = 32;
};

// Condition naming used in reports, e.g. "CREMA-D/GAGA->CREMA-D/LIVE".
std::string train_key(Dataset d, std::optional<Generator> g);
std::string eval_key(Dataset d, Generator g);

// Condition a delta is measured against: the training setup evaluated on
// its own dataset and generator (for All-generator training, the intra
// condition of the evaluation generator).
std::string reference_condition(const ExperimentSpec& spec);

struct TrainJob {
  std::string key;  // "<train_key>|<model>|F<window>"
  std::string model;
  Dataset dataset;
  std::optional<Generator> generator;
  int window_len;
};

struct EvalJob {
  std::string condition;  // "<train_key>-><eval_key>"
  Scenario scenario;
  std::vector<std::string> train_jobs;  // one per model, fused when > 1
  std::vector<std::string> models;
  Dataset eval_dataset;
  Generator eval_generator;
  int window_len;
};

struct RunPlan {
  std::vector<TrainJob> train_jobs;  // unique, in first-use order
  std::vector<EvalJob> eval_jobs;
};

// Validates scenario consistency and that every referenced dataset and
// generator exists in the catalog; identical training setups are shared.
RunPlan experiment_matrix(const std::vector<ExperimentSpec>& specs, const Catalog& catalog);

// Row groups of the published layouts.
std::vector<ExperimentSpec> intra_intra_specs(const std::vector<Dataset>& datasets,
                                              const std::vector<Generator>& generators);
// g->g, g->other generators, All->g.
std::vector<ExperimentSpec> cross_generator_block(
    Dataset d, Generator g, const std::vector<Generator>& generators = {kAllGenerators.begin(), kAllGenerators.end()});
// d->d and d->other dataset for a fixed generator.
std::vector<ExperimentSpec> cross_dataset_block(Dataset d, Generator g);

}  // namespace avfp
