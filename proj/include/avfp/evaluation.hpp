#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "avfp/catalog.hpp"
#include "avfp/scoring.hpp"

namespace avfp {

// Mann-Whitney AUC in percent: share of (genuine, impostor) pairs where the
// genuine score is higher, ties counting one half. Computed from midranks
// in O(n log n). Throws when either class is empty or a score is NaN.
double auc(std::span<const double> genuine, std::span<const double> impostor);

// Twice the Mann-Whitney U of the genuine class (pairs won count 2, ties 1).
std::int64_t mann_whitney_u2(std::span<const double> genuine, std::span<const double> impostor);

// ROC operating points (fpr, tpr) from (0,0) to (1,1), one per distinct
// score threshold, descending.
std::vector<std::pair<double, double>> roc_curve(std::span<const double> genuine,
                                                 std::span<const double> impostor);

struct EvalReport {
  std::string condition;
  std::string model;
  double auc = 0.0;  // percent
  std::int64_t genuine_n = 0;
  std::int64_t impostor_n = 0;
  std::vector<std::pair<double, double>> roc;
};

// AUC of the fused score column; unscorable trials are skipped.
EvalReport evaluate(const ScoreTable& table, const std::string& condition, const std::string& model);

// Per-model sub-score column `index` instead of the fused score.
EvalReport evaluate_submodel(const ScoreTable& table, std::size_t index, const std::string& condition);

struct DeltaRow {
  std::string condition;
  std::string model;
  double auc = 0.0;
  double delta = 0.0;  // percentage points, auc - reference auc
};

struct DeltaTable {
  std::string reference;
  std::vector<std::pair<std::string, double>> reference_auc;  // model -> AUC
  std::vector<DeltaRow> rows;
};

// Every report whose condition differs from `reference` becomes a row,
// compared against the reference report of the same model.
DeltaTable delta_table(std::span<const EvalReport> reports, const std::string& reference);

// "+3.9", "-1.5", "0.0": one decimal, sign on non-zero values.
std::string format_delta(double delta);
// "88.0"
std::string format_auc(double auc);

enum class Attribute { Gender, Ethnicity, AgeRange };
std::string_view to_string(Attribute a);

struct SubgroupResult {
  Attribute attribute;
  std::string subgroup;
  std::optional<double> auc;  // absent when the subgroup lacks a class
  std::int64_t genuine_n = 0;
  std::int64_t impostor_n = 0;
};

struct FairnessTable {
  std::string condition;
  std::string model;
  std::vector<SubgroupResult> rows;
  // Scored trials whose enrollment identity has the attribute annotated,
  // and those left out because it is unknown.
  std::vector<std::pair<Attribute, std::int64_t>> annotated;
  std::vector<std::pair<Attribute, std::int64_t>> unknown;
};

// Trials are grouped by the soft-biometrics of the enrollment video's
// identity (its target, equal to its driver for self-reenactments). Uses the
// fused score, or sub-score `column` when given.
FairnessTable fairness_report(const ScoreTable& table, const Catalog& catalog,
                              std::span<const Attribute> attributes, const std::string& condition,
                              const std::string& model, std::optional<std::size_t> column = std::nullopt);

Attribute parse_attribute(std::string_view s);

struct RenderInput {
  std::vector<EvalReport> reports;
  std::vector<DeltaTable> deltas;
  std::vector<FairnessTable> fairness;
};

// Writes report.txt, report.csv, fairness.csv (when present), delta.csv
// (when present) and roc/<condition>__<model>.csv into `dir`. Output bytes
// depend only on the input.
void render_report(const RenderInput& input, const std::filesystem::path& dir);

// Text rendering used by report.txt.
std::string render_text(const RenderInput& input);

// Published-layout grid: one block per DeltaTable, reference row in
// absolute AUC, other rows as signed deltas, one column per model.
std::string render_delta_grid(std::span<const DeltaTable> blocks, const std::vector<std::string>& models);

std::string file_safe(const std::string& condition);

}  // namespace avfp
