#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "avfp/feature_store.hpp"
#include "avfp/model.hpp"
#include "avfp/protocol.hpp"

namespace avfp {

// Start frames of all complete windows of length F taken every `stride`
// frames. Trailing frames that do not fill a window are dropped; a video
// shorter than F yields no windows and `skipped` is set.
struct WindowSet {
  std::string video_id;
  std::vector<Eigen::Index> starts;
  int window_len = 0;
  int stride = 0;
  bool skipped = false;

  std::size_t count() const { return starts.size(); }
};

WindowSet make_windows(Eigen::Index frames, int window_len, int stride);
inline int default_stride(int window_len) { return window_len / 2; }

// Throws on a zero vector.
double cosine(const Eigen::VectorXd& u, const Eigen::VectorXd& v);

// Pairwise (tree) sum in a fixed order.
double pairwise_sum(std::span<const double> values);

// Mean cosine over the X x Y grid of window embeddings, summed row-major
// in the given order. Callers wanting symmetry use score_embeddings.
double mean_cosine(std::span<const Eigen::VectorXd> enroll, std::span<const Eigen::VectorXd> test);

// Symmetric score: the side with the smaller video id is taken as rows, so
// score(a, b) and score(b, a) perform the identical computation.
double score_embeddings(const std::string& id_a, std::span<const Eigen::VectorXd> a,
                        const std::string& id_b, std::span<const Eigen::VectorXd> b);

struct PairScore {
  std::int64_t trial_id = 0;
  double score = 0.0;
  bool scorable = true;
  std::vector<double> sub_scores;  // one per model when fused
};

PairScore score_pair(const Model& model, const FeatureStore& store, const std::string& enroll_video,
                     const std::string& test_video);

// Arithmetic mean of the per-model scores of one trial.
PairScore fuse(std::span<const PairScore> scores);

// Window embeddings per (video_id, model_id, F).
class EmbeddingCache {
 public:
  using Key = std::tuple<std::string, std::string, int>;
  struct Entry {
    std::vector<Eigen::VectorXd> embeddings;
    bool skipped = false;
  };

  // Embeds every listed video that is not cached yet. Work is split across
  // `workers` threads by video; results do not depend on the worker count.
  void build(const Model& model, const FeatureStore& store, const std::vector<std::string>& video_ids,
             int workers = 1);
  const Entry& get(const std::string& video_id, const Model& model) const;
  bool contains(const std::string& video_id, const Model& model) const;
  std::size_t size() const { return entries_.size(); }
  // Number of window embeddings computed so far.
  std::size_t computed_windows() const { return computed_windows_; }
  std::size_t computed_videos() const { return computed_videos_; }

 private:
  std::map<Key, Entry> entries_;
  std::size_t computed_windows_ = 0;
  std::size_t computed_videos_ = 0;
};

struct ScoreOptions {
  // Standardize each model's scores (over the scored trials) before fusion.
  bool zscore_fusion = false;
  int workers = 1;
};

struct ScoreRow {
  Trial trial;
  PairScore fused;
  std::vector<std::string> models;
};

struct ScoreTable {
  std::vector<ScoreRow> rows;  // same order as the input trials
  std::vector<std::string> missing_videos;
  std::size_t unscorable = 0;
};

// One row per trial. Trials that reference a video without features or
// shorter than F are flagged unscorable; the rest are scored.
ScoreTable score_trials(std::span<const Model* const> models, const FeatureStore& store,
                        std::span<const Trial> trials, EmbeddingCache& cache,
                        const ScoreOptions& options = {});

// trial_id,enroll_video,test_video,label,model,score  (one line per model plus
// a "fusion" line when several models are present; unscorable rows carry "nan").
void save_scores_csv(const ScoreTable& table, const std::filesystem::path& path);
ScoreTable load_scores_csv(const std::filesystem::path& path);

std::string format_double(double v);

}  // namespace avfp
