#include "avfp/scoring.hpp"

#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <set>
#include <thread>

#include "csv.hpp"

namespace avfp {

WindowSet make_windows(Eigen::Index frames, int window_len, int stride) {
  if (window_len < 2) throw Error("window length must be at least 2");
  if (stride < 1) throw Error("stride must be at least 1");
  WindowSet w;
  w.window_len = window_len;
  w.stride = stride;
  if (frames < window_len) {
    w.skipped = true;
    return w;
  }
  for (Eigen::Index start = 0; start + window_len <= frames; start += stride) w.starts.push_back(start);
  return w;
}

double cosine(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  if (u.size() != v.size()) throw Error("cosine of vectors with different dimensions");
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0) throw Error("cosine of a zero vector");
  return u.dot(v) / (nu * nv);
}

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

double mean_cosine(std::span<const Eigen::VectorXd> enroll, std::span<const Eigen::VectorXd> test) {
  if (enroll.empty() || test.empty()) throw Error("mean cosine over an empty window set");
  std::vector<double> sims;
  sims.reserve(enroll.size() * test.size());
  for (const auto& e : enroll) {
    for (const auto& t : test) sims.push_back(cosine(e, t));
  }
  return pairwise_sum(sims) / static_cast<double>(sims.size());
}

double score_embeddings(const std::string& id_a, std::span<const Eigen::VectorXd> a,
                        const std::string& id_b, std::span<const Eigen::VectorXd> b) {
  return id_b < id_a ? mean_cosine(b, a) : mean_cosine(a, b);
}

namespace {

std::vector<Eigen::VectorXd> embed_video(const Model& model, const FeatureSequence& seq,
                                         bool& skipped) {
  const int F = model.embedder.config().window_len;
  const WindowSet w = make_windows(seq.length(), F, default_stride(F));
  skipped = w.skipped;
  std::vector<Eigen::VectorXd> out;
  out.reserve(w.count());
  for (Eigen::Index start : w.starts) out.push_back(model.embed(seq, start));
  return out;
}

}  // namespace

PairScore score_pair(const Model& model, const FeatureStore& store, const std::string& enroll_video,
                     const std::string& test_video) {
  bool skip_e = false, skip_t = false;
  const auto e = embed_video(model, store.get(enroll_video), skip_e);
  const auto t = embed_video(model, store.get(test_video), skip_t);
  PairScore out;
  if (skip_e || skip_t) {
    out.scorable = false;
    out.score = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  out.score = score_embeddings(enroll_video, e, test_video, t);
  out.sub_scores = {out.score};
  return out;
}

PairScore fuse(std::span<const PairScore> scores) {
  if (scores.empty()) throw Error("fusion of an empty score list");
  PairScore out;
  out.trial_id = scores.front().trial_id;
  std::vector<double> values;
  for (const auto& s : scores) {
    if (s.trial_id != out.trial_id) throw Error("fusion across different trials");
    if (!s.scorable) out.scorable = false;
    values.push_back(s.score);
    out.sub_scores.push_back(s.score);
  }
  if (!out.scorable) {
    out.score = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  out.score = pairwise_sum(values) / static_cast<double>(values.size());
  return out;
}

// ---------------------------------------------------------------------------

void EmbeddingCache::build(const Model& model, const FeatureStore& store,
                           const std::vector<std::string>& video_ids, int workers) {
  std::vector<std::string> todo;
  std::set<std::string> seen;
  for (const auto& id : video_ids) {
    if (contains(id, model) || !seen.insert(id).second) continue;
    todo.push_back(id);
  }
  if (todo.empty()) return;
  std::vector<Entry> results(todo.size());
  const std::size_t n_workers =
      std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), todo.size()));
  std::vector<std::exception_ptr> errors(n_workers);
  auto work = [&](std::size_t w) {
    try {
      for (std::size_t i = w; i < todo.size(); i += n_workers) {
        results[i].embeddings = embed_video(model, store.get(todo[i]), results[i].skipped);
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (n_workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < n_workers; ++w) threads.emplace_back(work, w);
    for (auto& t : threads) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  const int F = model.embedder.config().window_len;
  for (std::size_t i = 0; i < todo.size(); ++i) {
    computed_windows_ += results[i].embeddings.size();
    ++computed_videos_;
    entries_.emplace(Key{todo[i], model.model_id, F}, std::move(results[i]));
  }
}

const EmbeddingCache::Entry& EmbeddingCache::get(const std::string& video_id, const Model& model) const {
  auto it = entries_.find(Key{video_id, model.model_id, model.embedder.config().window_len});
  if (it == entries_.end()) throw Error("video '" + video_id + "' not in embedding cache");
  return it->second;
}

bool EmbeddingCache::contains(const std::string& video_id, const Model& model) const {
  return entries_.count(Key{video_id, model.model_id, model.embedder.config().window_len}) != 0;
}

ScoreTable score_trials(std::span<const Model* const> models, const FeatureStore& store,
                        std::span<const Trial> trials, EmbeddingCache& cache,
                        const ScoreOptions& options) {
  if (models.empty()) throw Error("no models to score with");
  ScoreTable table;
  std::vector<std::string> videos;
  std::set<std::string> missing;
  {
    std::set<std::string> unique;
    for (const auto& t : trials) {
      for (const auto* id : {&t.enroll_video, &t.test_video}) {
        if (!unique.insert(*id).second) continue;
        if (store.contains(*id)) {
          videos.push_back(*id);
        } else {
          missing.insert(*id);
        }
      }
    }
  }
  table.missing_videos.assign(missing.begin(), missing.end());
  for (const Model* m : models) cache.build(*m, store, videos, options.workers);

  std::vector<std::string> names;
  for (const Model* m : models) names.push_back(m->model_id);

  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::vector<PairScore>> per_trial(trials.size());
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const Trial& t = trials[i];
    const bool present = !missing.count(t.enroll_video) && !missing.count(t.test_video);
    for (const Model* m : models) {
      PairScore s;
      s.trial_id = t.trial_id;
      if (present) {
        const auto& e = cache.get(t.enroll_video, *m);
        const auto& v = cache.get(t.test_video, *m);
        if (e.skipped || v.skipped) {
          s.scorable = false;
        } else {
          s.score = score_embeddings(t.enroll_video, e.embeddings, t.test_video, v.embeddings);
        }
      } else {
        s.scorable = false;
      }
      if (!s.scorable) s.score = nan;
      per_trial[i].push_back(s);
    }
  }

  // Optional per-model standardization applies to the fused value only;
  // sub-scores stay raw cosines.
  std::vector<std::vector<PairScore>> fusion_input = per_trial;
  if (options.zscore_fusion && models.size() > 1) {
    for (std::size_t k = 0; k < models.size(); ++k) {
      std::vector<double> v;
      for (const auto& row : fusion_input) {
        if (row[k].scorable) v.push_back(row[k].score);
      }
      if (v.size() < 2) continue;
      const double mean = pairwise_sum(v) / static_cast<double>(v.size());
      double sq = 0.0;
      for (double x : v) sq += (x - mean) * (x - mean);
      const double sd = std::sqrt(sq / static_cast<double>(v.size()));
      if (sd == 0.0) continue;
      for (auto& row : fusion_input) {
        if (row[k].scorable) row[k].score = (row[k].score - mean) / sd;
      }
    }
  }

  table.rows.reserve(trials.size());
  for (std::size_t i = 0; i < trials.size(); ++i) {
    ScoreRow row{trials[i], fuse(fusion_input[i]), names};
    for (std::size_t k = 0; k < models.size(); ++k) row.fused.sub_scores[k] = per_trial[i][k].score;
    if (!row.fused.scorable) ++table.unscorable;
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void save_scores_csv(const ScoreTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "trial_id,enroll_video,test_video,label,model,score\n";
  for (const auto& row : table.rows) {
    const auto& t = row.trial;
    const std::string prefix = std::to_string(t.trial_id) + "," + t.enroll_video + "," +
                               t.test_video + "," + std::to_string(t.label) + ",";
    if (row.models.size() == 1) {
      out << prefix << row.models[0] << ',' << format_double(row.fused.score) << '\n';
      continue;
    }
    for (std::size_t k = 0; k < row.models.size(); ++k) {
      const double s = row.fused.scorable ? row.fused.sub_scores[k] : std::nan("");
      out << prefix << row.models[k] << ',' << format_double(s) << '\n';
    }
    out << prefix << "fusion," << format_double(row.fused.score) << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

ScoreTable load_scores_csv(const std::filesystem::path& path) {
  const std::string file = path.string();
  const csv::Table t = csv::read(path);
  const std::vector<std::string> header{"trial_id", "enroll_video", "test_video", "label", "model", "score"};
  if (t.header != header) throw ParseError(file, 1, "header must be '" + csv::join(header) + "'");
  ScoreTable table;
  std::map<std::int64_t, std::size_t> row_of;
  for (const auto& r : t.rows) {
    if (r.fields.size() != header.size()) throw ParseError(file, r.line, "expected 6 fields");
    const std::int64_t id = csv::parse_int(r.fields[0], file, r.line);
    const double score = r.fields[5] == "nan" ? std::nan("") : csv::parse_double(r.fields[5], file, r.line);
    auto it = row_of.find(id);
    if (it == row_of.end()) {
      ScoreRow row;
      row.trial.trial_id = id;
      row.trial.enroll_video = r.fields[1];
      row.trial.test_video = r.fields[2];
      row.trial.label = csv::parse_int(r.fields[3], file, r.line);
      row.fused.trial_id = id;
      it = row_of.emplace(id, table.rows.size()).first;
      table.rows.push_back(std::move(row));
    }
    ScoreRow& row = table.rows[it->second];
    if (r.fields[4] == "fusion") {
      row.fused.score = score;
    } else {
      row.models.push_back(r.fields[4]);
      row.fused.sub_scores.push_back(score);
      if (row.models.size() == 1) row.fused.score = score;
    }
    row.fused.scorable = !std::isnan(row.fused.score);
  }
  for (const auto& row : table.rows) {
    if (!row.fused.scorable) ++table.unscorable;
  }
  return table;
}

}  // namespace avfp
