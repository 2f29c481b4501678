// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "avfp/canonical.hpp"
#include "avfp/commands.hpp"
#include "avfp/evaluation.hpp"
#include "avfp/model.hpp"
#include "avfp/protocol.hpp"
#include "avfp/rng.hpp"
#include "avfp/scoring.hpp"
#include "avfp/synthbench.hpp"
#include "avfp/trainer.hpp"

namespace fs = std::filesystem;
using namespace avfp;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Split split_from_sides(const SideMap& sides) {
  Split s;
  for (const auto& [id, side] : sides) {
    (side == Side::Evaluation ? s.evaluation : s.development).insert(id);
  }
  return s;
}

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.normal();
  }
  return m;
}

// 1 ------------------------------------------------------------------------
Outcome trial_counts() {
  const auto t0 = std::chrono::steady_clock::now();
  const Catalog catalog = canonical::canonical_catalog();
  const TrialList list = generate_trials(catalog, split_from_sides(canonical::canonical_sides()),
                                         TrialConvention::IncludeIdentical);
  const double elapsed = seconds_since(t0);
  Outcome o;
  std::map<Generator, TrialCount> per_generator;
  for (Dataset d : {Dataset::CremaD, Dataset::Ravdess}) {
    const auto want = canonical::published_trial_counts(d);
    for (Generator g : {Generator::Gaga, Generator::Live, Generator::Huny}) {
      auto it = list.counts.find({d, g});
      const TrialCount got = it == list.counts.end() ? TrialCount{} : it->second;
      if (got.genuine != want.genuine || got.impostor != want.impostor) {
        o.pass = false;
        o.detail += std::string(to_string(d)) + "/" + std::string(to_string(g)) + " got " +
                    std::to_string(got.genuine) + "/" + std::to_string(got.impostor) + "; ";
      }
      per_generator[g].genuine += got.genuine;
      per_generator[g].impostor += got.impostor;
    }
  }
  for (const auto& [g, n] : per_generator) {
    if (n.genuine != 153216 || n.impostor != 297936) {
      o.pass = false;
      o.detail += "total " + std::string(to_string(g)) + " " + std::to_string(n.genuine) + "/" +
                  std::to_string(n.impostor) + "; ";
    }
  }
  if (elapsed >= 10.0) o.pass = false;
  o.detail += "153216/297936 per generator, " + std::to_string(list.trials.size()) + " trials in " +
              fmt("%.2f s", elapsed);
  return o;
}

// 2 ------------------------------------------------------------------------
double brute_auc(const std::vector<double>& g, const std::vector<double>& i) {
  std::int64_t count2 = 0;
  for (double a : g) {
    for (double b : i) count2 += a > b ? 2 : (a == b ? 1 : 0);
  }
  return static_cast<double>(count2) / 2.0 / (static_cast<double>(g.size()) * static_cast<double>(i.size())) * 100.0;
}

Outcome auc_oracle() {
  Rng rng(20240501);
  double worst = 0.0;
  int transform_failures = 0, symmetry_failures = 0, tie_free = 0;
  for (int instance = 0; instance < 200; ++instance) {
    const std::size_t G = 1 + rng.below(1000), I = 1 + rng.below(1000);
    const bool ties = instance % 2 == 0;
    const double shift = rng.uniform(0.0, 2.0);
    std::vector<double> g(G), im(I);
    for (auto& v : g) v = rng.normal() + shift;
    for (auto& v : im) v = rng.normal();
    if (ties) {
      // Coarse quantization plus copied values produce many cross-class ties.
      for (auto& v : g) v = std::round(v * 4.0) / 4.0;
      for (auto& v : im) v = std::round(v * 4.0) / 4.0;
      for (std::size_t k = 0; k < std::min(G, I) / 4; ++k) im[rng.below(I)] = g[rng.below(G)];
    }
    worst = std::max(worst, std::abs(auc(g, im) - brute_auc(g, im)));
    if (ties) continue;
    ++tie_free;
    const double base = auc(g, im);
    const std::vector<std::function<double(double)>> transforms{
        [](double x) { return std::exp(x); }, [](double x) { return x * x * x; },
        [](double x) { return 3.0 * x + 7.0; }, [](double x) { return std::atan(x); }};
    for (const auto& f : transforms) {
      std::vector<double> tg(g), ti(im);
      for (auto& v : tg) v = f(v);
      for (auto& v : ti) v = f(v);
      if (auc(tg, ti) != base) ++transform_failures;
    }
    std::vector<double> ng(g), ni(im);
    for (auto& v : ng) v = -v;
    for (auto& v : ni) v = -v;
    const std::int64_t pairs2 = 2 * static_cast<std::int64_t>(G) * static_cast<std::int64_t>(I);
    if (mann_whitney_u2(ng, ni) != pairs2 - mann_whitney_u2(g, im)) ++symmetry_failures;
    if (std::abs(auc(ng, ni) + base - 100.0) > 1e-12) ++symmetry_failures;
  }
  Outcome o;
  o.pass = worst <= 1e-12 && transform_failures == 0 && symmetry_failures == 0;
  o.detail = "max |rank - brute| " + fmt("%.3g", worst) + " over 200 instances; " + std::to_string(tie_free) +
             " tie-free instances, " + std::to_string(transform_failures) + " transform and " +
             std::to_string(symmetry_failures) + " sign-reversal mismatches";
  return o;
}

// 3 ------------------------------------------------------------------------
double max_relative_error(const Embedder& e, const std::vector<Eigen::MatrixXd>& windows,
                          const std::vector<TripletIndex>& triplets, double margin) {
  const LossAndGradient lg = triplet_batch_gradient(e, windows, triplets, margin);
  const double h = 1e-5;
  double worst = 0.0;
  for (Eigen::Index k = 0; k < e.param_count(); ++k) {
    Embedder plus = e, minus = e;
    plus.mutable_params()[k] += h;
    minus.mutable_params()[k] -= h;
    const double numeric =
        (triplet_batch_loss(plus, windows, triplets, margin) - triplet_batch_loss(minus, windows, triplets, margin)) /
        (2.0 * h);
    const double analytic = lg.gradient[k];
    const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-4});
    worst = std::max(worst, rel);
  }
  return worst;
}

// Random evaluation point. At initialization scale the pre-normalization
// vector can be tiny, where x/|x| is so curved that central differences
// with h = 1e-5 are inaccurate regardless of the analytic gradient.
void randomize(Embedder& e, Rng& rng) {
  for (Eigen::Index k = 0; k < e.param_count(); ++k) e.mutable_params()[k] = rng.normal();
}

Outcome gradients() {
  Rng rng(77);
  double worst_attention = 0.0, worst_graph = 0.0;
  for (int config = 0; config < 20; ++config) {
    const int heads = 1 + static_cast<int>(rng.below(3));
    EmbedderConfig ec;
    ec.heads = heads;
    ec.attention_dim = heads * (1 + static_cast<int>(rng.below(3)));
    ec.window_len = 3 + static_cast<int>(rng.below(4));
    ec.seed = 1000 + static_cast<std::uint64_t>(config);
    // Large margin keeps every triplet active so the hinge never sits at
    // its kink during differencing.
    const double margin = 10.0;
    std::vector<TripletIndex> triplets{{0, 1, 2}, {1, 0, 3}, {2, 3, 0}};

    // d = 1 is excluded: a unit vector in one dimension is constant, so the
    // gradient vanishes identically.
    ec.input_dim = 4 + static_cast<int>(rng.below(4));
    ec.projection_dim = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(ec.input_dim - 2)));
    {
      Embedder e(ec);
      randomize(e, rng);
      std::vector<Eigen::MatrixXd> windows;
      for (int w = 0; w < 4; ++w) windows.push_back(random_matrix(ec.window_len, ec.input_dim, rng));
      worst_attention = std::max(worst_attention, max_relative_error(e, windows, triplets, margin));
    }

    const int nodes = 4 + static_cast<int>(rng.below(3));
    std::vector<std::pair<int, int>> edges;
    for (int n = 0; n + 1 < nodes; ++n) edges.emplace_back(n, n + 1);
    edges.emplace_back(0, nodes - 1);
    const AdjacencyGraph graph = AdjacencyGraph::from_edges(nodes, edges);
    EmbedderConfig gc = ec;
    gc.graph = GraphEncoderConfig{1 + static_cast<int>(rng.below(2)), 4 + static_cast<int>(rng.below(3))};
    gc.input_dim = gc.graph->hidden_dim;
    gc.projection_dim = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(gc.input_dim - 2)));
    {
      Embedder e(gc, graph);
      randomize(e, rng);
      std::vector<Eigen::MatrixXd> windows;
      for (int w = 0; w < 4; ++w) windows.push_back(random_matrix(gc.window_len, 2 * nodes, rng));
      worst_graph = std::max(worst_graph, max_relative_error(e, windows, triplets, margin));
    }
  }
  Outcome o;
  o.pass = worst_attention < 1e-5 && worst_graph < 1e-5;
  o.detail = "max relative error attention path " + fmt("%.3g", worst_attention) + ", graph path " +
             fmt("%.3g", worst_graph) + " (20 configurations, h = 1e-5)";
  return o;
}

// 4 ------------------------------------------------------------------------
Model random_model(int dim, int window_len, std::uint64_t seed) {
  EmbedderConfig ec;
  ec.input_dim = dim;
  ec.heads = 2;
  ec.attention_dim = 8;
  ec.projection_dim = 4;
  ec.window_len = window_len;
  ec.seed = seed;
  NormalizationParams norm;
  norm.mean = Eigen::VectorXd::Constant(dim, 0.1);
  norm.stddev = Eigen::VectorXd::Constant(dim, 1.3);
  return Model{"oracle", Embedder(ec), norm, {}};
}

double brute_score(const Model& m, const FeatureSequence& a, const FeatureSequence& b) {
  const int F = m.embedder.config().window_len, s = F / 2;
  std::vector<Eigen::VectorXd> ea, eb;
  for (Eigen::Index t = 0; t + F <= a.length(); t += s) ea.push_back(m.embed(a, t));
  for (Eigen::Index t = 0; t + F <= b.length(); t += s) eb.push_back(m.embed(b, t));
  double sum = 0.0;
  for (const auto& x : ea) {
    for (const auto& y : eb) {
      double dot = 0.0, nx = 0.0, ny = 0.0;
      for (Eigen::Index k = 0; k < x.size(); ++k) {
        dot += x[k] * y[k];
        nx += x[k] * x[k];
        ny += y[k] * y[k];
      }
      sum += dot / (std::sqrt(nx) * std::sqrt(ny));
    }
  }
  return sum / static_cast<double>(ea.size() * eb.size());
}

Outcome scoring_oracle() {
  Outcome o;
  Rng rng(4242);
  const int dim = 6, F = 8, s = F / 2;
  const Model model = random_model(dim, F, 9);
  FeatureStore store(FeatureKind::Embedding, dim);
  std::vector<std::string> ids;
  for (int v = 0; v < 40; ++v) {
    const int windows = 1 + static_cast<int>(rng.below(5));
    const auto T = static_cast<Eigen::Index>(F + (windows - 1) * s + static_cast<int>(rng.below(s)));
    FeatureSequence seq;
    seq.video_id = "v" + std::to_string(v);
    seq.frames = random_matrix(T, dim, rng).cast<float>();
    ids.push_back(seq.video_id);
    store.put(std::move(seq));
  }
  store.seal();
  double worst = 0.0;
  for (std::size_t a = 0; a < ids.size(); ++a) {
    for (std::size_t b = 0; b < ids.size(); b += 3) {
      const double fast = score_pair(model, store, ids[a], ids[b]).score;
      worst = std::max(worst, std::abs(fast - brute_score(model, store.get(ids[a]), store.get(ids[b]))));
    }
  }

  int window_mismatches = 0;
  for (int len = 2; len <= 64; ++len) {
    for (int T = 0; T <= 64; ++T) {
      const WindowSet w = make_windows(T, len, len / 2);
      const std::size_t want = T >= len ? static_cast<std::size_t>((T - len) / (len / 2) + 1) : 0;
      if (w.count() != want || (T < len) != w.skipped) ++window_mismatches;
    }
  }

  int symmetry_failures = 0, bound_failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto& x = ids[rng.below(ids.size())];
    const auto& y = ids[rng.below(ids.size())];
    const double ab = score_pair(model, store, x, y).score, ba = score_pair(model, store, y, x).score;
    if (ab != ba) ++symmetry_failures;
    if (!(ab >= -1.0 && ab <= 1.0)) ++bound_failures;
  }
  o.pass = worst <= 1e-12 && window_mismatches == 0 && symmetry_failures == 0 && bound_failures == 0;
  o.detail = "max |score_pair - brute| " + fmt("%.3g", worst) + "; " + std::to_string(window_mismatches) +
             " window-count mismatches over T,F <= 64; " + std::to_string(symmetry_failures) + " asymmetric, " +
             std::to_string(bound_failures) + " out of [-1,1] in 1000 trials";
  return o;
}

// 5 ------------------------------------------------------------------------
Outcome end_to_end() {
  const auto t0 = std::chrono::steady_clock::now();
  SynthOptions so;
  so.identities = 20;
  so.videos_per_id = 10;
  so.min_frames = 64;
  so.max_frames = 100;
  so.dim = 32;
  so.seed = 1;
  const SynthCorpus corpus = synth_corpus(so);
  SplitOptions split_options;
  split_options.seed = so.seed;
  const Split split = make_split(corpus.catalog, split_options).split;
  std::vector<std::string> dev;
  for (const auto& v : corpus.catalog.videos()) {
    if (on_side(v, split.development)) dev.push_back(v.video_id);
  }
  EmbedderConfig ec;
  TrainHyper hyper;
  hyper.seed = so.seed;
  const TrainResult trained =
      train_model("e2e", ec, std::nullopt, hyper, corpus.store, samples_from_catalog(corpus.catalog, dev));
  const TrialList trials = generate_trials(corpus.catalog, split, TrialConvention::ExcludeIdentical);
  const std::vector<const Model*> models{&trained.model};
  auto evaluate_on = [&](const FeatureStore& store) {
    EmbeddingCache cache;
    return evaluate(score_trials(models, store, trials.trials, cache), "e2e", "model").auc;
  };
  const double intra = evaluate_on(corpus.store);
  const double generator = evaluate_on(apply_shift(corpus.store, default_generator_shift(so.dim, 7), 7));
  const double dataset = evaluate_on(apply_shift(corpus.store, default_dataset_shift(), 7));
  const double elapsed = seconds_since(t0);
  Outcome o;
  o.pass = intra >= 95.0 && generator < intra && dataset < intra && elapsed < 300.0;
  o.detail = "intra " + fmt("%.2f", intra) + ", generator-shifted " + fmt("%.2f", generator) +
             ", dataset-shifted " + fmt("%.2f", dataset) + " (AUC %), " + std::to_string(trials.trials.size()) +
             " trials, " + fmt("%.1f s", elapsed);
  return o;
}

// 6 ------------------------------------------------------------------------
struct PublishedBlock {
  std::string reference;
  std::string ref_values[4];
  std::vector<std::pair<std::string, std::vector<std::string>>> rows;
};

Outcome delta_arithmetic() {
  const std::vector<std::string> models{"Graph", "DINOv2", "CLIP", "Fusion"};
  // Published cross-generator blocks (CREMA-D then RAVDESS), then cross-dataset blocks.
  const std::vector<PublishedBlock> blocks{
      {"CREMA-D GAGA->GAGA", {"88.0", "87.0", "86.4", "93.8"},
       {{"GAGA->LIVE", {"-1.5", "-18.1", "-10.6", "-7.7"}},
        {"GAGA->HUNY", {"-2.9", "-20.3", "-14.6", "-8.4"}},
        {"All->GAGA", {"-2.2", "-14.2", "-12.4", "-7.4"}}}},
      {"CREMA-D LIVE->LIVE", {"92.3", "88.8", "88.6", "95.2"},
       {{"LIVE->GAGA", {"-8.5", "-18.9", "-17.3", "-16.8"}},
        {"LIVE->HUNY", {"-11.4", "-14.6", "-14.9", "-15.9"}},
        {"All->LIVE", {"-4.5", "-12.3", "-9.1", "-5.6"}}}},
      {"CREMA-D HUNY->HUNY", {"83.5", "79.8", "81.0", "87.6"},
       {{"HUNY->GAGA", {"+3.0", "-16.3", "-8.9", "-8.5"}},
        {"HUNY->LIVE", {"+3.9", "0.0", "-5.8", "-0.9"}},
        {"All->HUNY", {"-1.2", "-8.0", "-10.1", "-5.0"}}}},
      {"RAVDESS GAGA->GAGA", {"77.1", "75.9", "76.0", "83.0"},
       {{"GAGA->LIVE", {"-9.6", "-11.2", "-10.5", "-12.6"}},
        {"GAGA->HUNY", {"-2.7", "-13.7", "-10.7", "-11.5"}},
        {"All->GAGA", {"-1.4", "-2.9", "-4.5", "-3.8"}}}},
      {"RAVDESS LIVE->LIVE", {"75.8", "68.2", "70.2", "79.4"},
       {{"LIVE->GAGA", {"-1.1", "-2.8", "-7.3", "-10.0"}},
        {"LIVE->HUNY", {"-2.9", "-5.0", "-4.4", "-11.9"}},
        {"All->LIVE", {"-0.3", "-4.4", "-1.2", "-1.8"}}}},
      {"RAVDESS HUNY->HUNY", {"75.4", "74.0", "77.0", "78.8"},
       {{"HUNY->GAGA", {"-3.9", "-10.2", "-9.9", "-5.8"}},
        {"HUNY->LIVE", {"-6.6", "-6.5", "-7.5", "-4.3"}},
        {"All->HUNY", {"+2.4", "-2.4", "-5.8", "+0.3"}}}},
      {"GAGA CREMA-D->CREMA-D", {"88.0", "87.0", "86.4", "93.8"},
       {{"CREMA-D->RAVDESS", {"-10.9", "-7.5", "-9.1", "-9.6"}}}},
      {"LIVE CREMA-D->CREMA-D", {"92.3", "88.8", "88.6", "95.2"},
       {{"CREMA-D->RAVDESS", {"-21.6", "-21.9", "-28.9", "-27.7"}}}},
      {"HUNY CREMA-D->CREMA-D", {"83.5", "79.8", "81.0", "87.6"},
       {{"CREMA-D->RAVDESS", {"-8.8", "-7.2", "-5.4", "-9.9"}}}},
      {"GAGA RAVDESS->RAVDESS", {"77.1", "75.9", "76.0", "83.0"},
       {{"RAVDESS->CREMA-D", {"+7.4", "+5.0", "+3.4", "+6.3"}}}},
      {"LIVE RAVDESS->RAVDESS", {"75.8", "68.2", "70.2", "79.4"},
       {{"RAVDESS->CREMA-D", {"+8.9", "+3.3", "+6.2", "+5.3"}}}},
      {"HUNY RAVDESS->RAVDESS", {"75.4", "74.0", "77.0", "78.8"},
       {{"RAVDESS->CREMA-D", {"+2.5", "-1.8", "-0.4", "+4.3"}}}},
  };
  int cells = 0, mismatches = 0;
  std::string first_mismatch;
  std::vector<DeltaTable> tables;
  for (const auto& block : blocks) {
    std::vector<EvalReport> reports;
    for (std::size_t m = 0; m < models.size(); ++m) {
      const double ref = std::stod(block.ref_values[m]);
      reports.push_back({block.reference, models[m], ref, 0, 0, {}});
      for (const auto& [condition, deltas] : block.rows) {
        reports.push_back({condition, models[m], ref + std::stod(deltas[m]), 0, 0, {}});
      }
    }
    const DeltaTable table = delta_table(reports, block.reference);
    for (std::size_t m = 0; m < models.size(); ++m) {
      ++cells;
      if (format_auc(table.reference_auc[m].second) != block.ref_values[m]) {
        ++mismatches;
        if (first_mismatch.empty()) first_mismatch = block.reference + " " + models[m];
      }
    }
    for (const auto& row : table.rows) {
      const auto& printed = std::find_if(block.rows.begin(), block.rows.end(),
                                         [&](const auto& r) { return r.first == row.condition; })
                                ->second;
      const auto m = static_cast<std::size_t>(std::find(models.begin(), models.end(), row.model) - models.begin());
      ++cells;
      if (format_delta(row.delta) != printed[m]) {
        ++mismatches;
        if (first_mismatch.empty()) {
          first_mismatch = row.condition + " " + row.model + ": " + format_delta(row.delta) + " vs " + printed[m];
        }
      }
    }
    tables.push_back(table);
  }
  // The worked example from the text: 83.5 -> 87.4 is +3.9.
  const std::vector<EvalReport> example{{"ref", "m", 83.5, 0, 0, {}}, {"cond", "m", 87.4, 0, 0, {}}};
  const bool example_ok = format_delta(delta_table(example, "ref").rows.at(0).delta) == "+3.9";
  const std::string grid = render_delta_grid(tables, models);
  const bool grid_ok = grid.find("+3.9") != std::string::npos && grid.find("0.0") != std::string::npos;
  Outcome o;
  o.pass = mismatches == 0 && example_ok && grid_ok;
  o.detail = std::to_string(cells) + " published cells, " + std::to_string(mismatches) + " mismatches" +
             (first_mismatch.empty() ? "" : " (first: " + first_mismatch + ")") +
             (example_ok ? "; 83.5 -> 87.4 renders +3.9" : "; worked example failed");
  return o;
}

// 7 ------------------------------------------------------------------------
std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism(const fs::path& scratch) {
  RunConfig config;
  config.seed = 11;
  config.run_id = "det";
  BenchmarkOptions b;
  b.identities_per_dataset = 8;
  b.videos_per_id = 4;
  b.dim = 16;
  b.cross_clips = 2;
  b.generators = {Generator::Gaga, Generator::Live};
  b.seed = config.seed;
  config.synthetic = b;
  config.embedder.heads = 2;
  config.embedder.attention_dim = 16;
  config.embedder.projection_dim = 8;
  config.embedder.window_len = 16;
  config.train.epochs = 3;
  config.matrix = "all";
  config.models = {"m1", "m2"};

  std::ostringstream log_a, log_b;
  config.output_dir = scratch / "a";
  const int code_a = cmd_run(config, log_a);
  config.output_dir = scratch / "b";
  const int code_b = cmd_run(config, log_b);
  const fs::path run_a = scratch / "a" / "det", run_b = scratch / "b" / "det";

  std::vector<fs::path> files{"trials/trials.csv"};
  for (const char* sub : {"scores", "reports"}) {
    std::vector<fs::path> found;
    for (const auto& e : fs::recursive_directory_iterator(run_a / sub)) {
      if (e.is_regular_file()) found.push_back(fs::relative(e.path(), run_a));
    }
    std::sort(found.begin(), found.end());
    files.insert(files.end(), found.begin(), found.end());
  }
  int differing = 0;
  std::string first;
  for (const auto& rel : files) {
    if (!fs::exists(run_b / rel) || slurp(run_a / rel) != slurp(run_b / rel)) {
      ++differing;
      if (first.empty()) first = rel.string();
    }
  }
  Outcome o;
  o.pass = code_a == kExitOk && code_b == kExitOk && differing == 0 && files.size() > 3;
  o.detail = "exit codes " + std::to_string(code_a) + "/" + std::to_string(code_b) + "; " +
             std::to_string(files.size()) + " files compared, " + std::to_string(differing) + " differ" +
             (first.empty() ? "" : " (first: " + first + ")");
  return o;
}

// 8 ------------------------------------------------------------------------
Outcome fairness_partition() {
  const Catalog catalog = canonical::canonical_catalog();
  const TrialList list =
      generate_trials(catalog, split_from_sides(canonical::canonical_sides()), TrialConvention::ExcludeIdentical);
  // Scores depend on the label only, so every subgroup draws from the same
  // genuine and impostor distributions.
  Rng rng(8);
  ScoreTable table;
  for (const auto& t : list.trials) {
    if (t.dataset != Dataset::CremaD || t.generator != Generator::Gaga) continue;
    ScoreRow row;
    row.trial = t;
    row.fused.trial_id = t.trial_id;
    row.fused.score = rng.normal() + (t.label ? 1.0 : 0.0);
    row.models = {"model"};
    table.rows.push_back(std::move(row));
  }
  const std::vector<Attribute> attributes{Attribute::Gender, Attribute::Ethnicity, Attribute::AgeRange};
  const FairnessTable f = fairness_report(table, catalog, attributes, "fairness", "model");
  const double overall = evaluate(table, "fairness", "model").auc;
  bool sums_ok = true;
  double worst_gap = 0.0;
  std::string worst_group;
  for (const auto& [attr, annotated] : f.annotated) {
    std::int64_t sum = 0, unknown = 0;
    for (const auto& r : f.rows) {
      if (r.attribute == attr) sum += r.genuine_n + r.impostor_n;
    }
    for (const auto& [a, n] : f.unknown) {
      if (a == attr) unknown = n;
    }
    if (sum != annotated || annotated + unknown != static_cast<std::int64_t>(table.rows.size())) sums_ok = false;
  }
  bool all_scored = true;
  for (const auto& r : f.rows) {
    if (!r.auc) {
      all_scored = false;
      continue;
    }
    const double gap = std::abs(*r.auc - overall);
    if (gap > worst_gap) {
      worst_gap = gap;
      worst_group = std::string(to_string(r.attribute)) + "=" + r.subgroup;
    }
  }
  Outcome o;
  o.pass = sums_ok && all_scored && worst_gap <= 2.0 && !f.rows.empty();
  o.detail = std::to_string(table.rows.size()) + " trials, " + std::to_string(f.rows.size()) + " subgroups; counts " +
             (sums_ok ? "partition" : "do NOT partition") + " the annotated total; overall AUC " +
             fmt("%.2f", overall) + ", largest subgroup gap " + fmt("%.2f", worst_gap) + " (" + worst_group + ")";
  return o;
}

}  // namespace

int main() {
  const fs::path scratch = fs::temp_directory_path() / ("avfp_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(scratch);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 trial-count reproduction", trial_counts},
      {"2 AUC oracle", auc_oracle},
      {"3 gradient correctness", gradients},
      {"4 scoring oracle", scoring_oracle},
      {"5 end-to-end synthetic benchmark", end_to_end},
      {"6 delta-AUC arithmetic", delta_arithmetic},
      {"7 determinism", [&] { return determinism(scratch); }},
      {"8 fairness partition", fairness_partition},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  std::error_code ec;
  fs::remove_all(scratch, ec);
  std::cout << (failures ? std::to_string(failures) + " criteria failed" : std::string("all criteria passed"))
            << std::endl;
  return failures ? 1 : 0;
}
