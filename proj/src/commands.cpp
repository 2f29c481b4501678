#include "avfp/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "avfp/canonical.hpp"
#include "avfp/model.hpp"
#include "avfp/rng.hpp"
#include "avfp/scoring.hpp"

namespace avfp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

std::optional<Generator> parse_train_generator(const std::string& s) {
  if (s == "All") return std::nullopt;
  return parse_generator(s);
}

json spec_to_json(const ExperimentSpec& s) {
  return {{"scenario", std::string(to_string(s.scenario))},
          {"train_dataset", std::string(to_string(s.train_dataset))},
          {"train_generator", s.train_generator ? std::string(to_string(*s.train_generator)) : "All"},
          {"eval_dataset", std::string(to_string(s.eval_dataset))},
          {"eval_generator", std::string(to_string(s.eval_generator))}};
}

ExperimentSpec spec_from_json(const json& j) {
  ExperimentSpec s;
  s.scenario = parse_scenario(j.at("scenario").get<std::string>());
  s.train_dataset = parse_dataset(j.at("train_dataset").get<std::string>());
  s.train_generator = parse_train_generator(j.value("train_generator", std::string("All")));
  s.eval_dataset = parse_dataset(j.at("eval_dataset").get<std::string>());
  s.eval_generator = parse_generator(j.at("eval_generator").get<std::string>());
  return s;
}

json benchmark_to_json(const BenchmarkOptions& b) {
  json datasets = json::array(), generators = json::array();
  for (Dataset d : b.datasets) datasets.push_back(std::string(to_string(d)));
  for (Generator g : b.generators) generators.push_back(std::string(to_string(g)));
  return {{"identities_per_dataset", b.identities_per_dataset},
          {"videos_per_id", b.videos_per_id},
          {"dim", b.dim},
          {"cross_clips", b.cross_clips},
          {"sigma", b.sigma},
          {"datasets", datasets},
          {"generators", generators}};
}

BenchmarkOptions benchmark_from_json(const json& j, std::uint64_t seed) {
  BenchmarkOptions b;
  b.identities_per_dataset = j.value("identities_per_dataset", b.identities_per_dataset);
  b.videos_per_id = j.value("videos_per_id", b.videos_per_id);
  b.dim = j.value("dim", b.dim);
  b.cross_clips = j.value("cross_clips", b.cross_clips);
  b.sigma = j.value("sigma", b.sigma);
  if (j.contains("datasets")) {
    b.datasets.clear();
    for (const auto& d : j.at("datasets")) b.datasets.push_back(parse_dataset(d.get<std::string>()));
  }
  if (j.contains("generators")) {
    b.generators.clear();
    for (const auto& g : j.at("generators")) b.generators.push_back(parse_generator(g.get<std::string>()));
  }
  b.seed = seed;
  return b;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Fingerprint of everything that affects results.
std::string config_fingerprint(const RunConfig& config) {
  json j = config.to_json();
  for (const char* key : {"workers", "run_id", "output_dir"}) j.erase(key);
  return hex(hash_string(j.dump()));
}

bool marker_matches(const fs::path& marker, const std::string& fingerprint) {
  std::ifstream in(marker);
  std::string line;
  return in && std::getline(in, line) && line == fingerprint;
}

void write_marker(const fs::path& marker, const std::string& fingerprint) {
  std::ofstream out(marker, std::ios::binary);
  if (!out) throw IoError("cannot write " + marker.string());
  out << fingerprint << '\n';
}

void make_dirs(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create " + p.string() + ": " + ec.message());
}

template <typename F>
int guarded(std::ostream& log, F&& body) {
  try {
    return body();
  } catch (const IoError& e) {
    log << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

Split obtain_split(const RunConfig& config, const Catalog& catalog, std::ostream& log) {
  if (config.split) {
    Split s = load_split_json(*config.split);
    check_split(s, catalog);
    return s;
  }
  SplitOptions options;
  options.eval_fraction = config.eval_fraction;
  options.seed = config.seed;
  SplitReport report = make_split(catalog, options);
  log << "split: " << report.split.development.size() << " development / " << report.split.evaluation.size()
      << " evaluation identities";
  if (report.straddling_videos) log << ", " << report.straddling_videos << " cross videos straddle the sides";
  log << '\n';
  return report.split;
}

std::vector<Trial> filter_trials(const std::vector<Trial>& trials, Dataset d, Generator g) {
  std::vector<Trial> out;
  for (const auto& t : trials) {
    if (t.dataset == d && t.generator == g) out.push_back(t);
  }
  return out;
}

std::vector<EvalReport> reports_for(const ScoreTable& table, const std::string& condition,
                                    const std::vector<std::string>& models) {
  std::vector<EvalReport> out;
  if (models.size() == 1) {
    out.push_back(evaluate(table, condition, models[0]));
    return out;
  }
  for (std::size_t i = 0; i < models.size(); ++i) {
    EvalReport r = evaluate_submodel(table, i, condition);
    r.model = models[i];
    out.push_back(std::move(r));
  }
  out.push_back(evaluate(table, condition, "fusion"));
  return out;
}

std::vector<FairnessTable> fairness_for(const ScoreTable& table, const Catalog& catalog,
                                        const std::vector<Attribute>& attributes, const std::string& condition,
                                        const std::vector<std::string>& models) {
  std::vector<FairnessTable> out;
  if (attributes.empty()) return out;
  if (models.size() == 1) {
    out.push_back(fairness_report(table, catalog, attributes, condition, models[0]));
    return out;
  }
  for (std::size_t i = 0; i < models.size(); ++i) {
    out.push_back(fairness_report(table, catalog, attributes, condition, models[i], i));
  }
  out.push_back(fairness_report(table, catalog, attributes, condition, "fusion"));
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

RunConfig RunConfig::from_json(const json& j, const fs::path& base) {
  if (!j.is_object()) throw Error("config must be a JSON object");
  if (!j.contains("seed")) throw Error("config is missing the mandatory 'seed'");
  RunConfig c;
  c.seed = j.at("seed").get<std::uint64_t>();
  c.run_id = j.value("run_id", c.run_id);
  if (j.contains("output_dir")) c.output_dir = resolve(base, j.at("output_dir").get<std::string>());
  c.workers = j.value("workers", default_workers());
  if (j.contains("data")) {
    const json& d = j.at("data");
    auto path = [&](const char* key, std::optional<fs::path>& dst) {
      if (d.contains(key) && !d.at(key).is_null()) dst = resolve(base, d.at(key).get<std::string>());
    };
    path("identities", c.identities_csv);
    path("videos", c.videos_csv);
    path("features", c.features);
    path("adjacency", c.adjacency);
    path("split", c.split);
  }
  if (j.contains("synthetic") && !j.at("synthetic").is_null()) c.synthetic = benchmark_from_json(j.at("synthetic"), c.seed);
  if (j.contains("protocol")) {
    const json& p = j.at("protocol");
    c.eval_fraction = p.value("eval_fraction", c.eval_fraction);
    if (p.contains("convention")) c.convention = parse_convention(p.at("convention").get<std::string>());
  }
  if (j.contains("embedder")) c.embedder = config_from_json(j.at("embedder"));
  if (j.contains("train")) c.train = hyper_from_json(j.at("train"));
  if (j.contains("fusion")) c.zscore_fusion = j.at("fusion").value("zscore", false);
  c.matrix = j.value("matrix", c.matrix);
  if (j.contains("models")) c.models = j.at("models").get<std::vector<std::string>>();
  if (j.contains("experiments")) {
    for (const auto& e : j.at("experiments")) c.experiments.push_back(spec_from_json(e));
  }
  if (j.contains("fairness")) {
    c.fairness_attributes.clear();
    for (const auto& a : j.at("fairness")) c.fairness_attributes.push_back(parse_attribute(a.get<std::string>()));
  }
  const std::set<std::string> matrices{"intra-intra", "cross-generator", "cross-dataset", "all", "custom"};
  if (!matrices.count(c.matrix)) throw Error("unknown matrix '" + c.matrix + "'");
  if (c.models.empty()) throw Error("at least one model name is required");
  if (c.workers < 1) throw Error("workers must be at least 1");
  if (!c.synthetic && !(c.identities_csv && c.videos_csv && c.features)) {
    throw Error("config needs data.identities, data.videos and data.features, or a synthetic section");
  }
  return c;
}

json RunConfig::to_json() const {
  json data = json::object();
  auto put = [&](const char* key, const std::optional<fs::path>& p) {
    data[key] = p ? json(p->generic_string()) : json(nullptr);
  };
  put("identities", identities_csv);
  put("videos", videos_csv);
  put("features", features);
  put("adjacency", adjacency);
  put("split", split);
  json experiments_json = json::array();
  for (const auto& e : experiments) experiments_json.push_back(spec_to_json(e));
  json fairness = json::array();
  for (Attribute a : fairness_attributes) fairness.push_back(std::string(to_string(a)));
  return {{"run_id", run_id},
          {"output_dir", output_dir.generic_string()},
          {"seed", seed},
          {"workers", workers},
          {"data", data},
          {"synthetic", synthetic ? benchmark_to_json(*synthetic) : json(nullptr)},
          {"protocol", {{"eval_fraction", eval_fraction}, {"convention", std::string(to_string(convention))}}},
          {"embedder", config_to_json(embedder)},
          {"train", hyper_to_json(train)},
          {"fusion", {{"zscore", zscore_fusion}}},
          {"matrix", matrix},
          {"models", models},
          {"experiments", experiments_json},
          {"fairness", fairness}};
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string(), 0, e.what());
  }
  return RunConfig::from_json(j, path.parent_path());
}

int default_workers() {
  if (const char* v = std::getenv("AVFP_WORKERS")) {
    const int n = std::atoi(v);
    if (n >= 1) return n;
  }
  return 1;
}

fs::path run_directory(const RunConfig& config) { return config.output_dir / config.run_id; }

Corpus load_corpus(const RunConfig& config) {
  Corpus c;
  if (config.synthetic) {
    SynthCorpus s = synth_benchmark(*config.synthetic);
    c.catalog = std::move(s.catalog);
    c.store = std::move(s.store);
  } else {
    c.catalog = load_manifest(*config.identities_csv, *config.videos_csv);
    c.store = FeatureStore::load(*config.features);
  }
  if (config.adjacency) c.graph = load_adjacency_csv(*config.adjacency);
  c.store.seal();
  return c;
}

EmbedderConfig effective_embedder(const RunConfig& config, const Corpus& corpus) {
  EmbedderConfig e = config.embedder;
  if (corpus.graph) {
    if (corpus.store.kind() != FeatureKind::Landmarks) throw Error("a graph encoder needs a landmark store");
    if (!e.graph) e.graph = GraphEncoderConfig{};
    e.input_dim = e.graph->hidden_dim;
  } else {
    if (corpus.store.kind() == FeatureKind::Landmarks && e.graph) {
      throw Error("graph encoder configured but no adjacency file given");
    }
    e.graph.reset();
    e.input_dim = corpus.store.dim();
  }
  e.validate(corpus.graph ? &*corpus.graph : nullptr);
  return e;
}

std::vector<ExperimentSpec> expand_matrix(const RunConfig& config, const Catalog& catalog) {
  std::set<Dataset> dset;
  for (const auto& r : catalog.identities()) dset.insert(r.dataset);
  const std::vector<Dataset> datasets(dset.begin(), dset.end());
  const std::set<Generator> gset = catalog.generators();
  const std::vector<Generator> generators(gset.begin(), gset.end());

  std::vector<ExperimentSpec> specs;
  auto add = [&](const std::vector<ExperimentSpec>& more) { specs.insert(specs.end(), more.begin(), more.end()); };
  const bool all = config.matrix == "all";
  if (config.matrix == "custom") {
    specs = config.experiments;
  }
  if (config.matrix == "intra-intra" || all) add(intra_intra_specs(datasets, generators));
  if (config.matrix == "cross-generator" || all) {
    for (Dataset d : datasets) {
      for (Generator g : generators) add(cross_generator_block(d, g, generators));
    }
  }
  if (config.matrix == "cross-dataset" || all) {
    if (datasets.size() < 2) {
      if (!all) throw Error("cross-dataset matrix needs two datasets in the catalog");
    } else {
      for (Generator g : generators) {
        for (Dataset d : datasets) add(cross_dataset_block(d, g));
      }
    }
  }
  for (auto& s : specs) {
    s.models = config.models;
    s.window_len = config.embedder.window_len;
  }
  return specs;
}

std::vector<std::string> development_videos(const Catalog& catalog, const Split& split, Dataset dataset,
                                            std::optional<Generator> generator) {
  std::vector<std::string> out;
  for (const auto& v : catalog.videos()) {
    if (v.dataset != dataset) continue;
    if (generator && v.generator != *generator) continue;
    if (on_side(v, split.development)) out.push_back(v.video_id);
  }
  return out;
}

// ---------------------------------------------------------------------------

int cmd_validate(const fs::path& identities_csv, const fs::path& videos_csv,
                 const std::optional<fs::path>& split_json, std::ostream& log,
                 const std::optional<CountTable>& expected) {
  return guarded(log, [&] {
    const Catalog catalog = load_manifest(identities_csv, videos_csv);
    Split split;
    if (split_json) {
      split = load_split_json(*split_json);
      check_split(split, catalog);
    } else {
      split = make_split(catalog, SplitOptions{}).split;
    }
    const SideMap sides = split.sides();
    const ValidationReport report =
        validate_counts(catalog, expected ? *expected : canonical::published_count_table(), &sides);
    for (const auto& cell : report.cells) {
      if (!cell.pass()) {
        log << "FAIL " << describe(cell.key) << ": expected " << cell.expected << ", found " << cell.actual << '\n';
      }
    }
    log << report.cells.size() - report.failures() << "/" << report.cells.size() << " count cells match\n";
    return report.all_pass() ? kExitOk : kExitFailure;
  });
}

int cmd_synth(const SynthCommand& command, std::ostream& log) {
  return guarded(log, [&] {
    make_dirs(command.out_dir);
    const fs::path ids = command.out_dir / "identities.csv";
    const fs::path vids = command.out_dir / "videos.csv";
    if (command.canonical) {
      const Catalog c = canonical::canonical_catalog();
      save_manifest(c, ids, vids);
      log << "canonical manifest: " << c.identities().size() << " identities, " << c.videos().size()
          << " videos\n";
      return kExitOk;
    }
    SynthCorpus corpus = command.benchmark ? synth_benchmark(command.benchmark_options) : synth_corpus(command.options);
    save_manifest(corpus.catalog, ids, vids);
    corpus.store.save(command.out_dir / "features.avfs");
    log << "synthetic corpus: " << corpus.catalog.identities().size() << " identities, "
        << corpus.catalog.videos().size() << " videos\n";
    return kExitOk;
  });
}

int cmd_import(const fs::path& csv_dir, const fs::path& out_store, FeatureKind kind, double fps, std::ostream& log) {
  return guarded(log, [&] {
    if (!fs::is_directory(csv_dir)) throw IoError("not a directory: " + csv_dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(csv_dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw Error("no .csv files in " + csv_dir.string());
    std::optional<FeatureStore> store;
    for (const auto& f : files) {
      FeatureSequence seq = import_frame_csv(f, f.stem().string(), kind, fps);
      if (!store) store.emplace(kind, static_cast<int>(seq.dim()), fps);
      store->put(std::move(seq));
    }
    store->save(out_store);
    log << "imported " << store->size() << " videos into " << out_store.string() << '\n';
    return kExitOk;
  });
}

int cmd_trials(const RunConfig& config, std::ostream& log) {
  return guarded(log, [&] {
    const Corpus corpus = load_corpus(config);
    const fs::path dir = run_directory(config);
    make_dirs(dir / "split");
    make_dirs(dir / "trials");
    const Split split = obtain_split(config, corpus.catalog, log);
    save_split_json(split, dir / "split" / "split.json");
    const TrialList list = generate_trials(corpus.catalog, split, config.convention);
    save_trials_csv(list.trials, dir / "trials" / "trials.csv");
    std::int64_t g = 0, i = 0;
    for (const auto& [key, n] : list.counts) {
      log << to_string(key.dataset) << ' ' << to_string(key.generator) << ": genuine " << n.genuine
          << ", impostor " << n.impostor << '\n';
      g += n.genuine;
      i += n.impostor;
    }
    log << "total: genuine " << g << ", impostor " << i << '\n';
    return kExitOk;
  });
}

int cmd_train(const RunConfig& config, Dataset dataset, std::optional<Generator> generator,
              const std::string& model_name, const fs::path& checkpoint, std::ostream& log) {
  return guarded(log, [&] {
    const Corpus corpus = load_corpus(config);
    const Split split = obtain_split(config, corpus.catalog, log);
    const std::string key =
        train_key(dataset, generator) + "|" + model_name + "|F" + std::to_string(config.embedder.window_len);
    EmbedderConfig ec = effective_embedder(config, corpus);
    ec.seed = Rng::mix(config.seed, hash_string(key));
    TrainHyper hyper = config.train;
    hyper.seed = ec.seed;
    const auto videos = development_videos(corpus.catalog, split, dataset, generator);
    TrainResult r = train_model(key, ec, corpus.graph, hyper, corpus.store, samples_from_catalog(corpus.catalog, videos));
    save_checkpoint(r.model, checkpoint);
    log << "trained " << key << " on " << videos.size() << " videos; probe loss " << r.probe_loss.front()
        << " -> " << r.probe_loss.back() << '\n';
    return kExitOk;
  });
}

int cmd_score(const RunConfig& config, const std::vector<fs::path>& checkpoints, const fs::path& trials_csv,
              const fs::path& out_csv, std::ostream& log) {
  return guarded(log, [&] {
    if (checkpoints.empty()) throw Error("no checkpoints given");
    const Corpus corpus = load_corpus(config);
    std::vector<Model> models;
    for (const auto& p : checkpoints) models.push_back(load_checkpoint(p));
    std::vector<const Model*> ptrs;
    for (const auto& m : models) ptrs.push_back(&m);
    const auto trials = load_trials_csv(trials_csv);
    EmbeddingCache cache;
    ScoreOptions options;
    options.zscore_fusion = config.zscore_fusion;
    options.workers = config.workers;
    const ScoreTable table = score_trials(ptrs, corpus.store, trials, cache, options);
    save_scores_csv(table, out_csv);
    log << "scored " << table.rows.size() << " trials (" << table.unscorable << " unscorable, "
        << table.missing_videos.size() << " videos without features)\n";
    return kExitOk;
  });
}

int cmd_evaluate(const fs::path& scores_csv, const std::string& condition, const fs::path& out_dir,
                 std::ostream& log) {
  return guarded(log, [&] {
    const ScoreTable table = load_scores_csv(scores_csv);
    if (table.rows.empty()) throw Error("score table is empty");
    RenderInput input;
    input.reports = reports_for(table, condition, table.rows.front().models);
    render_report(input, out_dir);
    log << render_text(input);
    return kExitOk;
  });
}

int cmd_fairness(const fs::path& scores_csv, const fs::path& identities_csv, const fs::path& videos_csv,
                 const std::string& condition, const std::vector<Attribute>& attributes, const fs::path& out_dir,
                 std::ostream& log) {
  return guarded(log, [&] {
    const Catalog catalog = load_manifest(identities_csv, videos_csv);
    const ScoreTable table = load_scores_csv(scores_csv);
    if (table.rows.empty()) throw Error("score table is empty");
    RenderInput input;
    const auto& models = table.rows.front().models;
    input.reports = reports_for(table, condition, models);
    input.fairness = fairness_for(table, catalog, attributes, condition, models);
    render_report(input, out_dir);
    log << render_text(input);
    return kExitOk;
  });
}

int cmd_run(const RunConfig& config, std::ostream& log) {
  return guarded(log, [&]() -> int {
    const fs::path dir = run_directory(config);
    for (const char* sub : {"config", "split", "trials", "models", "scores", "reports"}) make_dirs(dir / sub);
    {
      std::ofstream out(dir / "config" / "config.json", std::ios::binary);
      if (!out) throw IoError("cannot write config");
      out << config.to_json().dump(2) << '\n';
    }
    const std::string fingerprint = config_fingerprint(config);

    const Corpus corpus = load_corpus(config);
    if (config.synthetic) {
      make_dirs(dir / "data");
      save_manifest(corpus.catalog, dir / "data" / "identities.csv", dir / "data" / "videos.csv");
    }
    const Split split = obtain_split(config, corpus.catalog, log);
    save_split_json(split, dir / "split" / "split.json");
    const TrialList trial_list = generate_trials(corpus.catalog, split, config.convention);
    save_trials_csv(trial_list.trials, dir / "trials" / "trials.csv");

    const std::vector<ExperimentSpec> specs = expand_matrix(config, corpus.catalog);
    const RunPlan plan = experiment_matrix(specs, corpus.catalog);
    std::map<std::string, std::string> reference_of;
    for (const auto& s : specs) {
      reference_of[train_key(s.train_dataset, s.train_generator) + "->" + eval_key(s.eval_dataset, s.eval_generator)] =
          reference_condition(s);
    }
    const EmbedderConfig base_config = effective_embedder(config, corpus);

    // Training jobs, in parallel across workers; log lines are emitted in
    // plan order afterwards.
    struct TrainOutcome {
      std::optional<Model> model;
      std::string message;
      bool failed = false;
    };
    std::vector<TrainOutcome> outcomes(plan.train_jobs.size());
    std::atomic<std::size_t> next{0};
    auto train_worker = [&] {
      for (std::size_t i = next++; i < plan.train_jobs.size(); i = next++) {
        const TrainJob& job = plan.train_jobs[i];
        TrainOutcome& out = outcomes[i];
        const fs::path ckpt = dir / "models" / (file_safe(job.key) + ".ckpt");
        const fs::path marker = dir / "models" / (file_safe(job.key) + ".done");
        try {
          if (marker_matches(marker, fingerprint)) {
            out.model = load_checkpoint(ckpt);
            out.message = "train " + job.key + ": reused";
            continue;
          }
          EmbedderConfig ec = base_config;
          ec.window_len = job.window_len;
          ec.seed = Rng::mix(config.seed, hash_string(job.key));
          TrainHyper hyper = config.train;
          hyper.seed = ec.seed;
          const auto videos = development_videos(corpus.catalog, split, job.dataset, job.generator);
          TrainResult r = train_model(job.key, ec, corpus.graph, hyper, corpus.store,
                                      samples_from_catalog(corpus.catalog, videos));
          save_checkpoint(r.model, ckpt);
          write_marker(marker, fingerprint);
          std::ostringstream msg;
          msg << "train " << job.key << ": " << videos.size() << " videos, " << r.pool_windows
              << " windows, probe loss " << format_double(r.probe_loss.front()) << " -> "
              << format_double(r.probe_loss.back());
          out.message = msg.str();
          out.model = std::move(r.model);
        } catch (const std::exception& e) {
          out.failed = true;
          out.message = "train " + job.key + ": FAILED: " + e.what();
        }
      }
    };
    const int n_threads = std::max(1, std::min<int>(config.workers, static_cast<int>(plan.train_jobs.size())));
    if (n_threads == 1) {
      train_worker();
    } else {
      std::vector<std::thread> threads;
      for (int t = 0; t < n_threads; ++t) threads.emplace_back(train_worker);
      for (auto& t : threads) t.join();
    }
    std::map<std::string, const Model*> trained;
    std::size_t failures = 0;
    for (std::size_t i = 0; i < plan.train_jobs.size(); ++i) {
      log << outcomes[i].message << '\n';
      if (outcomes[i].failed) {
        ++failures;
      } else {
        trained[plan.train_jobs[i].key] = &*outcomes[i].model;
      }
    }

    RenderInput input;
    EmbeddingCache cache;
    for (const EvalJob& job : plan.eval_jobs) {
      try {
        std::vector<const Model*> models;
        for (const auto& key : job.train_jobs) {
          auto it = trained.find(key);
          if (it == trained.end()) throw Error("training job " + key + " failed");
          models.push_back(it->second);
        }
        const fs::path scores = dir / "scores" / (file_safe(job.condition) + ".csv");
        const fs::path marker = dir / "scores" / (file_safe(job.condition) + ".done");
        ScoreTable table;
        if (marker_matches(marker, fingerprint)) {
          table = load_scores_csv(scores);
        } else {
          const auto trials = filter_trials(trial_list.trials, job.eval_dataset, job.eval_generator);
          if (trials.empty()) throw Error("no trials for " + eval_key(job.eval_dataset, job.eval_generator));
          ScoreOptions options;
          options.zscore_fusion = config.zscore_fusion;
          options.workers = config.workers;
          table = score_trials(models, corpus.store, trials, cache, options);
          save_scores_csv(table, scores);
          write_marker(marker, fingerprint);
        }
        auto reports = reports_for(table, job.condition, job.models);
        auto fairness = fairness_for(table, corpus.catalog, config.fairness_attributes, job.condition, job.models);
        for (const auto& r : reports) {
          log << "eval " << job.condition << " [" << r.model << "]: AUC " << format_auc(r.auc) << " ("
              << r.genuine_n << " genuine, " << r.impostor_n << " impostor)\n";
        }
        input.reports.insert(input.reports.end(), reports.begin(), reports.end());
        input.fairness.insert(input.fairness.end(), fairness.begin(), fairness.end());
      } catch (const std::exception& e) {
        ++failures;
        log << "eval " << job.condition << ": FAILED: " << e.what() << '\n';
      }
    }

    // Delta blocks, one per reference condition, in plan order.
    std::vector<std::string> block_order;
    std::map<std::string, std::vector<std::string>> block_rows;
    for (const EvalJob& job : plan.eval_jobs) {
      const std::string& ref = reference_of.at(job.condition);
      if (ref == job.condition) continue;
      if (!block_rows.count(ref)) block_order.push_back(ref);
      block_rows[ref].push_back(job.condition);
    }
    for (const auto& ref : block_order) {
      std::vector<EvalReport> subset;
      bool have_ref = false;
      for (const auto& r : input.reports) {
        const auto& rows = block_rows[ref];
        if (r.condition == ref) have_ref = true;
        if (r.condition == ref || std::find(rows.begin(), rows.end(), r.condition) != rows.end()) {
          subset.push_back(r);
        }
      }
      if (!have_ref) {
        log << "delta block " << ref << ": reference missing, skipped\n";
        continue;
      }
      input.deltas.push_back(delta_table(subset, ref));
    }

    render_report(input, dir / "reports");
    log << "reports written to " << (dir / "reports").string() << '\n';
    if (failures) {
      log << failures << " job(s) failed\n";
      return kExitFailure;
    }
    return kExitOk;
  });
}

}  // namespace avfp
