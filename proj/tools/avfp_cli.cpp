#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "avfp/commands.hpp"

namespace fs = std::filesystem;
using namespace avfp;

namespace {

struct ConfigFlags {
  std::string path;
  std::optional<std::string> run_id;
  std::optional<std::string> output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", path, "run configuration (JSON)")->required();
    app->add_option("--run-id", run_id, "override run_id");
    app->add_option("--output-dir", output_dir, "override output_dir");
    app->add_option("--seed", seed, "override seed");
    app->add_option("--workers", workers, "override workers (default AVFP_WORKERS or 1)");
  }

  // Flags win over the file.
  RunConfig load() const {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(path, 0, e.what());
    }
    if (run_id) j["run_id"] = *run_id;
    if (seed) j["seed"] = *seed;
    if (workers) j["workers"] = *workers;
    RunConfig c = RunConfig::from_json(j, fs::path(path).parent_path());
    if (output_dir) c.output_dir = *output_dir;
    return c;
  }
};

std::optional<Generator> parse_train_generator(const std::string& s) {
  if (s == "All" || s.empty()) return std::nullopt;
  return parse_generator(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Avatar fingerprinting verification and benchmark harness"};
  app.require_subcommand(1);

  // validate
  auto* validate = app.add_subcommand("validate", "check manifest counts against the published statistics");
  std::string v_ids, v_videos;
  std::optional<std::string> v_split;
  validate->add_option("--identities", v_ids)->required();
  validate->add_option("--videos", v_videos)->required();
  validate->add_option("--split", v_split, "split.json defining the sides");

  // synth
  auto* synth = app.add_subcommand("synth", "write a synthetic corpus or the canonical manifest");
  SynthCommand sc;
  std::string s_out;
  synth->add_option("-o,--out", s_out)->required();
  synth->add_flag("--canonical", sc.canonical, "canonical manifest only");
  synth->add_flag("--benchmark", sc.benchmark, "two datasets, three generators");
  synth->add_option("--identities", sc.options.identities);
  synth->add_option("--videos-per-id", sc.options.videos_per_id);
  synth->add_option("--min-frames", sc.options.min_frames);
  synth->add_option("--max-frames", sc.options.max_frames);
  synth->add_option("--dim", sc.options.dim);
  synth->add_option("--cross-clips", sc.options.cross_clips, "clips per driver for cross-reenactments");
  synth->add_option("--sigma", sc.options.signature.sigma);
  synth->add_option("--seed", sc.options.seed);

  // import
  auto* import = app.add_subcommand("import", "pack per-video frame CSVs into a feature store");
  std::string i_dir, i_out, i_kind = "embedding";
  double i_fps = kDefaultFps;
  import->add_option("--csv-dir", i_dir)->required();
  import->add_option("-o,--out", i_out)->required();
  import->add_option("--kind", i_kind, "landmarks or embedding");
  import->add_option("--fps", i_fps);

  // trials
  auto* trials = app.add_subcommand("trials", "write the split and the trial list");
  ConfigFlags t_cfg;
  t_cfg.attach(trials);

  // train
  auto* train = app.add_subcommand("train", "train one model on development videos");
  ConfigFlags tr_cfg;
  tr_cfg.attach(train);
  std::string tr_dataset, tr_generator = "All", tr_model = "model", tr_out;
  train->add_option("--dataset", tr_dataset)->required();
  train->add_option("--generator", tr_generator, "generator or All");
  train->add_option("--model", tr_model);
  train->add_option("-o,--out", tr_out, "checkpoint path")->required();

  // score
  auto* score = app.add_subcommand("score", "score trials with one or more checkpoints");
  ConfigFlags sc_cfg;
  sc_cfg.attach(score);
  std::vector<std::string> sc_ckpts;
  std::string sc_trials, sc_out;
  score->add_option("--checkpoint", sc_ckpts)->required();
  score->add_option("--trials", sc_trials)->required();
  score->add_option("-o,--out", sc_out)->required();

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "AUC and ROC from a score table");
  std::string e_scores, e_condition = "scores", e_out;
  evaluate->add_option("--scores", e_scores)->required();
  evaluate->add_option("--condition", e_condition);
  evaluate->add_option("-o,--out", e_out)->required();

  // fairness
  auto* fairness = app.add_subcommand("fairness", "per-subgroup AUC from a score table");
  std::string f_scores, f_ids, f_videos, f_condition = "scores", f_out;
  std::vector<std::string> f_attrs{"gender", "ethnicity", "age_range"};
  fairness->add_option("--scores", f_scores)->required();
  fairness->add_option("--identities", f_ids)->required();
  fairness->add_option("--videos", f_videos)->required();
  fairness->add_option("--condition", f_condition);
  fairness->add_option("--attribute", f_attrs, "gender, ethnicity, age_range");
  fairness->add_option("-o,--out", f_out)->required();

  // run
  auto* run = app.add_subcommand("run", "run the configured experiment matrix end to end");
  ConfigFlags r_cfg;
  r_cfg.attach(run);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitFailure;
  }

  std::ostream& log = std::cout;
  try {
    if (*validate) {
      return cmd_validate(v_ids, v_videos, v_split ? std::optional<fs::path>(*v_split) : std::nullopt, log);
    }
    if (*synth) {
      sc.out_dir = s_out;
      sc.benchmark_options.seed = sc.options.seed;
      sc.benchmark_options.identities_per_dataset = sc.options.identities;
      sc.benchmark_options.videos_per_id = sc.options.videos_per_id;
      sc.benchmark_options.dim = sc.options.dim;
      sc.benchmark_options.cross_clips = sc.options.cross_clips;
      sc.benchmark_options.sigma = sc.options.signature.sigma;
      return cmd_synth(sc, log);
    }
    if (*import) return cmd_import(i_dir, i_out, parse_feature_kind(i_kind), i_fps, log);
    if (*trials) return cmd_trials(t_cfg.load(), log);
    if (*train) {
      return cmd_train(tr_cfg.load(), parse_dataset(tr_dataset), parse_train_generator(tr_generator), tr_model,
                       tr_out, log);
    }
    if (*score) {
      std::vector<fs::path> paths(sc_ckpts.begin(), sc_ckpts.end());
      return cmd_score(sc_cfg.load(), paths, sc_trials, sc_out, log);
    }
    if (*evaluate) return cmd_evaluate(e_scores, e_condition, e_out, log);
    if (*fairness) {
      std::vector<Attribute> attrs;
      for (const auto& a : f_attrs) attrs.push_back(parse_attribute(a));
      return cmd_fairness(f_scores, f_ids, f_videos, f_condition, attrs, f_out, log);
    }
    if (*run) return cmd_run(r_cfg.load(), log);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}
