#include "avfp/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include <json.hpp>

#include "avfp/rng.hpp"
#include "csv.hpp"

namespace avfp {

SideMap Split::sides() const {
  SideMap m;
  for (const auto& id : development) m[id] = Side::Development;
  for (const auto& id : evaluation) m[id] = Side::Evaluation;
  return m;
}

bool on_side(const AvatarVideo& v, const std::set<std::string>& side) {
  return side.count(v.driver) != 0 && side.count(v.target) != 0;
}

namespace {

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

std::string stratum_of(const IdentityRecord& r, const SplitOptions& o) {
  std::string key;
  if (o.stratify_gender) key += std::string(to_string(r.gender)) + "|";
  if (o.stratify_ethnicity) key += std::string(to_string(r.ethnicity)) + "|";
  if (o.stratify_age) key += std::string(to_string(r.age_range)) + "|";
  return key;
}

// Cells ordered largest first; equal sizes in seeded order.
std::vector<std::vector<std::string>> ordered_cells(
    std::map<std::string, std::vector<std::string>> cells, Rng& rng) {
  std::vector<std::vector<std::string>> out;
  for (auto& [key, ids] : cells) {
    rng.shuffle(ids);
    out.push_back(std::move(ids));
  }
  rng.shuffle(out);
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.size() > b.size(); });
  return out;
}

void assign_individually(const std::vector<const IdentityRecord*>& records, int target,
                         const SplitOptions& options, Rng& rng, std::set<std::string>& eval) {
  std::map<std::string, std::vector<std::string>> cells;
  std::map<std::string, std::string> cell_of;
  for (const auto* r : records) {
    const std::string key = stratum_of(*r, options);
    cells[key].push_back(r->id);
    cell_of[r->id] = key;
  }
  const double frac = static_cast<double>(target) / static_cast<double>(records.size());
  const auto ordered = ordered_cells(cells, rng);

  // Error diffusion keeps every cell within one identity of its share.
  std::vector<std::string> chosen;
  double acc = 0.0;
  for (const auto& cell : ordered) {
    for (const auto& id : cell) {
      acc += frac;
      if (acc >= 0.5) {
        chosen.push_back(id);
        acc -= 1.0;
      }
    }
  }
  std::set<std::string> picked(chosen.begin(), chosen.end());

  auto cell_surplus = [&](const std::vector<std::string>& cell) {
    int in = 0;
    for (const auto& id : cell) in += picked.count(id) ? 1 : 0;
    return in - frac * static_cast<double>(cell.size());
  };
  while (static_cast<int>(picked.size()) > target) {
    const auto* worst = &ordered.front();
    double best = -1e300;
    for (const auto& cell : ordered) {
      const bool has = std::any_of(cell.begin(), cell.end(), [&](const auto& id) { return picked.count(id); });
      if (has && cell_surplus(cell) > best) {
        best = cell_surplus(cell);
        worst = &cell;
      }
    }
    for (auto it = worst->rbegin(); it != worst->rend(); ++it) {
      if (picked.erase(*it)) break;
    }
  }
  while (static_cast<int>(picked.size()) < target) {
    const auto* neediest = &ordered.front();
    double best = 1e300;
    for (const auto& cell : ordered) {
      const bool room = std::any_of(cell.begin(), cell.end(), [&](const auto& id) { return !picked.count(id); });
      if (room && cell_surplus(cell) < best) {
        best = cell_surplus(cell);
        neediest = &cell;
      }
    }
    for (const auto& id : *neediest) {
      if (picked.insert(id).second) break;
    }
  }
  eval.insert(picked.begin(), picked.end());
}

}  // namespace

SplitReport make_split(const Catalog& catalog, const SplitOptions& options) {
  if (!(options.eval_fraction > 0.0 && options.eval_fraction < 1.0)) {
    throw Error("eval_fraction must lie in (0, 1)");
  }
  SplitReport report;
  Rng rng(options.seed);

  std::map<Dataset, std::vector<const IdentityRecord*>> by_dataset;
  for (const auto& r : catalog.identities()) by_dataset[r.dataset].push_back(&r);

  for (const auto& [dataset, records] : by_dataset) {
    const int n = static_cast<int>(records.size());
    if (n < 2) {
      throw Error(std::string(to_string(dataset)) + " needs at least 2 identities to split");
    }
    const int target = std::clamp(static_cast<int>(std::lround(options.eval_fraction * n)), 1, n - 1);

    std::unordered_map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < records.size(); ++i) pos[records[i]->id] = i;
    UnionFind uf(records.size());
    for (const auto& v : catalog.videos()) {
      if (v.dataset == dataset && !v.is_self()) uf.unite(pos.at(v.driver), pos.at(v.target));
    }
    std::map<std::size_t, std::vector<std::string>> comps;
    for (std::size_t i = 0; i < records.size(); ++i) comps[uf.find(i)].push_back(records[i]->id);

    bool placed = false;
    const bool linked = std::any_of(comps.begin(), comps.end(), [](const auto& c) { return c.second.size() > 1; });
    if (comps.size() >= 2 && linked) {
      std::vector<std::vector<std::string>> units;
      for (auto& [root, ids] : comps) units.push_back(ids);
      rng.shuffle(units);
      std::stable_sort(units.begin(), units.end(),
                       [](const auto& a, const auto& b) { return a.size() > b.size(); });
      int achieved = 0;
      std::vector<const std::vector<std::string>*> taken;
      for (const auto& u : units) {
        const int size = static_cast<int>(u.size());
        if (std::abs(achieved + size - target) < std::abs(achieved - target)) {
          achieved += size;
          taken.push_back(&u);
        }
      }
      const int tolerance = std::max(2, static_cast<int>(std::lround(0.1 * n)));
      if (achieved > 0 && achieved < n && std::abs(achieved - target) <= tolerance) {
        for (const auto* u : taken) report.split.evaluation.insert(u->begin(), u->end());
        placed = true;
      }
    }
    report.component_mode[dataset] = placed;
    if (!placed) assign_individually(records, target, options, rng, report.split.evaluation);
    for (const auto* r : records) {
      if (!report.split.evaluation.count(r->id)) report.split.development.insert(r->id);
    }

    // Balance diagnostics.
    std::map<std::string, std::pair<int, int>> cells;
    for (const auto* r : records) {
      auto& c = cells[std::string(to_string(dataset)) + ":" + stratum_of(*r, options)];
      c.first += report.split.is_evaluation(r->id) ? 1 : 0;
      c.second += 1;
      auto note = [&](const std::string& attr, std::string_view value) {
        if (value == "unknown") return;
        auto& s = report.strata[std::string(to_string(dataset)) + ":" + attr + "=" + std::string(value)];
        s.first += report.split.is_evaluation(r->id) ? 1 : 0;
        s.second += 1;
      };
      note("gender", to_string(r->gender));
      note("ethnicity", to_string(r->ethnicity));
      note("age_range", to_string(r->age_range));
    }
    const double frac = static_cast<double>(std::count_if(records.begin(), records.end(), [&](const auto* r) {
                          return report.split.is_evaluation(r->id);
                        })) / n;
    for (const auto& [key, c] : cells) {
      report.max_cell_imbalance =
          std::max(report.max_cell_imbalance, std::abs(c.first - frac * c.second));
    }
  }

  for (const auto& v : catalog.videos()) {
    if (v.is_self()) continue;
    if (report.split.is_evaluation(v.driver) != report.split.is_evaluation(v.target)) {
      ++report.straddling_videos;
    }
  }
  return report;
}

void save_split_json(const Split& split, const std::filesystem::path& path) {
  nlohmann::json j{{"development", split.development}, {"evaluation", split.evaluation}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

Split load_split_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string(), 1, e.what());
  }
  Split s;
  s.development = j.at("development").get<std::set<std::string>>();
  s.evaluation = j.at("evaluation").get<std::set<std::string>>();
  return s;
}

void check_split(const Split& split, const Catalog& catalog) {
  for (const auto& id : split.evaluation) {
    if (split.development.count(id)) throw InvariantError("identity '" + id + "' on both sides");
  }
  for (const auto& r : catalog.identities()) {
    if (!split.development.count(r.id) && !split.evaluation.count(r.id)) {
      throw InvariantError("identity '" + r.id + "' missing from split");
    }
  }
  for (const auto* side : {&split.development, &split.evaluation}) {
    for (const auto& id : *side) {
      if (!catalog.has_identity(id)) throw InvariantError("split lists unknown identity '" + id + "'");
    }
  }
}

// ---------------------------------------------------------------------------

std::string_view to_string(TrialConvention c) {
  return c == TrialConvention::IncludeIdentical ? "include_identical" : "exclude_identical";
}

TrialConvention parse_convention(std::string_view s) {
  if (s == "include_identical") return TrialConvention::IncludeIdentical;
  if (s == "exclude_identical") return TrialConvention::ExcludeIdentical;
  throw Error("unknown trial convention '" + std::string(s) + "'");
}

std::optional<int> trial_label(const AvatarVideo& enroll, const AvatarVideo& test) {
  if (!enroll.is_self() || test.target != enroll.target) return std::nullopt;
  if (test.driver == enroll.driver) return 1;
  return 0;
}

TrialList generate_trials(const Catalog& catalog, const Split& split, TrialConvention convention) {
  struct Pool {
    std::vector<const AvatarVideo*> self;
    std::vector<const AvatarVideo*> cross;  // target fixed, other drivers
  };
  std::map<std::tuple<Dataset, Generator, std::string>, Pool> pools;
  for (const auto& v : catalog.videos()) {
    if (!on_side(v, split.evaluation)) continue;
    auto& pool = pools[{v.dataset, v.generator, v.target}];
    (v.is_self() ? pool.self : pool.cross).push_back(&v);
  }

  TrialList out;
  for (const auto& [key, pool] : pools) {
    const auto& [dataset, generator, target] = key;
    auto& count = out.counts[{dataset, generator}];
    for (const AvatarVideo* e : pool.self) {
      for (const AvatarVideo* t : pool.self) {
        if (e == t && convention == TrialConvention::ExcludeIdentical) continue;
        out.trials.push_back({0, dataset, generator, e->video_id, t->video_id, 1});
        ++count.genuine;
      }
      for (const AvatarVideo* t : pool.cross) {
        out.trials.push_back({0, dataset, generator, e->video_id, t->video_id, 0});
        ++count.impostor;
      }
    }
  }
  std::sort(out.trials.begin(), out.trials.end(), [](const Trial& a, const Trial& b) {
    return std::tie(a.dataset, a.generator, a.enroll_video, a.test_video) <
           std::tie(b.dataset, b.generator, b.enroll_video, b.test_video);
  });
  for (std::size_t i = 0; i < out.trials.size(); ++i) {
    out.trials[i].trial_id = static_cast<std::int64_t>(i + 1);
  }
  return out;
}

void save_trials_csv(const std::vector<Trial>& trials, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "trial_id,dataset,generator,enroll_video,test_video,label\n";
  for (const auto& t : trials) {
    out << t.trial_id << ',' << to_string(t.dataset) << ',' << to_string(t.generator) << ','
        << t.enroll_video << ',' << t.test_video << ',' << t.label << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<Trial> load_trials_csv(const std::filesystem::path& path) {
  const std::string file = path.string();
  const csv::Table table = csv::read(path);
  const std::vector<std::string> header{"trial_id",     "dataset",    "generator",
                                        "enroll_video", "test_video", "label"};
  if (table.header != header) throw ParseError(file, 1, "header must be '" + csv::join(header) + "'");
  std::vector<Trial> trials;
  trials.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    if (row.fields.size() != header.size()) throw ParseError(file, row.line, "expected 6 fields");
    Trial t;
    t.trial_id = csv::parse_int(row.fields[0], file, row.line);
    try {
      t.dataset = parse_dataset(row.fields[1]);
      t.generator = parse_generator(row.fields[2]);
    } catch (const Error& e) {
      throw ParseError(file, row.line, e.what());
    }
    t.enroll_video = row.fields[3];
    t.test_video = row.fields[4];
    t.label = csv::parse_int(row.fields[5], file, row.line);
    if (t.label != 0 && t.label != 1) throw ParseError(file, row.line, "label must be 0 or 1");
    trials.push_back(std::move(t));
  }
  return trials;
}

// ---------------------------------------------------------------------------

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::IntraIntra: return "intra-intra";
    case Scenario::IntraCrossGenerator: return "intra-cross-generator";
    case Scenario::CrossDatasetIntra: return "cross-dataset-intra";
  }
  return "?";
}

Scenario parse_scenario(std::string_view s) {
  if (s == "intra-intra") return Scenario::IntraIntra;
  if (s == "intra-cross-generator") return Scenario::IntraCrossGenerator;
  if (s == "cross-dataset-intra") return Scenario::CrossDatasetIntra;
  throw Error("unknown scenario '" + std::string(s) + "'");
}

std::string train_key(Dataset d, std::optional<Generator> g) {
  return std::string(to_string(d)) + "/" + (g ? std::string(to_string(*g)) : std::string("All"));
}

std::string eval_key(Dataset d, Generator g) {
  return std::string(to_string(d)) + "/" + std::string(to_string(g));
}

RunPlan experiment_matrix(const std::vector<ExperimentSpec>& specs, const Catalog& catalog) {
  std::set<Dataset> datasets;
  for (const auto& r : catalog.identities()) datasets.insert(r.dataset);
  const std::set<Generator> generators = catalog.generators();

  RunPlan plan;
  std::set<std::string> known_train;
  std::set<std::string> known_eval;
  for (const auto& s : specs) {
    const std::string where = train_key(s.train_dataset, s.train_generator) + "->" +
                              eval_key(s.eval_dataset, s.eval_generator);
    for (Dataset d : {s.train_dataset, s.eval_dataset}) {
      if (!datasets.count(d)) throw Error(where + ": dataset " + std::string(to_string(d)) + " not in catalog");
    }
    if (s.train_generator && !generators.count(*s.train_generator)) {
      throw Error(where + ": generator " + std::string(to_string(*s.train_generator)) + " not in catalog");
    }
    if (!generators.count(s.eval_generator)) {
      throw Error(where + ": generator " + std::string(to_string(s.eval_generator)) + " not in catalog");
    }
    if (s.models.empty()) throw Error(where + ": no models");
    bool consistent = false;
    switch (s.scenario) {
      case Scenario::IntraIntra:
        consistent = s.train_dataset == s.eval_dataset && s.train_generator == s.eval_generator;
        break;
      case Scenario::IntraCrossGenerator:
        consistent = s.train_dataset == s.eval_dataset && s.train_generator != s.eval_generator;
        break;
      case Scenario::CrossDatasetIntra:
        consistent = s.train_dataset != s.eval_dataset && s.train_generator == s.eval_generator;
        break;
    }
    if (!consistent) {
      throw Error(where + ": inconsistent with scenario " + std::string(to_string(s.scenario)));
    }

    EvalJob job{where, s.scenario, {}, s.models, s.eval_dataset, s.eval_generator, s.window_len};
    for (const auto& model : s.models) {
      TrainJob t{train_key(s.train_dataset, s.train_generator) + "|" + model + "|F" +
                     std::to_string(s.window_len),
                 model, s.train_dataset, s.train_generator, s.window_len};
      job.train_jobs.push_back(t.key);
      if (known_train.insert(t.key).second) plan.train_jobs.push_back(std::move(t));
    }
    std::string eval_id = where;
    for (const auto& m : s.models) eval_id += "|" + m;
    if (known_eval.insert(eval_id).second) plan.eval_jobs.push_back(std::move(job));
  }
  return plan;
}

std::vector<ExperimentSpec> intra_intra_specs(const std::vector<Dataset>& datasets,
                                              const std::vector<Generator>& generators) {
  std::vector<ExperimentSpec> out;
  for (Dataset d : datasets) {
    for (Generator g : generators) {
      ExperimentSpec s;
      s.scenario = Scenario::IntraIntra;
      s.train_dataset = s.eval_dataset = d;
      s.train_generator = g;
      s.eval_generator = g;
      out.push_back(s);
    }
  }
  return out;
}

std::string reference_condition(const ExperimentSpec& spec) {
  const Generator g = spec.train_generator.value_or(spec.eval_generator);
  return train_key(spec.train_dataset, g) + "->" + eval_key(spec.train_dataset, g);
}

std::vector<ExperimentSpec> cross_generator_block(Dataset d, Generator g, const std::vector<Generator>& generators) {
  std::vector<ExperimentSpec> out;
  ExperimentSpec base;
  base.train_dataset = base.eval_dataset = d;
  base.train_generator = g;
  base.eval_generator = g;
  base.scenario = Scenario::IntraIntra;
  out.push_back(base);
  for (Generator other : generators) {
    if (other == g) continue;
    ExperimentSpec s = base;
    s.scenario = Scenario::IntraCrossGenerator;
    s.eval_generator = other;
    out.push_back(s);
  }
  ExperimentSpec all = base;
  all.scenario = Scenario::IntraCrossGenerator;
  all.train_generator.reset();
  out.push_back(all);
  return out;
}

std::vector<ExperimentSpec> cross_dataset_block(Dataset d, Generator g) {
  ExperimentSpec base;
  base.scenario = Scenario::IntraIntra;
  base.train_dataset = base.eval_dataset = d;
  base.train_generator = g;
  base.eval_generator = g;
  ExperimentSpec shifted = base;
  shifted.scenario = Scenario::CrossDatasetIntra;
  shifted.eval_dataset = d == Dataset::CremaD ? Dataset::Ravdess : Dataset::CremaD;
  return {base, shifted};
}

}  // namespace avfp
