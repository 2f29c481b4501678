#include "avfp/catalog.hpp"

#include <algorithm>
#include <fstream>
#include <tuple>

#include "avfp/rng.hpp"
#include "csv.hpp"

namespace avfp {

namespace {

const std::vector<std::string> kIdentityHeader{"id", "dataset", "gender", "ethnicity",
                                               "age_range"};
const std::vector<std::string> kVideoHeader{"video_id",  "dataset",   "generator",
                                            "target_id", "driver_id", "source_clip"};

std::string record_of(const AvatarVideo& v) {
  return "video '" + v.video_id + "' (target=" + v.target + ", driver=" + v.driver +
         ", generator=" + std::string(to_string(v.generator)) +
         ", clip=" + std::to_string(v.source_clip) + ")";
}

}  // namespace

Catalog::Catalog(std::vector<IdentityRecord> identities, std::vector<AvatarVideo> videos)
    : identities_(std::move(identities)), videos_(std::move(videos)) {
  std::sort(identities_.begin(), identities_.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  std::sort(videos_.begin(), videos_.end(),
            [](const auto& a, const auto& b) { return a.video_id < b.video_id; });

  for (std::size_t i = 0; i < identities_.size(); ++i) {
    if (identities_[i].id.empty()) throw InvariantError("identity with empty id");
    if (!identity_index_.emplace(identities_[i].id, i).second) {
      throw InvariantError("duplicate identity id '" + identities_[i].id + "'");
    }
  }

  std::set<std::tuple<std::string, std::string, Generator, int>> tuples;
  std::map<std::string, std::pair<std::set<std::string>, std::set<int>>> cross;
  for (std::size_t i = 0; i < videos_.size(); ++i) {
    const AvatarVideo& v = videos_[i];
    if (v.video_id.empty()) throw InvariantError("video with empty id");
    if (!video_index_.emplace(v.video_id, i).second) {
      throw InvariantError("duplicate video id '" + v.video_id + "'");
    }
    auto driver = identity_index_.find(v.driver);
    auto target = identity_index_.find(v.target);
    if (driver == identity_index_.end()) {
      throw InvariantError(record_of(v) + ": unknown driver identity");
    }
    if (target == identity_index_.end()) {
      throw InvariantError(record_of(v) + ": unknown target identity");
    }
    if (identities_[driver->second].dataset != v.dataset) {
      throw InvariantError(record_of(v) + ": dataset differs from the driver's dataset");
    }
    if (identities_[target->second].dataset != v.dataset) {
      throw InvariantError(record_of(v) + ": target belongs to another dataset");
    }
    if (v.source_clip < 0) throw InvariantError(record_of(v) + ": negative clip index");
    if (!tuples.emplace(v.target, v.driver, v.generator, v.source_clip).second) {
      throw InvariantError(record_of(v) + ": duplicate (target, driver, generator, clip)");
    }
    if (!v.is_self()) {
      auto& entry = cross[v.driver];
      entry.first.insert(v.target);
      entry.second.insert(v.source_clip);
    }
  }

  for (auto& [driver, entry] : cross) {
    if (entry.first.size() > static_cast<std::size_t>(kTargetsPerDriver)) {
      throw InvariantError("driver '" + driver + "' has " + std::to_string(entry.first.size()) +
                           " cross targets; at most " + std::to_string(kTargetsPerDriver) +
                           " are allowed");
    }
    assignments_.push_back({driver, {entry.first.begin(), entry.first.end()},
                            {entry.second.begin(), entry.second.end()}});
  }
}

const IdentityRecord& Catalog::identity(const std::string& id) const {
  auto it = identity_index_.find(id);
  if (it == identity_index_.end()) throw Error("unknown identity '" + id + "'");
  return identities_[it->second];
}

const AvatarVideo& Catalog::video(const std::string& video_id) const {
  auto it = video_index_.find(video_id);
  if (it == video_index_.end()) throw Error("unknown video '" + video_id + "'");
  return videos_[it->second];
}

std::vector<int> Catalog::clips_of(const std::string& id) const {
  std::set<int> clips;
  for (const auto& v : videos_) {
    if (v.is_self() && v.driver == id) clips.insert(v.source_clip);
  }
  return {clips.begin(), clips.end()};
}

std::set<Generator> Catalog::generators() const {
  std::set<Generator> out;
  for (const auto& v : videos_) out.insert(v.generator);
  return out;
}

std::string make_video_id(Generator g, const std::string& target, const std::string& driver,
                          int clip) {
  std::string clip_str = std::to_string(clip);
  if (clip_str.size() < 3) clip_str.insert(0, 3 - clip_str.size(), '0');
  return std::string(to_string(g)) + "_" + target + "_" + driver + "_" + clip_str;
}

// ---------------------------------------------------------------------------

Catalog load_manifest(const std::filesystem::path& identities_csv,
                      const std::filesystem::path& videos_csv) {
  const std::string id_file = identities_csv.string();
  const std::string video_file = videos_csv.string();

  const csv::Table id_table = csv::read(identities_csv);
  if (id_table.header != kIdentityHeader) {
    throw ParseError(id_file, 1, "header must be '" + csv::join(kIdentityHeader) + "'");
  }
  std::vector<IdentityRecord> identities;
  for (const auto& row : id_table.rows) {
    if (row.fields.size() != kIdentityHeader.size()) {
      throw ParseError(id_file, row.line, "expected 5 fields");
    }
    try {
      identities.push_back({row.fields[0], parse_dataset(row.fields[1]),
                            parse_gender(row.fields[2]), parse_ethnicity(row.fields[3]),
                            parse_age_range(row.fields[4])});
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(id_file, row.line, e.what());
    }
  }

  const csv::Table video_table = csv::read(videos_csv);
  // An optional trailing `reenactment` column (self|cross) is cross-checked
  // against the target/driver fields.
  bool has_kind = false;
  if (video_table.header.size() == kVideoHeader.size() + 1 &&
      std::equal(kVideoHeader.begin(), kVideoHeader.end(), video_table.header.begin()) &&
      video_table.header.back() == "reenactment") {
    has_kind = true;
  } else if (video_table.header != kVideoHeader) {
    throw ParseError(video_file, 1, "header must be '" + csv::join(kVideoHeader) + "'");
  }
  const std::size_t width = kVideoHeader.size() + (has_kind ? 1 : 0);
  std::vector<AvatarVideo> videos;
  videos.reserve(video_table.rows.size());
  for (const auto& row : video_table.rows) {
    if (row.fields.size() != width) {
      throw ParseError(video_file, row.line, "expected " + std::to_string(width) + " fields");
    }
    AvatarVideo v;
    try {
      v.video_id = row.fields[0];
      v.dataset = parse_dataset(row.fields[1]);
      v.generator = parse_generator(row.fields[2]);
      v.target = row.fields[3];
      v.driver = row.fields[4];
    } catch (const Error& e) {
      throw ParseError(video_file, row.line, e.what());
    }
    v.source_clip = csv::parse_int(row.fields[5], video_file, row.line);
    if (has_kind) {
      const std::string& kind = row.fields[6];
      if (kind != "self" && kind != "cross") {
        throw ParseError(video_file, row.line, "reenactment must be 'self' or 'cross'");
      }
      if ((kind == "self") != v.is_self()) {
        throw InvariantError(record_of(v) + " at line " + std::to_string(row.line) +
                             ": declared " + kind + " but target " +
                             (v.is_self() ? "equals" : "differs from") + " driver");
      }
    }
    videos.push_back(std::move(v));
  }
  return Catalog(std::move(identities), std::move(videos));
}

void save_manifest(const Catalog& catalog, const std::filesystem::path& identities_csv,
                   const std::filesystem::path& videos_csv) {
  {
    std::ofstream out(identities_csv, std::ios::binary);
    if (!out) throw IoError("cannot write " + identities_csv.string());
    out << csv::join(kIdentityHeader) << '\n';
    for (const auto& r : catalog.identities()) {
      out << csv::join({r.id, std::string(to_string(r.dataset)), std::string(to_string(r.gender)),
                        std::string(to_string(r.ethnicity)),
                        std::string(to_string(r.age_range))})
          << '\n';
    }
    if (!out) throw IoError("write failed: " + identities_csv.string());
  }
  std::ofstream out(videos_csv, std::ios::binary);
  if (!out) throw IoError("cannot write " + videos_csv.string());
  out << csv::join(kVideoHeader) << '\n';
  for (const auto& v : catalog.videos()) {
    out << csv::join({v.video_id, std::string(to_string(v.dataset)),
                      std::string(to_string(v.generator)), v.target, v.driver,
                      std::to_string(v.source_clip)})
        << '\n';
  }
  if (!out) throw IoError("write failed: " + videos_csv.string());
}

// ---------------------------------------------------------------------------

std::string_view to_string(Side s) {
  switch (s) {
    case Side::Development: return "development";
    case Side::Evaluation: return "evaluation";
    case Side::Total: return "total";
  }
  return "?";
}

CountTable count_videos(const Catalog& catalog, const SideMap* sides) {
  CountTable table;
  for (const auto& v : catalog.videos()) {
    table[{v.dataset, v.generator, v.is_self(), Side::Total}] += 1;
    if (!sides) continue;
    auto d = sides->find(v.driver);
    auto t = sides->find(v.target);
    if (d == sides->end() || t == sides->end() || d->second != t->second) continue;
    table[{v.dataset, v.generator, v.is_self(), d->second}] += 1;
  }
  return table;
}

bool ValidationReport::all_pass() const { return failures() == 0; }

std::size_t ValidationReport::failures() const {
  return static_cast<std::size_t>(
      std::count_if(cells.begin(), cells.end(), [](const auto& c) { return !c.pass(); }));
}

ValidationReport validate_counts(const Catalog& catalog, const CountTable& expected,
                                 const SideMap* sides) {
  const CountTable actual = count_videos(catalog, sides);
  ValidationReport report;
  for (const auto& [key, count] : expected) {
    auto it = actual.find(key);
    report.cells.push_back({key, count, it == actual.end() ? 0 : it->second});
  }
  return report;
}

std::string describe(const CountKey& key) {
  return std::string(to_string(key.dataset)) + "/" + std::string(to_string(key.generator)) + "/" +
         (key.self ? "self" : "cross") + "/" + std::string(to_string(key.side));
}

// ---------------------------------------------------------------------------

Catalog build_cross_assignments(const Catalog& catalog, int targets_per_driver,
                                int clips_per_driver, std::uint64_t seed) {
  if (targets_per_driver < 1) throw Error("targets_per_driver must be positive");
  if (clips_per_driver < 0) throw Error("clips_per_driver must be non-negative");

  std::vector<AvatarVideo> videos;
  for (const auto& v : catalog.videos()) {
    if (v.is_self()) videos.push_back(v);
  }
  const std::set<Generator> generators = catalog.generators();

  std::map<Dataset, std::vector<std::string>> by_dataset;
  for (const auto& r : catalog.identities()) by_dataset[r.dataset].push_back(r.id);

  if (clips_per_driver > 0) {
    for (const auto& [dataset, ids] : by_dataset) {
      if (ids.size() < static_cast<std::size_t>(targets_per_driver) + 1) {
        throw Error(std::string(to_string(dataset)) + " has " + std::to_string(ids.size()) +
                    " identities; cross-reenactment needs at least " +
                    std::to_string(targets_per_driver + 1));
      }
    }
  }

  for (const auto& r : catalog.identities()) {
    if (clips_per_driver == 0) break;
    // Per-driver stream so the outcome does not depend on catalog order.
    Rng rng(Rng::mix(seed, hash_string(r.id)));
    std::vector<int> clips = catalog.clips_of(r.id);
    if (clips.size() < static_cast<std::size_t>(clips_per_driver)) {
      throw Error("driver '" + r.id + "' has " + std::to_string(clips.size()) + " clips; " +
                  std::to_string(clips_per_driver) + " requested");
    }
    std::vector<std::string> candidates;
    for (const auto& id : by_dataset[r.dataset]) {
      if (id != r.id) candidates.push_back(id);
    }
    rng.shuffle(candidates);
    candidates.resize(static_cast<std::size_t>(targets_per_driver));
    rng.shuffle(clips);
    clips.resize(static_cast<std::size_t>(clips_per_driver));

    for (const auto& target : candidates) {
      for (int clip : clips) {
        for (Generator g : generators) {
          videos.push_back({make_video_id(g, target, r.id, clip), target, r.id, g, clip,
                            r.dataset});
        }
      }
    }
  }
  return Catalog(catalog.identities(), std::move(videos));
}

}  // namespace avfp
