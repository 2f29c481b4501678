#include "avfp/canonical.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <numeric>

#include "avfp/rng.hpp"

namespace avfp::canonical {

namespace {

struct Profile {
  Gender gender;
  Ethnicity ethnicity;
  AgeRange age;
};

using G = Gender;
using E = Ethnicity;
using A = AgeRange;

// Evaluation identities of CREMA-D. The first one is the driver with 18
// fewer cross videos (7 targets instead of 8).
constexpr std::array<Profile, 24> kCremaEval{{
    {G::Female, E::Asian, A::Age20To30},           {G::Female, E::Asian, A::Age20To30},
    {G::Male, E::Asian, A::Age31To45},             {G::Male, E::Asian, A::Age31To45},
    {G::Female, E::AfricanAmerican, A::Age20To30}, {G::Female, E::AfricanAmerican, A::Age20To30},
    {G::Female, E::AfricanAmerican, A::Age31To45}, {G::Female, E::AfricanAmerican, A::Age31To45},
    {G::Male, E::AfricanAmerican, A::Age31To45},   {G::Male, E::AfricanAmerican, A::Age31To45},
    {G::Male, E::AfricanAmerican, A::Age46To60},   {G::Male, E::AfricanAmerican, A::Age31To45},
    {G::Female, E::Caucasian, A::Age20To30},       {G::Female, E::Caucasian, A::Age20To30},
    {G::Female, E::Caucasian, A::Age31To45},       {G::Female, E::Caucasian, A::Age31To45},
    {G::Male, E::Caucasian, A::Age20To30},         {G::Male, E::Caucasian, A::Age31To45},
    {G::Male, E::Caucasian, A::Age46To60},         {G::Male, E::Caucasian, A::Age31To45},
    {G::Female, E::Hispanic, A::Age20To30},        {G::Female, E::Hispanic, A::Age31To45},
    {G::Male, E::Hispanic, A::Age20To30},          {G::Male, E::Hispanic, A::Age31To45},
}};

constexpr std::array<Profile, 8> kRavdessEval{{
    {G::Female, E::Asian, A::Age20To30},
    {G::Male, E::Asian, A::Age20To30},
    {G::Female, E::Caucasian, A::Age20To30},
    {G::Female, E::Caucasian, A::Age20To30},
    {G::Female, E::Caucasian, A::Age31To45},
    {G::Male, E::Caucasian, A::Age20To30},
    {G::Male, E::Caucasian, A::Age20To30},
    {G::Male, E::Caucasian, A::Age20To30},
}};

// Cross-reenactment plan for one side of one dataset: driver i uses the
// `targets[i]` identities following it (cyclically) and `clips[i]` clips.
struct SidePlan {
  std::vector<std::string> ids;
  std::vector<int> targets;
  std::vector<int> clips;
};

std::string make_id(const char* prefix, int index, int width) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%s%0*d", prefix, width, index);
  return buf;
}

void emit(const SidePlan& plan, Dataset dataset, int clips_per_identity, std::uint64_t seed,
          std::vector<AvatarVideo>& out) {
  const int n = static_cast<int>(plan.ids.size());
  for (int i = 0; i < n; ++i) {
    const std::string& driver = plan.ids[i];
    for (Generator g : kAllGenerators) {
      for (int clip = 0; clip < clips_per_identity; ++clip) {
        out.push_back({make_video_id(g, driver, driver, clip), driver, driver, g, clip, dataset});
      }
    }
    std::vector<int> clips(static_cast<std::size_t>(clips_per_identity));
    std::iota(clips.begin(), clips.end(), 0);
    Rng rng(Rng::mix(seed, hash_string(driver)));
    rng.shuffle(clips);
    clips.resize(static_cast<std::size_t>(plan.clips[i]));
    std::sort(clips.begin(), clips.end());
    for (int t = 1; t <= plan.targets[i]; ++t) {
      const std::string& target = plan.ids[(i + t) % n];
      for (int clip : clips) {
        for (Generator g : kAllGenerators) {
          out.push_back({make_video_id(g, target, driver, clip), target, driver, g, clip, dataset});
        }
      }
    }
  }
}

}  // namespace

DatasetCounts published_counts(Dataset d) {
  if (d == Dataset::CremaD) return {{4392, 8280}, {1728, 3438}, {6120, 11718}};
  return {{960, 1905}, {480, 840}, {1440, 2745}};
}

CountTable published_count_table() {
  CountTable table;
  for (Dataset d : kAllDatasets) {
    const DatasetCounts c = published_counts(d);
    for (Generator g : kAllGenerators) {
      table[{d, g, true, Side::Development}] = c.development.self;
      table[{d, g, false, Side::Development}] = c.development.cross;
      table[{d, g, true, Side::Evaluation}] = c.evaluation.self;
      table[{d, g, false, Side::Evaluation}] = c.evaluation.cross;
      table[{d, g, true, Side::Total}] = c.total.self;
      table[{d, g, false, Side::Total}] = c.total.cross;
    }
  }
  return table;
}

TrialCounts published_trial_counts(Dataset d) {
  if (d == Dataset::CremaD) return {124416, 247536};
  return {28800, 50400};
}

std::map<std::string, SideCounts> published_eval_demographics(Dataset d) {
  if (d == Dataset::CremaD) {
    return {{"female", {864, 1710}},          {"male", {864, 1728}},
            {"african_american", {576, 1152}}, {"asian", {288, 558}},
            {"caucasian", {576, 1152}},        {"hispanic", {288, 576}},
            {"20-30", {648, 1278}},            {"31-45", {936, 1872}},
            {"46-60", {144, 288}}};
  }
  return {{"female", {240, 420}},  {"male", {240, 420}},  {"asian", {120, 210}},
          {"caucasian", {360, 630}}, {"20-30", {420, 735}}, {"31-45", {60, 105}}};
}

Catalog canonical_catalog() {
  std::vector<IdentityRecord> identities;
  std::vector<AvatarVideo> videos;
  constexpr std::uint64_t kSeed = 20251;

  // CREMA-D: 61 development + 24 evaluation identities.
  SidePlan crema_dev, crema_eval;
  for (int i = 0; i < 85; ++i) {
    const std::string id = make_id("cd", i + 1, 3);
    if (i < 61) {
      identities.push_back({id, Dataset::CremaD, G::Unknown, E::Unknown, A::Unknown});
      crema_dev.ids.push_back(id);
      // 59 drivers with 17 clips and 2 with 16: 8 * 1035 = 8280 cross videos.
      crema_dev.targets.push_back(8);
      crema_dev.clips.push_back(i < 59 ? 17 : 16);
    } else {
      const Profile& p = kCremaEval[static_cast<std::size_t>(i - 61)];
      identities.push_back({id, Dataset::CremaD, p.gender, p.ethnicity, p.age});
      crema_eval.ids.push_back(id);
      // 23 drivers with 8 x 18 and one with 7 x 18: 3438 cross videos.
      crema_eval.targets.push_back(i == 61 ? 7 : 8);
      crema_eval.clips.push_back(18);
    }
  }

  // RAVDESS: 16 development + 8 evaluation identities.
  SidePlan rav_dev, rav_eval;
  for (int i = 0; i < 24; ++i) {
    const std::string id = make_id("rv", i + 1, 2);
    if (i < 16) {
      identities.push_back({id, Dataset::Ravdess, G::Unknown, E::Unknown, A::Unknown});
      rav_dev.ids.push_back(id);
      // 15 x (8 x 15) + 7 x 15 = 1905 cross videos.
      rav_dev.targets.push_back(i < 15 ? 8 : 7);
      rav_dev.clips.push_back(15);
    } else {
      const Profile& p = kRavdessEval[static_cast<std::size_t>(i - 16)];
      identities.push_back({id, Dataset::Ravdess, p.gender, p.ethnicity, p.age});
      rav_eval.ids.push_back(id);
      // Only 7 other evaluation identities exist: 8 x 7 x 15 = 840.
      rav_eval.targets.push_back(7);
      rav_eval.clips.push_back(15);
    }
  }

  emit(crema_dev, Dataset::CremaD, kCremaClipsPerIdentity, kSeed, videos);
  emit(crema_eval, Dataset::CremaD, kCremaClipsPerIdentity, kSeed, videos);
  emit(rav_dev, Dataset::Ravdess, kRavdessClipsPerIdentity, kSeed, videos);
  emit(rav_eval, Dataset::Ravdess, kRavdessClipsPerIdentity, kSeed, videos);
  return Catalog(std::move(identities), std::move(videos));
}

SideMap canonical_sides() {
  SideMap sides;
  for (int i = 0; i < 85; ++i) {
    sides[make_id("cd", i + 1, 3)] = i < 61 ? Side::Development : Side::Evaluation;
  }
  for (int i = 0; i < 24; ++i) {
    sides[make_id("rv", i + 1, 2)] = i < 16 ? Side::Development : Side::Evaluation;
  }
  return sides;
}

}  // namespace avfp::canonical
