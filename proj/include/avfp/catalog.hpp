#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "avfp/types.hpp"

namespace avfp {

inline constexpr int kTargetsPerDriver = 8;

struct IdentityRecord {
  std::string id;
  Dataset dataset = Dataset::CremaD;
  Gender gender = Gender::Unknown;
  Ethnicity ethnicity = Ethnicity::Unknown;
  AgeRange age_range = AgeRange::Unknown;

  bool operator==(const IdentityRecord&) const = default;
};

// One rendered avatar: the appearance of `target` animated by clip
// `source_clip` of `driver`, synthesized by `generator`.
struct AvatarVideo {
  std::string video_id;
  std::string target;
  std::string driver;
  Generator generator = Generator::Gaga;
  int source_clip = 0;
  Dataset dataset = Dataset::CremaD;

  bool is_self() const { return target == driver; }
  bool operator==(const AvatarVideo&) const = default;
};

// Targets and clips a driver was used with for cross-reenactment. Derived
// from the video list when a manifest is loaded.
struct CrossTargetAssignment {
  std::string driver;
  std::vector<std::string> targets;
  std::vector<int> sampled_clips;

  bool operator==(const CrossTargetAssignment&) const = default;
};

// Immutable after construction; all invariants are checked in the
// constructor. Identities are sorted by id and videos by video_id.
class Catalog {
 public:
  Catalog() = default;
  Catalog(std::vector<IdentityRecord> identities, std::vector<AvatarVideo> videos);

  const std::vector<IdentityRecord>& identities() const { return identities_; }
  const std::vector<AvatarVideo>& videos() const { return videos_; }
  const std::vector<CrossTargetAssignment>& assignments() const { return assignments_; }

  const IdentityRecord& identity(const std::string& id) const;
  const AvatarVideo& video(const std::string& video_id) const;
  bool has_identity(const std::string& id) const { return identity_index_.count(id) != 0; }
  bool has_video(const std::string& video_id) const { return video_index_.count(video_id) != 0; }

  // Clip indices of `id`'s self-reenactments (any generator), ascending.
  std::vector<int> clips_of(const std::string& id) const;
  std::set<Generator> generators() const;

  bool operator==(const Catalog& other) const {
    return identities_ == other.identities_ && videos_ == other.videos_;
  }

 private:
  std::vector<IdentityRecord> identities_;
  std::vector<AvatarVideo> videos_;
  std::vector<CrossTargetAssignment> assignments_;
  std::unordered_map<std::string, std::size_t> identity_index_;
  std::unordered_map<std::string, std::size_t> video_index_;
};

std::string make_video_id(Generator g, const std::string& target, const std::string& driver,
                          int clip);

// identities.csv / videos.csv. Throws ParseError (with line number) on
// malformed rows and InvariantError naming the offending record.
Catalog load_manifest(const std::filesystem::path& identities_csv,
                      const std::filesystem::path& videos_csv);
void save_manifest(const Catalog& catalog, const std::filesystem::path& identities_csv,
                   const std::filesystem::path& videos_csv);

// ---------------------------------------------------------------------------
// Count validation

enum class Side : std::uint8_t { Development, Evaluation, Total };
std::string_view to_string(Side s);

struct CountKey {
  Dataset dataset;
  Generator generator;
  bool self;
  Side side;
  auto operator<=>(const CountKey&) const = default;
};

using CountTable = std::map<CountKey, std::int64_t>;

// Assigns each identity to a side; videos count towards a side only when
// both their driver and target are on it.
using SideMap = std::unordered_map<std::string, Side>;

CountTable count_videos(const Catalog& catalog, const SideMap* sides = nullptr);

struct ValidationCell {
  CountKey key;
  std::int64_t expected = 0;
  std::int64_t actual = 0;
  bool pass() const { return expected == actual; }
};

struct ValidationReport {
  std::vector<ValidationCell> cells;
  bool all_pass() const;
  std::size_t failures() const;
};

// Compares every cell of `expected`. Cells for Development/Evaluation are
// only computable with a side map; without one they count as 0.
ValidationReport validate_counts(const Catalog& catalog, const CountTable& expected,
                                 const SideMap* sides = nullptr);

std::string describe(const CountKey& key);

// ---------------------------------------------------------------------------
// Cross-reenactment construction for synthetic corpora

// For each driver, draws `targets_per_driver` distinct targets from the
// other identities of its dataset and `clips_per_driver` of its clips
// (both without replacement), then emits one cross video per
// (target, clip, generator). Existing cross videos are discarded.
Catalog build_cross_assignments(const Catalog& catalog, int targets_per_driver,
                                int clips_per_driver, std::uint64_t seed);

}  // namespace avfp
