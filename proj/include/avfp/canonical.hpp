#pragma once

// Published structure of the avatar database: per-generator video counts,
// the demographic make-up of the evaluation side, trial counts, and a
// catalog layout that reproduces all of them.

#include <cstdint>
#include <map>

#include "avfp/catalog.hpp"

namespace avfp::canonical {

inline constexpr int kCremaClipsPerIdentity = 72;
inline constexpr int kRavdessClipsPerIdentity = 60;

struct SideCounts {
  std::int64_t self = 0;
  std::int64_t cross = 0;
};

// Per generator; identical for GAGA, LIVE and HUNY.
struct DatasetCounts {
  SideCounts development;
  SideCounts evaluation;
  SideCounts total;
};

DatasetCounts published_counts(Dataset d);

// Every (dataset, generator, self/cross, side) cell of the published table.
CountTable published_count_table();

inline constexpr std::int64_t kPublishedTotalVideos = 66069;

struct TrialCounts {
  std::int64_t genuine = 0;
  std::int64_t impostor = 0;
};

// Per generator, counting V^e = V^t pairs as genuine.
TrialCounts published_trial_counts(Dataset d);

// Evaluation-side video counts per generator, keyed by an attribute value of
// the driving identity (e.g. "female", "asian", "20-30").
std::map<std::string, SideCounts> published_eval_demographics(Dataset d);

// Identity ids are synthetic ("cd001".., "rv01"..). Evaluation identities
// carry soft-biometrics consistent with the published distribution; the
// development side is unannotated. Cross targets never leave their side.
Catalog canonical_catalog();
SideMap canonical_sides();

}  // namespace avfp::canonical
