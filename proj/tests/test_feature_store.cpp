#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>

#include "avfp/feature_store.hpp"
#include "avfp/rng.hpp"
#include "support.hpp"

using namespace avfp;

namespace {

FeatureSequence random_sequence(const std::string& id, Eigen::Index T, Eigen::Index D, Rng& rng) {
  FeatureSequence s;
  s.video_id = id;
  s.frames.resize(T, D);
  for (Eigen::Index t = 0; t < T; ++t) {
    for (Eigen::Index d = 0; d < D; ++d) s.frames(t, d) = static_cast<float>(rng.normal());
  }
  return s;
}

}  // namespace

TEST_CASE("put then get returns the identical matrix") {
  Rng rng(1);
  FeatureStore store(FeatureKind::Embedding, 32);
  const FeatureSequence seq = random_sequence("v", 60, 32, rng);
  store.put(seq);
  CHECK(store.get("v").frames == seq.frames);
}

TEST_CASE("dimension mismatch, duplicates and writes after seal are rejected") {
  Rng rng(2);
  FeatureStore store(FeatureKind::Embedding, 32);
  CHECK_THROWS_AS(store.put(random_sequence("a", 10, 16, rng)), Error);
  store.put(random_sequence("a", 10, 32, rng));
  CHECK_THROWS_AS(store.put(random_sequence("a", 10, 32, rng)), Error);
  FeatureSequence bad = random_sequence("nan", 5, 32, rng);
  bad.frames(2, 3) = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(store.put(bad), Error);
  store.seal();
  CHECK_THROWS_AS(store.put(random_sequence("b", 10, 32, rng)), Error);
}

TEST_CASE("get of an absent id raises a missing-feature error") {
  FeatureStore store(FeatureKind::Embedding, 4);
  try {
    store.get("ghost");
    FAIL("expected MissingFeatureError");
  } catch (const MissingFeatureError& e) {
    CHECK(e.video_id() == "ghost");
  }
}

TEST_CASE("three stored sequences come back distinct") {
  Rng rng(3);
  FeatureStore store(FeatureKind::Embedding, 8);
  for (const char* id : {"x", "y", "z"}) store.put(random_sequence(id, 12, 8, rng));
  CHECK(store.get("x").frames != store.get("y").frames);
  CHECK(store.get("y").frames != store.get("z").frames);
  CHECK(store.get("x").frames != store.get("z").frames);
}

TEST_CASE("binary round trip is bit exact, including random access") {
  Rng rng(4);
  FeatureStore store(FeatureKind::Embedding, 10, 25.0);
  for (int i = 0; i < 6; ++i) {
    FeatureSequence s = random_sequence("v" + std::to_string(i), 10 + i, 10, rng);
    s.fps = 25.0;
    store.put(s);
  }
  test::TempDir dir("store");
  store.save(dir / "f.avfs");
  const FeatureStore loaded = FeatureStore::load(dir / "f.avfs");
  CHECK(loaded.kind() == FeatureKind::Embedding);
  CHECK(loaded.dim() == 10);
  CHECK(loaded.fps() == 25.0);
  REQUIRE(loaded.size() == store.size());
  for (const auto& [id, seq] : store.sequences()) {
    CHECK(std::memcmp(loaded.get(id).frames.data(), seq.frames.data(), sizeof(float) * seq.frames.size()) == 0);
  }
  StoreReader reader(dir / "f.avfs");
  CHECK(reader.size() == 6);
  CHECK(reader.get("v3").frames == store.get("v3").frames);
  CHECK_THROWS_AS(reader.get("nope"), MissingFeatureError);
}

TEST_CASE("corrupt or missing store files") {
  test::TempDir dir("store");
  CHECK_THROWS_AS(FeatureStore::load(dir / "missing.avfs"), IoError);
  test::write_file(dir / "junk.avfs", "not a store");
  CHECK_THROWS(FeatureStore::load(dir / "junk.avfs"));
}

TEST_CASE("normalization flags constant dimensions and centers the source") {
  Rng rng(5);
  FeatureStore store(FeatureKind::Embedding, 3);
  for (int i = 0; i < 4; ++i) {
    FeatureSequence s = random_sequence("v" + std::to_string(i), 20, 3, rng);
    for (Eigen::Index t = 0; t < s.length(); ++t) s.frames(t, 1) = 7.0f;
    store.put(s);
  }
  const std::vector<std::string> source{"v0", "v1", "v2"};
  const NormalizationParams p = normalize(store, source);
  CHECK(p.flagged == std::vector<int>{1});
  CHECK(p.stddev[1] > 0.0);

  Eigen::VectorXd sum = Eigen::VectorXd::Zero(3);
  double frames = 0;
  for (const auto& id : source) {
    const Eigen::MatrixXd z = p.apply(store.get(id).frames);
    sum += z.colwise().sum().transpose();
    frames += static_cast<double>(z.rows());
  }
  for (int d = 0; d < 3; ++d) CHECK(std::abs(sum[d] / frames) < 1e-6);

  // Statistics come from the source ids only: v3 is not centered.
  const NormalizationParams all = normalize(store, {"v0", "v1", "v2", "v3"});
  CHECK(all.mean != p.mean);
  CHECK_THROWS(normalize(store, {}));
  CHECK_THROWS(normalize(store, {"ghost"}));
}

TEST_CASE("frame CSV import with and without header") {
  test::TempDir dir("store");
  test::write_file(dir / "a.csv", "f0,f1\n1,2\n3,4\n5,6\n");
  test::write_file(dir / "b.csv", "1.5,2.5\n3.5,4.5\n");
  const FeatureSequence a = import_frame_csv(dir / "a.csv", "a", FeatureKind::Embedding);
  CHECK(a.length() == 3);
  CHECK(a.dim() == 2);
  CHECK(a.frames(2, 1) == 6.0f);
  const FeatureSequence b = import_frame_csv(dir / "b.csv", "b", FeatureKind::Embedding);
  CHECK(b.length() == 2);
  CHECK(b.frames(0, 0) == 1.5f);
  test::write_file(dir / "ragged.csv", "1,2\n3\n");
  CHECK_THROWS_AS(import_frame_csv(dir / "ragged.csv", "r", FeatureKind::Embedding), ParseError);
}

TEST_CASE("landmark stores require 109 x 2 values per frame") {
  Rng rng(6);
  FeatureStore store(FeatureKind::Landmarks, 2 * kLandmarkPoints);
  FeatureSequence s = random_sequence("l", 4, 2 * kLandmarkPoints, rng);
  s.kind = FeatureKind::Landmarks;
  store.put(s);
  CHECK(store.get("l").dim() == 218);
  CHECK_THROWS(FeatureStore(FeatureKind::Landmarks, 10));
}
