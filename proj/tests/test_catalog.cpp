#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>

#include "avfp/canonical.hpp"
#include "avfp/catalog.hpp"
#include "support.hpp"

using namespace avfp;

TEST_CASE("minimal manifest loads with all-self videos") {
  test::TempDir dir("catalog");
  test::write_file(dir / "identities.csv",
                   "id,dataset,gender,ethnicity,age_range\n"
                   "a,CREMA-D,female,asian,20-30\n"
                   "b,CREMA-D,male,caucasian,31-45\n");
  test::write_file(dir / "videos.csv",
                   "video_id,dataset,generator,target_id,driver_id,source_clip\n"
                   "v1,CREMA-D,GAGA,a,a,0\n"
                   "v2,CREMA-D,GAGA,a,a,1\n"
                   "v3,CREMA-D,GAGA,b,b,0\n"
                   "v4,CREMA-D,GAGA,b,b,1\n");
  const Catalog c = load_manifest(dir / "identities.csv", dir / "videos.csv");
  CHECK(c.identities().size() == 2);
  REQUIRE(c.videos().size() == 4);
  for (const auto& v : c.videos()) CHECK(v.is_self());
  CHECK(c.identity("b").gender == Gender::Male);
  CHECK(c.clips_of("a") == std::vector<int>{0, 1});
}

TEST_CASE("cross video labeled cross but with target == driver is rejected") {
  test::TempDir dir("catalog");
  test::write_file(dir / "identities.csv",
                   "id,dataset,gender,ethnicity,age_range\n"
                   "a,CREMA-D,female,asian,20-30\n");
  test::write_file(dir / "videos.csv",
                   "video_id,dataset,generator,target_id,driver_id,source_clip,reenactment\n"
                   "v1,CREMA-D,GAGA,a,a,0,cross\n");
  CHECK_THROWS_AS(load_manifest(dir / "identities.csv", dir / "videos.csv"), InvariantError);
}

TEST_CASE("malformed rows report file and line") {
  test::TempDir dir("catalog");
  test::write_file(dir / "identities.csv",
                   "id,dataset,gender,ethnicity,age_range\n"
                   "a,CREMA-D,female,asian,20-30\n"
                   "b,CREMA-D,female\n");
  test::write_file(dir / "videos.csv", "video_id,dataset,generator,target_id,driver_id,source_clip\n");
  try {
    load_manifest(dir / "identities.csv", dir / "videos.csv");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find(":3") != std::string::npos);
  }
}

TEST_CASE("unknown identity and duplicate video ids are rejected") {
  std::vector<IdentityRecord> ids{test::identity("a")};
  CHECK_THROWS_AS(Catalog(ids, {test::video("a", "zz", 0)}), InvariantError);
  CHECK_THROWS_AS(Catalog(ids, {test::video("a", "a", 0), test::video("a", "a", 0)}), InvariantError);
}

TEST_CASE("missing manifest file is an I/O error") {
  test::TempDir dir("catalog");
  CHECK_THROWS_AS(load_manifest(dir / "nope.csv", dir / "nope2.csv"), IoError);
}

TEST_CASE("manifest round trip") {
  const Catalog c = build_cross_assignments(test::self_only(10, 4), 8, 2, 5);
  test::TempDir dir("catalog");
  save_manifest(c, dir / "i.csv", dir / "v.csv");
  CHECK(load_manifest(dir / "i.csv", dir / "v.csv") == c);
}

TEST_CASE("canonical catalog reproduces the published database") {
  const Catalog c = canonical::canonical_catalog();
  CHECK(static_cast<std::int64_t>(c.videos().size()) == canonical::kPublishedTotalVideos);
  CHECK(c.videos().size() == 66069);

  const SideMap sides = canonical::canonical_sides();
  const ValidationReport report = validate_counts(c, canonical::published_count_table(), &sides);
  CHECK(report.all_pass());
  CHECK(report.failures() == 0);

  const CountTable counts = count_videos(c, &sides);
  for (Generator g : {Generator::Gaga, Generator::Live, Generator::Huny}) {
    CHECK(counts.at({Dataset::CremaD, g, true, Side::Total}) == 6120);
    CHECK(counts.at({Dataset::CremaD, g, false, Side::Total}) == 11718);
    CHECK(counts.at({Dataset::Ravdess, g, true, Side::Total}) == 1440);
    CHECK(counts.at({Dataset::Ravdess, g, false, Side::Total}) == 2745);
    std::int64_t eval_total = 0;
    for (Dataset d : {Dataset::CremaD, Dataset::Ravdess}) {
      for (bool self : {true, false}) eval_total += counts.at({d, g, self, Side::Evaluation});
    }
    CHECK(eval_total == 6486);
  }
}

TEST_CASE("empty catalog fails every nonzero cell") {
  const ValidationReport report = validate_counts(Catalog{}, canonical::published_count_table());
  CHECK_FALSE(report.all_pass());
  std::size_t nonzero = 0;
  for (const auto& [key, n] : canonical::published_count_table()) nonzero += n != 0;
  CHECK(report.failures() == nonzero);
}

TEST_CASE("tampered count names the failing cell") {
  CountTable expected = canonical::published_count_table();
  const CountKey key{Dataset::Ravdess, Generator::Live, false, Side::Total};
  expected[key] += 1;
  const SideMap sides = canonical::canonical_sides();
  const ValidationReport report = validate_counts(canonical::canonical_catalog(), expected, &sides);
  REQUIRE(report.failures() == 1);
  for (const auto& cell : report.cells) {
    if (!cell.pass()) {
      CHECK(cell.key == key);
      CHECK(describe(cell.key).find("RAVDESS") != std::string::npos);
    }
  }
}

TEST_CASE("cross assignment counts and determinism") {
  const Catalog base = test::self_only(10, 10);
  const Catalog c = build_cross_assignments(base, 8, 2, 42);
  std::map<std::string, int> per_driver;
  for (const auto& v : c.videos()) {
    if (v.is_self()) continue;
    CHECK(v.driver != v.target);
    ++per_driver[v.driver];
  }
  CHECK(per_driver.size() == 10);
  for (const auto& [driver, n] : per_driver) CHECK(n == 16);
  for (const auto& a : c.assignments()) {
    CHECK(a.targets.size() == 8);
    CHECK(std::set<std::string>(a.targets.begin(), a.targets.end()).size() == 8);
    CHECK(a.sampled_clips.size() == 2);
  }

  const Catalog none = build_cross_assignments(base, 8, 0, 42);
  for (const auto& v : none.videos()) CHECK(v.is_self());

  CHECK(build_cross_assignments(base, 8, 2, 42) == c);
  CHECK_FALSE(build_cross_assignments(base, 8, 2, 43) == c);
}
