#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>

#include "avfp/canonical.hpp"
#include "avfp/protocol.hpp"
#include "support.hpp"

using namespace avfp;

namespace {

std::map<Dataset, std::pair<int, int>> side_sizes(const Catalog& c, const Split& s) {
  std::map<Dataset, std::pair<int, int>> out;
  for (const auto& id : s.development) ++out[c.identity(id).dataset].first;
  for (const auto& id : s.evaluation) ++out[c.identity(id).dataset].second;
  return out;
}

Split all_eval(const Catalog& c) {
  Split s;
  for (const auto& i : c.identities()) s.evaluation.insert(i.id);
  return s;
}

}  // namespace

TEST_CASE("canonical split sizes and identity disjointness") {
  const Catalog c = canonical::canonical_catalog();
  SplitOptions o;
  o.seed = 5;
  const SplitReport r = make_split(c, o);
  const auto sizes = side_sizes(c, r.split);
  CHECK(sizes.at(Dataset::CremaD) == std::pair{61, 24});
  CHECK(sizes.at(Dataset::Ravdess) == std::pair{16, 8});
  for (const auto& id : r.split.evaluation) CHECK(r.split.development.count(id) == 0);
  CHECK_NOTHROW(check_split(r.split, c));

  CHECK(make_split(c, o).split.evaluation == r.split.evaluation);
}

TEST_CASE("two identities split one and one") {
  const Catalog c = test::self_only(2, 2);
  const SplitReport r = make_split(c, SplitOptions{});
  CHECK(r.split.development.size() == 1);
  CHECK(r.split.evaluation.size() == 1);
}

TEST_CASE("split JSON round trip and overlap rejection") {
  const Catalog c = build_cross_assignments(test::self_only(10, 3), 8, 1, 2);
  const SplitReport r = make_split(c, SplitOptions{});
  test::TempDir dir("split");
  save_split_json(r.split, dir / "s.json");
  const Split back = load_split_json(dir / "s.json");
  CHECK(back.development == r.split.development);
  CHECK(back.evaluation == r.split.evaluation);

  Split bad = r.split;
  bad.development.insert(*bad.evaluation.begin());
  CHECK_THROWS(check_split(bad, c));
}

TEST_CASE("one identity with two self videos") {
  const Catalog c = test::self_only(1, 2);
  const Split s = all_eval(c);
  const TrialList ex = generate_trials(c, s, TrialConvention::ExcludeIdentical);
  const TrialCount n = ex.counts.at({Dataset::CremaD, Generator::Gaga});
  CHECK(n.genuine == 2);
  CHECK(n.impostor == 0);
  const TrialList in = generate_trials(c, s, TrialConvention::IncludeIdentical);
  CHECK(in.counts.at({Dataset::CremaD, Generator::Gaga}).genuine == 4);
}

TEST_CASE("excluding identical pairs removes one genuine trial per self video") {
  const Catalog c = build_cross_assignments(test::self_only(6, 4), 5, 2, 3);
  const Split s = all_eval(c);
  const TrialList ex = generate_trials(c, s, TrialConvention::ExcludeIdentical);
  const TrialList in = generate_trials(c, s, TrialConvention::IncludeIdentical);
  std::int64_t self = 0;
  for (const auto& v : c.videos()) self += v.is_self();
  const auto key = TrialCountKey{Dataset::CremaD, Generator::Gaga};
  CHECK(in.counts.at(key).genuine - ex.counts.at(key).genuine == self);
  CHECK(in.counts.at(key).impostor == ex.counts.at(key).impostor);

  for (std::size_t i = 0; i < ex.trials.size(); ++i) {
    const Trial& t = ex.trials[i];
    CHECK(t.trial_id == static_cast<std::int64_t>(i + 1));
    const auto label = trial_label(c.video(t.enroll_video), c.video(t.test_video));
    REQUIRE(label.has_value());
    CHECK(*label == t.label);
    CHECK(t.enroll_video != t.test_video);
  }
}

TEST_CASE("impostor trials pair a target's self video with a foreign-driven cross video") {
  const Catalog c = build_cross_assignments(test::self_only(4, 2), 3, 1, 1);
  for (const auto& t : generate_trials(c, all_eval(c), TrialConvention::ExcludeIdentical).trials) {
    const AvatarVideo& e = c.video(t.enroll_video);
    const AvatarVideo& v = c.video(t.test_video);
    CHECK(e.is_self());
    if (t.label == 1) {
      CHECK(v.is_self());
      CHECK(v.target == e.target);
    } else {
      CHECK_FALSE(v.is_self());
      CHECK(v.target == e.target);
      CHECK(v.driver != e.target);
    }
  }
}

TEST_CASE("trials are confined to the evaluation side") {
  const Catalog c = build_cross_assignments(test::self_only(10, 2), 8, 1, 4);
  const Split s = make_split(c, SplitOptions{}).split;
  for (const auto& t : generate_trials(c, s, TrialConvention::ExcludeIdentical).trials) {
    CHECK(on_side(c.video(t.enroll_video), s.evaluation));
    CHECK(on_side(c.video(t.test_video), s.evaluation));
  }
}

TEST_CASE("trials CSV round trip") {
  const Catalog c = build_cross_assignments(test::self_only(4, 2), 3, 1, 1);
  const TrialList l = generate_trials(c, all_eval(c), TrialConvention::ExcludeIdentical);
  test::TempDir dir("trials");
  save_trials_csv(l.trials, dir / "t.csv");
  CHECK(load_trials_csv(dir / "t.csv") == l.trials);
}

TEST_CASE("experiment matrix") {
  std::vector<AvatarVideo> videos;
  std::vector<IdentityRecord> ids;
  for (Dataset d : {Dataset::CremaD, Dataset::Ravdess}) {
    for (int i = 0; i < 2; ++i) {
      const std::string id = std::string(to_string(d)) + std::to_string(i);
      ids.push_back(test::identity(id, d));
      for (Generator g : kAllGenerators) videos.push_back(test::video(id, id, 0, g, d));
    }
  }
  const Catalog c(ids, videos);

  const RunPlan intra = experiment_matrix(intra_intra_specs({Dataset::CremaD, Dataset::Ravdess},
                                                            {kAllGenerators.begin(), kAllGenerators.end()}),
                                          c);
  CHECK(intra.eval_jobs.size() == 6);
  CHECK(intra.train_jobs.size() == 6);

  // g->g, g->two others, All->g: the g->* rows share one training job.
  const RunPlan row = experiment_matrix(cross_generator_block(Dataset::CremaD, Generator::Gaga), c);
  CHECK(row.eval_jobs.size() == 4);
  CHECK(row.train_jobs.size() == 2);
  CHECK(row.eval_jobs.front().condition == "CREMA-D/GAGA->CREMA-D/GAGA");

  const auto cross = cross_dataset_block(Dataset::CremaD, Generator::Live);
  REQUIRE(cross.size() == 2);
  CHECK(cross[1].eval_dataset == Dataset::Ravdess);
  CHECK(reference_condition(cross[1]) == "CREMA-D/LIVE->CREMA-D/LIVE");

  CHECK(experiment_matrix({}, c).eval_jobs.empty());
  CHECK(experiment_matrix({}, c).train_jobs.empty());

  ExperimentSpec bad;
  bad.scenario = Scenario::IntraIntra;
  bad.train_generator = Generator::Gaga;
  bad.eval_generator = Generator::Live;
  CHECK_THROWS(experiment_matrix({bad}, c));
  ExperimentSpec absent;
  absent.train_dataset = absent.eval_dataset = Dataset::Ravdess;
  absent.train_generator = Generator::Gaga;
  CHECK_NOTHROW(experiment_matrix({absent}, c));
  CHECK_THROWS(experiment_matrix({absent}, test::self_only(2, 1)));
}
