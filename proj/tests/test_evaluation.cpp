#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "avfp/evaluation.hpp"
#include "support.hpp"

using namespace avfp;

namespace {

using V = std::vector<double>;

ScoreRow row(std::int64_t id, const std::string& enroll, const std::string& test, int label, double score) {
  ScoreRow r;
  r.trial = Trial{id, Dataset::CremaD, Generator::Gaga, enroll, test, label};
  r.fused.score = score;
  r.fused.sub_scores = {score};
  r.models = {"m"};
  return r;
}

EvalReport report(const std::string& cond, const std::string& model, double auc_value) {
  EvalReport r;
  r.condition = cond;
  r.model = model;
  r.auc = auc_value;
  return r;
}

}  // namespace

TEST_CASE("AUC examples") {
  CHECK(auc(V{0.9, 0.8}, V{0.1, 0.2}) == 100.0);
  CHECK(auc(V{0.5, 0.5}, V{0.5}) == 50.0);
  CHECK(auc(V{0.1, 0.9}, V{0.5}) == 50.0);
  CHECK(auc(V{0.1}, V{0.9}) == 0.0);
  CHECK(mann_whitney_u2(V{0.9, 0.5}, V{0.5}) == 3);
  CHECK_THROWS_AS(auc(V{}, V{0.1}), Error);
  CHECK_THROWS_AS(auc(V{0.1}, V{}), Error);
  CHECK_THROWS(auc(V{std::nan("")}, V{0.1}));
}

TEST_CASE("ROC runs from the origin to (1, 1)") {
  const auto roc = roc_curve(V{0.9, 0.7, 0.4}, V{0.8, 0.3});
  REQUIRE(roc.size() >= 2);
  CHECK(roc.front() == std::pair{0.0, 0.0});
  CHECK(roc.back() == std::pair{1.0, 1.0});
  for (std::size_t i = 1; i < roc.size(); ++i) {
    CHECK(roc[i].first >= roc[i - 1].first);
    CHECK(roc[i].second >= roc[i - 1].second);
  }
}

TEST_CASE("delta formatting and tables") {
  CHECK(format_delta(-1.5) == "-1.5");
  CHECK(format_delta(0.0) == "0.0");
  CHECK(format_delta(-0.01) == "0.0");
  CHECK(format_delta(87.4 - 83.5) == "+3.9");
  CHECK(format_auc(88.0) == "88.0");

  const std::vector<EvalReport> reports{report("A->A", "m1", 90.0), report("A->B", "m1", 88.5),
                                        report("A->A", "m2", 80.0), report("A->B", "m2", 80.0)};
  const DeltaTable t = delta_table(reports, "A->A");
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0].delta == doctest::Approx(-1.5));
  CHECK(t.rows[1].delta == 0.0);

  const std::vector<DeltaTable> blocks{t};
  const std::string grid = render_delta_grid(blocks, {"m1", "m2", "m3"});
  CHECK(grid.find("-1.5") != std::string::npos);
  CHECK(grid.find("90.0") != std::string::npos);
  CHECK(grid.find("\xE2\x80\x94") != std::string::npos);  // m3 has no cells
}

TEST_CASE("evaluate skips unscorable trials") {
  ScoreTable t;
  t.rows = {row(1, "a", "b", 1, 0.9), row(2, "a", "c", 0, 0.1), row(3, "a", "d", 0, 0.95)};
  t.rows[2].fused.scorable = false;
  const EvalReport r = evaluate(t, "cond", "m");
  CHECK(r.auc == 100.0);
  CHECK(r.genuine_n == 1);
  CHECK(r.impostor_n == 1);
  CHECK(evaluate_submodel(t, 0, "cond").auc == 100.0);
}

TEST_CASE("fairness: one-sided attribute, partition and unknowns") {
  std::vector<IdentityRecord> ids{test::identity("f1", Dataset::CremaD, Gender::Female),
                                  test::identity("f2", Dataset::CremaD, Gender::Female)};
  ids[1].ethnicity = Ethnicity::Unknown;
  std::vector<AvatarVideo> videos{test::video("f1", "f1", 0), test::video("f1", "f1", 1),
                                  test::video("f2", "f2", 0), test::video("f2", "f2", 1),
                                  test::video("f1", "f2", 0), test::video("f2", "f1", 0)};
  const Catalog c(ids, videos);
  const auto id = [&](std::size_t i) { return videos[i].video_id; };

  ScoreTable t;
  t.rows = {row(1, id(0), id(1), 1, 0.9), row(2, id(0), id(4), 0, 0.2), row(3, id(2), id(3), 1, 0.7),
            row(4, id(2), id(5), 0, 0.8)};
  const std::vector<Attribute> attrs{Attribute::Gender, Attribute::Ethnicity};
  const FairnessTable f = fairness_report(t, c, attrs, "cond", "m");

  std::int64_t gender_rows = 0, total = 0;
  for (const auto& r : f.rows) {
    if (r.attribute != Attribute::Gender) continue;
    ++gender_rows;
    CHECK(r.subgroup == "female");
    REQUIRE(r.auc.has_value());
    CHECK(*r.auc == doctest::Approx(auc(V{0.9, 0.7}, V{0.2, 0.8})));
    total += r.genuine_n + r.impostor_n;
  }
  CHECK(gender_rows == 1);
  CHECK(total == 4);
  CHECK(f.unknown[1] == std::pair{Attribute::Ethnicity, std::int64_t{2}});
  CHECK(f.annotated[1] == std::pair{Attribute::Ethnicity, std::int64_t{2}});

  // A subgroup with only genuine trials has no AUC.
  ScoreTable g;
  g.rows = {row(1, id(0), id(1), 1, 0.9)};
  const FairnessTable only = fairness_report(g, c, attrs, "cond", "m");
  CHECK_FALSE(only.rows.front().auc.has_value());
}

TEST_CASE("report files are deterministic") {
  RenderInput in;
  EvalReport r = report("CREMA-D/GAGA->CREMA-D/GAGA", "m", 91.25);
  r.genuine_n = 3;
  r.impostor_n = 4;
  r.roc = {{0, 0}, {0.5, 1}, {1, 1}};
  in.reports = {r, report("CREMA-D/GAGA->CREMA-D/LIVE", "m", 85.0)};
  in.deltas = {delta_table(in.reports, "CREMA-D/GAGA->CREMA-D/GAGA")};

  test::TempDir dir("report");
  render_report(in, dir / "a");
  render_report(in, dir / "b");
  std::size_t files = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir / "a")) {
    if (!e.is_regular_file()) continue;
    ++files;
    const auto rel = std::filesystem::relative(e.path(), dir / "a");
    CHECK(test::read_file(e.path()) == test::read_file(dir / "b" / rel));
  }
  CHECK(files >= 3);
  CHECK(std::filesystem::exists(dir / "a" / "report.txt"));
  CHECK(render_text(in).find("-6.2") != std::string::npos);
  CHECK(file_safe("CREMA-D/GAGA->RAVDESS/GAGA") == "CREMA-D_GAGA__RAVDESS_GAGA");
}
