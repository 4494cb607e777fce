#include <gtest/gtest.h>

#include <filesystem>

#include "bdqn/report.hpp"
#include "support.hpp"

using namespace bdqn;

namespace {

/// Writes a run directory with a config and a metrics file built from `means`.
void fixture_run(const std::string& dir, const std::string& label, std::uint64_t seed,
                 const std::vector<std::vector<double>>& returns_by_row, const std::string& env = "env.name = nchain\nenv.n = 10\n") {
  std::filesystem::create_directories(dir);
  bdqn::testing::spit(dir + "/config.cfg", env + "seed = " + std::to_string(seed) + "\n");
  if (!label.empty()) bdqn::testing::spit(dir + "/label", label + "\n");
  RunMetrics m;
  std::uint64_t frames = 0;
  for (const auto& rets : returns_by_row) {
    EvalRow row;
    row.frames = (frames += 1000);
    row.returns = rets;
    std::tie(row.mean, row.std) = mean_std(rets);
    m.rows.push_back(row);
  }
  bdqn::testing::spit(dir + "/metrics.csv", metrics_csv(m, returns_by_row.front().size()));
}

}  // namespace

TEST(NormalizedScore, Anchors) {
  EXPECT_EQ(normalized_score(-3.0, -3.0, 5.0), 0.0);
  EXPECT_EQ(normalized_score(5.0, -3.0, 5.0), 1.0);
  EXPECT_EQ(normalized_score(1.0, -3.0, 5.0), 0.5);
  EXPECT_THROW(normalized_score(1.0, 2.0, 2.0), ArgumentError);
  EXPECT_THROW(normalized_score(1.0, NAN, 2.0), ArgumentError);
}

TEST(NormalizedScore, AffineWithPositiveSlope) {
  RngStream rng(1);
  for (int i = 0; i < 200; ++i) {
    const double lo = rng.uniform(-5, 0), hi = rng.uniform(0.1, 5);
    const double a = rng.uniform(-10, 10), b = rng.uniform(-10, 10);
    EXPECT_EQ(a < b, normalized_score(a, lo, hi) < normalized_score(b, lo, hi));
  }
}

TEST(Profile, Examples) {
  auto p = performance_profile({2, 2, 2}, {1.0, 2.0});
  EXPECT_EQ(p[0].fraction, 1.0);
  EXPECT_EQ(p[1].fraction, 0.0);
  EXPECT_EQ(performance_profile({0, 1, 2, 3}, {1.5})[0].fraction, 0.5);
  EXPECT_THROW(performance_profile({}, {1.0}), ArgumentError);
  EXPECT_THROW(performance_profile({1.0}, {}), ArgumentError);
  EXPECT_THROW(performance_profile({1.0}, {1.0, 1.0}), ArgumentError);
  EXPECT_THROW(performance_profile({1.0}, {2.0, 1.0}), ArgumentError);
}

TEST(Profile, MatchesBruteForceRecountAndIsMonotone) {
  RngStream rng(2);
  std::vector<double> scores(1000);
  for (auto& s : scores) s = std::floor(rng.uniform(-0.5, 1.5) * 40.0) / 40.0;  // coarse grid puts scores on taus
  const auto grid = default_tau_grid();
  const auto p = performance_profile(scores, grid);
  ASSERT_EQ(p.size(), grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    int above = 0;
    for (double s : scores) above += s > grid[i] ? 1 : 0;
    EXPECT_EQ(p[i].tau, grid[i]);
    EXPECT_EQ(p[i].fraction, above / 1000.0);
    if (i > 0) {
      EXPECT_LE(p[i].fraction, p[i - 1].fraction);
    }
  }
}

TEST(Report, SingleRowMaxEqualsThatMean) {
  bdqn::testing::ScratchDir dir("report_single");
  fixture_run(dir / "r", "a", 1, {{1, 2, 3, 4, 5}});
  const auto out = report({dir / "r"}, dir / "out");
  ASSERT_EQ(out.table.rows.size(), 1u);
  EXPECT_EQ(out.table.rows[0].max_score, 3.0);
}

TEST(Report, HandComputedScoresCsv) {
  bdqn::testing::ScratchDir dir("report_fixture");
  // NChain N=10: optimal 10, random from the oracle.
  const double random_ref = make_env({"nchain", 10})->spec().random_return;
  fixture_run(dir / "r1", "np", 3, {{0, 0, 0, 0, 0}, {10, 10, 0, 0, 5}, {10, 0, 0, 0, 0}});
  const auto out = report({dir / "r1"}, dir / "out");
  const ScoreRow& row = out.table.rows.at(0);
  EXPECT_EQ(row.env, "nchain10");
  EXPECT_EQ(row.variant, "np");
  EXPECT_EQ(row.seed, 3u);
  EXPECT_EQ(row.max_score, 5.0);
  EXPECT_EQ(row.final_mean, 2.0);
  EXPECT_EQ(row.final_std, 4.0);
  EXPECT_DOUBLE_EQ(row.normalized, (5.0 - random_ref) / (10.0 - random_ref));
  const std::string expected = "env,variant,seed,max_score,final_mean,final_std,normalized\nnchain10,np,3,5,2,4," +
                               detail::format_double(row.normalized) + "\n";
  EXPECT_EQ(bdqn::testing::slurp(dir / "out/scores.csv"), expected);
}

TEST(Report, TwoVariantsProfiledAndLabelled) {
  bdqn::testing::ScratchDir dir("report_two");
  fixture_run(dir / "a1", "np", 1, {{10, 10, 10, 10, 10}});
  fixture_run(dir / "a2", "np", 2, {{0, 0, 0, 0, 0}});
  fixture_run(dir / "b1", "", 1, {{0, 0, 0, 0, 0}});
  const auto out = report({dir / "b1", dir / "a2", dir / "a1"}, dir / "out");
  ASSERT_EQ(out.table.rows.size(), 3u);
  EXPECT_EQ(out.table.rows[0].variant, "boot_dqn_np");  // no label file: config variant
  const std::string profile = bdqn::testing::slurp(dir / "out/profile.csv");
  EXPECT_NE(profile.find("np,0.5,0.5\n"), std::string::npos);
  EXPECT_NE(profile.find("boot_dqn_np,0.5,0\n"), std::string::npos);
  const std::string svg = bdqn::testing::slurp(dir / "out/curves_nchain10.svg");
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find(">np<"), std::string::npos);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

TEST(Report, RerunIsByteIdentical) {
  bdqn::testing::ScratchDir dir("report_rerun");
  fixture_run(dir / "a", "x", 1, {{1, 2, 3, 4, 5}, {2, 2, 2, 2, 2}});
  fixture_run(dir / "b", "y", 1, {{0, 0, 1, 0, 0}, {9, 9, 9, 9, 9}}, "env.name = deepsea\nenv.n = 4\n");
  report({dir / "a", dir / "b"}, dir / "o1");
  report({dir / "b", dir / "a"}, dir / "o2");
  for (const char* f : {"scores.csv", "profile.csv", "curves_nchain10.svg", "curves_deepsea4.svg"}) {
    EXPECT_EQ(bdqn::testing::slurp(dir / (std::string("o1/") + f)), bdqn::testing::slurp(dir / (std::string("o2/") + f))) << f;
  }
}

TEST(Report, MalformedMetricsNameFileAndLine) {
  bdqn::testing::ScratchDir dir("report_bad");
  fixture_run(dir / "r", "a", 1, {{1, 2, 3, 4, 5}, {1, 1, 1, 1, 1}});
  std::string csv = bdqn::testing::slurp(dir / "r/metrics.csv");
  csv.replace(csv.rfind("1,1,1"), 5, "1,x,1");
  bdqn::testing::spit(dir / "r/metrics.csv", csv);
  try {
    report({dir / "r"}, dir / "out");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("metrics.csv:3"), std::string::npos) << e.what();
  }
  bdqn::testing::spit(dir / "r/metrics.csv", "frames,mean\n");
  EXPECT_THROW(report({dir / "r"}, dir / "out"), ParseError);
  EXPECT_THROW(report({}, dir / "out"), ArgumentError);
}
