#include <gtest/gtest.h>

#include <sstream>

#include "semcorr/semcorr.hpp"
#include "support/pck_oracle.hpp"

namespace semcorr {
namespace {

TEST(Pck, PerfectPredictionsScoreOne) {
  const std::vector<Point2> pts{{1, 2}, {30, 4}, {0, 0}};
  EXPECT_EQ(pck(pts, pts, 64, 64), 1.0);
}

TEST(Pck, HandComputedInclusiveBoundary) {
  const std::vector<Point2> truth{{50, 50}, {50, 50}, {50, 50}, {50, 50}};
  const std::vector<Point2> pred{{50, 50}, {60, 50}, {50, 60.5}, {53, 50}};
  EXPECT_EQ(pck(pred, truth, 100, 100), 0.75);
  EXPECT_EQ(pck(pred, truth, 100, 100, PckConfig{0.1, false}), 0.5);
}

TEST(Pck, SaturatesWhenThresholdCoversDiagonal) {
  const std::vector<Point2> truth{{0, 0}, {63, 0}};
  const std::vector<Point2> pred{{63, 63}, {0, 63}};
  EXPECT_EQ(pck(pred, truth, 64, 64, PckConfig{1.5}), 1.0);
}

TEST(Pck, UsesLongerImageSide) {
  const std::vector<Point2> truth{{0, 0}};
  const std::vector<Point2> pred{{0, 9}};
  EXPECT_EQ(pck(pred, truth, 100, 20), 1.0);   // T = 10
  EXPECT_EQ(pck(pred, truth, 20, 80), 0.0);    // T = 8
}

TEST(Pck, RejectsBadInput) {
  EXPECT_THROW(pck({}, {}, 10, 10), UsageError);
  EXPECT_THROW(pck({{0, 0}}, {{0, 0}, {1, 1}}, 10, 10), UsageError);
}

TEST(Pck, AgreesWithBruteForceOracle) {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto in = testing::random_pck_instance(rng);
    for (bool inclusive : {true, false}) {
      ASSERT_EQ(pck(in.predicted, in.truth, in.width, in.height, PckConfig{in.alpha, inclusive}),
                testing::pck_oracle(in, inclusive))
          << "trial " << trial;
    }
  }
}

TEST(Pck, TranslationInvariant) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    auto in = testing::random_pck_instance(rng);
    const double before = pck(in.predicted, in.truth, in.width, in.height, PckConfig{in.alpha});
    const double dx = static_cast<double>(rng.index(50)), dy = static_cast<double>(rng.index(50));
    for (auto& p : in.predicted) p = {p.x + dx, p.y + dy};
    for (auto& p : in.truth) p = {p.x + dx, p.y + dy};
    EXPECT_EQ(pck(in.predicted, in.truth, in.width, in.height, PckConfig{in.alpha}), before);
  }
}

TEST(PckCurve, MonotoneAndConsistentWithPointValue) {
  Rng rng(6);
  const std::vector<double> grid{0.02, 0.04, 0.06, 0.08, 0.1, 0.12, 0.14, 0.16, 0.18, 0.2};
  for (int trial = 0; trial < 100; ++trial) {
    const auto in = testing::random_pck_instance(rng);
    const auto curve = pck_curve(in.predicted, in.truth, in.width, in.height, grid);
    ASSERT_EQ(curve.size(), grid.size());
    for (std::size_t i = 1; i < curve.size(); ++i) ASSERT_GE(curve[i].pck, curve[i - 1].pck);
    EXPECT_EQ(curve[4].pck, pck(in.predicted, in.truth, in.width, in.height, PckConfig{0.1}));
  }
}

TEST(PckCurve, IdenticalPredictionsGiveConstantOne) {
  const std::vector<Point2> pts{{3, 3}, {7, 1}};
  for (const auto& p : pck_curve(pts, pts, 10, 10, {0.01, 0.5, 2.0})) EXPECT_EQ(p.pck, 1.0);
}

TEST(PckCurve, NonIncreasingGridRejected) {
  const std::vector<Point2> pts{{3, 3}};
  EXPECT_THROW(pck_curve(pts, pts, 10, 10, {0.1, 0.1}), UsageError);
  EXPECT_THROW(pck_curve(pts, pts, 10, 10, {0.2, 0.1}), UsageError);
  EXPECT_THROW(pck_curve(pts, pts, 10, 10, {}), UsageError);
  EXPECT_THROW(pck_curve(pts, pts, 10, 10, {0.0, 0.1}), UsageError);
}

// A class whose first `hits` of `n` keypoints are exact and the rest far off.
ClassResults make_class(const std::string& name, int hits, int n) {
  ClassResults c{name, {}};
  for (int i = 0; i < n; ++i) {
    c.outcomes.push_back({i < hits ? Point2{5, 5} : Point2{60, 60}, {5, 5}, 64, 64});
  }
  return c;
}

TEST(ClassReport, SingleClassMeanEqualsClass) {
  const auto r = class_report({make_class("disk", 3, 4)}, PckConfig{}, {});
  ASSERT_EQ(r.classes.size(), 1u);
  EXPECT_EQ(r.mean_pck, 0.75);
  EXPECT_EQ(r.classes[0].pck, 0.75);
}

TEST(ClassReport, MeanIsUnweightedOverClassesWithPooledKeypoints) {
  // 0.4 from 2/5 keypoints, 0.6 from 6/10: unweighted mean 0.5.
  const auto r = class_report({make_class("a", 2, 5), make_class("b", 6, 10)}, PckConfig{}, {0.05, 0.1});
  EXPECT_DOUBLE_EQ(r.classes[0].pck, 0.4);
  EXPECT_DOUBLE_EQ(r.classes[1].pck, 0.6);
  EXPECT_DOUBLE_EQ(r.mean_pck, 0.5);
  EXPECT_EQ(r.keypoints, 15u);
  ASSERT_EQ(r.curve.size(), 2u);
  EXPECT_DOUBLE_EQ(r.curve[1].mean_pck, r.mean_pck);
}

TEST(ClassReport, EmptyClassExcludedWithWarning) {
  std::vector<std::string> warnings;
  const auto r = class_report({make_class("a", 1, 2), ClassResults{"ghost", {}}}, PckConfig{}, {},
                              [&](std::string_view w) { warnings.emplace_back(w); });
  ASSERT_EQ(r.classes.size(), 1u);
  EXPECT_EQ(r.mean_pck, 0.5);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("ghost"), std::string::npos);
  EXPECT_THROW(class_report({ClassResults{"ghost", {}}}, PckConfig{}, {}), DataError);
  EXPECT_THROW(class_report({}, PckConfig{}, {}), UsageError);
  EXPECT_THROW(class_report({make_class("a", 1, 2)}, PckConfig{}, {0.2, 0.1}), UsageError);
}

TEST(ClassReport, JsonRoundTrip) {
  const auto r = class_report({make_class("disk", 1, 3), make_class("triangle", 2, 7)}, PckConfig{0.1, true},
                              {0.02, 0.1, 0.2});
  const auto text = to_json(r).dump();
  EXPECT_EQ(report_from_json(nlohmann::json::parse(text)), r);
  EXPECT_THROW(report_from_json(nlohmann::json::parse("{\"alpha\": 0.1}")), DataError);
}

TEST(ClassReport, TableAndCurveCsvLayout) {
  const std::vector<double> grid{0.02, 0.04, 0.06, 0.08, 0.1, 0.12, 0.14, 0.16, 0.18, 0.2};
  const auto r = class_report({make_class("disk", 1, 2), make_class("ellipse", 2, 2)}, PckConfig{}, grid);
  const auto table = format_report_table(r, "fused");
  EXPECT_NE(table.find("| disk | ellipse | mean"), std::string::npos);
  EXPECT_NE(table.find("fused"), std::string::npos);
  EXPECT_NE(table.find("75.00"), std::string::npos);
  EXPECT_NE(table.find("alpha = 0.1"), std::string::npos);

  std::istringstream csv(format_curve_csv(r));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "alpha,mean_pck,disk,ellipse");
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 10);
}

}  // namespace
}  // namespace semcorr
