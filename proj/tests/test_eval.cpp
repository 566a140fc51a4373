#include <gtest/gtest.h>

#include <random>

#include "extremeforge/eval.hpp"
#include "extremeforge/report.hpp"
#include "oracles.hpp"

using namespace extremeforge;

namespace {

BBox corners(int cls, double x1, double y1, double x2, double y2) {
  return BBox::from_corners(cls, x1, y1, x2, y2);
}

std::string image_name(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "img%02zu", i);
  return buf;
}

std::pair<Dataset, DetectionSet> to_dataset(const oracle::Fixture& fx) {
  Dataset ds;
  ds.class_names = default_class_names();
  DetectionSet dets;
  for (std::size_t i = 0; i < fx.gts.size(); ++i) {
    AnnotatedImage item;
    item.image_id = image_name(i);
    item.boxes = fx.gts[i];
    ds.items.push_back(item);
    dets[item.image_id] = fx.dets[i];
  }
  return {ds, dets};
}

MatchResult flags(std::initializer_list<bool> tp, std::size_t n_gt) {
  MatchResult m;
  m.n_gt = n_gt;
  double conf = 1.0;
  for (bool t : tp) {
    m.flags.push_back({conf, t});
    conf -= 0.01;
  }
  return m;
}

}  // namespace

TEST(Iou, BasicCases) {
  auto a = corners(0, 0.1, 0.1, 0.3, 0.3);
  EXPECT_EQ(iou(a, a), 1.0);
  EXPECT_EQ(iou(a, corners(0, 0.5, 0.5, 0.6, 0.6)), 0.0);
  EXPECT_EQ(iou(a, corners(0, 0.3, 0.1, 0.5, 0.3)), 0.0);  // touching edge
  // (0,0,2,2) vs (1,0,2,2) in corner form, scaled into the unit square
  EXPECT_NEAR(iou(corners(0, 0.0, 0.0, 0.2, 0.2), corners(0, 0.1, 0.0, 0.3, 0.2)), 1.0 / 3.0, 1e-12);
}

TEST(Iou, Symmetric) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 500; ++i) {
    auto a = oracle::random_box(rng, 0), b = oracle::random_box(rng, 0);
    EXPECT_DOUBLE_EQ(iou(a, b), iou(b, a));
    EXPECT_NEAR(iou(a, b), oracle::naive_iou(a, b), 1e-12);
  }
}

TEST(Match, Examples) {
  auto gt = corners(0, 0.2, 0.2, 0.4, 0.4);
  std::vector<BBox> gts{gt};
  std::vector<Detection> one{{gt, 0.9}};
  auto m = match_detections(one, gts, 0.5, 0);
  ASSERT_EQ(m.flags.size(), 1u);
  EXPECT_TRUE(m.flags[0].true_positive);
  EXPECT_EQ(m.n_gt, 1u);

  std::vector<Detection> two{{gt, 0.6}, {gt, 0.8}};
  m = match_detections(two, gts, 0.5, 0);
  ASSERT_EQ(m.flags.size(), 2u);
  EXPECT_EQ(m.flags[0].confidence, 0.8);
  EXPECT_TRUE(m.flags[0].true_positive);
  EXPECT_FALSE(m.flags[1].true_positive);

  // IoU 0.45: widen the detection so inter / union = 0.45
  auto wide = corners(0, 0.2, 0.2, 0.2 + 0.2 / 0.45, 0.4);
  ASSERT_NEAR(iou(wide, gt), 0.45, 1e-12);
  std::vector<Detection> low{{wide, 0.9}};
  EXPECT_FALSE(match_detections(low, gts, 0.5, 0).flags[0].true_positive);
}

TEST(Match, IgnoresOtherClasses) {
  auto gt = corners(1, 0.2, 0.2, 0.4, 0.4);
  std::vector<BBox> gts{gt};
  std::vector<Detection> dets{{corners(0, 0.2, 0.2, 0.4, 0.4), 0.9}};
  auto m0 = match_detections(dets, gts, 0.5, 0);
  EXPECT_EQ(m0.n_gt, 0u);
  ASSERT_EQ(m0.flags.size(), 1u);
  EXPECT_FALSE(m0.flags[0].true_positive);
  auto m1 = match_detections(dets, gts, 0.5, 1);
  EXPECT_EQ(m1.n_gt, 1u);
  EXPECT_TRUE(m1.flags.empty());
}

TEST(Match, PrefersHighestIou) {
  auto g1 = corners(0, 0.1, 0.1, 0.3, 0.3);
  auto g2 = corners(0, 0.12, 0.1, 0.32, 0.3);
  std::vector<BBox> gts{g1, g2};
  std::vector<Detection> dets{{g2, 0.9}, {g1, 0.8}};
  auto m = match_detections(dets, gts, 0.5, 0);
  EXPECT_TRUE(m.flags[0].true_positive);
  EXPECT_TRUE(m.flags[1].true_positive);
}

TEST(AveragePrecision, WorkedCase) {
  auto ap = average_precision(flags({true, false, true}, 2));
  ASSERT_TRUE(ap);
  EXPECT_NEAR(*ap, (51.0 + 50.0 * (2.0 / 3.0)) / 101.0, 1e-9);
}

TEST(AveragePrecision, EdgeCases) {
  EXPECT_EQ(average_precision(flags({true, true}, 2)), 1.0);
  EXPECT_EQ(average_precision(flags({}, 3)), 0.0);
  EXPECT_EQ(average_precision(flags({false}, 0)), 0.0);
  EXPECT_EQ(average_precision(flags({}, 0)), std::nullopt);
  // perfect precision but half recall: 51 recall points reachable
  EXPECT_NEAR(*average_precision(flags({true}, 2)), 51.0 / 101.0, 1e-12);
}

TEST(AveragePrecision, Monotonicity) {
  std::mt19937_64 rng(2);
  std::bernoulli_distribution coin(0.5);
  for (int trial = 0; trial < 300; ++trial) {
    MatchResult m;
    m.n_gt = 1 + rng() % 10;
    std::size_t tp = 0;
    const std::size_t n = rng() % 15;
    for (std::size_t i = 0; i < n; ++i) {
      bool t = coin(rng) && tp < m.n_gt;
      tp += t;
      m.flags.push_back({1.0 - 0.05 * static_cast<double>(i), t});
    }
    const double base = *average_precision(m);
    ASSERT_GE(base, 0.0);
    ASSERT_LE(base, 1.0);

    auto with_fp = m;
    with_fp.flags.push_back({-1.0, false});
    EXPECT_LE(*average_precision(with_fp), base + 1e-12);

    if (tp < m.n_gt) {
      auto with_tp = m;
      with_tp.flags.insert(with_tp.flags.begin(), ScoredFlag{2.0, true});
      EXPECT_GE(*average_precision(with_tp), base - 1e-12);
    }
  }
}

TEST(Evaluate, PerfectAndEmpty) {
  std::mt19937_64 rng(3);
  oracle::Fixture fx;
  for (int i = 0; i < 4; ++i) {
    std::vector<BBox> g;
    for (int c = 0; c < 3; ++c) g.push_back(oracle::random_box(rng, c));
    std::vector<Detection> d;
    for (const auto& b : g) d.push_back({b, 1.0});
    fx.gts.push_back(g);
    fx.dets.push_back(d);
  }
  auto [ds, dets] = to_dataset(fx);
  auto r = evaluate(ds, dets);
  EXPECT_EQ(r.map50, 1.0);
  EXPECT_EQ(r.map5095, 1.0);
  for (const auto& c : r.classes) {
    EXPECT_EQ(c.ap50, 1.0);
    EXPECT_EQ(c.ap5095, 1.0);
  }
  auto empty = evaluate(ds, DetectionSet{});
  EXPECT_EQ(empty.map50, 0.0);
  for (const auto& c : empty.classes) EXPECT_EQ(c.ap50, 0.0);
}

TEST(Evaluate, ClassWithoutGroundTruth) {
  Dataset ds;
  ds.class_names = default_class_names();
  ds.items.push_back({"a", {}, {}, {corners(0, 0.1, 0.1, 0.3, 0.3)}});
  DetectionSet dets;
  dets["a"] = {{corners(0, 0.1, 0.1, 0.3, 0.3), 0.9}};
  auto r = evaluate(ds, dets);
  EXPECT_EQ(r.classes[0].ap50, 1.0);
  EXPECT_EQ(r.classes[1].ap50, std::nullopt);
  EXPECT_EQ(r.map50, 1.0);  // classes with neither gts nor detections are excluded

  dets["a"].push_back({corners(2, 0.5, 0.5, 0.7, 0.7), 0.5});
  r = evaluate(ds, dets);
  EXPECT_EQ(r.classes[2].ap50, 0.0);
  EXPECT_DOUBLE_EQ(r.map50, 0.5);
}

TEST(Evaluate, Errors) {
  Dataset ds;
  ds.class_names = default_class_names();
  ds.items.push_back({"a", {}, {}, {}});
  DetectionSet dets;
  dets["ghost"] = {};
  try {
    evaluate(ds, dets);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownImageId);
  }
  EXPECT_THROW(evaluate(ds, {}, {0.5, 1.0}), Error);
}

TEST(Evaluate, MatchesBruteForceOracle) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    auto fx = oracle::random_fixture(rng);
    auto [ds, dets] = to_dataset(fx);
    auto r = evaluate(ds, dets);
    for (int c = 0; c < 3; ++c) {
      auto want50 = oracle::brute_force_ap(fx, c, 0.5);
      auto want5095 = oracle::brute_force_ap5095(fx, c);
      const auto& got = r.classes[static_cast<std::size_t>(c)];
      ASSERT_EQ(got.ap50.has_value(), want50.has_value()) << "trial " << trial;
      if (want50) {
        ASSERT_NEAR(*got.ap50, *want50, 1e-9) << "trial " << trial << " class " << c;
        ASSERT_NEAR(*got.ap5095, *want5095, 1e-9) << "trial " << trial << " class " << c;
      }
    }
  }
}

TEST(Evaluate, PartitionIrrelevance) {
  // Merging all images into one is only equivalent when boxes of different
  // images cannot interact, so place each image in its own tile.
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    auto fx = oracle::random_fixture(rng);
    const double tiles = static_cast<double>(fx.gts.size());
    auto squeeze = [&](BBox b, std::size_t i) {
      b.cx = (b.cx + static_cast<double>(i)) / tiles;
      b.w /= tiles;
      return b;
    };
    oracle::Fixture merged;
    merged.gts.resize(1);
    merged.dets.resize(1);
    for (std::size_t i = 0; i < fx.gts.size(); ++i) {
      for (auto& b : fx.gts[i]) b = squeeze(b, i);
      for (auto& d : fx.dets[i]) d.box = squeeze(d.box, i);
      merged.gts[0].insert(merged.gts[0].end(), fx.gts[i].begin(), fx.gts[i].end());
      merged.dets[0].insert(merged.dets[0].end(), fx.dets[i].begin(), fx.dets[i].end());
    }
    auto [ds, dets] = to_dataset(fx);
    auto [mds, mdets] = to_dataset(merged);
    auto a = evaluate(ds, dets), b = evaluate(mds, mdets);
    for (std::size_t c = 0; c < 3; ++c) {
      ASSERT_EQ(a.classes[c].ap50.has_value(), b.classes[c].ap50.has_value());
      if (a.classes[c].ap50) {
        EXPECT_NEAR(*a.classes[c].ap50, *b.classes[c].ap50, 1e-12);
        EXPECT_NEAR(*a.classes[c].ap5095, *b.classes[c].ap5095, 1e-12);
      }
    }
  }
}

TEST(Evaluate, JsonRoundTrip) {
  std::mt19937_64 rng(6);
  auto fx = oracle::random_fixture(rng);
  auto [ds, dets] = to_dataset(fx);
  auto r = evaluate(ds, dets);
  auto back = report_from_json(to_json(r));
  EXPECT_EQ(back.map50, r.map50);
  EXPECT_EQ(back.map5095, r.map5095);
  ASSERT_EQ(back.classes.size(), r.classes.size());
  for (std::size_t c = 0; c < r.classes.size(); ++c) {
    EXPECT_EQ(back.classes[c].ap50, r.classes[c].ap50);
    EXPECT_EQ(back.classes[c].name, r.classes[c].name);
  }
}

namespace {

EvalReport published(double m50, double m5095) {
  EvalReport r;
  r.map50 = m50;
  r.map5095 = m5095;
  return r;
}

}  // namespace

TEST(Report, ReproducesPublishedDeltas) {
  std::vector<LabeledReport> reports{
      {"base_cpt", published(0.832, 0.491)}, {"base_scpt", published(0.508, 0.278)},
      {"base_ext", published(0.502, 0.251)}, {"nst_cpt", published(0.864, 0.528)},
      {"nst_scpt", published(0.723, 0.419)}, {"nst_ext", published(0.612, 0.334)}};
  std::vector<std::pair<std::string, std::string>> pairs{
      {"base_cpt", "base_scpt"}, {"base_cpt", "base_ext"}, {"nst_cpt", "base_cpt"},
      {"nst_scpt", "base_scpt"}, {"nst_ext", "base_ext"}};
  auto rr = robustness_report(reports, pairs);
  ASSERT_EQ(rr.deltas.size(), 5u);
  const double want50[] = {0.324, 0.330, 0.032, 0.215, 0.110};
  const double want5095[] = {0.213, 0.240, 0.037, 0.141, 0.083};
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_NEAR(rr.deltas[i].map50, want50[i], 1e-12) << i;
    EXPECT_NEAR(rr.deltas[i].map5095, want5095[i], 1e-12) << i;
  }
  auto table = render_table(rr);
  EXPECT_NE(table.find("Minuend"), std::string::npos) << table;
  EXPECT_NE(table.find("   0.324"), std::string::npos) << table;
  EXPECT_NE(table.find("     0.083"), std::string::npos) << table;
}

TEST(Report, UnknownLabel) {
  std::vector<LabeledReport> reports{{"a", published(0.5, 0.3)}};
  std::vector<std::pair<std::string, std::string>> pairs{{"a", "b"}};
  try {
    robustness_report(reports, pairs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownLabel);
  }
}
