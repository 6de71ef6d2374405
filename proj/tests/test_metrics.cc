#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "aerocoop/metrics.h"
#include "oracles.h"

using namespace aerocoop;

namespace {

Box3D box_at(double x, double y, ObjectClass c = ObjectClass::kCar, double score = 1.0) {
  Box3D b;
  b.center = {x, y, -0.8};
  b.size = {4.5, 1.9, 1.6};
  b.label = c;
  b.score = score;
  return b;
}

// Stable score order, then a brute-force nearest search per prediction.
std::vector<std::pair<int, int>> greedy_oracle(const std::vector<Box3D>& preds,
                                               const std::vector<Box3D>& gts,
                                               ObjectClass cls, double d) {
  std::vector<int> order;
  for (int i = 0; i < static_cast<int>(preds.size()); ++i) {
    if (preds[i].label == cls) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return preds[a].score > preds[b].score; });
  std::vector<bool> used(gts.size(), false);
  std::vector<std::pair<int, int>> out;
  for (int p : order) {
    int best = -1;
    double best_d = d;
    for (int g = 0; g < static_cast<int>(gts.size()); ++g) {
      if (used[g] || gts[g].label != cls) continue;
      const double dist = std::hypot(preds[p].center.x() - gts[g].center.x(),
                                     preds[p].center.y() - gts[g].center.y());
      if (dist < best_d) {
        best_d = dist;
        best = g;
      }
    }
    if (best >= 0) {
      used[best] = true;
      out.emplace_back(p, best);
    }
  }
  return out;
}

}  // namespace

TEST(Match, ExactHit) {
  const std::vector<Box3D> p{box_at(10, 5)}, g{box_at(10, 5)};
  const MatchResult m = match(p, g, ObjectClass::kCar, 2.0);
  ASSERT_EQ(m.matches.size(), 1u);
  EXPECT_EQ(m.distances[0], 0.0);
  EXPECT_TRUE(m.unmatched_preds.empty());
  EXPECT_TRUE(m.unmatched_gts.empty());
}

TEST(Match, ThresholdStraddle) {
  const std::vector<Box3D> p{box_at(13, 5)}, g{box_at(10, 5)};
  EXPECT_TRUE(match(p, g, ObjectClass::kCar, 2.0).matches.empty());
  EXPECT_EQ(match(p, g, ObjectClass::kCar, 4.0).matches.size(), 1u);
}

TEST(Match, OtherClassIgnored) {
  const std::vector<Box3D> p{box_at(10, 5, ObjectClass::kBus)}, g{box_at(10, 5)};
  EXPECT_TRUE(match(p, g, ObjectClass::kCar, 2.0).matches.empty());
  EXPECT_TRUE(match(p, g, ObjectClass::kBus, 2.0).matches.empty());
}

TEST(Match, GreedyOracleOnRandomFixtures) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Box3D> p, g;
    for (int i = 0; i < 3; ++i) p.push_back(oracle::random_box(rng, 5.0));
    for (int i = 0; i < 2; ++i) g.push_back(oracle::random_box(rng, 5.0));
    for (auto& b : p) b.label = ObjectClass::kCar;
    for (auto& b : g) b.label = ObjectClass::kCar;
    for (double d : {0.5, 1.0, 2.0, 4.0}) {
      const MatchResult m = match(p, g, ObjectClass::kCar, d);
      EXPECT_EQ(m.matches, greedy_oracle(p, g, ObjectClass::kCar, d));
      EXPECT_EQ(m.matches.size() + m.unmatched_preds.size(), p.size());
      EXPECT_EQ(m.matches.size() + m.unmatched_gts.size(), g.size());
    }
  }
}

TEST(AveragePrecision, PerfectIsOne) {
  std::vector<Box3D> g;
  for (int i = 0; i < 7; ++i) g.push_back(box_at(10.0 * i, 3.0));
  for (double d : {0.5, 1.0, 2.0, 4.0}) {
    EXPECT_DOUBLE_EQ(*average_precision(g, g, ObjectClass::kCar, d), 1.0);
  }
}

TEST(AveragePrecision, NoPredictionsIsZero) {
  const std::vector<Box3D> g{box_at(1, 1)};
  EXPECT_EQ(*average_precision({}, g, ObjectClass::kCar, 2.0), 0.0);
}

TEST(AveragePrecision, NoGtIsUndefined) {
  const std::vector<Box3D> p{box_at(1, 1)};
  EXPECT_FALSE(average_precision(p, {}, ObjectClass::kCar, 2.0).has_value());
}

TEST(AveragePrecision, HalfRecallHandValue) {
  // Two GTs, one hit ranked first: recall 0.5 at precision 1, then a miss.
  const std::vector<Box3D> g{box_at(0, 0), box_at(50, 0)};
  const std::vector<Box3D> p{box_at(0, 0, ObjectClass::kCar, 0.9),
                             box_at(20, 0, ObjectClass::kCar, 0.5)};
  // Of the 90 kept grid points, 0.11..0.49 carry precision 1 and 0.50 takes
  // the last sample (0.5), as np.interp does at a repeated abscissa.
  const double want = (39 * 0.9 + 0.4) / 90 / 0.9;
  EXPECT_NEAR(*average_precision(p, g, ObjectClass::kCar, 2.0), want, 1e-12);
}

TEST(AveragePrecision, MatchesOracleOnRandomFixtures) {
  std::mt19937_64 rng(2);
  for (double d : {0.5, 1.0, 2.0, 4.0}) {
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<Box3D> p, g;
      const int np = 1 + trial % 9, ng = 1 + (trial / 9) % 6;
      for (int i = 0; i < np; ++i) p.push_back(oracle::random_box(rng, 8.0));
      for (int i = 0; i < ng; ++i) g.push_back(oracle::random_box(rng, 8.0));
      for (ObjectClass c : kAllClasses) {
        const auto want = oracle::average_precision(p, g, c, d);
        const auto got = average_precision(p, g, c, d);
        ASSERT_EQ(want.has_value(), got.has_value());
        if (want) EXPECT_NEAR(*got, *want, 1e-9);
      }
    }
  }
}

TEST(AveragePrecision, MultiSceneRanksJointly) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<SceneBoxes> scenes(3);
    std::vector<Box3D> all_p, all_g;
    for (int s = 0; s < 3; ++s) {
      for (int i = 0; i < 4; ++i) {
        Box3D b = oracle::random_box(rng, 6.0);
        b.center.x() += 1000.0 * s;
        scenes[s].preds.push_back(b);
        all_p.push_back(b);
      }
      for (int i = 0; i < 3; ++i) {
        Box3D b = oracle::random_box(rng, 6.0);
        b.center.x() += 1000.0 * s;
        scenes[s].gts.push_back(b);
        all_g.push_back(b);
      }
    }
    // Scenes far apart cannot cross-match, so one big scene is equivalent.
    for (ObjectClass c : kAllClasses) {
      const auto a = average_precision(scenes, c, 2.0);
      const auto b = average_precision(all_p, all_g, c, 2.0);
      ASSERT_EQ(a.has_value(), b.has_value());
      if (a) EXPECT_NEAR(*a, *b, 1e-12);
    }
  }
}

TEST(Interpolate, RightZero) {
  const std::vector<double> r{0.2, 0.6}, p{1.0, 0.5};
  const auto out = interpolate_precision(r, p, 11);
  ASSERT_EQ(out.size(), 11u);
  EXPECT_DOUBLE_EQ(out[0], 1.0);   // left clamp
  EXPECT_DOUBLE_EQ(out[4], 0.75);  // 0.4 halfway
  EXPECT_DOUBLE_EQ(out[6], 0.5);
  EXPECT_DOUBLE_EQ(out[7], 0.0);   // beyond the last recall
}

TEST(MapScore, Means) {
  ApTable ones, halves, mixed;
  for (ObjectClass c : kAllClasses) {
    for (int d = 0; d < 4; ++d) {
      ones[{c, d}] = 1.0;
      halves[{c, d}] = 0.5;
    }
  }
  EXPECT_EQ(map_score(ones), 1.0);
  EXPECT_EQ(map_score(halves), 0.5);
  mixed[{ObjectClass::kCar, 0}] = 0.2;
  mixed[{ObjectClass::kCar, 3}] = 0.9;
  mixed[{ObjectClass::kBus, 1}] = 0.4;
  EXPECT_NEAR(map_score(mixed), (0.2 + 0.9 + 0.4) / 3, 1e-12);
  EXPECT_THROW(map_score(ApTable{}), std::invalid_argument);
}

TEST(TpErrors, IdenticalBoxesZero) {
  std::vector<SceneBoxes> s(1);
  Box3D b = box_at(3, 4);
  b.yaw = 0.7;
  b.velocity = {2, 1};
  s[0].preds = {b};
  s[0].gts = {b};
  const TpErrors e = tp_errors(s, ObjectClass::kCar);
  for (double x : e.as_array()) EXPECT_NEAR(x, 0.0, 1e-12);
}

TEST(TpErrors, NoMatchAllOnes) {
  std::vector<SceneBoxes> s(1);
  s[0].gts = {box_at(3, 4)};
  const TpErrors e = tp_errors(s, ObjectClass::kCar);
  for (double x : e.as_array()) EXPECT_EQ(x, 1.0);
}

TEST(TpErrors, ScaleAndOrientation) {
  EXPECT_NEAR(1.0 - aligned_iou({4, 2, 1}, {4, 2, 2}), 0.5, 1e-12);
  EXPECT_NEAR(yaw_difference(M_PI, -M_PI), 0.0, 1e-12);
  EXPECT_NEAR(yaw_difference(3.0, -3.0), 2 * M_PI - 6.0, 1e-12);
  std::vector<SceneBoxes> s(1);
  Box3D p = box_at(0, 0), g = box_at(1.0, 0);
  p.size = {4, 2, 1};
  g.size = {4, 2, 2};
  p.yaw = M_PI;
  g.yaw = -M_PI;
  s[0].preds = {p};
  s[0].gts = {g};
  const TpErrors e = tp_errors(s, ObjectClass::kCar);
  EXPECT_NEAR(e.ate, 1.0, 1e-12);
  EXPECT_NEAR(e.ase, 0.5, 1e-12);
  EXPECT_NEAR(e.aoe, 0.0, 1e-12);
  EXPECT_EQ(e.aae, 0.0);
}

TEST(Nds, Examples) {
  EXPECT_DOUBLE_EQ(nds(1.0, TpErrors{0, 0, 0, 0, 0}), 1.0);
  EXPECT_DOUBLE_EQ(nds(0.0, TpErrors{1, 1, 1, 1, 1}), 0.0);
  EXPECT_NEAR(nds(0.607, TpErrors{0.355, 0.145, 0.544, 1.082, 0.315}), 0.568, 0.001);
}

TEST(Evaluate, PerfectReport) {
  std::vector<SceneBoxes> s(2);
  s[0].gts = {box_at(0, 0), box_at(20, 0, ObjectClass::kPedestrian)};
  s[1].gts = {box_at(5, 5, ObjectClass::kTruck)};
  for (auto& sc : s) sc.preds = sc.gts;
  const MetricsReport r = evaluate(s);
  EXPECT_DOUBLE_EQ(r.map, 1.0);
  EXPECT_EQ(r.ap.size(), 12u);
  ASSERT_EQ(r.undefined_classes.size(), 1u);
  EXPECT_EQ(r.undefined_classes[0], ObjectClass::kBus);
  EXPECT_NEAR(r.nds, 1.0, 1e-12);
}

TEST(MetricsConfig, Validate) {
  MetricsConfig c;
  EXPECT_NO_THROW(c.validate());
  c.tp_threshold = 3.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.dist_thresholds = {1.0, 0.5};
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Loss, SmoothL1) {
  EXPECT_DOUBLE_EQ(smooth_l1(0.5), 0.125);
  EXPECT_DOUBLE_EQ(smooth_l1(2.0), 1.5);
  EXPECT_DOUBLE_EQ(smooth_l1(-2.0), 1.5);
  EXPECT_DOUBLE_EQ(smooth_l1(0.0), 0.0);
}

namespace {

LossInputs loss_fixture(std::mt19937_64& rng) {
  LossInputs in;
  in.heatmap_target = Tensor3(6, 6, 2);
  in.heatmap_target(2, 3, 0) = 1.0;
  in.heatmap_target(2, 4, 0) = 0.6;
  in.heatmap_pred = Tensor3(6, 6, 2);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  for (double& x : in.heatmap_pred.data()) x = u(rng);
  Box3D a = box_at(1, 2);
  a.yaw = 0.5;
  Box3D b = box_at(1.3, 2.2);
  b.yaw = -0.2;
  in.pred_boxes = {b};
  in.target_boxes = {a};
  in.dir_logits = {{0.3, -0.4}};
  return in;
}

}  // namespace

TEST(Loss, PerfectTerms) {
  std::mt19937_64 rng(4);
  LossInputs in = loss_fixture(rng);
  in.pred_boxes = in.target_boxes;
  for (size_t i = 0; i < in.heatmap_pred.size(); ++i) {
    const double t = in.heatmap_target.data()[i];
    in.heatmap_pred.data()[i] = t == 1.0 ? 1.0 - 1e-7 : 1e-7;
  }
  const LossTerms t = total_loss(in);
  EXPECT_EQ(t.bbox, 0.0);
  EXPECT_LT(t.cls, 1e-4);
}

TEST(Loss, NonNegativeAndLinearInWeights) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const LossInputs in = loss_fixture(rng);
    const LossTerms t = total_loss(in);
    EXPECT_GE(t.bbox, 0.0);
    EXPECT_GE(t.cls, 0.0);
    EXPECT_GE(t.dir, 0.0);
    const LossTerms w = total_loss(in, {2.0, 0.5, 3.0});
    EXPECT_NEAR(w.total, 2.0 * t.bbox + 0.5 * t.cls + 3.0 * t.dir, 1e-12);
    EXPECT_NEAR(t.total, t.bbox + t.cls + t.dir, 1e-12);
  }
}

TEST(Loss, HandFocalValue) {
  LossInputs in;
  in.heatmap_target = Tensor3(1, 2, 1);
  in.heatmap_target(0, 0, 0) = 1.0;
  in.heatmap_target(0, 1, 0) = 0.5;
  in.heatmap_pred = Tensor3(1, 2, 1);
  in.heatmap_pred(0, 0, 0) = 0.8;
  in.heatmap_pred(0, 1, 0) = 0.3;
  const double want = -0.04 * std::log(0.8) - 0.0625 * 0.09 * std::log(0.7);
  EXPECT_NEAR(total_loss(in).cls, want, 1e-12);
}

TEST(Loss, RejectsBadProbabilities) {
  std::mt19937_64 rng(6);
  LossInputs in = loss_fixture(rng);
  in.heatmap_pred(0, 0, 0) = 1.0;
  EXPECT_THROW(total_loss(in), std::invalid_argument);
  in.heatmap_pred(0, 0, 0) = 0.0;
  EXPECT_THROW(total_loss(in), std::invalid_argument);
}
