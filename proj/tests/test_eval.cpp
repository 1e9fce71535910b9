#include <gtest/gtest.h>

#include <random>

#include "posecut/posecut.hpp"
#include "support/oracles.hpp"

using namespace posecut;

namespace {

std::vector<GroundTruthPose> random_gt(std::mt19937_64& rng, std::size_t persons, std::size_t nc) {
  std::uniform_real_distribution<double> root(50.0, 450.0);
  std::uniform_real_distribution<double> off(-60.0, 60.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<GroundTruthPose> gt;
  for (std::size_t p = 0; p < persons; ++p) {
    GroundTruthPose g;
    g.person_id = static_cast<int>(p);
    g.head_size = 30.0;
    g.joints.assign(nc, std::nullopt);
    const Vec2 r{root(rng), root(rng)};
    for (ClassId c = 0; c < nc; ++c) {
      if (u(rng) < 0.9) g.joints[c] = r + Vec2{off(rng), off(rng)};
    }
    gt.push_back(g);
  }
  return gt;
}

// Predictions near the truth with random scores and some missing joints.
PoseSet noisy_predictions(std::mt19937_64& rng, const std::vector<GroundTruthPose>& gt) {
  std::normal_distribution<double> jitter(0.0, 10.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PoseSet ps;
  for (const auto& g : gt) {
    Pose p;
    p.joints.assign(g.joints.size(), std::nullopt);
    for (ClassId c = 0; c < g.joints.size(); ++c) {
      if (g.joints[c] && u(rng) < 0.85) p.joints[c] = PoseJoint{*g.joints[c] + Vec2{jitter(rng), jitter(rng)}, u(rng)};
    }
    ps.poses.push_back(p);
  }
  return ps;
}

PoseSet exact_predictions(const std::vector<GroundTruthPose>& gt) {
  PoseSet ps;
  for (const auto& g : gt) {
    Pose p;
    for (const auto& j : g.joints) p.joints.push_back(j ? std::optional<PoseJoint>(PoseJoint{*j, 1.0}) : std::nullopt);
    ps.poses.push_back(p);
  }
  return ps;
}

}  // namespace

TEST(Assemble, SingleChin) {
  ProblemInstance inst;
  inst.classes = make_classes({"chin", "top_head"});
  inst.candidates.push_back(make_candidate(0, {3, 4}, 2));
  inst.candidates[0].unary = {0.8, 0.1};
  Solution s;
  s.label = {ClassId{0}};
  s.clusters = {{0}};
  const auto ps = assemble_poses(inst, s);
  ASSERT_EQ(ps.poses.size(), 1u);
  ASSERT_TRUE(ps.poses[0].joints[0].has_value());
  EXPECT_EQ(ps.poses[0].joints[0]->location, (Vec2{3, 4}));
  EXPECT_FALSE(ps.poses[0].joints[1].has_value());
}

TEST(Assemble, WeightedMeanOfTwoMembers) {
  ProblemInstance inst;
  inst.classes = make_classes({"chin"});
  inst.candidates.push_back(make_candidate(0, {0, 0}, 1));
  inst.candidates.push_back(make_candidate(1, {4, 0}, 1));
  inst.candidates[0].unary = {0.6};
  inst.candidates[1].unary = {0.2};
  Solution s;
  s.label = {ClassId{0}, ClassId{0}};
  s.clusters = {{0, 1}};
  const auto ps = assemble_poses(inst, s);
  ASSERT_EQ(ps.poses.size(), 1u);
  EXPECT_NEAR(ps.poses[0].joints[0]->location.x, 1.0, 1e-12);
  EXPECT_EQ(ps.poses[0].joints[0]->location.y, 0.0);
  EXPECT_EQ(ps.poses[0].joints[0]->score, 0.6);
}

TEST(Assemble, OnePosePerCluster) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 100; ++t) {
    const auto p = oracle::random_cost_problem(rng, 8, 3, 0.2);
    const Solution s = oracle::random_feasible_solution(rng, p.inst);
    const auto ps = assemble_poses(p.inst, s);
    EXPECT_EQ(ps.poses.size(), s.clusters.size());
    for (const auto& pose : ps.poses) {
      for (const auto& j : pose.joints) {
        if (j) {
          EXPECT_GE(j->score, 0.0);
          EXPECT_LE(j->score, 1.0);
        }
      }
    }
  }
}

TEST(AveragePrecision, AllPointsInterpolation) {
  EXPECT_DOUBLE_EQ(detail::average_precision({true, true}, 2), 1.0);
  EXPECT_DOUBLE_EQ(detail::average_precision({true, false, true}, 3), (1.0 + 2.0 / 3.0) / 3.0);
  EXPECT_DOUBLE_EQ(detail::average_precision({false, true}, 1), 0.5);
  EXPECT_DOUBLE_EQ(detail::average_precision({}, 4), 0.0);
}

TEST(EvaluateAp, PerfectPredictions) {
  std::mt19937_64 rng(2);
  const auto gt = random_gt(rng, 3, 14);
  const auto rep = evaluate_ap(exact_predictions(gt), gt, 14);
  for (ClassId c = 0; c < 14; ++c) {
    if (rep.counts[c].ground_truth > 0) {
      EXPECT_EQ(rep.ap[c], 1.0);
    }
  }
  EXPECT_EQ(rep.mean_ap, 1.0);
}

TEST(EvaluateAp, EmptyPredictions) {
  std::mt19937_64 rng(3);
  const auto gt = random_gt(rng, 2, 14);
  const auto rep = evaluate_ap(PoseSet{}, gt, 14);
  for (ClassId c = 0; c < 14; ++c) {
    if (rep.counts[c].ground_truth > 0) {
      EXPECT_EQ(rep.ap[c], 0.0);
    } else {
      EXPECT_FALSE(rep.ap[c].has_value());
    }
  }
  EXPECT_EQ(rep.mean_ap, 0.0);
}

TEST(EvaluateAp, SwappedWristHandComputed) {
  // Three people; the left wrists of persons 0 and 1 are swapped. Wrist
  // ranking by score is (miss 0.9, miss 0.8, hit 0.7): precision 1/3 at
  // the only hit, recall step 1/3, so AP = 1/9.
  std::vector<GroundTruthPose> gt(3);
  for (int p = 0; p < 3; ++p) {
    gt[p].person_id = p;
    gt[p].head_size = 30;
    gt[p].joints = {Vec2{100.0 * p, 0}, Vec2{100.0 * p, 40}, Vec2{100.0 * p + 20, 80}};
  }
  PoseSet ps = exact_predictions(gt);
  std::swap(ps.poses[0].joints[2]->location, ps.poses[1].joints[2]->location);
  ps.poses[0].joints[2]->score = 0.9;
  ps.poses[1].joints[2]->score = 0.8;
  ps.poses[2].joints[2]->score = 0.7;
  const auto rep = evaluate_ap(ps, gt, 3);
  EXPECT_EQ(rep.ap[0], 1.0);
  EXPECT_EQ(rep.ap[1], 1.0);
  EXPECT_NEAR(*rep.ap[2], 1.0 / 9.0, 1e-12);
  EXPECT_NEAR(rep.mean_ap, (2.0 + 1.0 / 9.0) / 3.0, 1e-12);
}

TEST(EvaluateAp, ThresholdIsTauHeadSize) {
  std::vector<GroundTruthPose> gt(1);
  gt[0].head_size = 20;
  gt[0].joints = {Vec2{0, 0}};
  PoseSet ps;
  ps.poses.push_back(Pose{{PoseJoint{{10, 0}, 1.0}}});
  EXPECT_EQ(evaluate_ap(ps, gt, 1, 0.5).ap[0], 1.0);
  ps.poses[0].joints[0]->location = {10.5, 0};
  EXPECT_EQ(evaluate_ap(ps, gt, 1, 0.5).ap[0], 0.0);
  EXPECT_THROW(evaluate_ap(ps, gt, 1, 0.0), ValidationError);
}

TEST(EvaluateAp, ScoreRescalingInvariant) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 50; ++t) {
    const auto gt = random_gt(rng, 2 + t % 4, 6);
    PoseSet ps = noisy_predictions(rng, gt);
    const auto a = evaluate_ap(ps, gt, 6);
    for (auto& p : ps.poses) {
      for (auto& j : p.joints) {
        if (j) j->score *= 0.25;
      }
    }
    const auto b = evaluate_ap(ps, gt, 6);
    EXPECT_EQ(a.ap, b.ap);
  }
}

TEST(EvaluateAp, FalsePositivePoseNeverHelps) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    const auto gt = random_gt(rng, 1 + t % 5, 8);
    PoseSet ps = noisy_predictions(rng, gt);
    const auto before = evaluate_ap(ps, gt, 8);
    Pose fp;
    for (ClassId c = 0; c < 8; ++c) fp.joints.push_back(PoseJoint{{5000.0 + 10 * c, 5000.0}, u(rng)});
    ps.poses.insert(ps.poses.begin() + static_cast<std::ptrdiff_t>(t % (ps.poses.size() + 1)), fp);
    const auto after = evaluate_ap(ps, gt, 8);
    for (ClassId c = 0; c < 8; ++c) {
      if (before.ap[c]) {
        EXPECT_LE(*after.ap[c], *before.ap[c]) << "trial " << t << " class " << c;
      }
    }
  }
}

TEST(EvaluateAp, MeanIsExactMeanOfClasses) {
  std::mt19937_64 rng(6);
  const auto gt = random_gt(rng, 4, 10);
  const auto rep = evaluate_ap(noisy_predictions(rng, gt), gt, 10);
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& ap : rep.ap) {
    if (ap) {
      EXPECT_GE(*ap, 0.0);
      EXPECT_LE(*ap, 1.0);
      sum += *ap;
      ++n;
    }
  }
  EXPECT_DOUBLE_EQ(rep.mean_ap, sum / static_cast<double>(n));
}

TEST(Report, JsonCarriesEveryClass) {
  SynthParams sp;
  sp.persons = 2;
  sp.seed = 3;
  const auto inst = generate(sp);
  const auto rep = evaluate_ap(PoseSet{}, *inst.ground_truth, inst.num_classes());
  const auto doc = nlohmann::json::parse(report_to_json(rep, inst, 0.5));
  EXPECT_EQ(doc["mAP"], 0.0);
  EXPECT_EQ(doc["chin"], 0.0);
  EXPECT_EQ(doc["counts"]["chin"]["gt"], 2);
}
