#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "posecut/posecut.hpp"

using namespace posecut;

namespace {

ProblemInstance roster(std::vector<std::string> names) {
  ProblemInstance inst;
  inst.classes = make_classes(names);
  inst.scale = 30.0;
  return inst;
}

Candidate& add(ProblemInstance& inst, Vec2 at, std::vector<double> unary) {
  Candidate d = make_candidate(inst.size(), at, inst.num_classes());
  d.unary = std::move(unary);
  inst.candidates.push_back(std::move(d));
  return inst.candidates.back();
}

ProblemInstance random_instance(std::mt19937_64& rng, std::size_t n, std::size_t nc) {
  std::vector<std::string> names;
  for (std::size_t c = 0; c < nc; ++c) names.push_back("c" + std::to_string(c));
  ProblemInstance inst = roster(names);
  std::uniform_real_distribution<double> pos(0.0, 120.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> unary(nc);
    for (auto& p : unary) p = std::round(u(rng) * 20.0) / 20.0;  // coarse values force ties
    add(inst, {pos(rng), pos(rng)}, unary);
  }
  return inst;
}

}  // namespace

TEST(Refine, ZeroOffsetKeepsLocation) {
  auto inst = roster({"chin", "top_head"});
  add(inst, {10, 10}, {0.9, 0.1}).refine[0] = Vec2{0, 0};
  EXPECT_EQ(refine_locations(inst).candidates[0].location, (Vec2{10, 10}));
}

TEST(Refine, AddsArgmaxOffset) {
  auto inst = roster({"chin", "top_head"});
  auto& d = add(inst, {10, 10}, {0.9, 0.1});
  d.refine[0] = Vec2{2, -3};
  d.refine[1] = Vec2{100, 100};
  const auto out = refine_locations(inst);
  EXPECT_EQ(out.candidates[0].location, (Vec2{12, 7}));
  EXPECT_EQ(out.candidates[0].unary, inst.candidates[0].unary);
  EXPECT_EQ(out.candidates[0].pair, inst.candidates[0].pair);
}

TEST(Refine, MissingOffsetNamesCandidateAndClass) {
  auto inst = roster({"chin", "top_head"});
  add(inst, {10, 10}, {0.2, 0.7}).refine[0] = Vec2{1, 1};
  try {
    refine_locations(inst);
    FAIL() << "expected MissingOffset";
  } catch (const MissingOffset& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("candidate 0"), std::string::npos) << msg;
    EXPECT_NE(msg.find("top_head"), std::string::npos) << msg;
  }
}

TEST(Refine, SyntheticRefinementLandsOnTrueJoints) {
  SynthParams p;
  p.persons = 2;
  p.jitter_sigma = 5.0;
  p.seed = 4;
  const auto inst = generate(p);
  const auto out = refine_locations(inst);
  const auto& gt = *inst.ground_truth;
  for (const auto& d : out.candidates) {
    const ClassId c = *d.argmax_class();
    bool on_joint = false;
    for (const auto& g : gt) on_joint = on_joint || distance(*g.joints[c], d.location) < 1e-9;
    EXPECT_TRUE(on_joint) << "candidate " << d.id;
  }
}

TEST(Nms, CloseCandidatesKeepTheStronger) {
  auto inst = roster({"a"});
  add(inst, {0, 0}, {0.8});
  add(inst, {5, 0}, {0.9});
  NmsParams p;
  p.radius = 24;
  const auto out = nms(inst, p);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out.candidates[0].unary[0], 0.9);
  EXPECT_EQ(out.candidates[0].id, 0u);
}

TEST(Nms, DistantCandidatesBothSurvive) {
  auto inst = roster({"a"});
  add(inst, {0, 0}, {0.8});
  add(inst, {50, 0}, {0.9});
  EXPECT_EQ(nms(inst, NmsParams{}).size(), 2u);
}

TEST(Nms, TiesGoToLowerId) {
  auto inst = roster({"a"});
  add(inst, {0, 0}, {0.5});
  add(inst, {3, 0}, {0.5});
  const auto out = nms(inst, NmsParams{});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out.candidates[0].location, (Vec2{0, 0}));
}

TEST(Nms, GridWithSinglePeak) {
  auto inst = roster({"a"});
  for (int j = 0; j < 3; ++j) {
    for (int i = 0; i < 3; ++i) {
      const double p = (i == 1 && j == 1) ? 0.95 : 0.3 + 0.05 * (i + 3 * j);
      add(inst, {8.0 * i, 8.0 * j}, {p});
    }
  }
  NmsParams params;
  params.radius = 12;
  const auto out = nms(inst, params);
  // Every other grid point lies 8 or 11.3 px from the centre.
  for (const auto& d : inst.candidates) EXPECT_LE(distance(d.location, Vec2{8, 8}), 12.0);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out.candidates[0].location, (Vec2{8, 8}));
}

TEST(Nms, CompetesOnlyForArgmaxClass) {
  auto inst = roster({"a", "b"});
  add(inst, {0, 0}, {0.9, 0.0});
  add(inst, {4, 0}, {0.3, 0.8});  // close to the first but a "b" detection
  EXPECT_EQ(nms(inst, NmsParams{}).size(), 2u);
}

TEST(Nms, Idempotent) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 100; ++t) {
    const auto inst = random_instance(rng, 40, 3);
    NmsParams p;
    p.radius = 15;
    p.max_total = 25;
    const auto once = nms(inst, p);
    EXPECT_EQ(nms(once, p), once) << "trial " << t;
    EXPECT_LE(once.size(), 25u);
  }
}

TEST(Split, PaperThresholdExample) {
  auto inst = roster({"wrist", "elbow", "knee"});
  auto& d = add(inst, {10, 20}, {0.6, 0.5, 0.1});
  d.refine[0] = Vec2{1, 1};
  d.pair_offset(0, 1) = Vec2{3, 4};
  const auto out = split_detections(inst, 0.4);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out.candidates[0].allowed, ClassSet::of(0));
  EXPECT_EQ(out.candidates[1].allowed, ClassSet::of(1));
  for (const auto& c : out.candidates) {
    EXPECT_EQ(c.location, d.location);
    EXPECT_EQ(c.unary, d.unary);
    EXPECT_EQ(c.refine, d.refine);
    EXPECT_EQ(c.pair, d.pair);
  }
  EXPECT_EQ(out.candidates[1].id, 1u);
}

TEST(Split, SingleClassAboveThresholdUnchanged) {
  auto inst = roster({"wrist", "elbow", "knee"});
  add(inst, {0, 0}, {0.6, 0.1, 0.05});
  EXPECT_EQ(split_detections(inst, 0.4), inst);
}

TEST(Split, AllBelowThresholdUnchanged) {
  auto inst = roster({"wrist", "elbow"});
  add(inst, {0, 0}, {0.3, 0.2});
  add(inst, {9, 0}, {0.1, 0.4});  // not strictly above s
  const auto out = split_detections(inst, 0.4);
  EXPECT_EQ(out, inst);
  EXPECT_EQ(out.size(), 2u);
}

TEST(Split, NeverShrinksNorAltersValues) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 50; ++t) {
    const auto inst = random_instance(rng, 20, 4);
    const auto out = split_detections(inst, 0.4);
    ASSERT_GE(out.size(), inst.size());
    for (const auto& c : out.candidates) {
      const bool matches = std::any_of(inst.candidates.begin(), inst.candidates.end(), [&](const Candidate& o) {
        return o.location == c.location && o.unary == c.unary;
      });
      EXPECT_TRUE(matches);
    }
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out.candidates[i].id, i);
  }
}

TEST(Split, RejectsThresholdOutsideUnitInterval) {
  auto inst = roster({"a"});
  EXPECT_THROW(split_detections(inst, 0.0), ValidationError);
  EXPECT_THROW(split_detections(inst, 1.0), ValidationError);
}

TEST(SelectTop, KeepsHighestUnaries) {
  std::mt19937_64 rng(9);
  auto inst = random_instance(rng, 150, 3);
  const auto out = select_top(inst, 100);
  ASSERT_EQ(out.size(), 100u);
  double min_kept = 1.0;
  for (const auto& d : out.candidates) min_kept = std::min(min_kept, d.max_unary());
  std::vector<double> all;
  for (const auto& d : inst.candidates) all.push_back(d.max_unary());
  std::sort(all.begin(), all.end(), std::greater<>());
  for (std::size_t i = 100; i < all.size(); ++i) EXPECT_LE(all[i], min_kept);
}

TEST(SelectTop, SmallInstanceUnchanged) {
  std::mt19937_64 rng(10);
  const auto inst = random_instance(rng, 10, 2);
  EXPECT_EQ(select_top(inst, 100), inst);
}

TEST(SelectTop, EqualUnariesKeepLowestIds) {
  auto inst = roster({"a"});
  for (int i = 0; i < 150; ++i) add(inst, {double(i), 0}, {0.5});
  const auto out = select_top(inst, 100);
  ASSERT_EQ(out.size(), 100u);
  for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(out.candidates[i].location.x, double(i));
  EXPECT_THROW(select_top(inst, 0), ValidationError);
}

TEST(SelectTopPerPart, CapsEachArgmaxClass) {
  auto inst = roster({"a", "b"});
  for (int i = 0; i < 5; ++i) add(inst, {double(i), 0}, {0.5 + 0.01 * i, 0.1});
  add(inst, {0, 9}, {0.1, 0.4});
  const auto out = select_top_per_part(inst, 2);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out.candidates[0].location.x, 3.0);
  EXPECT_EQ(out.candidates[1].location.x, 4.0);
}

TEST(Preprocess, RespectsBudget) {
  SynthParams p;
  p.persons = 6;
  p.clutter_rate = 3;
  p.seed = 2;
  PreprocessParams pp;
  pp.nms.refine_before_nms = false;
  pp.nms.max_total = 60;
  const auto out = preprocess(generate(p), pp);
  EXPECT_EQ(out.size(), 60u);
}
