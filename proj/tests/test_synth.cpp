#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "posecut/posecut.hpp"
#include "support/fixtures.hpp"

using namespace posecut;

namespace {

const PairwiseModel& trained_model() {
  static const PairwiseModel m = fixture::train(fixture::training_scene());
  return m;
}

// Ground-truth person with a single annotated joint besides the target.
ProblemInstance one_source_scene(ClassId source, ClassId target) {
  SynthParams sp;
  sp.persons = 1;
  sp.seed = 9;
  ProblemInstance inst = generate(sp);
  auto& joints = (*inst.ground_truth)[0].joints;
  for (ClassId c = 0; c < joints.size(); ++c) {
    if (c != source && c != target) joints[c].reset();
  }
  return inst;
}

}  // namespace

TEST(Generate, EmptyScene) {
  SynthParams sp;
  sp.persons = 0;
  const auto inst = generate(sp);
  EXPECT_EQ(inst.size(), 0u);
  EXPECT_EQ(inst.num_classes(), 14u);
  ASSERT_TRUE(inst.ground_truth.has_value());
  EXPECT_TRUE(inst.ground_truth->empty());
}

TEST(Generate, NoiselessCandidatesSitOnJoints) {
  SynthParams sp;
  sp.persons = 1;
  sp.seed = 2;
  const auto inst = generate(sp);
  ASSERT_EQ(inst.size(), 14u);
  const auto& gt = (*inst.ground_truth)[0];
  for (const auto& d : inst.candidates) {
    const ClassId c = *d.argmax_class();
    EXPECT_EQ(d.location, *gt.joints[c]);
    EXPECT_EQ(d.unary[c], 1.0);
    EXPECT_EQ(*d.refine[c], (Vec2{0, 0}));
    for (ClassId c2 = 0; c2 < 14; ++c2) {
      if (c2 != c) {
        EXPECT_EQ(d.location + d.pair_offset(c, c2), *gt.joints[c2]);
      }
    }
  }
  EXPECT_EQ(inst.scale, 30.0);  // chin to top of head
}

TEST(Generate, SameSeedIsBitIdentical) {
  SynthParams sp;
  sp.persons = 4;
  sp.clutter_rate = 1.5;
  sp.jitter_sigma = 3;
  sp.offset_noise_sigma = 2;
  sp.seed = 77;
  EXPECT_EQ(save_instance(generate(sp)), save_instance(generate(sp)));
  SynthParams other = sp;
  other.seed = 78;
  EXPECT_NE(save_instance(generate(sp)), save_instance(generate(other)));
}

TEST(Generate, AlwaysValid) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    SynthParams sp;
    sp.persons = seed % 6;
    sp.clutter_rate = 0.5 * static_cast<double>(seed % 4);
    sp.jitter_sigma = static_cast<double>(seed % 5);
    sp.offset_noise_sigma = static_cast<double>(seed % 3);
    sp.seed = seed;
    const auto inst = generate(sp);
    EXPECT_NO_THROW(validate_instance(inst));
    EXPECT_EQ(load_instance(save_instance(inst)), inst);
    for (const auto& d : inst.candidates) {
      for (double u : d.unary) {
        EXPECT_GE(u, 0.0);
        EXPECT_LE(u, 1.0);
      }
    }
  }
}

TEST(Generate, RejectsNegativeNoise) {
  SynthParams sp;
  sp.jitter_sigma = -1;
  EXPECT_THROW(generate(sp), ValidationError);
  sp = {};
  sp.unary_sharpness = 0;
  EXPECT_THROW(generate(sp), ValidationError);
}

TEST(Generate, NoiselessSubsetsRecoveredExactly) {
  // Any 8 candidates over at most 4 classes: the exact solver groups them
  // exactly as the generator did.
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SynthParams sp;
    sp.persons = 2 + seed % 3;
    sp.seed = 300 + seed;
    const auto full = generate(sp);
    const std::vector<ClassId> classes = {static_cast<ClassId>(seed % 14), static_cast<ClassId>((seed + 5) % 14),
                                          static_cast<ClassId>((seed + 9) % 14)};
    std::vector<bool> keep(full.size(), false);
    std::size_t taken = 0;
    for (const auto& d : full.candidates) {
      const ClassId c = *d.argmax_class();
      if (taken < 8 && std::find(classes.begin(), classes.end(), c) != classes.end()) {
        keep[d.id] = true;
        ++taken;
      }
    }
    auto inst = detail::keep_candidates(full, keep);
    ClassSet allowed;
    for (ClassId c : classes) allowed.insert(c);
    for (auto& d : inst.candidates) d.allowed = allowed;
    const Solution s = solve_exact(inst, build_costs(inst, trained_model()));
    // Candidates are emitted person by person, 14 per person.
    std::vector<std::size_t> person(inst.size());
    std::size_t k = 0;
    for (const auto& d : full.candidates) {
      if (keep[d.id]) person[k++] = d.id / 14;
    }
    const std::set<std::size_t> persons(person.begin(), person.end());
    ASSERT_EQ(s.clusters.size(), persons.size()) << "seed " << seed;
    for (const auto& cl : s.clusters) {
      for (CandidateId d : cl) {
        EXPECT_EQ(person[d], person[cl.front()]) << "seed " << seed;
        EXPECT_EQ(s.label[d], inst.candidates[d].argmax_class());
      }
    }
  }
}

TEST(Scoremap, SingleSourceEqualsItsLayer) {
  const auto inst = one_source_scene(12, 13);
  ScoremapParams p;
  p.grid_step = 16;
  p.per_source = true;
  const auto map = render_pairwise_scoremap(inst, trained_model(), 13, 0, p);
  ASSERT_EQ(map.sources.size(), 1u);
  EXPECT_EQ(map.sources[0].first, 12u);
  EXPECT_EQ(map.combined.values, map.sources[0].second.values);
  EXPECT_EQ(map.combined.width, 32u);
}

TEST(Scoremap, ProductBelowEveryFactor) {
  SynthParams sp;
  sp.persons = 2;
  sp.seed = 5;
  const auto inst = generate(sp);
  ScoremapParams p;
  p.grid_step = 16;
  p.per_source = true;
  const auto map = render_pairwise_scoremap(inst, trained_model(), 0, 1, p);
  ASSERT_EQ(map.sources.size(), 13u);
  for (std::size_t k = 0; k < map.combined.values.size(); ++k) {
    const double v = map.combined.values[k];
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    for (const auto& [c, r] : map.sources) EXPECT_LE(v, r.values[k]);
  }
}

TEST(Scoremap, PeakNearTheTrueJoint) {
  std::size_t checked = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SynthParams sp;
    sp.persons = 2;
    sp.seed = 40 + seed;
    const auto inst = generate(sp);
    for (ClassId target : {0u, 5u, 9u, 13u}) {
      ScoremapParams p;
      p.grid_step = 4;
      const Vec2 truth = *(*inst.ground_truth)[0].joints[target];
      // Skeletons may reach past the frame edge; the raster only covers the frame.
      if (truth.x < 0 || truth.y < 0 || truth.x > p.frame || truth.y > p.frame) continue;
      const auto map = render_pairwise_scoremap(inst, trained_model(), target, 0, p);
      EXPECT_LE(distance(map.combined.argmax(), truth), 2.0 * p.grid_step)
          << "seed " << seed << " target " << target;
      ++checked;
    }
  }
  EXPECT_GE(checked, 10u);
}

TEST(Scoremap, NoAnchorJoints) {
  SynthParams sp;
  sp.persons = 1;
  auto inst = generate(sp);
  auto& joints = (*inst.ground_truth)[0].joints;
  for (ClassId c = 1; c < joints.size(); ++c) joints[c].reset();
  EXPECT_THROW(render_pairwise_scoremap(inst, trained_model(), 0, 0), NoAnchorJoints);
  EXPECT_THROW(render_pairwise_scoremap(inst, trained_model(), 1, 3), NoAnchorJoints);
}

TEST(Pgm, HeaderAndSize) {
  Raster r;
  r.width = 3;
  r.height = 2;
  r.values = {0.0, 0.5, 1.0, 0.25, 0.0, 0.1};
  const std::string pgm = write_pgm(r);
  const std::string header = "P5\n3 2\n255\n";
  ASSERT_EQ(pgm.substr(0, header.size()), header);
  EXPECT_EQ(pgm.size(), header.size() + 6);
  EXPECT_EQ(static_cast<unsigned char>(pgm[header.size() + 2]), 255);
  EXPECT_EQ(static_cast<unsigned char>(pgm[header.size()]), 0);
  const std::string stretched = write_pgm(r, true);
  EXPECT_EQ(static_cast<unsigned char>(stretched[header.size() + 2]), 255);
}

TEST(Svg, DrawsCandidatesAndSkeletons) {
  SynthParams sp;
  sp.persons = 2;
  sp.seed = 1;
  const auto inst = generate(sp);
  const std::string svg = svg_overlay(inst);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  std::size_t circles = 0;
  for (std::size_t pos = svg.find("<circle"); pos != std::string::npos; pos = svg.find("<circle", pos + 1)) ++circles;
  EXPECT_GE(circles, inst.size());
}
