#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "posecut/error.hpp"
#include "posecut/model.hpp"
#include "posecut/rng.hpp"

namespace posecut {

struct SkeletonJoint {
  std::string name;
  Vec2 offset;  // from the person root (pelvis), pixels, y down
};

// 14 joints: ankles, knees, hips, wrists, elbows, shoulders, chin, top of
// head. Standing height about 260 px; head segment 30 px.
inline std::vector<SkeletonJoint> default_skeleton() {
  return {
      {"r_ankle", {-20, 110}},   {"r_knee", {-18, 55}},     {"r_hip", {-16, 0}},       {"l_hip", {16, 0}},
      {"l_knee", {18, 55}},      {"l_ankle", {20, 110}},    {"r_wrist", {-44, -25}},   {"r_elbow", {-40, -65}},
      {"r_shoulder", {-28, -105}}, {"l_shoulder", {28, -105}}, {"l_elbow", {40, -65}},  {"l_wrist", {44, -25}},
      {"chin", {0, -120}},       {"top_head", {0, -150}},
  };
}

struct SynthParams {
  std::size_t persons = 3;
  std::vector<SkeletonJoint> skeleton = default_skeleton();
  double jitter_sigma = 0.0;        // pixels
  double clutter_rate = 0.0;        // expected false detections per class
  double unary_sharpness = 10.0;    // Gaussian decay length, pixels
  double offset_noise_sigma = 0.0;  // pixels
  std::uint64_t seed = 0;
  double frame = 512.0;
  double head_size = 0.0;           // 0: top_head-chin distance, else 30 px
};

inline double skeleton_head_size(const SynthParams& p) {
  if (p.head_size > 0.0) return p.head_size;
  const SkeletonJoint* top = nullptr;
  const SkeletonJoint* chin = nullptr;
  for (const auto& j : p.skeleton) {
    if (j.name == "top_head") top = &j;
    if (j.name == "chin") chin = &j;
  }
  return top && chin ? distance(top->offset, chin->offset) : 30.0;
}

inline void validate(const SynthParams& p) {
  if (p.skeleton.empty() || p.skeleton.size() > kMaxClasses) throw ValidationError("skeleton must have 1..64 joints");
  if (p.jitter_sigma < 0.0 || p.offset_noise_sigma < 0.0 || p.clutter_rate < 0.0) {
    throw ValidationError("noise parameters must be non-negative");
  }
  if (!(p.unary_sharpness > 0.0)) throw ValidationError("unary_sharpness must be positive");
  if (!(p.frame > 0.0)) throw ValidationError("frame must be positive");
}

// Ground-truth-bearing instance: one detection per true joint plus uniform
// clutter; unaries decay with the distance to the nearest true joint of the
// class; regressions point at the true joints of the person owning that
// nearest joint.
inline ProblemInstance generate(const SynthParams& params) {
  validate(params);
  const std::size_t nc = params.skeleton.size();
  const double head = skeleton_head_size(params);

  ProblemInstance inst;
  for (std::size_t c = 0; c < nc; ++c) inst.classes.push_back({c, params.skeleton[c].name, std::nullopt});
  inst.scale = head;

  auto roots_rng = make_rng(params.seed, "synth.roots");
  auto joint_rng = make_rng(params.seed, "synth.joints");
  auto det_rng = make_rng(params.seed, "synth.detections");
  auto clutter_rng = make_rng(params.seed, "synth.clutter");
  auto offset_rng = make_rng(params.seed, "synth.offsets");
  std::uniform_real_distribution<double> uniform(0.0, params.frame);
  auto gauss = [](std::mt19937_64& rng, double sigma) {
    return sigma > 0.0 ? std::normal_distribution<double>(0.0, sigma)(rng) : 0.0;
  };

  std::vector<std::vector<Vec2>> truth(params.persons, std::vector<Vec2>(nc));
  std::vector<GroundTruthPose> gts;
  for (std::size_t p = 0; p < params.persons; ++p) {
    const Vec2 root{uniform(roots_rng), uniform(roots_rng)};
    GroundTruthPose g;
    g.person_id = static_cast<int>(p);
    g.head_size = head;
    for (std::size_t c = 0; c < nc; ++c) {
      const double jx = gauss(joint_rng, params.jitter_sigma);
      const double jy = gauss(joint_rng, params.jitter_sigma);
      truth[p][c] = root + params.skeleton[c].offset + Vec2{jx, jy};
      g.joints.push_back(truth[p][c]);
    }
    gts.push_back(std::move(g));
  }

  std::vector<Vec2> locations;
  for (std::size_t p = 0; p < params.persons; ++p) {
    for (std::size_t c = 0; c < nc; ++c) {
      const double jx = gauss(det_rng, params.jitter_sigma);
      const double jy = gauss(det_rng, params.jitter_sigma);
      locations.push_back(truth[p][c] + Vec2{jx, jy});
    }
  }
  if (params.clutter_rate > 0.0) {
    std::poisson_distribution<int> count(params.clutter_rate);
    for (std::size_t c = 0; c < nc; ++c) {
      const int k = count(clutter_rng);
      for (int i = 0; i < k; ++i) {
        const double x = uniform(clutter_rng);
        const double y = uniform(clutter_rng);
        locations.push_back({x, y});
      }
    }
  }

  const double two_s2 = 2.0 * params.unary_sharpness * params.unary_sharpness;
  for (const Vec2& loc : locations) {
    Candidate d = make_candidate(inst.candidates.size(), loc, nc);
    std::vector<std::size_t> owner(nc, 0);
    for (std::size_t c = 0; c < nc && params.persons > 0; ++c) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t p = 0; p < params.persons; ++p) {
        const double d2 = squared_distance(loc, truth[p][c]);
        if (d2 < best) {
          best = d2;
          owner[c] = p;
        }
      }
      d.unary[c] = std::clamp(std::exp(-best / two_s2), 0.0, 1.0);
      d.refine[c] = truth[owner[c]][c] - loc;
    }
    for (std::size_t c = 0; c < nc && params.persons > 0; ++c) {
      for (std::size_t c2 = 0; c2 < nc; ++c2) {
        if (c == c2) continue;
        const double nx = gauss(offset_rng, params.offset_noise_sigma);
        const double ny = gauss(offset_rng, params.offset_noise_sigma);
        d.pair_offset(c, c2) = truth[owner[c]][c2] - loc + Vec2{nx, ny};
      }
    }
    inst.candidates.push_back(std::move(d));
  }
  inst.ground_truth = std::move(gts);
  return inst;
}

}  // namespace posecut
