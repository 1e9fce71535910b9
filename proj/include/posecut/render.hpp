#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "posecut/error.hpp"
#include "posecut/eval.hpp"
#include "posecut/model.hpp"
#include "posecut/pairwise.hpp"

namespace posecut {

struct Raster {
  std::size_t width = 0;
  std::size_t height = 0;
  double step = 1.0;           // pixels between grid points
  std::vector<double> values;  // row-major, row j at y = j * step

  double& at(std::size_t i, std::size_t j) { return values[j * width + i]; }
  double at(std::size_t i, std::size_t j) const { return values[j * width + i]; }
  Vec2 point(std::size_t i, std::size_t j) const { return {static_cast<double>(i) * step, static_cast<double>(j) * step}; }

  // Grid point of the largest value; first in row-major order on ties.
  Vec2 argmax() const {
    std::size_t best = 0;
    for (std::size_t k = 1; k < values.size(); ++k) {
      if (values[k] > values[best]) best = k;
    }
    return point(best % width, best / width);
  }
};

struct ScoremapParams {
  double grid_step = 4.0;
  double frame = 512.0;
  bool per_source = false;
};

struct Scoremap {
  Raster combined;
  std::vector<std::pair<ClassId, Raster>> sources;  // filled when per_source is set
};

namespace detail {

// Regression payload of a point that is not a candidate: borrowed from the
// nearest candidate of the same argmax class (any candidate if none) and
// re-anchored so that every offset keeps pointing at the same absolute target.
inline Candidate virtual_candidate(const ProblemInstance& inst, Vec2 at, ClassId c) {
  const Candidate* best = nullptr;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (int pass = 0; pass < 2 && !best; ++pass) {
    for (const auto& d : inst.candidates) {
      if (pass == 0 && d.argmax_class() != c) continue;
      const double d2 = squared_distance(d.location, at);
      if (d2 < best_d2) {
        best_d2 = d2;
        best = &d;
      }
    }
  }
  if (!best) throw MissingOffset("synth", "no candidate to borrow regressions from");
  Candidate v = *best;
  const Vec2 shift = best->location - at;
  for (auto& o : v.pair) o += shift;
  v.location = at;
  return v;
}

inline Raster blank_raster(const ScoremapParams& p, double fill) {
  Raster r;
  r.step = p.grid_step;
  r.width = static_cast<std::size_t>(std::ceil(p.frame / p.grid_step));
  r.height = r.width;
  r.values.assign(r.width * r.height, fill);
  return r;
}

}  // namespace detail

// Combined pairwise scoremap for class `target` given the annotated joints
// of ground-truth person `anchor`: the pointwise product over source joints
// c' != target of p(same person | anchor joint c', grid point as target).
inline Scoremap render_pairwise_scoremap(const ProblemInstance& inst, const PairwiseModel& model, ClassId target,
                                         std::size_t anchor, const ScoremapParams& params = {}) {
  if (!(params.grid_step > 0.0) || !(params.frame > 0.0)) throw ValidationError("grid_step and frame must be positive");
  if (target >= inst.num_classes()) throw ValidationError("unknown target class " + std::to_string(target));
  if (!inst.ground_truth || anchor >= inst.ground_truth->size()) {
    throw NoAnchorJoints("instance has no ground-truth person " + std::to_string(anchor));
  }
  check_model_covers(model, inst);
  const GroundTruthPose& pose = (*inst.ground_truth)[anchor];
  std::vector<ClassId> sources;
  for (ClassId c = 0; c < pose.joints.size() && c < inst.num_classes(); ++c) {
    if (c != target && pose.joints[c]) sources.push_back(c);
  }
  if (sources.empty()) throw NoAnchorJoints("person " + std::to_string(anchor) + " has no annotated joint besides the target");

  Scoremap out;
  out.combined = detail::blank_raster(params, 1.0);
  Raster& combined = out.combined;

  std::vector<Candidate> grid;
  grid.reserve(combined.values.size());
  for (std::size_t j = 0; j < combined.height; ++j) {
    for (std::size_t i = 0; i < combined.width; ++i) grid.push_back(detail::virtual_candidate(inst, combined.point(i, j), target));
  }

  for (ClassId c : sources) {
    const Candidate a = detail::virtual_candidate(inst, *pose.joints[c], c);
    Raster layer = detail::blank_raster(params, 0.0);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const PairFeatures f = canonical_features(a, c, grid[k], target, inst.scale);
      layer.values[k] = pairwise_probability(f, model, c, target);
      combined.values[k] *= layer.values[k];
    }
    if (params.per_source) out.sources.emplace_back(c, std::move(layer));
  }
  return out;
}

// Binary PGM (P5), one byte per grid point. `normalize` stretches the
// maximum to 255; otherwise values in [0, 1] map linearly.
inline std::string write_pgm(const Raster& r, bool normalize = false) {
  double top = 1.0;
  if (normalize) {
    top = 0.0;
    for (double v : r.values) top = std::max(top, v);
    if (!(top > 0.0)) top = 1.0;
  }
  std::string out = "P5\n" + std::to_string(r.width) + " " + std::to_string(r.height) + "\n255\n";
  out.reserve(out.size() + r.values.size());
  for (double v : r.values) {
    const double s = std::clamp(v / top, 0.0, 1.0);
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(s * 255.0))));
  }
  return out;
}

// Limbs of the default 14-joint body model, by class name.
inline const std::vector<std::pair<std::string, std::string>>& skeleton_limbs() {
  static const std::vector<std::pair<std::string, std::string>> limbs = {
      {"r_ankle", "r_knee"},        {"r_knee", "r_hip"},        {"l_ankle", "l_knee"},    {"l_knee", "l_hip"},
      {"r_hip", "l_hip"},           {"r_hip", "r_shoulder"},    {"l_hip", "l_shoulder"},  {"r_shoulder", "l_shoulder"},
      {"r_shoulder", "r_elbow"},    {"r_elbow", "r_wrist"},     {"l_shoulder", "l_elbow"}, {"l_elbow", "l_wrist"},
      {"r_shoulder", "chin"},       {"l_shoulder", "chin"},     {"chin", "top_head"},
  };
  return limbs;
}

namespace detail {

inline std::string fmt_coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline void svg_skeleton(std::string& svg, const ProblemInstance& inst, const std::vector<std::optional<Vec2>>& joints,
                         const char* color, double width) {
  for (const auto& [a, b] : skeleton_limbs()) {
    const auto ca = inst.find_class(a);
    const auto cb = inst.find_class(b);
    if (!ca || !cb || *ca >= joints.size() || *cb >= joints.size() || !joints[*ca] || !joints[*cb]) continue;
    svg += "  <line x1=\"" + fmt_coord(joints[*ca]->x) + "\" y1=\"" + fmt_coord(joints[*ca]->y) + "\" x2=\"" +
           fmt_coord(joints[*cb]->x) + "\" y2=\"" + fmt_coord(joints[*cb]->y) + "\" stroke=\"" + color +
           "\" stroke-width=\"" + fmt_coord(width) + "\"/>\n";
  }
  for (const auto& j : joints) {
    if (!j) continue;
    svg += "  <circle cx=\"" + fmt_coord(j->x) + "\" cy=\"" + fmt_coord(j->y) + "\" r=\"3\" fill=\"" + color + "\"/>\n";
  }
}

}  // namespace detail

// Candidates as grey dots, ground-truth skeletons in green, predicted
// skeletons in red.
inline std::string svg_overlay(const ProblemInstance& inst, const PoseSet* predicted = nullptr, double frame = 512.0) {
  const std::string f = detail::fmt_coord(frame);
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + f + "\" height=\"" + f + "\" viewBox=\"0 0 " +
                    f + " " + f + "\">\n  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (const auto& d : inst.candidates) {
    svg += "  <circle cx=\"" + detail::fmt_coord(d.location.x) + "\" cy=\"" + detail::fmt_coord(d.location.y) +
           "\" r=\"1.5\" fill=\"#999\"/>\n";
  }
  if (inst.ground_truth) {
    for (const auto& g : *inst.ground_truth) detail::svg_skeleton(svg, inst, g.joints, "#2a2", 3.0);
  }
  if (predicted) {
    for (const auto& p : predicted->poses) {
      std::vector<std::optional<Vec2>> joints;
      for (const auto& j : p.joints) joints.push_back(j ? std::optional<Vec2>(j->location) : std::nullopt);
      detail::svg_skeleton(svg, inst, joints, "#d22", 1.5);
    }
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace posecut
