#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "posecut/geometry.hpp"
#include "posecut/model.hpp"

namespace posecut {

struct PoseJoint {
  Vec2 location;
  double score = 0.0;  // in [0, 1]
};

struct Pose {
  std::vector<std::optional<PoseJoint>> joints;  // indexed by class

  double score() const {
    double s = 0.0;
    for (const auto& j : joints) {
      if (j) s += j->score;
    }
    return s;
  }
};

struct PoseSet {
  std::vector<Pose> poses;
};

// One pose per cluster. A joint sits at the unary-weighted mean of the
// cluster members labeled with its class and scores their maximum unary.
inline PoseSet assemble_poses(const ProblemInstance& inst, const Solution& sol) {
  const std::size_t nc = inst.num_classes();
  Solution canon = sol;
  canon.canonicalize();
  PoseSet out;
  for (const auto& k : canon.clusters) {
    Pose pose;
    pose.joints.assign(nc, std::nullopt);
    for (ClassId c = 0; c < nc; ++c) {
      std::vector<CandidateId> members;
      for (CandidateId d : k) {
        if (canon.label[d] == c) members.push_back(d);
      }
      if (members.empty()) continue;
      double wsum = 0.0;
      double best = 0.0;
      Vec2 acc;
      for (CandidateId d : members) {
        const double p = inst.candidates[d].unary[c];
        wsum += p;
        best = std::max(best, p);
        acc += p * inst.candidates[d].location;
      }
      if (members.size() == 1) {
        acc = inst.candidates[members.front()].location;
      } else if (wsum > 0.0) {
        acc *= 1.0 / wsum;
      } else {
        acc = Vec2{};
        for (CandidateId d : members) acc += inst.candidates[d].location;
        acc *= 1.0 / static_cast<double>(members.size());
      }
      pose.joints[c] = PoseJoint{acc, std::clamp(best, 0.0, 1.0)};
    }
    out.poses.push_back(std::move(pose));
  }
  return out;
}

struct ClassCounts {
  std::size_t ground_truth = 0;
  std::size_t predicted = 0;
  std::size_t true_positives = 0;
};

struct ApReport {
  std::vector<std::optional<double>> ap;  // per class; empty when the class has no annotated joint
  std::vector<ClassCounts> counts;
  double mean_ap = 0.0;                   // mean over classes with an AP
};

namespace detail {

// Area under the precision/recall curve with the monotone precision
// envelope (all-points interpolation). `hits` is in ranking order.
inline double average_precision(const std::vector<bool>& hits, std::size_t positives) {
  if (positives == 0) return 0.0;
  std::vector<double> precision(hits.size());
  std::size_t tp = 0;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    tp += hits[i] ? 1 : 0;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
  }
  for (std::size_t i = hits.size(); i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double ap = 0.0;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    if (hits[i]) ap += precision[i];
  }
  return ap / static_cast<double>(positives);
}

}  // namespace detail

// Greedy pose-level assignment (highest pose score first, to the free
// ground-truth pose with the most joints within tau * head_size), then
// per-class AP over joint scores.
inline ApReport evaluate_ap(const PoseSet& predictions, std::span<const GroundTruthPose> gt, std::size_t num_classes,
                            double tau = 0.5) {
  if (!(tau > 0.0)) throw ValidationError("tau must be positive");
  const auto& poses = predictions.poses;
  std::vector<std::size_t> order(poses.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> pose_score(poses.size());
  for (std::size_t i = 0; i < poses.size(); ++i) pose_score[i] = poses[i].score();
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pose_score[a] > pose_score[b]; });

  auto within = [&](const Pose& p, const GroundTruthPose& g, ClassId c) {
    if (c >= p.joints.size() || c >= g.joints.size() || !p.joints[c] || !g.joints[c]) return false;
    return distance(p.joints[c]->location, *g.joints[c]) <= tau * g.head_size;
  };

  std::vector<int> assigned(poses.size(), -1);
  std::vector<bool> taken(gt.size(), false);
  for (std::size_t pi : order) {
    int best = -1;
    std::size_t best_hits = 0;
    for (std::size_t g = 0; g < gt.size(); ++g) {
      if (taken[g]) continue;
      std::size_t hits = 0;
      for (ClassId c = 0; c < num_classes; ++c) hits += within(poses[pi], gt[g], c) ? 1 : 0;
      if (hits > best_hits) {
        best_hits = hits;
        best = static_cast<int>(g);
      }
    }
    if (best >= 0) {
      assigned[pi] = best;
      taken[static_cast<std::size_t>(best)] = true;
    }
  }

  ApReport rep;
  rep.ap.assign(num_classes, std::nullopt);
  rep.counts.assign(num_classes, {});
  double sum = 0.0;
  std::size_t scored = 0;
  for (ClassId c = 0; c < num_classes; ++c) {
    auto& cnt = rep.counts[c];
    for (const auto& g : gt) cnt.ground_truth += (c < g.joints.size() && g.joints[c]) ? 1 : 0;
    std::vector<std::pair<double, bool>> ranked;
    for (std::size_t pi : order) {
      if (c >= poses[pi].joints.size() || !poses[pi].joints[c]) continue;
      const bool hit = assigned[pi] >= 0 && within(poses[pi], gt[static_cast<std::size_t>(assigned[pi])], c);
      ranked.emplace_back(poses[pi].joints[c]->score, hit);
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<bool> hits;
    for (const auto& r : ranked) hits.push_back(r.second);
    cnt.predicted = hits.size();
    cnt.true_positives = static_cast<std::size_t>(std::count(hits.begin(), hits.end(), true));
    if (cnt.ground_truth == 0) continue;
    rep.ap[c] = detail::average_precision(hits, cnt.ground_truth);
    sum += *rep.ap[c];
    ++scored;
  }
  rep.mean_ap = scored > 0 ? sum / static_cast<double>(scored) : 0.0;
  return rep;
}

// {"<class>": AP | null, ..., "mAP": v, "counts": {"<class>": {...}}}
inline std::string report_to_json(const ApReport& rep, const ProblemInstance& inst, double tau) {
  nlohmann::ordered_json doc;
  nlohmann::ordered_json counts = nlohmann::ordered_json::object();
  for (ClassId c = 0; c < inst.num_classes(); ++c) {
    doc[inst.class_name(c)] = rep.ap[c] ? nlohmann::ordered_json(*rep.ap[c]) : nlohmann::ordered_json(nullptr);
    counts[inst.class_name(c)] = {{"gt", rep.counts[c].ground_truth},
                                  {"pred", rep.counts[c].predicted},
                                  {"tp", rep.counts[c].true_positives}};
  }
  doc["mAP"] = rep.mean_ap;
  doc["tau"] = tau;
  doc["counts"] = std::move(counts);
  return doc.dump(2) + "\n";
}

}  // namespace posecut
