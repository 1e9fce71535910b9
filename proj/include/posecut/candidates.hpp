#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <vector>

#include "posecut/error.hpp"
#include "posecut/model.hpp"

namespace posecut {

struct NmsParams {
  double radius = 24.0;          // pixels
  std::size_t max_total = 100;   // candidate budget |D|
  bool refine_before_nms = true;
  std::size_t max_per_part = 0;  // 0: one global budget; otherwise top-k per argmax class
};

namespace detail {

// Keeps the candidates flagged in `keep`, renumbering ids densely in order.
inline ProblemInstance keep_candidates(const ProblemInstance& inst, const std::vector<bool>& keep) {
  ProblemInstance out;
  out.classes = inst.classes;
  out.scale = inst.scale;
  out.ground_truth = inst.ground_truth;
  for (const auto& d : inst.candidates) {
    if (!keep[d.id]) continue;
    out.candidates.push_back(d);
    out.candidates.back().id = out.candidates.size() - 1;
  }
  return out;
}

// Ranking order shared by NMS and budget selection: higher score first,
// lower id on ties.
inline void sort_by_score(std::vector<CandidateId>& ids, const std::vector<double>& score) {
  std::sort(ids.begin(), ids.end(), [&](CandidateId a, CandidateId b) {
    return score[a] != score[b] ? score[a] > score[b] : a < b;
  });
}

}  // namespace detail

// Shifts every candidate by the refinement offset of its argmax class.
inline ProblemInstance refine_locations(const ProblemInstance& inst) {
  ProblemInstance out = inst;
  for (auto& d : out.candidates) {
    const auto c = d.argmax_class();
    if (!c) continue;
    if (!d.refine[*c]) {
      throw MissingOffset("candidates", "candidate " + std::to_string(d.id) + " has no refinement offset for its argmax class '" +
                                            inst.class_name(*c) + "'");
    }
    d.location += *d.refine[*c];
  }
  return out;
}

// Keeps the `max_total` candidates with the highest max-class unary.
inline ProblemInstance select_top(const ProblemInstance& inst, std::size_t max_total) {
  if (max_total < 1) throw ValidationError("max_total must be at least 1");
  if (inst.size() <= max_total) return inst;
  std::vector<double> score(inst.size());
  std::vector<CandidateId> order(inst.size());
  for (const auto& d : inst.candidates) score[d.id] = d.max_unary();
  std::iota(order.begin(), order.end(), CandidateId{0});
  detail::sort_by_score(order, score);
  std::vector<bool> keep(inst.size(), false);
  for (std::size_t i = 0; i < max_total; ++i) keep[order[i]] = true;
  return detail::keep_candidates(inst, keep);
}

// Keeps at most `per_part` candidates for each argmax class.
inline ProblemInstance select_top_per_part(const ProblemInstance& inst, std::size_t per_part) {
  if (per_part < 1) throw ValidationError("per-part budget must be at least 1");
  std::vector<double> score(inst.size());
  std::vector<CandidateId> order(inst.size());
  for (const auto& d : inst.candidates) score[d.id] = d.max_unary();
  std::iota(order.begin(), order.end(), CandidateId{0});
  detail::sort_by_score(order, score);
  std::vector<std::size_t> taken(inst.num_classes(), 0);
  std::vector<bool> keep(inst.size(), false);
  for (CandidateId id : order) {
    const auto c = inst.candidates[id].argmax_class();
    if (c && taken[*c] < per_part) {
      ++taken[*c];
      keep[id] = true;
    }
  }
  return detail::keep_candidates(inst, keep);
}

// Greedy per-class suppression. A candidate competes for its argmax
// class(es); within a class the highest unary wins and suppresses every
// competitor within `radius`. A candidate survives if it is kept for at
// least one class. The budget from `params` is applied afterwards.
inline ProblemInstance nms(const ProblemInstance& inst, const NmsParams& params) {
  if (!(params.radius > 0.0)) throw ValidationError("NMS radius must be positive");
  const std::size_t n = inst.size();
  const double r2 = params.radius * params.radius;
  std::vector<bool> survives(n, false);

  for (ClassId c = 0; c < inst.num_classes(); ++c) {
    std::vector<CandidateId> competitors;
    std::vector<double> score(n, 0.0);
    for (const auto& d : inst.candidates) {
      if (!d.can_take(c)) continue;
      if (d.unary[c] == d.max_unary()) {
        competitors.push_back(d.id);
        score[d.id] = d.unary[c];
      }
    }
    detail::sort_by_score(competitors, score);
    std::vector<CandidateId> kept;
    for (CandidateId id : competitors) {
      const Vec2& p = inst.candidates[id].location;
      const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](CandidateId k) {
        return squared_distance(inst.candidates[k].location, p) <= r2;
      });
      if (!suppressed) {
        kept.push_back(id);
        survives[id] = true;
      }
    }
  }

  ProblemInstance out = detail::keep_candidates(inst, survives);
  out = params.max_per_part > 0 ? select_top_per_part(out, params.max_per_part) : out;
  return select_top(out, params.max_total);
}

// Replaces a candidate with two or more classes above `s` by one
// class-restricted clone per such class. The first clone keeps the original
// id; the others are appended with fresh ids.
inline ProblemInstance split_detections(const ProblemInstance& inst, double s) {
  if (!(s > 0.0 && s < 1.0)) throw ValidationError("split threshold must lie in (0,1)");
  ProblemInstance out = inst;
  std::vector<Candidate> appended;
  for (auto& d : out.candidates) {
    if (d.fixed_class) continue;
    std::vector<ClassId> above;
    for (ClassId c : d.allowed.members()) {
      if (d.unary[c] > s) above.push_back(c);
    }
    if (above.size() < 2) continue;
    for (std::size_t i = 1; i < above.size(); ++i) {
      Candidate clone = d;
      clone.allowed = ClassSet::of(above[i]);
      appended.push_back(std::move(clone));
    }
    d.allowed = ClassSet::of(above.front());
  }
  for (auto& clone : appended) {
    clone.id = out.candidates.size();
    out.candidates.push_back(std::move(clone));
  }
  return out;
}

struct PreprocessParams {
  NmsParams nms;
  double split_threshold = 0.4;
  bool split = true;
};

// refine -> nms (with budget) -> split -> budget.
inline ProblemInstance preprocess(const ProblemInstance& inst, const PreprocessParams& params) {
  ProblemInstance out = params.nms.refine_before_nms ? refine_locations(inst) : inst;
  out = nms(out, params.nms);
  if (params.split) out = split_detections(out, params.split_threshold);
  return select_top(out, params.nms.max_total);
}

}  // namespace posecut
