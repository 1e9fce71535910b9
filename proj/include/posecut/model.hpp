#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "posecut/class_set.hpp"
#include "posecut/error.hpp"
#include "posecut/geometry.hpp"

namespace posecut {

struct PartClass {
  ClassId id = 0;
  std::string name;
  std::optional<int> stage_hint;

  friend bool operator==(const PartClass&, const PartClass&) = default;
};

// One putative body-part detection.
//
// `pair` is a dense |C| x |C| row-major table: pair[c * |C| + c'] is the
// regressed offset from this detection (read as class c) to the expected
// location of class c'. The diagonal is unused and kept at zero.
struct Candidate {
  CandidateId id = 0;
  Vec2 location;
  std::vector<double> unary;
  std::vector<std::optional<Vec2>> refine;
  std::vector<Vec2> pair;
  ClassSet allowed;  // labels the solver may assign; split clones hold one class
  std::optional<ClassId> fixed_class;

  std::size_t num_classes() const { return unary.size(); }

  const Vec2& pair_offset(ClassId from, ClassId to) const { return pair[from * unary.size() + to]; }
  Vec2& pair_offset(ClassId from, ClassId to) { return pair[from * unary.size() + to]; }

  // Labels available to a solver: the fixed class if set, else `allowed`.
  ClassSet labelable() const { return fixed_class ? ClassSet::of(*fixed_class) : allowed; }
  bool can_take(ClassId c) const { return labelable().contains(c); }

  // Highest unary among labelable classes; ties go to the lowest class id.
  std::optional<ClassId> argmax_class() const {
    std::optional<ClassId> best;
    for (ClassId c : labelable().members()) {
      if (!best || unary[c] > unary[*best]) best = c;
    }
    return best;
  }

  double max_unary() const {
    const auto c = argmax_class();
    return c ? unary[*c] : 0.0;
  }

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

struct GroundTruthPose {
  int person_id = 0;
  std::vector<std::optional<Vec2>> joints;  // indexed by class; empty = not annotated
  double head_size = 1.0;

  friend bool operator==(const GroundTruthPose&, const GroundTruthPose&) = default;
};

struct ProblemInstance {
  std::vector<PartClass> classes;
  std::vector<Candidate> candidates;
  double scale = 1.0;
  std::optional<std::vector<GroundTruthPose>> ground_truth;

  std::size_t num_classes() const { return classes.size(); }
  std::size_t size() const { return candidates.size(); }

  std::optional<ClassId> find_class(std::string_view name) const {
    for (const auto& pc : classes) {
      if (pc.name == name) return pc.id;
    }
    return std::nullopt;
  }

  const std::string& class_name(ClassId c) const { return classes.at(c).name; }

  friend bool operator==(const ProblemInstance&, const ProblemInstance&) = default;
};

// A labeling plus a partition of the labeled candidates into persons.
// Pairwise same-person indicators are implied by the partition.
struct Solution {
  std::vector<std::optional<ClassId>> label;  // indexed by candidate id
  std::vector<std::vector<CandidateId>> clusters;
  double objective_value = 0.0;

  // Sorts members within clusters and clusters by their first member.
  void canonicalize() {
    std::erase_if(clusters, [](const auto& k) { return k.empty(); });
    for (auto& k : clusters) std::sort(k.begin(), k.end());
    std::sort(clusters.begin(), clusters.end());
  }

  friend bool operator==(const Solution&, const Solution&) = default;
};

// A candidate with every class allowed and zeroed regressions.
inline Candidate make_candidate(CandidateId id, Vec2 location, std::size_t num_classes) {
  Candidate d;
  d.id = id;
  d.location = location;
  d.unary.assign(num_classes, 0.0);
  d.refine.assign(num_classes, std::nullopt);
  d.pair.assign(num_classes * num_classes, Vec2{});
  d.allowed = ClassSet::all(num_classes);
  return d;
}

inline std::vector<PartClass> make_classes(const std::vector<std::string>& names) {
  std::vector<PartClass> out;
  for (std::size_t i = 0; i < names.size(); ++i) out.push_back({i, names[i], std::nullopt});
  return out;
}

// Throws ValidationError naming the first offending class or candidate.
inline void validate_instance(const ProblemInstance& inst) {
  const std::size_t nc = inst.num_classes();
  if (nc > kMaxClasses) {
    throw ValidationError("at most " + std::to_string(kMaxClasses) + " classes are supported");
  }
  std::set<std::string> names;
  for (std::size_t i = 0; i < nc; ++i) {
    const auto& pc = inst.classes[i];
    if (pc.id != i) throw ValidationError("class ids must be dense 0..|C|-1; class '" + pc.name + "' has id " + std::to_string(pc.id));
    if (pc.name.empty()) throw ValidationError("class " + std::to_string(i) + " has an empty name");
    if (!names.insert(pc.name).second) throw ValidationError("duplicate class name '" + pc.name + "'");
  }
  if (!(inst.scale > 0.0) || !std::isfinite(inst.scale)) throw ValidationError("scale must be positive and finite");

  for (std::size_t i = 0; i < inst.candidates.size(); ++i) {
    const auto& d = inst.candidates[i];
    const std::string who = "candidate " + std::to_string(d.id);
    if (d.id != i) throw ValidationError("candidate ids must be dense 0..|D|-1; found " + who + " at position " + std::to_string(i));
    if (d.unary.size() != nc || d.refine.size() != nc || d.pair.size() != nc * nc) {
      throw ValidationError(who + ": payload sizes do not match the class roster");
    }
    if (!std::isfinite(d.location.x) || !std::isfinite(d.location.y)) throw ValidationError(who + ": non-finite location");
    for (ClassId c = 0; c < nc; ++c) {
      const double p = d.unary[c];
      if (!(p >= 0.0 && p <= 1.0)) {
        std::ostringstream os;
        os << who << ": unary for class '" << inst.classes[c].name << "' is " << p << ", outside [0,1]";
        throw ValidationError(os.str());
      }
      for (ClassId c2 = 0; c2 < nc; ++c2) {
        const Vec2& o = d.pair_offset(c, c2);
        if (!std::isfinite(o.x) || !std::isfinite(o.y)) throw ValidationError(who + ": non-finite pair offset");
      }
    }
    if ((d.allowed & ClassSet::all(nc)) != d.allowed || d.allowed.empty()) {
      throw ValidationError(who + ": restriction refers to unknown classes or is empty");
    }
    if (d.fixed_class && *d.fixed_class >= nc) throw ValidationError(who + ": fixed_class out of range");
  }

  if (inst.ground_truth) {
    for (const auto& g : *inst.ground_truth) {
      const std::string who = "ground-truth person " + std::to_string(g.person_id);
      if (g.joints.size() != nc) throw ValidationError(who + ": joint table does not match the class roster");
      if (!(g.head_size > 0.0)) throw ValidationError(who + ": head_size must be positive");
      if (std::none_of(g.joints.begin(), g.joints.end(), [](const auto& j) { return j.has_value(); })) {
        throw ValidationError(who + ": no annotated joints");
      }
    }
  }
}

enum class ViolationKind {
  unknown_candidate,        // id outside the instance
  label_table_size,         // label vector length differs from |D|
  duplicate_membership,     // candidate listed in two clusters (or twice)
  clustered_but_suppressed,
  labeled_but_unclustered,
  label_not_allowed,        // label outside the candidate's restriction
  fixed_class_contradicted, // fixed candidate relabeled or suppressed
  fixed_class_clash,        // two fixed candidates of one class share a cluster
};

inline const char* to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::unknown_candidate: return "unknown_candidate";
    case ViolationKind::label_table_size: return "label_table_size";
    case ViolationKind::duplicate_membership: return "duplicate_membership";
    case ViolationKind::clustered_but_suppressed: return "clustered_but_suppressed";
    case ViolationKind::labeled_but_unclustered: return "labeled_but_unclustered";
    case ViolationKind::label_not_allowed: return "label_not_allowed";
    case ViolationKind::fixed_class_contradicted: return "fixed_class_contradicted";
    case ViolationKind::fixed_class_clash: return "fixed_class_clash";
  }
  return "?";
}

struct Violation {
  ViolationKind kind;
  CandidateId candidate = 0;
  std::string detail;
};

struct FeasibilityReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  std::size_t count(ViolationKind k) const {
    return static_cast<std::size_t>(std::count_if(violations.begin(), violations.end(),
                                                  [k](const Violation& v) { return v.kind == k; }));
  }
};

inline FeasibilityReport validate_solution(const ProblemInstance& inst, const Solution& sol) {
  FeasibilityReport rep;
  const std::size_t n = inst.size();
  auto add = [&](ViolationKind k, CandidateId d, std::string detail) {
    rep.violations.push_back({k, d, std::move(detail)});
  };
  if (sol.label.size() != n) {
    add(ViolationKind::label_table_size, 0,
        "label table has " + std::to_string(sol.label.size()) + " entries for " + std::to_string(n) + " candidates");
  }
  auto label_of = [&](CandidateId d) -> std::optional<ClassId> {
    return d < sol.label.size() ? sol.label[d] : std::nullopt;
  };

  std::vector<int> membership(n, -1);
  for (std::size_t k = 0; k < sol.clusters.size(); ++k) {
    for (CandidateId d : sol.clusters[k]) {
      if (d >= n) {
        add(ViolationKind::unknown_candidate, d, "cluster " + std::to_string(k) + " lists unknown candidate");
        continue;
      }
      if (membership[d] >= 0) {
        add(ViolationKind::duplicate_membership, d,
            "in clusters " + std::to_string(membership[d]) + " and " + std::to_string(k));
        continue;
      }
      membership[d] = static_cast<int>(k);
      if (!label_of(d)) add(ViolationKind::clustered_but_suppressed, d, "suppressed candidate is clustered");
    }
  }

  for (CandidateId d = 0; d < n; ++d) {
    const auto& cand = inst.candidates[d];
    const auto lab = label_of(d);
    if (lab && membership[d] < 0) add(ViolationKind::labeled_but_unclustered, d, "labeled candidate in no cluster");
    if (cand.fixed_class && lab != cand.fixed_class) {
      add(ViolationKind::fixed_class_contradicted, d, "fixed class '" + inst.class_name(*cand.fixed_class) + "' not kept");
    } else if (lab && (*lab >= inst.num_classes() || !cand.allowed.contains(*lab))) {
      add(ViolationKind::label_not_allowed, d, "label outside the candidate's allowed classes");
    }
  }
  for (CandidateId d = n; d < sol.label.size(); ++d) {
    if (sol.label[d]) add(ViolationKind::unknown_candidate, d, "label for unknown candidate");
  }

  for (const auto& k : sol.clusters) {
    for (std::size_t i = 0; i < k.size(); ++i) {
      for (std::size_t j = i + 1; j < k.size(); ++j) {
        if (k[i] >= n || k[j] >= n) continue;
        const auto& a = inst.candidates[k[i]];
        const auto& b = inst.candidates[k[j]];
        if (a.fixed_class && b.fixed_class && *a.fixed_class == *b.fixed_class) {
          add(ViolationKind::fixed_class_clash, k[j], "shares a cluster with fixed candidate " + std::to_string(k[i]));
        }
      }
    }
  }
  return rep;
}

}  // namespace posecut
