#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <map>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "posecut/error.hpp"
#include "posecut/ilp.hpp"
#include "posecut/io.hpp"
#include "posecut/local_search.hpp"
#include "posecut/model.hpp"
#include "posecut/pairwise.hpp"

namespace posecut {

// Ordered split of the part classes; each stage is solved after the
// previous stages have been contracted to fixed candidates.
struct StageSchedule {
  std::vector<ClassSet> stages;
};

inline void validate_schedule(const StageSchedule& s, std::size_t num_classes) {
  ClassSet seen;
  for (std::size_t k = 0; k < s.stages.size(); ++k) {
    if ((s.stages[k] & seen) != ClassSet{}) throw ScheduleError("stage " + std::to_string(k + 1) + " repeats a class");
    if ((s.stages[k] & ClassSet::all(num_classes)) != s.stages[k]) {
      throw ScheduleError("stage " + std::to_string(k + 1) + " names an unknown class");
    }
    seen = seen | s.stages[k];
  }
  if (seen != ClassSet::all(num_classes)) throw ScheduleError("schedule does not cover every class");
}

inline StageSchedule schedule_from_names(const ProblemInstance& inst, const std::vector<std::vector<std::string>>& stages) {
  StageSchedule s;
  for (const auto& names : stages) {
    ClassSet set;
    for (const auto& nm : names) {
      const auto c = inst.find_class(nm);
      if (!c) throw ScheduleError("schedule names unknown class '" + nm + "'");
      set.insert(*c);
    }
    s.stages.push_back(set);
  }
  validate_schedule(s, inst.num_classes());
  return s;
}

// "1stage", "2stage" or "3stage" over the 14-joint body model: head
// (chin, top of head) and shoulders are the most reliable, then elbows
// and wrists, then hips, knees and ankles.
inline StageSchedule named_schedule(std::string_view name, const ProblemInstance& inst) {
  if (name == "1stage") return StageSchedule{{ClassSet::all(inst.num_classes())}};
  const std::vector<std::string> head_shoulders = {"top_head", "chin", "l_shoulder", "r_shoulder"};
  const std::vector<std::string> arms = {"l_elbow", "r_elbow", "l_wrist", "r_wrist"};
  const std::vector<std::string> legs = {"l_hip", "r_hip", "l_knee", "r_knee", "l_ankle", "r_ankle"};
  if (name == "2stage") {
    std::vector<std::string> upper = head_shoulders;
    upper.insert(upper.end(), arms.begin(), arms.end());
    return schedule_from_names(inst, {upper, legs});
  }
  if (name == "3stage") return schedule_from_names(inst, {head_shoulders, arms, legs});
  throw ScheduleError("unknown schedule '" + std::string(name) + "'");
}

// {"stages": [["a", "b"], ["c"]]}
inline StageSchedule load_schedule(std::string_view text, const ProblemInstance& inst) {
  using namespace json_detail;
  const json doc = parse(text, "schedule");
  reject_unknown(doc, "$", {"stages"});
  std::vector<std::vector<std::string>> stages;
  const json& arr = as_array(require(doc, "stages", "$"), "$.stages");
  for (std::size_t k = 0; k < arr.size(); ++k) {
    std::vector<std::string> names;
    for (const auto& nm : as_array(arr[k], "$.stages[" + std::to_string(k) + "]")) names.push_back(as_string(nm, "$.stages"));
    stages.push_back(std::move(names));
  }
  return schedule_from_names(inst, stages);
}

// A stage cluster's same-class members collapsed into one fixed candidate.
struct ContractedCandidate {
  Candidate candidate;
  std::vector<CandidateId> lineage;  // ids in the original instance
  std::size_t cluster = 0;           // cluster index in the stage solution
};

// One fixed candidate per (cluster, class): location and pair offsets are
// unary-weighted means over the members, the unary is the members' maximum
// for the fixed class and zero elsewhere. `lineage[d]` lists the original
// ids behind sub-instance candidate d (default: d itself).
inline std::vector<ContractedCandidate> contract_clusters(const Solution& stage_solution, const ProblemInstance& sub_instance,
                                                          const std::vector<std::vector<CandidateId>>& lineage = {}) {
  const std::size_t nc = sub_instance.num_classes();
  Solution canon = stage_solution;
  canon.canonicalize();
  std::vector<ContractedCandidate> out;
  for (std::size_t k = 0; k < canon.clusters.size(); ++k) {
    std::map<ClassId, std::vector<CandidateId>> by_class;
    for (CandidateId d : canon.clusters[k]) by_class[*canon.label[d]].push_back(d);
    for (const auto& [c, members] : by_class) {
      ContractedCandidate cc;
      if (members.size() == 1) {
        cc.candidate = sub_instance.candidates[members.front()];
      } else {
        std::vector<double> w;
        for (CandidateId d : members) w.push_back(sub_instance.candidates[d].unary[c]);
        double wsum = std::accumulate(w.begin(), w.end(), 0.0);
        if (!(wsum > 0.0)) {
          std::fill(w.begin(), w.end(), 1.0);
          wsum = static_cast<double>(w.size());
        }
        Candidate agg = make_candidate(0, Vec2{}, nc);
        for (std::size_t i = 0; i < members.size(); ++i) {
          const Candidate& d = sub_instance.candidates[members[i]];
          agg.location += w[i] * d.location;
          for (std::size_t p = 0; p < agg.pair.size(); ++p) agg.pair[p] += w[i] * d.pair[p];
        }
        agg.location *= 1.0 / wsum;
        for (auto& o : agg.pair) o *= 1.0 / wsum;
        for (ClassId r = 0; r < nc; ++r) {
          Vec2 acc;
          bool all = true;
          for (std::size_t i = 0; i < members.size() && all; ++i) {
            const auto& ro = sub_instance.candidates[members[i]].refine[r];
            if (ro) acc += w[i] * *ro;
            all = ro.has_value();
          }
          if (all) agg.refine[r] = acc * (1.0 / wsum);
        }
        for (CandidateId d : members) agg.unary[c] = std::max(agg.unary[c], sub_instance.candidates[d].unary[c]);
        cc.candidate = std::move(agg);
      }
      Candidate& cand = cc.candidate;
      const double keep = cand.unary[c];
      std::fill(cand.unary.begin(), cand.unary.end(), 0.0);
      cand.unary[c] = keep;
      cand.allowed = ClassSet::of(c);
      cand.fixed_class = c;
      for (CandidateId d : members) {
        if (lineage.empty()) {
          cc.lineage.push_back(d);
        } else {
          cc.lineage.insert(cc.lineage.end(), lineage[d].begin(), lineage[d].end());
        }
      }
      std::sort(cc.lineage.begin(), cc.lineage.end());
      cc.cluster = k;
      out.push_back(std::move(cc));
    }
  }
  return out;
}

struct IncrementalParams {
  SearchParams search;
  double eps = kDefaultClampEps;
  std::size_t per_part_budget = 20;  // new candidates per class and stage; 0 = unlimited
};

struct StageReport {
  std::size_t stage = 0;       // 1-based
  std::size_t candidates = 0;  // new candidates entering the stage
  std::size_t fixed = 0;       // contracted candidates carried in
  double objective = 0.0;      // of the stage sub-problem
  double millis = 0.0;
  bool skipped = false;        // no candidate matched the stage classes
};

struct IncrementalResult {
  Solution solution;
  std::vector<StageReport> stages;
};

// Solves the stages in order. Stage k sees the candidates that may take a
// stage-k class (restricted to those classes, at most `per_part_budget`
// per class by unary) plus every fixed candidate contracted so far.
// A candidate first enters at the stage of its most likely class, so a
// detection is never claimed under a secondary reading before its primary
// reading has been offered. Candidates kept by an earlier stage live on
// inside their contraction and do not enter again; suppressed ones may. The
// final solution is expressed on the original candidate ids and its
// objective is evaluated on the original instance.
inline IncrementalResult solve_incremental(const ProblemInstance& inst, const PairwiseModel& model,
                                           const StageSchedule& schedule, const IncrementalParams& params = {}) {
  validate_schedule(schedule, inst.num_classes());
  check_model_covers(model, inst);
  IncrementalResult result;
  std::vector<ContractedCandidate> fixed;
  std::vector<bool> used(inst.size(), false);  // kept by an earlier stage
  std::vector<std::size_t> stage_of(inst.num_classes(), 0);
  for (std::size_t k = 0; k < schedule.stages.size(); ++k) {
    for (ClassId c : schedule.stages[k].members()) stage_of[c] = k;
  }

  for (std::size_t k = 0; k < schedule.stages.size(); ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    const ClassSet stage = schedule.stages[k];
    std::vector<ClassSet> take(inst.size());
    for (const auto& d : inst.candidates) {
      const auto primary = d.argmax_class();
      if (used[d.id] || !primary || stage_of[*primary] > k) continue;
      take[d.id] = d.labelable() & stage;
    }
    if (params.per_part_budget > 0) {
      std::vector<ClassSet> selected(inst.size());
      for (ClassId c : stage.members()) {
        std::vector<CandidateId> ids;
        for (const auto& d : inst.candidates) {
          if (take[d.id].contains(c)) ids.push_back(d.id);
        }
        std::stable_sort(ids.begin(), ids.end(), [&](CandidateId a, CandidateId b) {
          return inst.candidates[a].unary[c] > inst.candidates[b].unary[c];
        });
        for (std::size_t i = 0; i < ids.size() && i < params.per_part_budget; ++i) selected[ids[i]].insert(c);
      }
      take = std::move(selected);
    }

    ProblemInstance sub;
    sub.classes = inst.classes;
    sub.scale = inst.scale;
    std::vector<std::vector<CandidateId>> lineage;
    for (const auto& d : inst.candidates) {
      if (take[d.id].empty()) continue;
      Candidate c = d;
      c.id = sub.candidates.size();
      c.allowed = take[d.id];
      sub.candidates.push_back(std::move(c));
      lineage.push_back({d.id});
    }
    StageReport rep;
    rep.stage = k + 1;
    rep.candidates = sub.size();
    rep.fixed = fixed.size();
    if (sub.candidates.empty()) {
      rep.skipped = true;
      rep.millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      result.stages.push_back(rep);
      continue;
    }
    for (const auto& f : fixed) {
      Candidate c = f.candidate;
      c.id = sub.candidates.size();
      sub.candidates.push_back(std::move(c));
      lineage.push_back(f.lineage);
    }

    const CostTable costs = build_costs(sub, model, params.eps);
    const Solution sol = solve_heuristic(sub, costs, params.search);
    fixed = contract_clusters(sol, sub, lineage);
    for (const auto& f : fixed) {
      for (CandidateId d : f.lineage) used[d] = true;
    }
    rep.objective = sol.objective_value;
    rep.millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    result.stages.push_back(rep);
  }

  Solution& out = result.solution;
  out.label.assign(inst.size(), std::nullopt);
  std::map<std::size_t, std::vector<CandidateId>> clusters;
  for (const auto& f : fixed) {
    for (CandidateId d : f.lineage) {
      out.label[d] = f.candidate.fixed_class;
      clusters[f.cluster].push_back(d);
    }
  }
  for (auto& [_, members] : clusters) out.clusters.push_back(std::move(members));
  out.canonicalize();
  out.objective_value = objective(inst, model, out, params.eps);
  return result;
}

}  // namespace posecut
