#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "posecut/candidates.hpp"
#include "posecut/eval.hpp"
#include "posecut/ilp.hpp"
#include "posecut/incremental.hpp"
#include "posecut/local_search.hpp"
#include "posecut/model.hpp"
#include "posecut/pairwise.hpp"

namespace posecut {

inline constexpr const char* kVersion = "0.1.0";

struct PipelineConfig {
  PreprocessParams preprocess;
  std::string schedule = "3stage";          // 1stage, 2stage, 3stage, or a schedule document
  std::optional<std::string> schedule_doc;  // JSON text; used when set
  SearchParams search;
  double eps = kDefaultClampEps;
  std::size_t per_part_budget = 20;
  double tau = 0.5;
};

struct PipelineResult {
  ProblemInstance instance;  // after preprocessing; solution ids refer to it
  Solution solution;
  PoseSet poses;
  std::optional<ApReport> report;  // when the instance has ground truth
  std::vector<StageReport> stages;
  double preprocess_millis = 0.0;
  double solve_millis = 0.0;
  double eval_millis = 0.0;
};

namespace detail {

inline double millis_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

// Solves an already preprocessed instance with the configured schedule.
// "1stage" is a single local search over the whole instance.
inline PipelineResult solve_instance(const ProblemInstance& processed, const PairwiseModel& model, const PipelineConfig& cfg) {
  PipelineResult res;
  res.instance = processed;
  const auto t0 = std::chrono::steady_clock::now();
  const StageSchedule schedule =
      cfg.schedule_doc ? load_schedule(*cfg.schedule_doc, processed) : named_schedule(cfg.schedule, processed);
  if (schedule.stages.size() == 1) {
    check_model_covers(model, processed);
    const CostTable costs = build_costs(processed, model, cfg.eps);
    res.solution = solve_heuristic(processed, costs, cfg.search);
    StageReport rep;
    rep.stage = 1;
    rep.candidates = processed.size();
    rep.objective = res.solution.objective_value;
    rep.millis = detail::millis_since(t0);
    res.stages.push_back(rep);
  } else {
    IncrementalParams ip;
    ip.search = cfg.search;
    ip.eps = cfg.eps;
    ip.per_part_budget = cfg.per_part_budget;
    IncrementalResult inc = solve_incremental(processed, model, schedule, ip);
    res.solution = std::move(inc.solution);
    res.stages = std::move(inc.stages);
  }
  res.solve_millis = detail::millis_since(t0);
  return res;
}

// refine -> nms -> split -> select_top -> costs -> solver -> poses -> AP.
inline PipelineResult run_pipeline(const ProblemInstance& inst, const PairwiseModel& model, const PipelineConfig& cfg) {
  auto t0 = std::chrono::steady_clock::now();
  const ProblemInstance processed = preprocess(inst, cfg.preprocess);
  const double pre_ms = detail::millis_since(t0);
  PipelineResult res = solve_instance(processed, model, cfg);
  res.preprocess_millis = pre_ms;
  t0 = std::chrono::steady_clock::now();
  res.poses = assemble_poses(res.instance, res.solution);
  if (res.instance.ground_truth) {
    res.report = evaluate_ap(res.poses, *res.instance.ground_truth, res.instance.num_classes(), cfg.tau);
  }
  res.eval_millis = detail::millis_since(t0);
  return res;
}

// Run manifest: versions, configuration, seed, timings and objective.
// Timings vary between runs; everything else is reproducible.
inline std::string pipeline_manifest(const PipelineResult& res, const PipelineConfig& cfg, const std::string& model_hash) {
  nlohmann::ordered_json m;
  m["posecut_version"] = kVersion;
  m["json_library"] = std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                      std::to_string(NLOHMANN_JSON_VERSION_PATCH);
  m["seed"] = cfg.search.seed;
  m["threads"] = cfg.search.threads;
  m["restarts"] = cfg.search.restarts;
  m["schedule"] = cfg.schedule_doc ? std::string("custom") : cfg.schedule;
  m["nms_radius"] = cfg.preprocess.nms.radius;
  m["max_candidates"] = cfg.preprocess.nms.max_total;
  m["refine"] = cfg.preprocess.nms.refine_before_nms;
  m["split_threshold"] = cfg.preprocess.split ? nlohmann::ordered_json(cfg.preprocess.split_threshold) : nullptr;
  m["per_part_budget"] = cfg.per_part_budget;
  m["eps"] = cfg.eps;
  m["model_data_hash"] = model_hash;
  m["candidates"] = res.instance.size();
  m["clusters"] = res.solution.clusters.size();
  m["objective"] = res.solution.objective_value;
  if (res.report) m["mAP"] = res.report->mean_ap;
  nlohmann::ordered_json stages = nlohmann::ordered_json::array();
  for (const auto& s : res.stages) {
    stages.push_back({{"stage", s.stage},
                      {"candidates", s.candidates},
                      {"fixed", s.fixed},
                      {"objective", s.objective},
                      {"millis", s.millis},
                      {"skipped", s.skipped}});
  }
  m["stages"] = std::move(stages);
  m["timings_ms"] = {{"preprocess", res.preprocess_millis}, {"solve", res.solve_millis}, {"eval", res.eval_millis}};
  return m.dump(2) + "\n";
}

}  // namespace posecut
