// posecut: command-line front end for the pose assembly library.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "posecut/posecut.hpp"

namespace fs = std::filesystem;
using namespace posecut;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0: POSECUT_THREADS or 1
  int verbosity = 0;
};

unsigned resolve_threads(unsigned flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("POSECUT_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
    throw ValidationError("POSECUT_THREADS must be a positive integer, got '" + std::string(env) + "'");
  }
  return 1;
}

void check_output(const std::string& path) {
  if (path.empty()) return;
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty() && !fs::is_directory(parent)) throw ValidationError("output directory does not exist: " + parent.string());
}

void print_stages(const std::vector<StageReport>& stages) {
  for (const auto& s : stages) {
    std::fprintf(stderr, "stage=%zu objective=%.17g millis=%.3f candidates=%zu fixed=%zu%s\n", s.stage, s.objective, s.millis,
                 s.candidates, s.fixed, s.skipped ? " skipped=1" : "");
    if (s.skipped) std::fprintf(stderr, "warning: stage %zu matched no candidate and was skipped\n", s.stage);
  }
}

struct PreprocessFlags {
  double nms_radius = 24.0;
  std::size_t max_candidates = 100;
  std::size_t max_per_part = 0;
  double split_threshold = 0.4;
  bool no_split = false;
  bool no_refine = false;

  void add(CLI::App* app) {
    app->add_option("--nms-radius", nms_radius, "NMS radius in pixels")->check(CLI::PositiveNumber);
    app->add_option("--max-candidates", max_candidates, "total candidate budget")->check(CLI::PositiveNumber);
    app->add_option("--max-per-part", max_per_part, "per-class budget applied before the total budget (0: off)");
    app->add_option("--split-threshold", split_threshold, "detection splitting threshold s")->check(CLI::Range(0.0, 1.0));
    app->add_flag("--no-split", no_split, "disable detection splitting");
    app->add_flag("--no-refine", no_refine, "skip location refinement");
  }

  PreprocessParams params() const {
    PreprocessParams p;
    p.nms.radius = nms_radius;
    p.nms.max_total = max_candidates;
    p.nms.max_per_part = max_per_part;
    p.nms.refine_before_nms = !no_refine;
    p.split = !no_split;
    p.split_threshold = split_threshold;
    return p;
  }
};

struct SolveFlags {
  std::string instance;
  std::string model;
  std::string schedule = "3stage";
  std::size_t restarts = 8;
  std::size_t per_part_budget = 20;
  double eps = kDefaultClampEps;

  void add(CLI::App* app) {
    app->add_option("--instance", instance, "instance JSON")->required()->check(CLI::ExistingFile);
    app->add_option("--model", model, "pairwise model JSON (default: all-zero weights)")->check(CLI::ExistingFile);
    app->add_option("--schedule", schedule, "1stage, 2stage, 3stage or a schedule JSON file");
    app->add_option("--restarts", restarts, "local search restarts")->check(CLI::PositiveNumber);
    app->add_option("--stage-budget", per_part_budget, "new candidates per class and stage (0: unlimited)");
    app->add_option("--eps", eps, "probability clamp before log-odds")->check(CLI::Range(1e-300, 0.5));
  }

  PipelineConfig config(const PreprocessFlags& pre, const Globals& g) const {
    PipelineConfig cfg;
    cfg.preprocess = pre.params();
    if (schedule == "1stage" || schedule == "2stage" || schedule == "3stage") {
      cfg.schedule = schedule;
    } else {
      if (!fs::is_regular_file(schedule)) throw ScheduleError("schedule is neither a named schedule nor a file: " + schedule);
      cfg.schedule = schedule;
      cfg.schedule_doc = json_detail::read_file(schedule);
    }
    cfg.search.seed = g.seed;
    cfg.search.threads = resolve_threads(g.threads);
    cfg.search.restarts = restarts;
    cfg.per_part_budget = per_part_budget;
    cfg.eps = eps;
    return cfg;
  }

  PairwiseModel load_model_for(const ProblemInstance& inst) const {
    return model.empty() ? make_zero_model(inst) : load_model_file(model);
  }
};

int run_synth(const SynthParams& p, const std::string& out) {
  check_output(out);
  const ProblemInstance inst = generate(p);
  const std::string text = save_instance(inst);
  if (out.empty()) {
    std::cout << text;
  } else {
    json_detail::write_file(out, text);
  }
  return 0;
}

int run_train(const std::string& dir, const FitParams& fit, const TrainingParams& tp, const std::string& out) {
  if (!fs::is_directory(dir)) throw ValidationError("not a directory: " + dir);
  check_output(out);
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path().string());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw NoGroundTruth("no *.json instances in " + dir);
  std::vector<ProblemInstance> instances;
  for (const auto& f : files) instances.push_back(load_instance_file(f));
  const TrainingSet ts = build_training_set(instances, tp);
  PairwiseModel model = fit_logistic(ts, fit);
  model.trained_on = std::to_string(files.size()) + " instances from " + fs::path(dir).filename().string();
  std::size_t degenerate = 0;
  for (const auto& p : model.pairs) degenerate += p.degenerate ? 1 : 0;
  if (degenerate > 0) std::fprintf(stderr, "warning: %zu class pairs had one-sided data; weights left at zero\n", degenerate);
  std::fprintf(stderr, "pairs=%zu degenerate=%zu data_hash=%s\n", model.pairs.size(), degenerate, model.data_hash.c_str());
  save_model_file(out, model);
  return 0;
}

int run_solve(const SolveFlags& sf, const PreprocessFlags& pre, const Globals& g, const std::string& out,
              const std::string& out_instance, const std::string& dump) {
  check_output(out);
  check_output(out_instance);
  check_output(dump);
  const PipelineConfig cfg = sf.config(pre, g);
  const ProblemInstance inst = load_instance_file(sf.instance);
  const PairwiseModel model = sf.load_model_for(inst);
  const ProblemInstance processed = preprocess(inst, cfg.preprocess);
  check_model_covers(model, processed);
  if (!dump.empty()) json_detail::write_file(dump, dump_costs(processed, build_costs(processed, model, cfg.eps)));
  const PipelineResult res = solve_instance(processed, model, cfg);
  print_stages(res.stages);
  std::fprintf(stderr, "objective=%.17g candidates=%zu clusters=%zu millis=%.3f\n", res.solution.objective_value,
               processed.size(), res.solution.clusters.size(), res.solve_millis);
  const std::string text = save_solution(res.solution, processed);
  if (out.empty()) {
    std::cout << text;
  } else {
    json_detail::write_file(out, text);
  }
  if (!out_instance.empty()) save_instance_file(out_instance, processed);
  return 0;
}

int run_eval(const std::string& pred, const std::string& instance, double tau, const std::string& out) {
  check_output(out);
  const ProblemInstance inst = load_instance_file(instance);
  if (!inst.ground_truth) throw NoGroundTruth("instance has no ground_truth");
  const Solution sol = load_solution(json_detail::read_file(pred), inst);
  detail::require_feasible(inst, sol);
  const ApReport rep = evaluate_ap(assemble_poses(inst, sol), *inst.ground_truth, inst.num_classes(), tau);
  const std::string text = report_to_json(rep, inst, tau);
  if (out.empty()) {
    std::cout << text;
  } else {
    json_detail::write_file(out, text);
  }
  return 0;
}

struct RenderFlags {
  std::string instance;
  std::string model;
  std::string target;
  std::size_t anchor = 0;
  double grid_step = 4.0;
  std::string pgm;
  std::string per_source_dir;
  bool normalize = false;
  std::string svg;
  std::string pred;
};

int run_render(const RenderFlags& rf) {
  check_output(rf.pgm);
  check_output(rf.svg);
  if (!rf.per_source_dir.empty() && !fs::is_directory(rf.per_source_dir)) {
    throw ValidationError("not a directory: " + rf.per_source_dir);
  }
  if (rf.pgm.empty() && rf.svg.empty()) throw ValidationError("render needs --pgm and/or --svg");
  const ProblemInstance inst = load_instance_file(rf.instance);
  if (!rf.pgm.empty()) {
    if (rf.target.empty()) throw ValidationError("--pgm needs --target");
    const auto target = inst.find_class(rf.target);
    if (!target) throw ValidationError("unknown target class '" + rf.target + "'");
    const PairwiseModel model = rf.model.empty() ? make_zero_model(inst) : load_model_file(rf.model);
    ScoremapParams sp;
    sp.grid_step = rf.grid_step;
    sp.per_source = !rf.per_source_dir.empty();
    const Scoremap map = render_pairwise_scoremap(inst, model, *target, rf.anchor, sp);
    json_detail::write_file(rf.pgm, write_pgm(map.combined, rf.normalize));
    for (const auto& [c, raster] : map.sources) {
      const fs::path p = fs::path(rf.per_source_dir) / (inst.class_name(c) + "_to_" + rf.target + ".pgm");
      json_detail::write_file(p.string(), write_pgm(raster, rf.normalize));
    }
    const Vec2 peak = map.combined.argmax();
    std::fprintf(stderr, "argmax=%.1f,%.1f\n", peak.x, peak.y);
  }
  if (!rf.svg.empty()) {
    std::optional<PoseSet> poses;
    if (!rf.pred.empty()) {
      const Solution sol = load_solution(json_detail::read_file(rf.pred), inst);
      detail::require_feasible(inst, sol);
      poses = assemble_poses(inst, sol);
    }
    json_detail::write_file(rf.svg, svg_overlay(inst, poses ? &*poses : nullptr));
  }
  return 0;
}

int run_pipeline_cmd(const SolveFlags& sf, const PreprocessFlags& pre, const Globals& g, double tau, const std::string& out_dir) {
  if (!fs::is_directory(out_dir)) throw ValidationError("output directory does not exist: " + out_dir);
  PipelineConfig cfg = sf.config(pre, g);
  cfg.tau = tau;
  const ProblemInstance inst = load_instance_file(sf.instance);
  const PairwiseModel model = sf.load_model_for(inst);
  const PipelineResult res = run_pipeline(inst, model, cfg);
  print_stages(res.stages);
  const fs::path dir(out_dir);
  json_detail::write_file((dir / "solution.json").string(), save_solution(res.solution, res.instance));
  save_instance_file((dir / "instance.json").string(), res.instance);
  if (res.report) {
    json_detail::write_file((dir / "report.json").string(), report_to_json(*res.report, res.instance, tau));
    std::fprintf(stderr, "mAP=%.6f\n", res.report->mean_ap);
  } else {
    std::fprintf(stderr, "warning: instance has no ground truth; no report written\n");
  }
  json_detail::write_file((dir / "manifest.json").string(), pipeline_manifest(res, cfg, model.data_hash));
  std::fprintf(stderr, "objective=%.17g millis=%.3f\n", res.solution.objective_value, res.solve_millis);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"posecut: multi-person pose assembly by joint partitioning and labeling"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));
  Globals g;
  app.add_option("--seed", g.seed, "root random seed")->capture_default_str();
  app.add_option("--threads", g.threads, "worker threads (overrides POSECUT_THREADS)");
  app.add_flag("-v,--verbose", g.verbosity, "more diagnostics on stderr");

  auto add_globals = [&](CLI::App* sub) {
    sub->add_option("--seed", g.seed, "root random seed");
    sub->add_option("--threads", g.threads, "worker threads (overrides POSECUT_THREADS)");
  };

  // synth
  SynthParams synth;
  std::string synth_out;
  double synth_head = 0.0;
  auto* s = app.add_subcommand("synth", "generate a synthetic instance with ground truth");
  s->add_option("--persons", synth.persons, "number of persons");
  s->add_option("--clutter", synth.clutter_rate, "expected false detections per class")->check(CLI::NonNegativeNumber);
  s->add_option("--jitter", synth.jitter_sigma, "joint and detection jitter sigma, pixels")->check(CLI::NonNegativeNumber);
  s->add_option("--offset-noise", synth.offset_noise_sigma, "pair offset noise sigma, pixels")->check(CLI::NonNegativeNumber);
  s->add_option("--sharpness", synth.unary_sharpness, "unary decay length, pixels")->check(CLI::PositiveNumber);
  s->add_option("--head-size", synth_head, "head size in pixels (default: from the skeleton)");
  s->add_option("--out", synth_out, "output instance (default: stdout)");
  add_globals(s);

  // train
  std::string train_dir, train_out, train_features = "full";
  FitParams fit;
  TrainingParams tp;
  auto* t = app.add_subcommand("train", "fit the pairwise logistic model on instances with ground truth");
  t->add_option("--instances", train_dir, "directory of instance JSON files")->required()->check(CLI::ExistingDirectory);
  t->add_option("--l2", fit.l2, "L2 regularizer lambda")->check(CLI::NonNegativeNumber);
  t->add_option("--max-iter", fit.max_iter, "gradient ascent iterations per class pair");
  t->add_option("--tol", fit.tol, "gradient infinity-norm stopping tolerance");
  t->add_option("--features", train_features, "full, uni_directional or no_angle");
  t->add_option("--tau", tp.tau, "matching radius as a fraction of head size")->check(CLI::PositiveNumber);
  t->add_option("--out", train_out, "output model JSON")->required();
  add_globals(t);

  // solve
  SolveFlags solve_flags;
  PreprocessFlags solve_pre;
  std::string solve_out, solve_out_instance, dump_path;
  auto* so = app.add_subcommand("solve", "preprocess an instance and solve it");
  solve_flags.add(so);
  solve_pre.add(so);
  so->add_option("--out", solve_out, "solution JSON (default: stdout)");
  so->add_option("--out-instance", solve_out_instance, "preprocessed instance that the solution ids refer to");
  so->add_option("--dump-costs", dump_path, "write the cost table as JSON");
  add_globals(so);

  // eval
  std::string eval_pred, eval_instance, eval_out;
  double eval_tau = 0.5;
  auto* e = app.add_subcommand("eval", "AP report for a solution against ground truth");
  e->add_option("--pred", eval_pred, "solution JSON")->required()->check(CLI::ExistingFile);
  e->add_option("--instance", eval_instance, "instance the solution refers to")->required()->check(CLI::ExistingFile);
  e->add_option("--tau", eval_tau, "match threshold as a fraction of head size")->check(CLI::PositiveNumber);
  e->add_option("--out", eval_out, "report JSON (default: stdout)");

  // render
  RenderFlags rf;
  auto* r = app.add_subcommand("render", "pairwise scoremaps (PGM) and skeleton overlays (SVG)");
  r->add_option("--instance", rf.instance, "instance JSON")->required()->check(CLI::ExistingFile);
  r->add_option("--model", rf.model, "pairwise model JSON")->check(CLI::ExistingFile);
  r->add_option("--target", rf.target, "target class of the scoremap");
  r->add_option("--anchor", rf.anchor, "ground-truth person index");
  r->add_option("--grid-step", rf.grid_step, "raster spacing in pixels")->check(CLI::PositiveNumber);
  r->add_option("--pgm", rf.pgm, "combined scoremap output (P5)");
  r->add_option("--per-source-dir", rf.per_source_dir, "also write one PGM per source joint here");
  r->add_flag("--normalize", rf.normalize, "stretch each raster to its maximum");
  r->add_option("--svg", rf.svg, "skeleton overlay output");
  r->add_option("--pred", rf.pred, "solution to overlay")->check(CLI::ExistingFile);

  // pipeline
  SolveFlags pipe_flags;
  PreprocessFlags pipe_pre;
  std::string pipe_dir;
  double pipe_tau = 0.5;
  auto* p = app.add_subcommand("pipeline", "preprocess, solve, assemble and evaluate; writes solution, report and manifest");
  pipe_flags.add(p);
  pipe_pre.add(p);
  p->add_option("--tau", pipe_tau, "AP match threshold")->check(CLI::PositiveNumber);
  p->add_option("--out-dir", pipe_dir, "directory for solution.json, instance.json, report.json, manifest.json")->required();
  add_globals(p);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*s) {
      synth.seed = g.seed;
      synth.head_size = synth_head;
      return run_synth(synth, synth_out);
    }
    if (*t) {
      fit.features = feature_set_from_string(train_features);
      fit.threads = resolve_threads(g.threads);
      return run_train(train_dir, fit, tp, train_out);
    }
    if (*so) return run_solve(solve_flags, solve_pre, g, solve_out, solve_out_instance, dump_path);
    if (*e) return run_eval(eval_pred, eval_instance, eval_tau, eval_out);
    if (*r) return run_render(rf);
    if (*p) return run_pipeline_cmd(pipe_flags, pipe_pre, g, pipe_tau, pipe_dir);
  } catch (const Error& err) {
    std::fprintf(stderr, "error [%s]: %s\n", err.module().c_str(), err.what());
    return 2;
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error [io]: %s\n", err.what());
    return 2;
  }
  return 1;
}
