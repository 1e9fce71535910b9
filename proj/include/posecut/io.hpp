#pragma once

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "posecut/error.hpp"
#include "posecut/model.hpp"

namespace posecut {

namespace json_detail {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

inline json parse(std::string_view text, std::string_view what) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string(what) + " is not valid JSON: " + e.what());
  }
}

inline void expect_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw SchemaError("field '" + path + "' must be an object");
}

inline void reject_unknown(const json& j, const std::string& path, std::initializer_list<std::string_view> known) {
  expect_object(j, path);
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw SchemaError("unknown field '" + path + "." + key + "'");
    }
  }
}

inline const json& require(const json& j, const std::string& key, const std::string& path) {
  auto it = j.find(key);
  if (it == j.end()) throw SchemaError("missing field '" + path + "." + key + "'");
  return *it;
}

inline double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw SchemaError("field '" + path + "' must be a number");
  return j.get<double>();
}

inline long long as_integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw SchemaError("field '" + path + "' must be an integer");
  return j.get<long long>();
}

inline std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw SchemaError("field '" + path + "' must be a string");
  return j.get<std::string>();
}

inline Vec2 as_vec2(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2) throw SchemaError("field '" + path + "' must be a [x, y] pair");
  return {as_number(j[0], path + "[0]"), as_number(j[1], path + "[1]")};
}

inline const json& as_array(const json& j, const std::string& path) {
  if (!j.is_array()) throw SchemaError("field '" + path + "' must be an array");
  return j;
}

inline ordered_json vec2_json(const Vec2& v) { return ordered_json::array({v.x, v.y}); }

inline ClassId class_by_name(const ProblemInstance& inst, const std::string& name, const std::string& path) {
  auto c = inst.find_class(name);
  if (!c) throw SchemaError("field '" + path + "' names unknown class '" + name + "'");
  return *c;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot open '" + path + "' for reading");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("io", "cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("io", "failed writing '" + path + "'");
}

}  // namespace json_detail

using json_detail::read_file;
using json_detail::write_file;

inline std::string pair_key(const ProblemInstance& inst, ClassId from, ClassId to) {
  return inst.class_name(from) + "->" + inst.class_name(to);
}

// Parses and validates an instance document. Field order is irrelevant and
// unknown fields are rejected.
inline ProblemInstance load_instance(std::string_view text) {
  using namespace json_detail;
  const json doc = parse(text, "instance");
  if (!doc.is_object()) throw ParseError("instance document must be a JSON object");
  reject_unknown(doc, "$", {"classes", "scale", "candidates", "ground_truth"});

  ProblemInstance inst;
  const json& classes = as_array(require(doc, "classes", "$"), "$.classes");
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const std::string path = "$.classes[" + std::to_string(i) + "]";
    reject_unknown(classes[i], path, {"id", "name", "stage_hint"});
    PartClass pc;
    const long long id = as_integer(require(classes[i], "id", path), path + ".id");
    if (id < 0) throw ValidationError("class id must be non-negative at " + path);
    pc.id = static_cast<ClassId>(id);
    pc.name = as_string(require(classes[i], "name", path), path + ".name");
    if (auto it = classes[i].find("stage_hint"); it != classes[i].end()) {
      pc.stage_hint = static_cast<int>(as_integer(*it, path + ".stage_hint"));
    }
    inst.classes.push_back(std::move(pc));
  }
  std::sort(inst.classes.begin(), inst.classes.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  if (inst.classes.size() > kMaxClasses) throw ValidationError("at most 64 classes are supported");
  for (std::size_t i = 0; i < inst.classes.size(); ++i) {
    if (inst.classes[i].id != i) throw ValidationError("class ids must be dense 0..|C|-1 (class '" + inst.classes[i].name + "')");
  }
  const std::size_t nc = inst.num_classes();

  inst.scale = as_number(require(doc, "scale", "$"), "$.scale");

  const json& cands = as_array(require(doc, "candidates", "$"), "$.candidates");
  for (std::size_t i = 0; i < cands.size(); ++i) {
    const std::string path = "$.candidates[" + std::to_string(i) + "]";
    const json& cj = cands[i];
    reject_unknown(cj, path, {"id", "loc", "unary", "refine", "pair", "restrict", "fixed"});
    const long long id = as_integer(require(cj, "id", path), path + ".id");
    if (id < 0) throw ValidationError("candidate id must be non-negative at " + path);
    Candidate d = make_candidate(static_cast<CandidateId>(id), as_vec2(require(cj, "loc", path), path + ".loc"), nc);

    const json& unary = require(cj, "unary", path);
    expect_object(unary, path + ".unary");
    for (const auto& [name, value] : unary.items()) {
      d.unary[class_by_name(inst, name, path + ".unary")] = as_number(value, path + ".unary." + name);
    }
    for (ClassId c = 0; c < nc; ++c) {
      if (!unary.contains(inst.class_name(c))) throw SchemaError("missing field '" + path + ".unary." + inst.class_name(c) + "'");
    }

    const json& refine = require(cj, "refine", path);
    expect_object(refine, path + ".refine");
    for (const auto& [name, value] : refine.items()) {
      d.refine[class_by_name(inst, name, path + ".refine")] = as_vec2(value, path + ".refine." + name);
    }

    const json& pair = require(cj, "pair", path);
    expect_object(pair, path + ".pair");
    std::size_t seen = 0;
    for (const auto& [key, value] : pair.items()) {
      const auto arrow = key.find("->");
      if (arrow == std::string::npos) throw SchemaError("field '" + path + ".pair." + key + "' is not of the form 'a->b'");
      const ClassId from = class_by_name(inst, key.substr(0, arrow), path + ".pair." + key);
      const ClassId to = class_by_name(inst, key.substr(arrow + 2), path + ".pair." + key);
      if (from == to) throw SchemaError("unknown field '" + path + ".pair." + key + "' (self pair)");
      d.pair_offset(from, to) = as_vec2(value, path + ".pair." + key);
      ++seen;
    }
    if (seen != nc * (nc - (nc > 0 ? 1 : 0))) {
      for (ClassId a = 0; a < nc; ++a) {
        for (ClassId b = 0; b < nc; ++b) {
          if (a != b && !pair.contains(pair_key(inst, a, b))) {
            throw SchemaError("missing field '" + path + ".pair." + pair_key(inst, a, b) + "' (pair offsets must be dense)");
          }
        }
      }
    }

    if (auto it = cj.find("restrict"); it != cj.end()) {
      ClassSet s;
      for (const auto& nm : as_array(*it, path + ".restrict")) {
        s.insert(class_by_name(inst, as_string(nm, path + ".restrict"), path + ".restrict"));
      }
      d.allowed = s;
    }
    if (auto it = cj.find("fixed"); it != cj.end()) {
      d.fixed_class = class_by_name(inst, as_string(*it, path + ".fixed"), path + ".fixed");
    }
    inst.candidates.push_back(std::move(d));
  }
  std::sort(inst.candidates.begin(), inst.candidates.end(), [](const auto& a, const auto& b) { return a.id < b.id; });

  if (auto it = doc.find("ground_truth"); it != doc.end()) {
    std::vector<GroundTruthPose> gts;
    const json& arr = as_array(*it, "$.ground_truth");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string path = "$.ground_truth[" + std::to_string(i) + "]";
      reject_unknown(arr[i], path, {"person_id", "head_size", "joints"});
      GroundTruthPose g;
      g.person_id = static_cast<int>(as_integer(require(arr[i], "person_id", path), path + ".person_id"));
      g.head_size = as_number(require(arr[i], "head_size", path), path + ".head_size");
      g.joints.assign(nc, std::nullopt);
      const json& joints = require(arr[i], "joints", path);
      expect_object(joints, path + ".joints");
      for (const auto& [name, value] : joints.items()) {
        g.joints[class_by_name(inst, name, path + ".joints")] = as_vec2(value, path + ".joints." + name);
      }
      gts.push_back(std::move(g));
    }
    inst.ground_truth = std::move(gts);
  }

  validate_instance(inst);
  return inst;
}

// Canonical serialization: entities sorted by id, maps in class-id order,
// one candidate per line.
inline std::string save_instance(const ProblemInstance& inst) {
  using namespace json_detail;
  const std::size_t nc = inst.num_classes();

  ordered_json classes = ordered_json::array();
  for (const auto& pc : inst.classes) {
    ordered_json cj;
    cj["id"] = pc.id;
    cj["name"] = pc.name;
    if (pc.stage_hint) cj["stage_hint"] = *pc.stage_hint;
    classes.push_back(std::move(cj));
  }

  std::string out = "{\"classes\":" + classes.dump() + ",\n\"scale\":" + ordered_json(inst.scale).dump() + ",\n\"candidates\":[";
  for (std::size_t i = 0; i < inst.candidates.size(); ++i) {
    const Candidate& d = inst.candidates[i];
    ordered_json cj;
    cj["id"] = d.id;
    cj["loc"] = vec2_json(d.location);
    ordered_json unary = ordered_json::object();
    ordered_json refine = ordered_json::object();
    ordered_json pair = ordered_json::object();
    for (ClassId c = 0; c < nc; ++c) {
      unary[inst.class_name(c)] = d.unary[c];
      if (d.refine[c]) refine[inst.class_name(c)] = vec2_json(*d.refine[c]);
      for (ClassId c2 = 0; c2 < nc; ++c2) {
        if (c != c2) pair[pair_key(inst, c, c2)] = vec2_json(d.pair_offset(c, c2));
      }
    }
    cj["unary"] = std::move(unary);
    cj["refine"] = std::move(refine);
    cj["pair"] = std::move(pair);
    if (d.allowed != ClassSet::all(nc)) {
      ordered_json r = ordered_json::array();
      for (ClassId c : d.allowed.members()) r.push_back(inst.class_name(c));
      cj["restrict"] = std::move(r);
    }
    if (d.fixed_class) cj["fixed"] = inst.class_name(*d.fixed_class);
    out += (i == 0 ? "\n" : ",\n") + cj.dump();
  }
  out += inst.candidates.empty() ? "]" : "\n]";

  if (inst.ground_truth) {
    ordered_json gts = ordered_json::array();
    for (const auto& g : *inst.ground_truth) {
      ordered_json gj;
      gj["person_id"] = g.person_id;
      gj["head_size"] = g.head_size;
      ordered_json joints = ordered_json::object();
      for (ClassId c = 0; c < nc; ++c) {
        if (g.joints[c]) joints[inst.class_name(c)] = vec2_json(*g.joints[c]);
      }
      gj["joints"] = std::move(joints);
      gts.push_back(std::move(gj));
    }
    out += ",\n\"ground_truth\":" + gts.dump();
  }
  out += "}\n";
  return out;
}

inline ProblemInstance load_instance_file(const std::string& path) { return load_instance(read_file(path)); }
inline void save_instance_file(const std::string& path, const ProblemInstance& inst) { write_file(path, save_instance(inst)); }

// Solution document: {"label":{id:name|null}, "clusters":[[ids]], "objective":v}.
// Candidate ids absent from "label" are read as suppressed.
inline Solution load_solution(std::string_view text, const ProblemInstance& inst) {
  using namespace json_detail;
  const json doc = parse(text, "solution");
  if (!doc.is_object()) throw ParseError("solution document must be a JSON object");
  reject_unknown(doc, "$", {"label", "clusters", "objective"});

  Solution sol;
  sol.label.assign(inst.size(), std::nullopt);
  const json& label = require(doc, "label", "$");
  expect_object(label, "$.label");
  for (const auto& [key, value] : label.items()) {
    std::size_t pos = 0;
    unsigned long long id = 0;
    try {
      id = std::stoull(key, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != key.size() || key.empty()) throw SchemaError("field '$.label." + key + "' is not a candidate id");
    if (id >= sol.label.size()) sol.label.resize(id + 1);
    if (!value.is_null()) sol.label[id] = class_by_name(inst, as_string(value, "$.label." + key), "$.label." + key);
  }
  const json& clusters = as_array(require(doc, "clusters", "$"), "$.clusters");
  for (std::size_t k = 0; k < clusters.size(); ++k) {
    const std::string path = "$.clusters[" + std::to_string(k) + "]";
    std::vector<CandidateId> members;
    for (const auto& m : as_array(clusters[k], path)) {
      const long long id = as_integer(m, path);
      if (id < 0) throw SchemaError("field '" + path + "' holds a negative id");
      members.push_back(static_cast<CandidateId>(id));
    }
    sol.clusters.push_back(std::move(members));
  }
  sol.objective_value = as_number(require(doc, "objective", "$"), "$.objective");
  return sol;
}

inline std::string save_solution(const Solution& sol, const ProblemInstance& inst) {
  using namespace json_detail;
  ordered_json doc;
  ordered_json label = ordered_json::object();
  for (std::size_t d = 0; d < sol.label.size(); ++d) {
    label[std::to_string(d)] = sol.label[d] ? ordered_json(inst.class_name(*sol.label[d])) : ordered_json(nullptr);
  }
  doc["label"] = std::move(label);
  doc["clusters"] = sol.clusters;
  doc["objective"] = sol.objective_value;
  return doc.dump() + "\n";
}

}  // namespace posecut
