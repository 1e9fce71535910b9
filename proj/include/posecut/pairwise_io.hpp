#pragma once

#include <string>
#include <string_view>

#include "posecut/io.hpp"
#include "posecut/pairwise.hpp"

namespace posecut {

// {"classes": [names], "features": "full", "l2", "max_iter", "tol",
//  "data_hash", "trained_on", "pairs": [{"class_pair": "a|b", "weights": [9], ...}]}
inline std::string save_model(const PairwiseModel& m) {
  using json_detail::ordered_json;
  ordered_json doc;
  doc["classes"] = m.class_names;
  doc["features"] = to_string(m.features);
  doc["l2"] = m.l2;
  doc["max_iter"] = m.max_iter;
  doc["tol"] = m.tol;
  doc["data_hash"] = m.data_hash;
  doc["trained_on"] = m.trained_on;
  ordered_json pairs = ordered_json::array();
  const std::size_t nc = m.num_classes();
  for (ClassId a = 0; a < nc; ++a) {
    for (ClassId b = a; b < nc; ++b) {
      const PairFit& p = m.pairs.at(class_pair_index(a, b, nc));
      ordered_json e;
      e["class_pair"] = m.class_names[a] + "|" + m.class_names[b];
      e["weights"] = p.weights;
      e["log_likelihood"] = p.log_likelihood;
      e["iterations"] = p.iterations;
      e["positives"] = p.positives;
      e["negatives"] = p.negatives;
      e["degenerate"] = p.degenerate;
      pairs.push_back(std::move(e));
    }
  }
  doc["pairs"] = std::move(pairs);
  return doc.dump(1) + "\n";
}

inline PairwiseModel load_model(std::string_view text) {
  using namespace json_detail;
  const json doc = parse(text, "model");
  reject_unknown(doc, "$", {"classes", "features", "l2", "max_iter", "tol", "data_hash", "trained_on", "pairs"});
  PairwiseModel m;
  for (const auto& nm : as_array(require(doc, "classes", "$"), "$.classes")) m.class_names.push_back(as_string(nm, "$.classes"));
  if (auto it = doc.find("features"); it != doc.end()) {
    try {
      m.features = feature_set_from_string(as_string(*it, "$.features"));
    } catch (const Error&) {
      throw SchemaError("$.features: unknown feature set");
    }
  }
  if (auto it = doc.find("l2"); it != doc.end()) m.l2 = as_number(*it, "$.l2");
  if (auto it = doc.find("max_iter"); it != doc.end()) m.max_iter = static_cast<std::size_t>(as_integer(*it, "$.max_iter"));
  if (auto it = doc.find("tol"); it != doc.end()) m.tol = as_number(*it, "$.tol");
  if (auto it = doc.find("data_hash"); it != doc.end()) m.data_hash = as_string(*it, "$.data_hash");
  if (auto it = doc.find("trained_on"); it != doc.end()) m.trained_on = as_string(*it, "$.trained_on");

  const std::size_t nc = m.class_names.size();
  m.pairs.assign(num_class_pairs(nc), PairFit{});
  std::vector<bool> seen(m.pairs.size(), false);
  auto class_index = [&](const std::string& name, const std::string& path) {
    for (ClassId c = 0; c < nc; ++c) {
      if (m.class_names[c] == name) return c;
    }
    throw SchemaError(path + ": unknown class '" + name + "'");
  };
  const json& pairs = as_array(require(doc, "pairs", "$"), "$.pairs");
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const std::string path = "$.pairs[" + std::to_string(i) + "]";
    const json& e = pairs[i];
    expect_object(e, path);
    reject_unknown(e, path, {"class_pair", "weights", "log_likelihood", "iterations", "positives", "negatives", "degenerate"});
    const std::string key = as_string(require(e, "class_pair", path), path + ".class_pair");
    const auto bar = key.find('|');
    if (bar == std::string::npos) throw SchemaError(path + ".class_pair: expected \"a|b\"");
    const ClassId a = class_index(key.substr(0, bar), path + ".class_pair");
    const ClassId b = class_index(key.substr(bar + 1), path + ".class_pair");
    const std::size_t k = class_pair_index(a, b, nc);
    if (seen[k]) throw SchemaError(path + ".class_pair: duplicate pair '" + key + "'");
    seen[k] = true;
    PairFit& p = m.pairs[k];
    const json& w = as_array(require(e, "weights", path), path + ".weights");
    if (w.size() != kFeatureDim) throw SchemaError(path + ".weights: expected " + std::to_string(kFeatureDim) + " numbers");
    for (std::size_t j = 0; j < kFeatureDim; ++j) p.weights[j] = as_number(w[j], path + ".weights");
    if (auto it = e.find("log_likelihood"); it != e.end()) p.log_likelihood = as_number(*it, path + ".log_likelihood");
    if (auto it = e.find("iterations"); it != e.end()) p.iterations = static_cast<std::size_t>(as_integer(*it, path + ".iterations"));
    if (auto it = e.find("positives"); it != e.end()) p.positives = static_cast<std::size_t>(as_integer(*it, path + ".positives"));
    if (auto it = e.find("negatives"); it != e.end()) p.negatives = static_cast<std::size_t>(as_integer(*it, path + ".negatives"));
    if (auto it = e.find("degenerate"); it != e.end()) {
      if (!it->is_boolean()) throw SchemaError(path + ".degenerate: expected a boolean");
      p.degenerate = it->get<bool>();
    }
  }
  for (std::size_t k = 0; k < seen.size(); ++k) {
    if (!seen[k]) throw MissingWeights("model file lacks " + std::to_string(seen.size() - k) + " or more class pairs");
  }
  return m;
}

inline PairwiseModel load_model_file(const std::string& path) { return load_model(json_detail::read_file(path)); }
inline void save_model_file(const std::string& path, const PairwiseModel& m) { json_detail::write_file(path, save_model(m)); }

}  // namespace posecut
