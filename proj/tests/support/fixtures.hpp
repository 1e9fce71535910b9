#pragma once

// Synthetic corpora and trained models shared by the tests.

#include <cstdint>
#include <vector>

#include "posecut/posecut.hpp"

namespace fixture {

inline std::vector<posecut::ProblemInstance> corpus(posecut::SynthParams p, std::uint64_t first_seed, std::size_t count) {
  std::vector<posecut::ProblemInstance> out;
  for (std::size_t i = 0; i < count; ++i) {
    p.seed = first_seed + i;
    out.push_back(posecut::generate(p));
  }
  return out;
}

// Training scenes: moderate jitter and clutter so every class pair sees
// both labels. Seeds start at 10000 to stay clear of evaluation seeds.
inline posecut::SynthParams training_scene() {
  posecut::SynthParams p;
  p.persons = 3;
  p.jitter_sigma = 3.0;
  p.clutter_rate = 1.0;
  p.offset_noise_sigma = 3.0;
  return p;
}

inline posecut::PairwiseModel train(const posecut::SynthParams& scene, std::size_t count = 12,
                                    posecut::FeatureSet features = posecut::FeatureSet::full, std::uint64_t first_seed = 10000,
                                    unsigned threads = 4) {
  const auto instances = corpus(scene, first_seed, count);
  const posecut::TrainingSet ts = posecut::build_training_set(instances);
  posecut::FitParams fp;
  fp.features = features;
  fp.threads = threads;
  return posecut::fit_logistic(ts, fp);
}

}  // namespace fixture
