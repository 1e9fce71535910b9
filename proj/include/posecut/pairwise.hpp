#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "posecut/error.hpp"
#include "posecut/geometry.hpp"
#include "posecut/model.hpp"
#include "posecut/rng.hpp"

namespace posecut {

inline constexpr std::size_t kFeatureDim = 9;
using FeatureVector = std::array<double, kFeatureDim>;

// Which feature components a model sees. The truncated variants zero the
// masked components, so every model keeps the same 9-slot layout.
enum class FeatureSet { full, uni_directional, no_angle };

inline const char* to_string(FeatureSet f) {
  switch (f) {
    case FeatureSet::full: return "full";
    case FeatureSet::uni_directional: return "uni_directional";
    case FeatureSet::no_angle: return "no_angle";
  }
  return "?";
}

inline FeatureSet feature_set_from_string(const std::string& s) {
  if (s == "full") return FeatureSet::full;
  if (s == "uni_directional" || s == "uni") return FeatureSet::uni_directional;
  if (s == "no_angle" || s == "noangle") return FeatureSet::no_angle;
  throw SchemaError("unknown feature set '" + s + "'");
}

// Layout: (dF, thF, dB, thB, exp(-dF), exp(-thF), exp(-dB), exp(-thB), 1).
inline FeatureVector feature_mask(FeatureSet f) {
  FeatureVector m;
  m.fill(1.0);
  if (f == FeatureSet::uni_directional) m[2] = m[3] = m[6] = m[7] = 0.0;
  if (f == FeatureSet::no_angle) m[1] = m[3] = m[5] = m[7] = 0.0;
  return m;
}

struct PairFeatures {
  double delta_f = 0.0;  // scale-normalized
  double theta_f = 0.0;  // radians, [0, pi]
  double delta_b = 0.0;
  double theta_b = 0.0;
  FeatureVector augmented{};
  bool degenerate = false;  // an angle was taken against a zero-length vector
};

inline PairFeatures make_pair_features(double delta_f, double theta_f, double delta_b, double theta_b) {
  PairFeatures f{delta_f, theta_f, delta_b, theta_b, {}, false};
  f.augmented = {delta_f,           theta_f,           delta_b,           theta_b,          std::exp(-delta_f),
                 std::exp(-theta_f), std::exp(-delta_b), std::exp(-theta_b), 1.0};
  return f;
}

// Features for reading `d` as class `c` and `d_prime` as class `c_prime`
// (c != c'). The forward half compares the observed offset d -> d' with the
// regression of d toward c'; the backward half does the same from d'.
inline PairFeatures compute_features(const Candidate& d, const Candidate& d_prime, ClassId c, ClassId c_prime, double scale) {
  if (c == c_prime) throw MissingOffset("pairwise", "compute_features needs two distinct classes");
  if (c >= d.num_classes() || c_prime >= d.num_classes() || c >= d_prime.num_classes() || c_prime >= d_prime.num_classes()) {
    throw MissingOffset("pairwise", "no pair offset for classes " + std::to_string(c) + "/" + std::to_string(c_prime));
  }
  const Vec2 observed = d_prime.location - d.location;
  const Vec2& forward = d.pair_offset(c, c_prime);
  const Vec2& backward = d_prime.pair_offset(c_prime, c);
  PairFeatures f = make_pair_features(distance(forward, observed) / scale, absolute_angle(observed, forward),
                                      distance(backward, -observed) / scale, absolute_angle(-observed, backward));
  f.degenerate = norm(observed) < kDegenerateNorm || norm(forward) < kDegenerateNorm || norm(backward) < kDegenerateNorm;
  return f;
}

// Same-class pairs carry no cross-class regression; only their separation is used.
inline PairFeatures compute_features_same_class(const Candidate& d, const Candidate& d_prime, double scale) {
  const double delta = distance(d.location, d_prime.location) / scale;
  return make_pair_features(delta, 0.0, delta, 0.0);
}

// Canonical orientation: the lower class id is always the forward source.
inline PairFeatures canonical_features(const Candidate& d, ClassId c, const Candidate& d_prime, ClassId c_prime, double scale) {
  if (c == c_prime) return compute_features_same_class(d, d_prime, scale);
  return c < c_prime ? compute_features(d, d_prime, c, c_prime, scale) : compute_features(d_prime, d, c_prime, c, scale);
}

inline std::size_t num_class_pairs(std::size_t num_classes) { return num_classes * (num_classes + 1) / 2; }

// Index of the unordered pair {a, b} among the |C|(|C|+1)/2 pairs.
inline std::size_t class_pair_index(ClassId a, ClassId b, std::size_t num_classes) {
  if (a > b) std::swap(a, b);
  const std::size_t row_start = a * num_classes - (a == 0 ? 0 : a * (a - 1) / 2);
  return row_start + (b - a);
}

struct PairFit {
  FeatureVector weights{};
  double log_likelihood = 0.0;  // mean log-likelihood at the returned weights
  std::size_t iterations = 0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  bool degenerate = false;       // one-sided data; weights left at zero
};

struct PairwiseModel {
  std::vector<std::string> class_names;
  FeatureSet features = FeatureSet::full;
  std::vector<PairFit> pairs;  // indexed by class_pair_index
  double l2 = 0.0;
  std::size_t max_iter = 0;
  double tol = 0.0;
  std::string data_hash;
  std::string trained_on;

  std::size_t num_classes() const { return class_names.size(); }

  const FeatureVector& weights(ClassId a, ClassId b) const {
    const std::size_t k = class_pair_index(a, b, num_classes());
    if (a >= num_classes() || b >= num_classes() || k >= pairs.size()) {
      throw MissingWeights("no weights for class pair " + std::to_string(a) + "|" + std::to_string(b));
    }
    return pairs[k].weights;
  }
};

// A model with all weights zero: every pair scores 0.5.
inline PairwiseModel make_zero_model(const ProblemInstance& inst, FeatureSet features = FeatureSet::full) {
  PairwiseModel m;
  for (const auto& pc : inst.classes) m.class_names.push_back(pc.name);
  m.features = features;
  m.pairs.assign(num_class_pairs(inst.num_classes()), PairFit{});
  m.trained_on = "zero";
  return m;
}

// Throws MissingWeights unless the model's roster matches the instance.
inline void check_model_covers(const PairwiseModel& model, const ProblemInstance& inst) {
  if (model.num_classes() != inst.num_classes() || model.pairs.size() != num_class_pairs(inst.num_classes())) {
    throw MissingWeights("model covers " + std::to_string(model.num_classes()) + " classes, instance has " +
                         std::to_string(inst.num_classes()));
  }
  for (ClassId c = 0; c < inst.num_classes(); ++c) {
    if (model.class_names[c] != inst.class_name(c)) {
      throw MissingWeights("model class " + std::to_string(c) + " is '" + model.class_names[c] + "', instance has '" +
                           inst.class_name(c) + "'");
    }
  }
}

inline double masked_dot(const FeatureVector& w, const FeatureVector& x, const FeatureVector& mask) {
  double s = 0.0;
  for (std::size_t i = 0; i < kFeatureDim; ++i) s += w[i] * x[i] * mask[i];
  return s;
}

// Logistic function kept strictly inside (0, 1).
inline double logistic(double z) {
  const double p = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  return std::clamp(p, std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
}

// Probability that the two detections, read as c and c', are the same person.
inline double pairwise_probability(const PairFeatures& f, const PairwiseModel& model, ClassId c, ClassId c_prime) {
  return logistic(masked_dot(model.weights(c, c_prime), f.augmented, feature_mask(model.features)));
}

inline double same_person_probability(const ProblemInstance& inst, const PairwiseModel& model, CandidateId d, ClassId c,
                                      CandidateId d_prime, ClassId c_prime) {
  const PairFeatures f = canonical_features(inst.candidates[d], c, inst.candidates[d_prime], c_prime, inst.scale);
  return pairwise_probability(f, model, c, c_prime);
}

// ---------------------------------------------------------------------------
// Training data

struct TrainingSample {
  FeatureVector x{};
  int label = 0;
};

struct TrainingSet {
  std::vector<std::string> class_names;
  std::vector<std::vector<TrainingSample>> pairs;  // indexed by class_pair_index

  std::size_t count(ClassId a, ClassId b, int label) const {
    const auto& s = pairs[class_pair_index(a, b, class_names.size())];
    return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [&](const auto& t) { return t.label == label; }));
  }
};

struct TrainingParams {
  double tau = 0.5;  // match radius as a fraction of head size
};

namespace detail {

struct JointMatch {
  int person = -1;   // ground-truth pose index within tau, or -1
  bool far = false;  // beyond 2 tau of every ground-truth joint of the class
};

// Nearest ground-truth joint of class c within tau * head_size.
inline JointMatch match_joint(const Vec2& p, ClassId c, const std::vector<GroundTruthPose>& gts, double tau) {
  JointMatch m;
  m.far = true;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < gts.size(); ++g) {
    const auto& j = gts[g].joints[c];
    if (!j) continue;
    const double dist = distance(p, *j);
    const double radius = tau * gts[g].head_size;
    if (dist <= 2.0 * radius) m.far = false;
    if (dist <= radius && dist < best) {
      best = dist;
      m.person = static_cast<int>(g);
    }
  }
  return m;
}

}  // namespace detail

// Labels candidate pairs against ground truth: 1 for two detections on the
// matching joints of one person, 0 for matches on different persons or a
// match paired with a detection far from every joint of its class. All
// other pairs are ambiguous and dropped. Each candidate is read as its
// most likely class only, the way a per-part detector would report it.
inline TrainingSet build_training_set(std::span<const ProblemInstance> instances, const TrainingParams& params = {}) {
  TrainingSet ts;
  if (instances.empty()) throw NoGroundTruth("no training instances");
  const std::size_t nc = instances.front().num_classes();
  for (const auto& pc : instances.front().classes) ts.class_names.push_back(pc.name);
  ts.pairs.assign(num_class_pairs(nc), {});

  for (std::size_t idx = 0; idx < instances.size(); ++idx) {
    const auto& inst = instances[idx];
    if (!inst.ground_truth) throw NoGroundTruth("training instance " + std::to_string(idx) + " has no ground truth");
    if (inst.num_classes() != nc) throw ValidationError("training instances disagree on the class roster");
    for (ClassId c = 0; c < nc; ++c) {
      if (inst.class_name(c) != ts.class_names[c]) throw ValidationError("training instances disagree on the class roster");
    }
    const auto& gts = *inst.ground_truth;
    const std::size_t n = inst.size();
    std::vector<detail::JointMatch> match(n * nc);
    for (const auto& d : inst.candidates) {
      for (ClassId c = 0; c < nc; ++c) match[d.id * nc + c] = detail::match_joint(d.location, c, gts, params.tau);
    }
    auto label_of = [&](CandidateId d, ClassId c, CandidateId e, ClassId c2) -> int {
      const auto& a = match[d * nc + c];
      const auto& b = match[e * nc + c2];
      if (a.person >= 0 && b.person >= 0) return a.person == b.person ? 1 : 0;
      if ((a.person >= 0 && b.far) || (b.person >= 0 && a.far)) return 0;
      return -1;
    };

    std::vector<std::vector<CandidateId>> of_class(nc);
    for (const auto& d : inst.candidates) {
      if (const auto c = d.argmax_class()) of_class[*c].push_back(d.id);
    }
    for (ClassId c = 0; c < nc; ++c) {
      for (ClassId c2 = c; c2 < nc; ++c2) {
        auto& bucket = ts.pairs[class_pair_index(c, c2, nc)];
        const auto& left = of_class[c];
        const auto& right = of_class[c2];
        for (std::size_t i = 0; i < left.size(); ++i) {
          for (std::size_t j = (c == c2 ? i + 1 : 0); j < right.size(); ++j) {
            const CandidateId d = left[i];
            const CandidateId e = right[j];
            const int y = label_of(d, c, e, c2);
            if (y < 0) continue;
            const PairFeatures f = canonical_features(inst.candidates[d], c, inst.candidates[e], c2, inst.scale);
            bucket.push_back({f.augmented, y});
          }
        }
      }
    }
  }
  return ts;
}

// ---------------------------------------------------------------------------
// Maximum-likelihood fit

struct FitParams {
  double l2 = 1e-4;
  std::size_t max_iter = 500;
  double tol = 1e-6;
  FeatureSet features = FeatureSet::full;
  unsigned threads = 1;
};

// Mean log-likelihood minus l2 * |w|^2 over masked features, with gradient.
class LogisticObjective {
 public:
  LogisticObjective(std::span<const TrainingSample> samples, double l2, FeatureSet features)
      : samples_(samples), l2_(l2), mask_(feature_mask(features)) {}

  double value(const FeatureVector& w) const {
    double ll = 0.0;
    for (const auto& s : samples_) ll += sample_log_likelihood(w, s);
    const double mean = samples_.empty() ? 0.0 : ll / static_cast<double>(samples_.size());
    return mean - l2_ * squared_norm(w);
  }

  double mean_log_likelihood(const FeatureVector& w) const {
    double ll = 0.0;
    for (const auto& s : samples_) ll += sample_log_likelihood(w, s);
    return samples_.empty() ? 0.0 : ll / static_cast<double>(samples_.size());
  }

  FeatureVector gradient(const FeatureVector& w) const {
    FeatureVector g{};
    for (const auto& s : samples_) {
      const double r = static_cast<double>(s.label) - logistic_exact(masked_dot(w, s.x, mask_));
      for (std::size_t i = 0; i < kFeatureDim; ++i) g[i] += r * s.x[i] * mask_[i];
    }
    const double inv = samples_.empty() ? 0.0 : 1.0 / static_cast<double>(samples_.size());
    for (std::size_t i = 0; i < kFeatureDim; ++i) g[i] = g[i] * inv - 2.0 * l2_ * w[i];
    return g;
  }

  std::span<const TrainingSample> samples() const { return samples_; }
  const FeatureVector& mask() const { return mask_; }

 private:
  static double squared_norm(const FeatureVector& w) {
    double s = 0.0;
    for (double v : w) s += v * v;
    return s;
  }
  static double logistic_exact(double z) {
    return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  }
  // log sigma(z) for y = 1, log(1 - sigma(z)) for y = 0, without overflow.
  double sample_log_likelihood(const FeatureVector& w, const TrainingSample& s) const {
    const double z = masked_dot(w, s.x, mask_);
    const double signed_z = s.label == 1 ? z : -z;
    return signed_z >= 0.0 ? -std::log1p(std::exp(-signed_z)) : signed_z - std::log1p(std::exp(signed_z));
  }

  std::span<const TrainingSample> samples_;
  double l2_;
  FeatureVector mask_;
};

// Full-batch gradient ascent from zero with Armijo backtracking. `trace`,
// when given, receives the objective after every accepted step.
inline PairFit fit_logistic_pair(std::span<const TrainingSample> samples, const FitParams& params,
                                 std::vector<double>* trace = nullptr) {
  PairFit fit;
  for (const auto& s : samples) (s.label == 1 ? fit.positives : fit.negatives) += 1;
  if (fit.positives == 0 || fit.negatives == 0) {
    fit.degenerate = true;
    fit.log_likelihood = LogisticObjective(samples, params.l2, params.features).mean_log_likelihood(fit.weights);
    return fit;
  }

  const LogisticObjective obj(samples, params.l2, params.features);
  FeatureVector w{};
  double fw = obj.value(w);
  if (trace) trace->push_back(fw);
  double step = 1.0;
  std::size_t it = 0;
  for (; it < params.max_iter; ++it) {
    const FeatureVector g = obj.gradient(w);
    double gmax = 0.0;
    double gsq = 0.0;
    for (double v : g) {
      gmax = std::max(gmax, std::abs(v));
      gsq += v * v;
    }
    if (gmax < params.tol) break;

    step = std::min(step * 2.0, 1e6);
    bool accepted = false;
    while (step > 1e-14) {
      FeatureVector cand;
      for (std::size_t i = 0; i < kFeatureDim; ++i) cand[i] = w[i] + step * g[i];
      const double fc = obj.value(cand);
      if (fc >= fw + 1e-4 * step * gsq) {
        w = cand;
        fw = fc;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    if (trace) trace->push_back(fw);
  }
  fit.weights = w;
  fit.iterations = it;
  fit.log_likelihood = obj.mean_log_likelihood(w);
  return fit;
}

inline std::string hash_training_set(const TrainingSet& ts) {
  std::uint64_t h = fnv1a64("posecut-training");
  for (const auto& bucket : ts.pairs) {
    for (const auto& s : bucket) {
      h = fnv1a64(std::string_view(reinterpret_cast<const char*>(s.x.data()), sizeof(double) * kFeatureDim), h);
      h = fnv1a64(std::string_view(reinterpret_cast<const char*>(&s.label), sizeof(s.label)), h);
    }
    h = fnv1a64("|", h);
  }
  static constexpr char digits[] = "0123456789abcdef";
  std::string hex(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) hex[static_cast<std::size_t>(i)] = digits[h & 0xF];
  return hex;
}

// Fits one weight vector per unordered class pair. Pairs are independent
// and may be fitted on several threads; the result does not depend on the
// thread count.
inline PairwiseModel fit_logistic(const TrainingSet& ts, const FitParams& params) {
  PairwiseModel model;
  model.class_names = ts.class_names;
  model.features = params.features;
  model.l2 = params.l2;
  model.max_iter = params.max_iter;
  model.tol = params.tol;
  model.data_hash = hash_training_set(ts);
  model.pairs.assign(ts.pairs.size(), PairFit{});

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < ts.pairs.size(); k = next++) model.pairs[k] = fit_logistic_pair(ts.pairs[k], params);
  };
  const unsigned nthreads = std::max(1U, std::min<unsigned>(params.threads, static_cast<unsigned>(ts.pairs.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < nthreads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  return model;
}

}  // namespace posecut
