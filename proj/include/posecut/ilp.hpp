#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "posecut/error.hpp"
#include "posecut/model.hpp"
#include "posecut/pairwise.hpp"

namespace posecut {

// Cost of a label the candidate may not take.
inline constexpr double kForbiddenCost = 1e6;
inline constexpr double kDefaultClampEps = 1e-6;

// log((1 - p) / p) with p clamped to [eps, 1 - eps]; negative values are rewards.
inline double log_odds_cost(double p, double eps) {
  const double q = std::clamp(p, eps, 1.0 - eps);
  return std::log((1.0 - q) / q);
}

// Unary and pairwise costs restricted to each candidate's labelable
// classes ("slots"). Pairwise costs are symmetric:
// beta(d, c, d', c') == beta(d', c', d, c).
class CostTable {
 public:
  CostTable() = default;

  std::size_t size() const { return slots_.size(); }
  std::size_t num_classes() const { return num_classes_; }
  std::size_t total_slots() const { return total_slots_; }

  std::span<const ClassId> slots(CandidateId d) const { return slots_[d]; }

  int slot_of(CandidateId d, ClassId c) const {
    const auto& s = slots_[d];
    const auto it = std::find(s.begin(), s.end(), c);
    return it == s.end() ? -1 : static_cast<int>(it - s.begin());
  }

  double alpha(CandidateId d, ClassId c) const {
    const int i = c < num_classes_ ? slot_of(d, c) : -1;
    return i < 0 ? kForbiddenCost : alpha_[offset_[d] + static_cast<std::size_t>(i)];
  }
  double alpha_slot(CandidateId d, std::size_t i) const { return alpha_[offset_[d] + i]; }

  double beta(CandidateId d, ClassId c, CandidateId d2, ClassId c2) const {
    if (d == d2) return 0.0;
    const int i = c < num_classes_ ? slot_of(d, c) : -1;
    const int j = c2 < num_classes_ ? slot_of(d2, c2) : -1;
    return (i < 0 || j < 0) ? kForbiddenCost : beta_slot(d, static_cast<std::size_t>(i), d2, static_cast<std::size_t>(j));
  }
  double beta_slot(CandidateId d, std::size_t i, CandidateId d2, std::size_t j) const {
    return beta_[(offset_[d] + i) * total_slots_ + offset_[d2] + j];
  }

  // Fixed candidates must stay labeled with their fixed class.
  bool must_keep(CandidateId d) const { return fixed_[d] >= 0; }

  // Two fixed candidates of one class never share a cluster.
  bool cannot_link(CandidateId d, CandidateId d2) const { return fixed_[d] >= 0 && fixed_[d] == fixed_[d2]; }

 private:
  friend CostTable build_costs(const ProblemInstance&, const PairwiseModel&, double);
  friend CostTable cost_table_from_values(std::size_t, const std::vector<std::vector<ClassId>>&,
                                          const std::vector<std::vector<double>>&, const std::vector<double>&,
                                          const std::vector<int>&);

  void allocate(const std::vector<std::vector<ClassId>>& slots, std::size_t num_classes) {
    num_classes_ = num_classes;
    slots_ = slots;
    offset_.assign(slots.size() + 1, 0);
    for (std::size_t d = 0; d < slots.size(); ++d) offset_[d + 1] = offset_[d] + slots[d].size();
    total_slots_ = offset_.back();
    alpha_.assign(total_slots_, 0.0);
    beta_.assign(total_slots_ * total_slots_, 0.0);
    fixed_.assign(slots.size(), -1);
  }

  std::size_t num_classes_ = 0;
  std::size_t total_slots_ = 0;
  std::vector<std::vector<ClassId>> slots_;
  std::vector<std::size_t> offset_;
  std::vector<double> alpha_;
  std::vector<double> beta_;
  std::vector<int> fixed_;
};

// Pairwise cost of reading d as c and d' as c' in one cluster.
inline double pair_cost(const ProblemInstance& inst, const PairwiseModel& model, double eps, CandidateId d, ClassId c,
                        CandidateId d2, ClassId c2) {
  return log_odds_cost(same_person_probability(inst, model, d, c, d2, c2), eps);
}

inline CostTable build_costs(const ProblemInstance& inst, const PairwiseModel& model, double eps = kDefaultClampEps) {
  if (!(eps > 0.0 && eps < 0.5)) throw ValidationError("clamp eps must lie in (0, 0.5)");
  check_model_covers(model, inst);
  const std::size_t n = inst.size();
  std::vector<std::vector<ClassId>> slots(n);
  for (const auto& d : inst.candidates) slots[d.id] = d.labelable().members();

  CostTable t;
  t.allocate(slots, inst.num_classes());
  for (const auto& d : inst.candidates) {
    if (d.fixed_class) t.fixed_[d.id] = static_cast<int>(*d.fixed_class);
    for (std::size_t i = 0; i < slots[d.id].size(); ++i) {
      t.alpha_[t.offset_[d.id] + i] = log_odds_cost(d.unary[slots[d.id][i]], eps);
    }
  }
  for (CandidateId d = 0; d < n; ++d) {
    for (CandidateId e = d + 1; e < n; ++e) {
      for (std::size_t i = 0; i < slots[d].size(); ++i) {
        for (std::size_t j = 0; j < slots[e].size(); ++j) {
          const double b = pair_cost(inst, model, eps, d, slots[d][i], e, slots[e][j]);
          t.beta_[(t.offset_[d] + i) * t.total_slots_ + t.offset_[e] + j] = b;
          t.beta_[(t.offset_[e] + j) * t.total_slots_ + t.offset_[d] + i] = b;
        }
      }
    }
  }
  return t;
}

// Table from explicit values. `alpha_by_class` is [d][c]; `beta_by_class`
// is indexed [(d * C + c) * n * C + d2 * C + c2] and must be symmetric.
// `fixed` holds the fixed class per candidate or -1 (empty: none fixed).
inline CostTable cost_table_from_values(std::size_t num_classes, const std::vector<std::vector<ClassId>>& slots,
                                        const std::vector<std::vector<double>>& alpha_by_class,
                                        const std::vector<double>& beta_by_class, const std::vector<int>& fixed = {}) {
  const std::size_t n = slots.size();
  CostTable t;
  t.allocate(slots, num_classes);
  if (!fixed.empty()) t.fixed_ = fixed;
  for (CandidateId d = 0; d < n; ++d) {
    for (std::size_t i = 0; i < slots[d].size(); ++i) {
      t.alpha_[t.offset_[d] + i] = alpha_by_class[d][slots[d][i]];
      for (CandidateId e = 0; e < n; ++e) {
        if (e == d) continue;
        for (std::size_t j = 0; j < slots[e].size(); ++j) {
          t.beta_[(t.offset_[d] + i) * t.total_slots_ + t.offset_[e] + j] =
              beta_by_class[(d * num_classes + slots[d][i]) * n * num_classes + e * num_classes + slots[e][j]];
        }
      }
    }
  }
  return t;
}

namespace detail {

// Sum of unary costs over labeled candidates plus pairwise costs inside
// clusters, taken over the canonical form so relisting never changes it.
template <class Alpha, class Beta>
double sum_objective(const Solution& sol, Alpha&& alpha, Beta&& beta) {
  Solution canon = sol;
  canon.canonicalize();
  double total = 0.0;
  for (CandidateId d = 0; d < canon.label.size(); ++d) {
    if (canon.label[d]) total += alpha(d, *canon.label[d]);
  }
  for (const auto& k : canon.clusters) {
    for (std::size_t i = 0; i < k.size(); ++i) {
      for (std::size_t j = i + 1; j < k.size(); ++j) total += beta(k[i], *canon.label[k[i]], k[j], *canon.label[k[j]]);
    }
  }
  return total;
}

inline void require_feasible(const ProblemInstance& inst, const Solution& sol) {
  const FeasibilityReport rep = validate_solution(inst, sol);
  if (!rep.ok()) {
    const auto& v = rep.violations.front();
    throw InfeasibleSolution(std::string("solution violates ") + to_string(v.kind) + " at candidate " +
                             std::to_string(v.candidate) + ": " + v.detail);
  }
}

}  // namespace detail

inline double objective(const ProblemInstance& inst, const CostTable& costs, const Solution& sol) {
  detail::require_feasible(inst, sol);
  return detail::sum_objective(
      sol, [&](CandidateId d, ClassId c) { return costs.alpha(d, c); },
      [&](CandidateId d, ClassId c, CandidateId e, ClassId c2) { return costs.beta(d, c, e, c2); });
}

// Same value as objective() over build_costs(inst, model, eps), evaluating
// only the pairs that share a cluster.
inline double objective(const ProblemInstance& inst, const PairwiseModel& model, const Solution& sol,
                        double eps = kDefaultClampEps) {
  detail::require_feasible(inst, sol);
  check_model_covers(model, inst);
  return detail::sum_objective(
      sol, [&](CandidateId d, ClassId c) { return log_odds_cost(inst.candidates[d].unary[c], eps); },
      [&](CandidateId d, ClassId c, CandidateId e, ClassId c2) { return pair_cost(inst, model, eps, d, c, e, c2); });
}

// Dense symmetric same-person indicators y, row-major n x n.
struct PairIndicators {
  std::size_t n = 0;
  std::vector<std::uint8_t> y;

  std::uint8_t operator()(CandidateId a, CandidateId b) const { return y[a * n + b]; }
};

inline PairIndicators derive_pair_indicators(const Solution& sol) {
  PairIndicators out;
  out.n = sol.label.size();
  out.y.assign(out.n * out.n, 0);
  for (const auto& k : sol.clusters) {
    for (CandidateId a : k) {
      for (CandidateId b : k) {
        if (a != b) out.y[a * out.n + b] = 1;
      }
    }
  }
  return out;
}

// The full 0/1 assignment (x, y, z) implied by a solution.
struct IndicatorAssignment {
  std::size_t n = 0;
  std::size_t num_classes = 0;
  std::vector<std::uint8_t> x;  // [d * C + c]
  PairIndicators y;
  std::vector<std::uint8_t> z;  // [((d * n + d2) * C + c) * C + c2]

  std::uint8_t xs(CandidateId d, ClassId c) const { return x[d * num_classes + c]; }
  std::uint8_t zs(CandidateId d, CandidateId d2, ClassId c, ClassId c2) const {
    return z[((d * n + d2) * num_classes + c) * num_classes + c2];
  }
};

inline IndicatorAssignment derive_indicators(const Solution& sol, std::size_t num_classes) {
  IndicatorAssignment a;
  a.n = sol.label.size();
  a.num_classes = num_classes;
  a.x.assign(a.n * num_classes, 0);
  for (CandidateId d = 0; d < a.n; ++d) {
    if (sol.label[d]) a.x[d * num_classes + *sol.label[d]] = 1;
  }
  a.y = derive_pair_indicators(sol);
  a.z.assign(a.n * a.n * num_classes * num_classes, 0);
  for (const auto& k : sol.clusters) {
    for (CandidateId d : k) {
      for (CandidateId e : k) {
        if (d == e || !sol.label[d] || !sol.label[e]) continue;
        a.z[((d * a.n + e) * num_classes + *sol.label[d]) * num_classes + *sol.label[e]] = 1;
      }
    }
  }
  return a;
}

struct ConstraintCounts {
  std::size_t uniqueness = 0;    // sum_c x_dc <= 1
  std::size_t coupling = 0;      // y_dd' <= sum_c x_dc, y_dd' <= sum_c x_d'c
  std::size_t transitivity = 0;  // y_dd' + y_d'd'' - y_dd'' <= 1
  std::size_t linking = 0;       // z_dd'cc' = x_dc x_d'c' y_dd'

  std::size_t total() const { return uniqueness + coupling + transitivity + linking; }
};

inline ConstraintCounts check_indicator_constraints(const IndicatorAssignment& a) {
  ConstraintCounts out;
  const std::size_t n = a.n;
  const std::size_t nc = a.num_classes;
  std::vector<int> kept(n, 0);
  for (CandidateId d = 0; d < n; ++d) {
    for (ClassId c = 0; c < nc; ++c) kept[d] += a.xs(d, c);
    if (kept[d] > 1) ++out.uniqueness;
  }
  for (CandidateId d = 0; d < n; ++d) {
    for (CandidateId e = 0; e < n; ++e) {
      if (d == e) continue;
      const int y = a.y(d, e);
      if (y != a.y(e, d) || y > kept[d] || y > kept[e]) ++out.coupling;
      for (CandidateId f = 0; f < n; ++f) {
        if (f == d || f == e) continue;
        if (y + a.y(e, f) - a.y(d, f) > 1) ++out.transitivity;
      }
      for (ClassId c = 0; c < nc; ++c) {
        for (ClassId c2 = 0; c2 < nc; ++c2) {
          const int z = a.zs(d, e, c, c2);
          const int xx = a.xs(d, c) * a.xs(e, c2);
          if (z != xx * y || z > a.xs(d, c) || z > a.xs(e, c2) || z > y || z < a.xs(d, c) + a.xs(e, c2) + y - 2) {
            ++out.linking;
          }
        }
      }
    }
  }
  return out;
}

// Debug dump: every unary slot and every pairwise entry with d < d'.
inline std::string dump_costs(const ProblemInstance& inst, const CostTable& costs) {
  nlohmann::ordered_json doc;
  nlohmann::ordered_json alpha = nlohmann::ordered_json::array();
  nlohmann::ordered_json beta = nlohmann::ordered_json::array();
  for (CandidateId d = 0; d < costs.size(); ++d) {
    for (std::size_t i = 0; i < costs.slots(d).size(); ++i) {
      alpha.push_back({{"candidate", d}, {"class", inst.class_name(costs.slots(d)[i])}, {"value", costs.alpha_slot(d, i)}});
    }
    for (CandidateId e = d + 1; e < costs.size(); ++e) {
      for (std::size_t i = 0; i < costs.slots(d).size(); ++i) {
        for (std::size_t j = 0; j < costs.slots(e).size(); ++j) {
          beta.push_back({{"d", d},
                          {"d2", e},
                          {"c", inst.class_name(costs.slots(d)[i])},
                          {"c2", inst.class_name(costs.slots(e)[j])},
                          {"value", costs.beta_slot(d, i, e, j)}});
        }
      }
    }
  }
  doc["alpha"] = std::move(alpha);
  doc["beta"] = std::move(beta);
  return doc.dump() + "\n";
}

}  // namespace posecut
