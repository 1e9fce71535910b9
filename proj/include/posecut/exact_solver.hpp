#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <set>
#include <vector>

#include "posecut/error.hpp"
#include "posecut/ilp.hpp"
#include "posecut/model.hpp"

namespace posecut {

struct ExactLimits {
  std::size_t max_candidates = 8;
  std::size_t max_classes = 4;  // distinct labelable classes over all candidates
};

namespace detail {

// Best labeling of every candidate subset taken as one cluster. Labels are
// enumerated in increasing class order and only strict improvements are
// kept, so each entry holds the lexicographically smallest optimum.
class SubsetLabelings {
 public:
  explicit SubsetLabelings(const CostTable& costs) : costs_(costs), n_(costs.size()) {
    const std::size_t count = std::size_t{1} << n_;
    cost_.assign(count, std::numeric_limits<double>::infinity());
    slots_.assign(count, {});
    for (std::uint32_t mask = 1; mask < count; ++mask) solve(mask);
  }

  double cost(std::uint32_t mask) const { return cost_[mask]; }
  const std::vector<std::size_t>& slots(std::uint32_t mask) const { return slots_[mask]; }

 private:
  void solve(std::uint32_t mask) {
    members_.clear();
    for (CandidateId d = 0; d < n_; ++d) {
      if ((mask >> d) & 1U) members_.push_back(d);
    }
    for (std::size_t i = 0; i < members_.size(); ++i) {
      for (std::size_t j = i + 1; j < members_.size(); ++j) {
        if (costs_.cannot_link(members_[i], members_[j])) return;
      }
    }
    current_.assign(members_.size(), 0);
    mask_ = mask;
    descend(0, 0.0);
  }

  void descend(std::size_t pos, double partial) {
    if (pos == members_.size()) {
      if (partial < cost_[mask_]) {
        cost_[mask_] = partial;
        slots_[mask_] = current_;
      }
      return;
    }
    const CandidateId d = members_[pos];
    for (std::size_t i = 0; i < costs_.slots(d).size(); ++i) {
      double add = costs_.alpha_slot(d, i);
      for (std::size_t q = 0; q < pos; ++q) add += costs_.beta_slot(d, i, members_[q], current_[q]);
      current_[pos] = i;
      descend(pos + 1, partial + add);
    }
  }

  const CostTable& costs_;
  std::size_t n_;
  std::vector<double> cost_;
  std::vector<std::vector<std::size_t>> slots_;
  std::vector<CandidateId> members_;
  std::vector<std::size_t> current_;
  std::uint32_t mask_ = 0;
};

}  // namespace detail

// Global minimizer over all labelings and partitions of the kept
// candidates. Assignments are enumerated as restricted-growth strings in
// which block 0 means "suppressed"; ties keep the lexicographically
// smallest (block string, label string).
inline Solution solve_exact(const ProblemInstance& inst, const CostTable& costs, const ExactLimits& limits = {}) {
  const std::size_t n = costs.size();
  if (n != inst.size()) throw ValidationError("cost table does not match the instance");
  std::set<ClassId> classes;
  for (CandidateId d = 0; d < n; ++d) classes.insert(costs.slots(d).begin(), costs.slots(d).end());
  if (n > limits.max_candidates || classes.size() > limits.max_classes || n > 20) {
    throw RefusedTooLarge("exact solver refuses |D|=" + std::to_string(n) + ", |C|=" + std::to_string(classes.size()) +
                          " (limits " + std::to_string(limits.max_candidates) + "/" + std::to_string(limits.max_classes) + ")");
  }

  const detail::SubsetLabelings table(costs);
  std::vector<std::size_t> block(n, 0);
  std::vector<std::uint32_t> masks;  // masks[b - 1] for block b
  std::vector<std::size_t> best_block;
  double best = std::numeric_limits<double>::infinity();

  auto evaluate = [&] {
    double total = 0.0;
    for (std::uint32_t m : masks) total += table.cost(m);
    if (total < best) {
      best = total;
      best_block = block;
    }
  };
  auto descend = [&](auto&& self, std::size_t pos) -> void {
    if (pos == n) {
      evaluate();
      return;
    }
    if (!costs.must_keep(pos)) {
      block[pos] = 0;
      self(self, pos + 1);
    }
    for (std::size_t b = 1; b <= masks.size() + 1; ++b) {
      block[pos] = b;
      if (b > masks.size()) masks.push_back(0);
      masks[b - 1] |= std::uint32_t{1} << pos;
      self(self, pos + 1);
      masks[b - 1] &= ~(std::uint32_t{1} << pos);
      if (masks[b - 1] == 0) masks.pop_back();
    }
  };
  descend(descend, 0);

  Solution sol;
  sol.label.assign(n, std::nullopt);
  if (!best_block.empty() || n == 0) {
    std::size_t blocks = 0;
    for (std::size_t b : best_block) blocks = std::max(blocks, b);
    for (std::size_t b = 1; b <= blocks; ++b) {
      std::uint32_t mask = 0;
      std::vector<CandidateId> members;
      for (CandidateId d = 0; d < n; ++d) {
        if (best_block[d] == b) {
          mask |= std::uint32_t{1} << d;
          members.push_back(d);
        }
      }
      const auto& slots = table.slots(mask);
      for (std::size_t i = 0; i < members.size(); ++i) sol.label[members[i]] = costs.slots(members[i])[slots[i]];
      sol.clusters.push_back(std::move(members));
    }
  }
  sol.canonicalize();
  sol.objective_value = objective(inst, costs, sol);
  return sol;
}

}  // namespace posecut
