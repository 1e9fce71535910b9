#pragma once

#include <algorithm>
#include <atomic>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <thread>
#include <vector>

#include "posecut/ilp.hpp"
#include "posecut/model.hpp"
#include "posecut/rng.hpp"

namespace posecut {

struct SearchParams {
  std::uint64_t seed = 0;
  std::size_t restarts = 8;
  std::size_t max_moves = 0;  // per restart; 0 means 50 * |D|^2
  unsigned threads = 1;
  double perturbation = 0.3;  // share of candidates kicked at the start of restarts >= 1
};

// Moves must improve the objective by more than this to be taken.
inline constexpr double kImprovementTol = 1e-9;

// Clusters up to this size are split by exhaustive 2-partition search.
inline constexpr std::size_t kExactSplitLimit = 16;

namespace detail {

class LocalSearch {
 public:
  explicit LocalSearch(const CostTable& costs) : t_(costs), n_(costs.size()), slot_(n_, -1), cluster_(n_, -1) {}

  // Each candidate takes its cheapest label if that label is a reward
  // (fixed candidates always keep theirs), then singletons are merged
  // agglomeratively while the best merge lowers the objective.
  void greedy_construct() {
    reset();
    for (CandidateId d = 0; d < n_; ++d) {
      const auto slots = t_.slots(d);
      if (slots.empty()) continue;
      std::size_t best = 0;
      for (std::size_t i = 1; i < slots.size(); ++i) {
        if (t_.alpha_slot(d, i) < t_.alpha_slot(d, best)) best = i;
      }
      if (t_.must_keep(d) || t_.alpha_slot(d, best) < 0.0) place(d, static_cast<int>(best), new_cluster());
    }
    agglomerate();
  }

  // Random kick: each candidate is moved with probability `share`.
  void perturb(std::mt19937_64& rng, double share) {
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    for (CandidateId d = 0; d < n_; ++d) {
      if (coin(rng) >= share || t_.slots(d).empty()) continue;
      const std::size_t options = live_clusters().size() + 2;
      const std::size_t pick = std::uniform_int_distribution<std::size_t>(0, options - 1)(rng);
      const int slot = static_cast<int>(std::uniform_int_distribution<std::size_t>(0, t_.slots(d).size() - 1)(rng));
      if (pick == 0) {
        if (!t_.must_keep(d)) unplace(d);
        continue;
      }
      const auto live = live_clusters();
      const int target = pick == 1 ? -1 : live[pick - 2];
      if (target >= 0 && target == cluster_[d]) {
        slot_[d] = slot;
        continue;
      }
      if (target >= 0 && blocked(d, target)) continue;
      unplace(d);
      place(d, slot, target >= 0 ? target : new_cluster());
    }
  }

  // First-improvement descent over the candidate order drawn from `rng`,
  // followed by merges and splits, until a full pass changes nothing.
  void descend(std::mt19937_64& rng, std::size_t max_moves) {
    std::vector<CandidateId> order(n_);
    for (CandidateId d = 0; d < n_; ++d) order[d] = d;
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t moves = 0;
    bool improved = true;
    while (improved && moves < max_moves) {
      improved = false;
      for (CandidateId d : order) {
        if (moves >= max_moves) break;
        if (improve_candidate(d)) {
          improved = true;
          ++moves;
        }
      }
      while (moves < max_moves && best_merge()) {
        improved = true;
        ++moves;
      }
      for (int k : live_clusters()) {
        if (moves >= max_moves) break;
        if (split_cluster(k)) {
          improved = true;
          ++moves;
        }
      }
    }
  }

  Solution solution() const {
    Solution sol;
    sol.label.assign(n_, std::nullopt);
    for (CandidateId d = 0; d < n_; ++d) {
      if (slot_[d] >= 0) sol.label[d] = t_.slots(d)[static_cast<std::size_t>(slot_[d])];
    }
    for (const auto& m : members_) {
      if (!m.empty()) sol.clusters.push_back(m);
    }
    sol.canonicalize();
    return sol;
  }

 private:
  void reset() {
    std::fill(slot_.begin(), slot_.end(), -1);
    std::fill(cluster_.begin(), cluster_.end(), -1);
    members_.clear();
    free_.clear();
  }

  int new_cluster() {
    if (!free_.empty()) {
      const int k = free_.back();
      free_.pop_back();
      return k;
    }
    members_.emplace_back();
    return static_cast<int>(members_.size()) - 1;
  }

  std::vector<int> live_clusters() const {
    std::vector<int> out;
    for (std::size_t k = 0; k < members_.size(); ++k) {
      if (!members_[k].empty()) out.push_back(static_cast<int>(k));
    }
    return out;
  }

  void place(CandidateId d, int slot, int k) {
    slot_[d] = slot;
    cluster_[d] = k;
    members_[static_cast<std::size_t>(k)].push_back(d);
  }

  void unplace(CandidateId d) {
    const int k = cluster_[d];
    if (k < 0) return;
    auto& m = members_[static_cast<std::size_t>(k)];
    m.erase(std::find(m.begin(), m.end(), d));
    if (m.empty()) free_.push_back(k);
    slot_[d] = -1;
    cluster_[d] = -1;
  }

  bool blocked(CandidateId d, int k) const {
    for (CandidateId e : members_[static_cast<std::size_t>(k)]) {
      if (e != d && t_.cannot_link(d, e)) return true;
    }
    return false;
  }

  double beta(CandidateId a, CandidateId b) const {
    return t_.beta_slot(a, static_cast<std::size_t>(slot_[a]), b, static_cast<std::size_t>(slot_[b]));
  }

  // Best relabel / move / new-singleton / suppress / unsuppress for d.
  bool improve_candidate(CandidateId d) {
    const auto slots = t_.slots(d);
    const std::size_t a = slots.size();
    if (a == 0) return false;
    const std::size_t m = members_.size();
    affinity_.assign(m * a, 0.0);
    blocked_.assign(m, 0);
    for (CandidateId e = 0; e < n_; ++e) {
      if (e == d || slot_[e] < 0) continue;
      const auto k = static_cast<std::size_t>(cluster_[e]);
      if (t_.cannot_link(d, e)) blocked_[k] = 1;
      for (std::size_t i = 0; i < a; ++i) affinity_[k * a + i] += t_.beta_slot(d, i, e, static_cast<std::size_t>(slot_[e]));
    }

    const int own = cluster_[d];
    const double current =
        slot_[d] < 0 ? 0.0
                     : t_.alpha_slot(d, static_cast<std::size_t>(slot_[d])) +
                           affinity_[static_cast<std::size_t>(own) * a + static_cast<std::size_t>(slot_[d])];
    double best_delta = -kImprovementTol;
    int best_slot = -2;  // -2: no move, -1: suppress
    int best_cluster = -1;
    bool best_new = false;

    if (slot_[d] >= 0 && !t_.must_keep(d) && -current < best_delta) {
      best_delta = -current;
      best_slot = -1;
    }
    const bool own_singleton = own >= 0 && members_[static_cast<std::size_t>(own)].size() == 1;
    for (std::size_t k = 0; k < m; ++k) {
      if (members_[k].empty() || blocked_[k]) continue;
      if (static_cast<int>(k) == own && own_singleton) continue;  // covered by the singleton case
      for (std::size_t i = 0; i < a; ++i) {
        if (static_cast<int>(k) == own && static_cast<int>(i) == slot_[d]) continue;
        const double delta = t_.alpha_slot(d, i) + affinity_[k * a + i] - current;
        if (delta < best_delta) {
          best_delta = delta;
          best_slot = static_cast<int>(i);
          best_cluster = static_cast<int>(k);
          best_new = false;
        }
      }
    }
    for (std::size_t i = 0; i < a; ++i) {
      if (own_singleton && static_cast<int>(i) == slot_[d]) continue;
      const double delta = t_.alpha_slot(d, i) - current;
      if (delta < best_delta) {
        best_delta = delta;
        best_slot = static_cast<int>(i);
        best_new = true;
      }
    }

    if (best_slot == -2) return false;
    if (best_slot == -1) {
      unplace(d);
      return true;
    }
    if (best_new && own_singleton) {
      slot_[d] = best_slot;
      return true;
    }
    unplace(d);
    place(d, best_slot, best_new ? new_cluster() : best_cluster);
    return true;
  }

  // Pairwise cluster affinities W[k][l] (sum of beta across the two) and
  // cannot-link flags, over live clusters.
  void cluster_affinities(const std::vector<int>& live, std::vector<double>& w, std::vector<char>& no) const {
    const std::size_t m = live.size();
    std::vector<int> index(members_.size(), -1);
    for (std::size_t i = 0; i < m; ++i) index[static_cast<std::size_t>(live[i])] = static_cast<int>(i);
    w.assign(m * m, 0.0);
    no.assign(m * m, 0);
    for (CandidateId d = 0; d < n_; ++d) {
      if (slot_[d] < 0) continue;
      const auto kd = static_cast<std::size_t>(index[static_cast<std::size_t>(cluster_[d])]);
      for (CandidateId e = d + 1; e < n_; ++e) {
        if (slot_[e] < 0) continue;
        const auto ke = static_cast<std::size_t>(index[static_cast<std::size_t>(cluster_[e])]);
        if (kd == ke) continue;
        const double b = beta(d, e);
        w[kd * m + ke] += b;
        w[ke * m + kd] += b;
        if (t_.cannot_link(d, e)) no[kd * m + ke] = no[ke * m + kd] = 1;
      }
    }
  }

  void merge_into(int keep, int gone) {
    auto& src = members_[static_cast<std::size_t>(gone)];
    for (CandidateId e : src) {
      cluster_[e] = keep;
      members_[static_cast<std::size_t>(keep)].push_back(e);
    }
    src.clear();
    free_.push_back(gone);
  }

  bool best_merge() {
    const auto live = live_clusters();
    std::vector<double> w;
    std::vector<char> no;
    cluster_affinities(live, w, no);
    const std::size_t m = live.size();
    double best = -kImprovementTol;
    std::size_t bi = 0;
    std::size_t bj = 0;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = i + 1; j < m; ++j) {
        if (!no[i * m + j] && w[i * m + j] < best) {
          best = w[i * m + j];
          bi = i;
          bj = j;
        }
      }
    }
    if (best >= -kImprovementTol) return false;
    merge_into(live[bi], live[bj]);
    return true;
  }

  void agglomerate() {
    auto live = live_clusters();
    std::vector<double> w;
    std::vector<char> no;
    cluster_affinities(live, w, no);
    const std::size_t m = live.size();
    std::vector<char> alive(m, 1);
    while (true) {
      double best = -kImprovementTol;
      std::size_t bi = m;
      std::size_t bj = m;
      for (std::size_t i = 0; i < m; ++i) {
        if (!alive[i]) continue;
        for (std::size_t j = i + 1; j < m; ++j) {
          if (alive[j] && !no[i * m + j] && w[i * m + j] < best) {
            best = w[i * m + j];
            bi = i;
            bj = j;
          }
        }
      }
      if (bi == m) break;
      merge_into(live[bi], live[bj]);
      alive[bj] = 0;
      for (std::size_t x = 0; x < m; ++x) {
        w[bi * m + x] += w[bj * m + x];
        w[x * m + bi] = w[bi * m + x];
        no[bi * m + x] = no[x * m + bi] = static_cast<char>(no[bi * m + x] | no[bj * m + x]);
      }
    }
  }

  // Splits cluster k along its best 2-partition if the pairwise costs cut
  // between the two halves sum to a positive amount.
  bool split_cluster(int k) {
    const auto mem = members_[static_cast<std::size_t>(k)];
    const std::size_t s = mem.size();
    if (s < 2) return false;
    std::vector<double> b(s * s, 0.0);
    std::vector<double> total(s, 0.0);
    for (std::size_t i = 0; i < s; ++i) {
      for (std::size_t j = 0; j < s; ++j) {
        if (i != j) {
          b[i * s + j] = beta(mem[i], mem[j]);
          total[i] += b[i * s + j];
        }
      }
    }
    std::vector<char> side(s, 0);  // 1: moves out
    double best_cut = kImprovementTol;
    std::vector<char> best_side;
    if (s <= kExactSplitLimit) {
      // Gray-code walk over subsets of members 1..s-1; member 0 stays.
      std::vector<double> to_out(s, 0.0);  // sum of b to members currently out
      double cut = 0.0;
      const std::uint64_t steps = std::uint64_t{1} << (s - 1);
      for (std::uint64_t step = 1; step < steps; ++step) {
        const std::size_t v = static_cast<std::size_t>(std::countr_zero(step)) + 1;
        const double sign = side[v] ? -1.0 : 1.0;
        cut += side[v] ? 2.0 * to_out[v] - total[v] : total[v] - 2.0 * to_out[v];
        side[v] = static_cast<char>(!side[v]);
        for (std::size_t u = 0; u < s; ++u) to_out[u] += sign * b[u * s + v];
        if (cut > best_cut) {
          best_cut = cut;
          best_side = side;
        }
      }
    } else {
      // Greedy placement followed by single flips.
      for (std::size_t v = 1; v < s; ++v) {
        double gain = 0.0;  // cut change if v goes out, given placed members
        for (std::size_t u = 0; u < v; ++u) gain += side[u] ? -b[v * s + u] : b[v * s + u];
        side[v] = static_cast<char>(gain > 0.0);
      }
      bool moved = true;
      while (moved) {
        moved = false;
        for (std::size_t v = 0; v < s; ++v) {
          double gain = 0.0;
          for (std::size_t u = 0; u < s; ++u) {
            if (u != v) gain += (side[u] == side[v]) ? b[v * s + u] : -b[v * s + u];
          }
          if (gain > kImprovementTol) {
            side[v] = static_cast<char>(!side[v]);
            moved = true;
          }
        }
      }
      double cut = 0.0;
      for (std::size_t i = 0; i < s; ++i) {
        for (std::size_t j = i + 1; j < s; ++j) {
          if (side[i] != side[j]) cut += b[i * s + j];
        }
      }
      if (cut > best_cut && std::count(side.begin(), side.end(), 1) > 0 && std::count(side.begin(), side.end(), 0) > 0) {
        best_cut = cut;
        best_side = side;
      }
    }
    if (best_side.empty()) return false;
    const int fresh = new_cluster();
    auto& own = members_[static_cast<std::size_t>(k)];
    own.clear();
    for (std::size_t i = 0; i < s; ++i) {
      if (best_side[i]) {
        cluster_[mem[i]] = fresh;
        members_[static_cast<std::size_t>(fresh)].push_back(mem[i]);
      } else {
        own.push_back(mem[i]);
      }
    }
    return true;
  }

  const CostTable& t_;
  std::size_t n_;
  std::vector<int> slot_;
  std::vector<int> cluster_;
  std::vector<std::vector<CandidateId>> members_;
  std::vector<int> free_;
  std::vector<double> affinity_;
  std::vector<char> blocked_;
};

}  // namespace detail

// Seeded multi-start local search. Restart r draws from its own stream
// (seed, r), so the best-of-k result never worsens as k grows and does not
// depend on the thread count.
inline Solution solve_heuristic(const ProblemInstance& inst, const CostTable& costs, const SearchParams& params = {}) {
  if (costs.size() != inst.size()) throw ValidationError("cost table does not match the instance");
  const std::size_t n = costs.size();
  const std::size_t restarts = std::max<std::size_t>(1, params.restarts);
  const std::size_t max_moves = params.max_moves > 0 ? params.max_moves : std::max<std::size_t>(1, 50 * n * n);

  std::vector<Solution> results(restarts);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t r = next++; r < restarts; r = next++) {
      auto rng = make_rng(params.seed, "restart", r);
      detail::LocalSearch ls(costs);
      ls.greedy_construct();
      if (r > 0) ls.perturb(rng, params.perturbation);
      ls.descend(rng, max_moves);
      results[r] = ls.solution();
      results[r].objective_value = objective(inst, costs, results[r]);
    }
  };
  const unsigned nthreads = std::max(1U, std::min<unsigned>(params.threads, static_cast<unsigned>(restarts)));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < nthreads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  std::size_t best = 0;
  for (std::size_t r = 1; r < restarts; ++r) {
    if (results[r].objective_value < results[best].objective_value) best = r;
  }
  return results[best];
}

}  // namespace posecut
