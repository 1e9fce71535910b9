#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "posecut/posecut.hpp"
#include "support/oracles.hpp"

using namespace posecut;

namespace {

// Exhaustive sum straight from the raw arrays, for a feasible solution.
double summed(const oracle::CostProblem& p, const Solution& s) {
  std::vector<int> label(p.n, -1);
  std::vector<int> block(p.n, -1);
  for (CandidateId d = 0; d < p.n; ++d) {
    if (s.label[d]) label[d] = static_cast<int>(*s.label[d]);
  }
  for (std::size_t k = 0; k < s.clusters.size(); ++k) {
    for (CandidateId d : s.clusters[k]) block[d] = static_cast<int>(k);
  }
  return oracle::raw_objective(p, label, block);
}

}  // namespace

TEST(LogOdds, Examples) {
  EXPECT_EQ(log_odds_cost(0.5, 1e-6), 0.0);
  EXPECT_NEAR(log_odds_cost(0.9, 1e-6), std::log(1.0 / 9.0), 1e-12);
  EXPECT_NEAR(log_odds_cost(0.9, 1e-6), -2.1972, 1e-4);
  EXPECT_NEAR(log_odds_cost(1.0, 1e-6), std::log(1e-6 / (1.0 - 1e-6)), 1e-9);
  EXPECT_TRUE(std::isfinite(log_odds_cost(0.0, 1e-6)));
}

TEST(BuildCosts, UnariesAndRestrictions) {
  ProblemInstance inst;
  inst.classes = make_classes({"a", "b"});
  inst.scale = 10;
  auto d = make_candidate(0, {0, 0}, 2);
  d.unary = {0.9, 0.5};
  inst.candidates.push_back(d);
  d = make_candidate(1, {3, 0}, 2);
  d.unary = {0.2, 1.0};
  d.allowed = ClassSet::of(1);
  inst.candidates.push_back(d);
  const auto t = build_costs(inst, make_zero_model(inst));
  EXPECT_NEAR(t.alpha(0, 0), std::log(1.0 / 9.0), 1e-12);
  EXPECT_EQ(t.alpha(0, 1), 0.0);
  EXPECT_EQ(t.alpha(1, 0), kForbiddenCost);
  EXPECT_EQ(t.beta(0, 0, 1, 0), kForbiddenCost);
  EXPECT_EQ(t.beta(0, 0, 1, 1), 0.0);  // zero model: p = 1/2
  EXPECT_THROW(build_costs(inst, make_zero_model(inst), 0.5), ValidationError);
  PairwiseModel partial = make_zero_model(inst);
  partial.pairs.pop_back();
  EXPECT_THROW(build_costs(inst, partial), MissingWeights);
}

TEST(BuildCosts, SymmetricAndFinite) {
  SynthParams p;
  p.persons = 2;
  p.jitter_sigma = 3;
  p.offset_noise_sigma = 4;
  p.clutter_rate = 0.3;
  p.seed = 12;
  const auto inst = select_top(generate(p), 20);
  auto model = make_zero_model(inst);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  for (auto& pf : model.pairs) {
    for (auto& w : pf.weights) w = n(rng);
  }
  const auto t = build_costs(inst, model);
  for (CandidateId d = 0; d < inst.size(); ++d) {
    for (ClassId c = 0; c < inst.num_classes(); ++c) {
      EXPECT_TRUE(std::isfinite(t.alpha(d, c)));
      for (CandidateId e = 0; e < inst.size(); ++e) {
        for (ClassId c2 = 0; c2 < inst.num_classes(); c2 += 3) {
          EXPECT_EQ(t.beta(d, c, e, c2), t.beta(e, c2, d, c));
        }
      }
    }
  }
}

TEST(Objective, Examples) {
  std::mt19937_64 rng(1);
  auto p = oracle::random_cost_problem(rng, 3, 2);
  Solution none;
  none.label.assign(3, std::nullopt);
  EXPECT_EQ(objective(p.inst, p.costs, none), 0.0);

  p.alpha[0][p.allowed[0][0]] = -2.0;
  p.costs = cost_table_from_values(p.nc, p.allowed, p.alpha, p.beta, p.fixed);
  Solution one = none;
  one.label[0] = p.allowed[0][0];
  one.clusters = {{0}};
  EXPECT_EQ(objective(p.inst, p.costs, one), -2.0);
}

TEST(Objective, MatchesExhaustiveSummation) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 300; ++t) {
    const auto p = oracle::random_cost_problem(rng, 6, 3, 0.2);
    const Solution s = oracle::random_feasible_solution(rng, p.inst);
    EXPECT_NEAR(objective(p.inst, p.costs, s), summed(p, s), 1e-9);
  }
}

TEST(Objective, InvariantUnderRelisting) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 100; ++t) {
    const auto p = oracle::random_cost_problem(rng, 7, 3);
    Solution s = oracle::random_feasible_solution(rng, p.inst);
    const double f = objective(p.inst, p.costs, s);
    std::shuffle(s.clusters.begin(), s.clusters.end(), rng);
    for (auto& k : s.clusters) std::shuffle(k.begin(), k.end(), rng);
    EXPECT_EQ(objective(p.inst, p.costs, s), f);
  }
}

TEST(Objective, InvariantUnderCandidateReordering) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 50; ++t) {
    const auto p = oracle::random_cost_problem(rng, 6, 2);
    const Solution s = oracle::random_feasible_solution(rng, p.inst);
    std::vector<CandidateId> perm(p.n);
    for (CandidateId d = 0; d < p.n; ++d) perm[d] = d;
    std::shuffle(perm.begin(), perm.end(), rng);  // new id of old candidate d is perm[d]

    oracle::CostProblem q = p;
    q.inst.candidates.clear();
    q.inst.candidates.resize(p.n);
    for (CandidateId d = 0; d < p.n; ++d) {
      q.inst.candidates[perm[d]] = p.inst.candidates[d];
      q.inst.candidates[perm[d]].id = perm[d];
      q.allowed[perm[d]] = p.allowed[d];
      q.alpha[perm[d]] = p.alpha[d];
      q.fixed[perm[d]] = p.fixed[d];
      for (CandidateId e = 0; e < p.n; ++e) {
        for (ClassId c = 0; c < p.nc; ++c) {
          for (ClassId c2 = 0; c2 < p.nc; ++c2) {
            q.beta[(perm[d] * p.nc + c) * p.n * p.nc + perm[e] * p.nc + c2] = p.b(d, c, e, c2);
          }
        }
      }
    }
    q.costs = cost_table_from_values(q.nc, q.allowed, q.alpha, q.beta, q.fixed);
    Solution r;
    r.label.assign(p.n, std::nullopt);
    for (CandidateId d = 0; d < p.n; ++d) r.label[perm[d]] = s.label[d];
    for (const auto& k : s.clusters) {
      std::vector<CandidateId> m;
      for (CandidateId d : k) m.push_back(perm[d]);
      r.clusters.push_back(m);
    }
    EXPECT_NEAR(objective(q.inst, q.costs, r), objective(p.inst, p.costs, s), 1e-9);
  }
}

TEST(Objective, InfeasibleSolutionRejected) {
  std::mt19937_64 rng(5);
  const auto p = oracle::random_cost_problem(rng, 3, 2);
  Solution s;
  s.label = {p.allowed[0][0], std::nullopt, std::nullopt};
  s.clusters = {{0, 1}};
  EXPECT_THROW(objective(p.inst, p.costs, s), InfeasibleSolution);
}

TEST(Objective, ModelOverloadAgreesWithTable) {
  SynthParams sp;
  sp.persons = 2;
  sp.jitter_sigma = 2;
  sp.offset_noise_sigma = 3;
  sp.seed = 6;
  const auto inst = select_top(generate(sp), 16);
  auto model = make_zero_model(inst);
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n(0.0, 1.0);
  for (auto& pf : model.pairs) {
    for (auto& w : pf.weights) w = n(rng);
  }
  const auto t = build_costs(inst, model);
  for (int k = 0; k < 30; ++k) {
    const Solution s = oracle::random_feasible_solution(rng, inst);
    EXPECT_NEAR(objective(inst, model, s), objective(inst, t, s), 1e-9);
  }
}

TEST(PairIndicators, Examples) {
  Solution s;
  s.label = {ClassId{0}, ClassId{1}, ClassId{0}};
  s.clusters = {{0, 1, 2}};
  auto y = derive_pair_indicators(s);
  EXPECT_EQ(y(0, 1) + y(0, 2) + y(1, 2), 3);
  s.clusters = {{0}, {1}, {2}};
  y = derive_pair_indicators(s);
  EXPECT_EQ(std::count(y.y.begin(), y.y.end(), 1), 0);
}

TEST(PairIndicators, TransitivityOnRandomPartitions) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 1000; ++t) {
    const auto p = oracle::random_cost_problem(rng, 6, 2);
    const Solution s = oracle::random_feasible_solution(rng, p.inst);
    const auto y = derive_pair_indicators(s);
    for (CandidateId a = 0; a < 6; ++a) {
      for (CandidateId b = 0; b < 6; ++b) {
        for (CandidateId c = 0; c < 6; ++c) {
          if (a == b || b == c || a == c) continue;
          ASSERT_LE(y(a, b) + y(b, c) - y(a, c), 1);
        }
      }
    }
  }
}

TEST(Indicators, RandomFeasibleSolutionsSatisfyAllConstraints) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 1000; ++t) {
    const auto p = oracle::random_cost_problem(rng, 7, 3, 0.2);
    const Solution s = oracle::random_feasible_solution(rng, p.inst);
    const auto counts = check_indicator_constraints(derive_indicators(s, p.nc));
    ASSERT_EQ(counts.total(), 0u) << "trial " << t;
  }
}

TEST(Indicators, CheckerDetectsBrokenAssignments) {
  Solution s;
  s.label = {ClassId{0}, ClassId{1}, ClassId{0}};
  s.clusters = {{0, 1}, {2}};
  auto a = derive_indicators(s, 2);
  a.x[0 * 2 + 1] = 1;  // two labels on candidate 0
  EXPECT_GT(check_indicator_constraints(a).uniqueness, 0u);
  a = derive_indicators(s, 2);
  a.y.y[1 * 3 + 2] = a.y.y[2 * 3 + 1] = 1;  // 0~1, 1~2 but not 0~2
  EXPECT_GT(check_indicator_constraints(a).transitivity, 0u);
  a = derive_indicators(s, 2);
  a.z[((0 * 3 + 1) * 2 + 0) * 2 + 1] = 0;
  EXPECT_GT(check_indicator_constraints(a).linking, 0u);
}

TEST(DumpCosts, ListsEverySlot) {
  std::mt19937_64 rng(9);
  const auto p = oracle::random_cost_problem(rng, 4, 2);
  const auto doc = nlohmann::json::parse(dump_costs(p.inst, p.costs));
  EXPECT_EQ(doc["alpha"].size(), p.costs.total_slots());
  std::size_t pairs = 0;
  for (CandidateId d = 0; d < 4; ++d) {
    for (CandidateId e = d + 1; e < 4; ++e) pairs += p.allowed[d].size() * p.allowed[e].size();
  }
  EXPECT_EQ(doc["beta"].size(), pairs);
}
