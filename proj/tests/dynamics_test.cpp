// Copyright 2026 The envyfree Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>

#include <gtest/gtest.h>

#include "envyfree/analysis.hpp"
#include "envyfree/dynamics.hpp"
#include "envyfree/mechanisms.hpp"
#include "test_util.hpp"

namespace envyfree {
namespace {

using namespace envyfree::testing;

const GridSpec kTenth = grid("0.1", "0.1", "0.1");
Money M(const char* x) { return kTenth.parse(x); }

TEST(BestResponse, CycleAliceJumpsToThree) {
  Market c = cycle_market();
  auto br = best_response(CycleAdversarial{}, c, profile(kTenth, {"0.1", "0.3"}), 0, M("3"));
  ASSERT_TRUE(br.has_value());
  EXPECT_EQ(br->report, M("3"));
  EXPECT_EQ(br->outcome.price, M("0.9"));
  EXPECT_EQ(br->utility, Utility(M("0.1")));
}

TEST(BestResponse, CycleNeedsALargeEnoughCap) {
  Market c = cycle_market();
  EXPECT_FALSE(best_response(CycleAdversarial{}, c, profile(kTenth, {"0.1", "0.3"}), 0, M("2.9")).has_value());
}

TEST(BestResponse, AllOrNothingTruthIsStable) {
  for (const Market& mk : {five_buyer_market("0.5"), five_buyer_market("0.1"), three_buyer_market(), nonexistence_market()}) {
    Profile t = truth_profile(mk);
    for (std::size_t i = 0; i < mk.buyers(); ++i) EXPECT_FALSE(best_response(AllOrNothing{}, mk, t, i, default_report_cap(mk, t)).has_value());
  }
}

TEST(BestResponse, MaxRevenueShading) {
  Market b = one_unit_market(4);
  Profile t = truth_profile(b);
  auto br = best_response(MaxRevenue{}, b, t, 0, default_report_cap(b, t));
  ASSERT_TRUE(br.has_value());
  EXPECT_EQ(br->report, Money{1});
  EXPECT_EQ(br->outcome.price, Money{1});
  EXPECT_EQ(br->utility, Utility(Money{3}));
}

TEST(BestResponse, TiesGoToLowestReport) {
  // Against Bob at 0.3, Alice gets the same outcome from every report below
  // the price. Her current report 0.2 is not an improvement over 0.1, so
  // nothing is returned even though many reports tie.
  Market c = cycle_market();
  EXPECT_FALSE(best_response(CycleAdversarial{}, c, profile(kTenth, {"0.1", "0.3"}), 1, M("3")).has_value());
}

TEST(BestResponse, BadBuyerIndex) {
  Market c = cycle_market();
  EXPECT_THROW(best_response(CycleAdversarial{}, c, truth_profile(c), 2, M("3")), std::out_of_range);
}

TEST(Dynamics, CycleOrbit) {
  Market c = cycle_market();
  Trace t = run_dynamics(CycleAdversarial{}, c, profile(kTenth, {"0.1", "0.3"}), OrderPolicy::lex_first_improving(), 100, M("3"));
  ASSERT_EQ(t.status, TraceStatus::CycleDetected);
  EXPECT_EQ(t.cycle_entry, 0u);
  EXPECT_EQ(t.cycle_length, 4u);
  ASSERT_EQ(t.length(), 4u);
  const std::vector<Profile> orbit{profile(kTenth, {"3", "0.3"}), profile(kTenth, {"3", "2"}), profile(kTenth, {"0.1", "2"}), profile(kTenth, {"0.1", "0.3"})};
  const std::vector<Money> prices{M("0.9"), M("1.5"), M("0.5"), M("0.2")};
  EXPECT_EQ(t.start_outcome.price, M("0.2"));
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(t.steps[k].profile, orbit[k]);
    EXPECT_EQ(t.steps[k].outcome.price, prices[k]);
    EXPECT_EQ(t.steps[k].deviator, k % 2);
  }
}

TEST(Dynamics, CycleOrbitUnderRoundRobin) {
  Market c = cycle_market();
  Trace t = run_dynamics(CycleAdversarial{}, c, profile(kTenth, {"0.1", "0.3"}), OrderPolicy::round_robin(), 100, M("3"));
  ASSERT_EQ(t.status, TraceStatus::CycleDetected);
  EXPECT_EQ(t.cycle_length, 4u);
}

TEST(Dynamics, CycleReplaysItself) {
  Market c = cycle_market();
  Trace t = run_dynamics(CycleAdversarial{}, c, profile(kTenth, {"0.1", "0.3"}), OrderPolicy::lex_first_improving(), 100, M("3"));
  ASSERT_EQ(t.status, TraceStatus::CycleDetected);
  Trace again = run_dynamics(CycleAdversarial{}, c, t.profile_at(t.cycle_entry), OrderPolicy::lex_first_improving(), t.cycle_length, M("3"));
  EXPECT_EQ(again.final_profile(), t.profile_at(t.cycle_entry));
}

TEST(Dynamics, LowestEfValuationLosesAliceAUnit) {
  Market c = three_buyer_market();
  LowestEfValuation mech{{0, 2, 1}};
  Trace t = run_dynamics(mech, c, truth_profile(c));
  ASSERT_EQ(t.status, TraceStatus::Converged);
  ASSERT_EQ(t.length(), 1u);
  EXPECT_EQ(t.steps[0].deviator, 0u);
  EXPECT_EQ(t.final_profile(), profile(kTenth, {"1", "1.1", "1"}));
  EXPECT_EQ(t.final_outcome(), (Outcome{M("1"), {1, 2, 0}}));
  TraceReport r = validate_trace(t, c);
  EXPECT_TRUE(r.ok()) << r.summary();
  EXPECT_LT(t.final_outcome().allocation[0], t.start_outcome.allocation[0]);
}

TEST(Dynamics, AllOrNothingFromTruthStops) {
  for (const Market& mk : {five_buyer_market("0.5"), three_buyer_market()}) {
    Trace t = run_dynamics(AllOrNothing{}, mk, truth_profile(mk));
    EXPECT_EQ(t.status, TraceStatus::Converged);
    EXPECT_EQ(t.length(), 0u);
    EXPECT_TRUE(validate_trace(t, mk).ok());
  }
}

TEST(Dynamics, StepLimit) {
  Market c = cycle_market();
  Trace t = run_dynamics(CycleAdversarial{}, c, profile(kTenth, {"0.1", "0.3"}), OrderPolicy::lex_first_improving(), 2, M("3"));
  EXPECT_EQ(t.status, TraceStatus::StepLimit);
  EXPECT_EQ(t.length(), 2u);
}

TEST(Dynamics, SeededOrderIsReproducible) {
  MarketSampler sampler;
  Rng rng(9);
  for (int k = 0; k < 30; ++k) {
    Market mk = sampler(rng);
    Profile s = random_profile(rng, mk, sample_cap(mk));
    Trace a = run_dynamics(MaxWelfareGreedy{}, mk, s, OrderPolicy::random_seeded(k));
    Trace b = run_dynamics(MaxWelfareGreedy{}, mk, s, OrderPolicy::random_seeded(k));
    ASSERT_EQ(a.length(), b.length());
    for (std::size_t i = 0; i < a.length(); ++i) ASSERT_EQ(a.steps[i].profile, b.steps[i].profile);
  }
}

const Profile kEquilibria[] = {
    profile(kTenth, {"2", "2", "1", "0.5", "0.5"}),
    profile(kTenth, {"3", "2", "1", "0.5", "0.4"}),
    profile(kTenth, {"2", "2", "1", "0.1", "0.1"}),
    profile(kTenth, {"2", "2", "0.5", "0.5", "0.5"}),
};

TEST(PureNash, FiveBuyerEquilibria) {
  Market c = five_buyer_market("0.5");
  for (const Profile& s : kEquilibria) EXPECT_TRUE(is_pure_nash(AllOrNothing{}, c, s, M("3.1")));
  EXPECT_EQ(AllOrNothing{}(kEquilibria[1], c.params).price, M("1"));
  EXPECT_EQ(AllOrNothing{}(kEquilibria[2], c.params).price, M("1"));
  EXPECT_EQ(AllOrNothing{}(kEquilibria[3], c.params), (Outcome{M("0.5"), {4, 4, 0, 2, 0}}));
}

TEST(PureNash, OtherExamples) {
  Market c = cycle_market();
  EXPECT_FALSE(is_pure_nash(CycleAdversarial{}, c, profile(kTenth, {"0.1", "0.3"}), M("3")));
  Market b = one_unit_market(4);
  EXPECT_TRUE(is_pure_nash(MaxRevenue{}, b, Profile{{Money{1}, Money{1}}}, Money{5}));
  EXPECT_FALSE(is_pure_nash(MaxRevenue{}, b, truth_profile(b), Money{5}));
}

TEST(Enumerate, TruthfulMechanismListsTruth) {
  Market mk = market(kTenth, 2, {"1", "0.6"}, {"0.4", "0.3"});
  auto eqs = enumerate_equilibria(AllOrNothing{}, mk, M("0.5"), false);
  auto it = std::find_if(eqs.begin(), eqs.end(), [&](const EquilibriumReport& e) { return e.profile == truth_profile(mk); });
  ASSERT_NE(it, eqs.end());
  EXPECT_FALSE(it->is_overbidding);
  for (const auto& e : eqs) {
    EXPECT_TRUE(is_pure_nash(AllOrNothing{}, mk, e.profile, M("0.5")));
    EXPECT_EQ(e.is_overbidding, is_overbidding(mk, e.profile));
  }
  auto honest = enumerate_equilibria(AllOrNothing{}, mk, M("0.5"), true);
  for (const auto& e : honest) EXPECT_FALSE(e.is_overbidding);
  EXPECT_LE(honest.size(), eqs.size());
}

TEST(Enumerate, CycleOrbitHasNoEquilibria) {
  Market c = cycle_market();
  auto eqs = enumerate_equilibria(CycleAdversarial{}, c, M("3"), false);
  for (const char* a : {"0.1", "3"}) {
    for (const char* b : {"0.3", "2"}) {
      Profile s = profile(kTenth, {a, b});
      EXPECT_TRUE(std::none_of(eqs.begin(), eqs.end(), [&](const EquilibriumReport& e) { return e.profile == s; }));
    }
  }
}

TEST(Enumerate, RefusesLargeSpaces) {
  Market c = five_buyer_market("0.5");
  try {
    enumerate_equilibria(AllOrNothing{}, c, M("3.1"), true);
    FAIL();
  } catch (const EnumerationTooLarge& e) {
    EXPECT_DOUBLE_EQ(e.estimate(), 31.0 * 31 * 31 * 31 * 31);
  }
}

TEST(Enumerate, MatchesOneByOneNashChecks) {
  MarketSampler sampler;
  sampler.max_buyers = 2;
  sampler.max_supply = 3;
  Rng rng(31);
  for (int k = 0; k < 40; ++k) {
    Market mk = sampler(rng);
    const Money cap = default_report_cap(mk, truth_profile(mk));
    auto eqs = enumerate_equilibria(MaxWelfareGreedy{}, mk, cap, false);
    std::size_t count = 0;
    const Money eps = mk.params.grid.input_step();
    for (Money a = eps; a <= cap; a += eps) {
      for (Money b = eps; b <= cap; b += eps) {
        if (is_pure_nash(MaxWelfareGreedy{}, mk, Profile{{a, b}}, cap)) ++count;
      }
    }
    ASSERT_EQ(eqs.size(), count);
  }
}

TEST(ValidateTrace, FlagsPriceIncrease) {
  Market c = three_buyer_market();
  Trace t;
  t.start = truth_profile(c);
  t.start_outcome = Outcome{M("1.1"), {2, 1, 0}};
  TraceStep s;
  s.deviator = 0;
  s.report = M("1.2");
  s.profile = profile(kTenth, {"1.2", "1.1", "1"});
  s.outcome = Outcome{M("1.2"), {1, 0, 0}};
  t.steps.push_back(s);
  t.status = TraceStatus::Converged;
  TraceReport r = validate_trace(t, c);
  ASSERT_FALSE(r.ok());
  EXPECT_EQ(r.violations[0].check, "a");
  EXPECT_EQ(r.violations[0].step, 1u);
}

TEST(ValidateTrace, RequiresTruthStart) {
  Market c = three_buyer_market();
  Trace t;
  t.start = profile(kTenth, {"1", "1", "1"});
  EXPECT_THROW(validate_trace(t, c), std::invalid_argument);
}

// Truth-started dynamics of every general mechanism satisfy the trace checks.
TEST(ValidateTrace, RandomTruthStartedRuns) {
  MarketSampler sampler;
  Rng rng(77);
  for (int k = 0; k < 150; ++k) {
    Market mk = sampler(rng);
    for (MechanismId id : kGeneralMechanisms) {
      Trace t = run_dynamics(make_mechanism(id), mk, truth_profile(mk));
      ASSERT_EQ(t.status, TraceStatus::Converged) << mechanism_name(id);
      TraceReport r = validate_trace(t, mk);
      ASSERT_TRUE(r.ok()) << mechanism_name(id) << "\n" << r.summary();
      ASSERT_LE(static_cast<std::int64_t>(t.length()), t.start_outcome.price.ticks / mk.params.grid.output_step().ticks);
    }
  }
}

TEST(BestResponse, StepInvariants) {
  MarketSampler sampler;
  Rng rng(78);
  for (int k = 0; k < 200; ++k) {
    Market mk = sampler(rng);
    Profile s = random_profile(rng, mk, sample_cap(mk));
    Trace t = run_dynamics(MaxRevenue{}, mk, s, OrderPolicy::round_robin(), 200);
    for (std::size_t i = 0; i < t.length(); ++i) {
      const Profile& before = t.profile_at(i);
      const Profile& after = t.profile_at(i + 1);
      const std::size_t d = t.steps[i].deviator;
      std::size_t diff = 0;
      for (std::size_t j = 0; j < before.size(); ++j) diff += before.reports[j] != after.reports[j];
      ASSERT_EQ(diff, 1u);
      ASSERT_NE(before.reports[d], after.reports[d]);
      ASSERT_GT(buyer_utility(mk, d, t.outcome_at(i + 1)), buyer_utility(mk, d, t.outcome_at(i)));
    }
  }
}

TEST(SignType, Values) {
  Market c = cycle_market();
  Profile s = profile(kTenth, {"3", "2"});
  Outcome o = CycleAdversarial{}(s, c.params);
  EXPECT_EQ(sign_type(0, s, o, c), SignType::Minus);
  EXPECT_EQ(sign_type(1, s, o, c), SignType::Plus);
  Profile z = profile(kTenth, {"3", "0.3"});
  Outcome oz = CycleAdversarial{}(z, c.params);
  EXPECT_EQ(sign_type(1, z, oz, c), SignType::Zero);
}

TEST(TwoBuyer, TruthTracePasses) {
  Market mk = market(kTenth, 2, {"1", "1"}, {"1.1", "1.1"});
  Trace t = run_dynamics(AllOrNothing{}, mk, truth_profile(mk));
  EXPECT_TRUE(validate_aon_two_buyer(t, mk).ok());
  EXPECT_THROW(validate_aon_two_buyer(t, three_buyer_market()), std::invalid_argument);
}

TEST(TwoBuyer, RandomStartsConvergeAndFollowTheStateMachine) {
  MarketSampler sampler;
  sampler.min_buyers = sampler.max_buyers = 2;
  Rng rng(90);
  std::size_t mixed = 0;
  for (int k = 0; k < 1000; ++k) {
    Market mk = sampler(rng);
    Profile s;
    for (int i = 0; i < 2; ++i) s.reports.push_back(random_report(rng, mk.params.grid, mk.params.grid.input_step(), sample_cap(mk)));
    Trace t = run_dynamics(AllOrNothing{}, mk, s);
    ASSERT_EQ(t.status, TraceStatus::Converged);
    TraceReport r = validate_aon_two_buyer(t, mk);
    ASSERT_TRUE(r.ok()) << r.summary();
    Outcome o = AllOrNothing{}(s, mk.params);
    auto a = sign_type(0, s, o, mk), b = sign_type(1, s, o, mk);
    if ((a == SignType::Minus && b == SignType::Plus) || (a == SignType::Plus && b == SignType::Minus)) {
      ++mixed;
      ASSERT_LE(t.length(), 1u);
    }
  }
  EXPECT_GT(mixed, 0u);
}

}  // namespace
}  // namespace envyfree
