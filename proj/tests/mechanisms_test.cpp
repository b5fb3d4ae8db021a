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

#include <gtest/gtest.h>

#include "envyfree/analysis.hpp"
#include "envyfree/mechanisms.hpp"
#include "test_util.hpp"

namespace envyfree {
namespace {

using namespace envyfree::testing;

const GridSpec kTenth = grid("0.1", "0.1", "0.1");
Money M(const char* x) { return kTenth.parse(x); }

Outcome O(const char* price, std::vector<std::int64_t> x) { return Outcome{M(price), std::move(x)}; }

TEST(AllOrNothing, FiveBuyerTruth) {
  // On the coarse price grid the price is 1 and buyer 3, semi-hungry with a
  // target of 6 and 6 units left, is served in full.
  Market c = five_buyer_market("0.5");
  EXPECT_EQ(AllOrNothing{}(truth_profile(c), c.params), O("1", {2, 2, 6, 0, 0}));
  Market f = five_buyer_market("0.1");
  EXPECT_EQ(AllOrNothing{}(truth_profile(f), f.params), O("0.9", {2, 2, 6, 0, 0}));
}

TEST(AllOrNothing, ContinuesPastRefusedBuyer) {
  for (const char* d : {"0.1", "0.5"}) {
    Market c = five_buyer_market(d);
    EXPECT_EQ(AllOrNothing{}(profile(kTenth, {"2", "2", "0.5", "0.5", "0.5"}), c.params), O("0.5", {4, 4, 0, 2, 0})) << d;
  }
}

TEST(AllOrNothing, SingleZeroReport) {
  Market z = market(kTenth, 1, {"1"}, {"0"});
  EXPECT_EQ(AllOrNothing{}(truth_profile(z), z.params), O("0.1", {0}));
}

TEST(AlmostTop, Examples) {
  Market a = nonexistence_market();
  EXPECT_EQ(AlmostTop{}(profile(kTenth, {"1.1", "1"}), a.params), O("1", {1, 1}));
  EXPECT_EQ(AlmostTop{}(profile(kTenth, {"1.1", "1.1"}), a.params), O("1", {1, 1}));
  Market single = market(kTenth, 1, {"1"}, {"0.1"});
  EXPECT_EQ(AlmostTop{}(truth_profile(single), single.params), O("0.1", {1}));
}

TEST(AlmostTop, KeepsTopWhenLowerIsNotEnvyFree) {
  // At 1.0 both buyers are hungry for 2 units each, more than the 3 on sale.
  Market mk = market(kTenth, 3, {"2", "2"}, {"1.1", "1.1"});
  EXPECT_EQ(AlmostTop{}(truth_profile(mk), mk.params), O("1.1", {1, 1}));
}

TEST(MaxRevenue, Examples) {
  Market b = one_unit_market(4);
  EXPECT_EQ(MaxRevenue{}(truth_profile(b), b.params), (Outcome{Money{4}, {1, 0}}));
  EXPECT_EQ(MaxRevenue{}(Profile{{Money{1}, Money{1}}}, b.params), (Outcome{Money{1}, {1, 0}}));
  Market single = market(kTenth, 1, {"2"}, {"2"});
  EXPECT_EQ(MaxRevenue{}(truth_profile(single), single.params), O("2", {1}));
}

TEST(MaxRevenue, LargestCapacityFirst) {
  // Price 1: buyer 0 can take 1 unit, buyer 1 can take 2; serving buyer 1
  // alone already raises the maximum revenue.
  GridSpec g(Rational(1), 1, 1);
  Market mk = Market::make(2, {Money{1}, Money{2}}, {Money{1}, Money{1}}, g);
  EXPECT_EQ(MaxRevenue{}(truth_profile(mk), mk.params), (Outcome{Money{1}, {0, 2}}));
}

TEST(MaxWelfareGreedy, Examples) {
  Market a = nonexistence_market();
  EXPECT_EQ(MaxWelfareGreedy{}(truth_profile(a), a.params), O("0.6", {1, 1}));
  Market single = market(grid("0.1", "0.1", "0.5"), 2, {"2"}, {"2"});
  EXPECT_EQ(MaxWelfareGreedy{}(truth_profile(single), single.params), O("0.5", {2}));
  Market z = market(kTenth, 2, {"1", "1"}, {"0", "0"});
  EXPECT_EQ(MaxWelfareGreedy{}(truth_profile(z), z.params), O("0.1", {0, 0}));
}

TEST(SecondHighestGreedy, Examples) {
  Market two = market(kTenth, 2, {"2", "2"}, {"2", "2"});
  EXPECT_EQ(SecondHighestGreedy{}(truth_profile(two), two.params), O("2", {1, 1}));
  EXPECT_EQ(SecondHighestGreedy{}(profile(kTenth, {"1.1", "2"}), two.params), O("1.1", {1, 1}));
  Market low = market(kTenth, 2, {"1", "1"}, {"0", "5"});
  EXPECT_EQ(SecondHighestGreedy{}(truth_profile(low), low.params), O("0.1", {0, 2}));
  Market one = market(kTenth, 1, {"1"}, {"1"});
  EXPECT_THROW(SecondHighestGreedy{}(truth_profile(one), one.params), std::invalid_argument);
}

TEST(SecondHighestGreedy, OnlyTheTopBuyerIsHungry) {
  // Only a unique top report can exceed the second-highest, and its demand is
  // capped by supply, so the second-highest price needs no repair.
  Rng rng(3);
  MarketSampler sampler;
  for (int t = 0; t < 2000; ++t) {
    Market mk = sampler(rng);
    Profile s = random_profile(rng, mk, sample_cap(mk));
    std::vector<Money> sorted = s.reports;
    std::sort(sorted.rbegin(), sorted.rend());
    ASSERT_EQ(SecondHighestGreedy{}(s, mk.params).price, mk.params.grid.ceil_to_output(sorted[1]));
  }
}

TEST(LowestEfValuation, ThreeBuyerExamples) {
  Market c = three_buyer_market();
  LowestEfValuation mech{{0, 2, 1}};
  EXPECT_EQ(mech(truth_profile(c), c.params), O("1.1", {2, 1, 0}));
  EXPECT_EQ(mech(profile(kTenth, {"1", "1.1", "1"}), c.params), O("1", {1, 2, 0}));
  Market single = market(kTenth, 5, {"3"}, {"1"});
  EXPECT_EQ(LowestEfValuation{}(truth_profile(single), single.params), O("1", {3}));
}

TEST(LowestEfValuation, TieOrderMatters) {
  Market c = three_buyer_market();
  EXPECT_EQ(LowestEfValuation{}(truth_profile(c), c.params), O("1.1", {2, 1, 0}));
  EXPECT_EQ((LowestEfValuation{{1, 0, 2}})(truth_profile(c), c.params), O("1.1", {1, 2, 0}));
}

TEST(LowestEfValuation, BadTieOrder) {
  Market c = three_buyer_market();
  EXPECT_THROW((LowestEfValuation{{0, 1}})(truth_profile(c), c.params), std::invalid_argument);
  EXPECT_THROW((LowestEfValuation{{0, 1, 1}})(truth_profile(c), c.params), std::invalid_argument);
  EXPECT_THROW((LowestEfValuation{{0, 1, 3}})(truth_profile(c), c.params), std::invalid_argument);
}

TEST(LowestEfValuation, AllZeroReports) {
  Market z = market(kTenth, 2, {"1", "1"}, {"0", "0"});
  EXPECT_EQ(LowestEfValuation{}(truth_profile(z), z.params), O("0.1", {0, 0}));
}

TEST(CycleAdversarial, PriceTable) {
  Market c = cycle_market();
  CycleAdversarial mech;
  EXPECT_EQ(mech(profile(kTenth, {"0.1", "0.3"}), c.params), O("0.2", {0, 2}));
  EXPECT_EQ(mech(profile(kTenth, {"3", "0.3"}), c.params), O("0.9", {1, 0}));
  EXPECT_EQ(mech(profile(kTenth, {"3", "2"}), c.params), O("1.5", {1, 1}));
  EXPECT_EQ(mech(profile(kTenth, {"0.1", "2"}), c.params), O("0.5", {0, 2}));
  EXPECT_EQ(mech(profile(kTenth, {"7", "7"}), c.params), O("107", {0, 0}));
}

TEST(CycleAdversarial, RejectsOtherMarkets) {
  CycleAdversarial mech;
  Market three = three_buyer_market();
  EXPECT_THROW(mech(truth_profile(three), three.params), std::invalid_argument);
  Market budgets = market(kTenth, 2, {"1", "1.5"}, {"1", "2"});
  EXPECT_THROW(mech(truth_profile(budgets), budgets.params), std::invalid_argument);
  Market supply = market(kTenth, 3, {"1.5", "1.5"}, {"1", "2"});
  EXPECT_THROW(mech(truth_profile(supply), supply.params), std::invalid_argument);
  Market coarse = market(grid("1", "1", "1"), 2, {"1", "1"}, {"1", "2"});
  EXPECT_THROW(mech(truth_profile(coarse), coarse.params), std::invalid_argument);
}

TEST(CycleAdversarial, NotPriceMonotone) {
  Market c = cycle_market();
  CycleAdversarial mech;
  Profile lower = profile(kTenth, {"0.1", "0.2"});
  Profile upper = profile(kTenth, {"0.1", "0.3"});
  EXPECT_EQ(mech(lower, c.params).price, M("100.2"));
  EXPECT_TRUE(price_monotone_violation(mech, c, lower, upper).has_value());
}

TEST(Registry, NamesRoundTrip) {
  for (MechanismId id : kAllMechanisms) {
    EXPECT_EQ(parse_mechanism_id(mechanism_name(id)), id);
    EXPECT_EQ(make_mechanism(id).id(), id);
  }
  EXPECT_EQ(parse_mechanism_id("AllOrNothing"), MechanismId::AllOrNothing);
  EXPECT_EQ(parse_mechanism_id("lowest_ef_valuation"), MechanismId::LowestEfValuation);
  EXPECT_EQ(parse_mechanism_id("LowestEFValuation"), MechanismId::LowestEfValuation);
  EXPECT_THROW(parse_mechanism_id("vickrey"), std::invalid_argument);
}

TEST(Registry, TypeErasedMatchesConcrete) {
  Market c = three_buyer_market();
  AnyMechanism any = make_mechanism(MechanismId::LowestEfValuation, {0, 2, 1});
  EXPECT_EQ(any(truth_profile(c), c.params), (LowestEfValuation{{0, 2, 1}})(truth_profile(c), c.params));
}

// Every mechanism's outcome is envy-free with respect to the reports, and the
// partial-allocation counts match the allocation rule.
class MechanismSweep : public ::testing::TestWithParam<MechanismId> {};

TEST_P(MechanismSweep, EnvyFreeDeterministicAndPartialCount) {
  const AnyMechanism mech = make_mechanism(GetParam());
  MarketSampler sampler;
  Rng rng(100 + static_cast<int>(GetParam()));
  for (int t = 0; t < 10000; ++t) {
    Market mk = sampler(rng);
    Profile s = random_profile(rng, mk, sample_cap(mk));
    Outcome o = mech(s, mk.params);
    ASSERT_TRUE(validate_outcome(s, mk.params, o)) << t;
    ASSERT_TRUE(mk.params.grid.on_output_grid(o.price));
    ASSERT_EQ(o, mech(s, mk.params));
    const std::size_t partial = count_partial(o, s, mk.params);
    if (GetParam() == MechanismId::AllOrNothing) ASSERT_EQ(partial, 0u);
    ASSERT_LE(partial, 1u);
  }
}

INSTANTIATE_TEST_SUITE_P(General, MechanismSweep, ::testing::ValuesIn(kGeneralMechanisms),
                         [](const auto& info) {
                           std::string s(mechanism_name(info.param));
                           std::erase(s, '-');
                           return s;
                         });

TEST(CycleAdversarial, EnvyFreeOnItsMarket) {
  Market c = cycle_market();
  CycleAdversarial mech;
  Rng rng(5);
  for (int t = 0; t < 10000; ++t) {
    Profile s = random_profile(rng, c, c.params.grid.parse("3"));
    ASSERT_TRUE(validate_outcome(s, c.params, mech(s, c.params)));
  }
}

}  // namespace
}  // namespace envyfree
