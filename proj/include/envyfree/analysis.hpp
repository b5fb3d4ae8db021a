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

// Sampled property checkers for mechanisms and the welfare / revenue bound
// validators. A checker either reports "holds on N samples" or returns a
// witness that re-checks deterministically; nothing here proves anything.

#ifndef ENVYFREE_ANALYSIS_HPP
#define ENVYFREE_ANALYSIS_HPP

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "envyfree/core.hpp"
#include "envyfree/dynamics.hpp"
#include "envyfree/mechanisms.hpp"
#include "envyfree/random.hpp"

namespace envyfree {

// Random small markets. All amounts are in ticks of `base_unit`.
struct MarketSampler {
  Rational base_unit{1, 4};
  std::size_t min_buyers = 2;
  std::size_t max_buyers = 5;
  std::int64_t max_supply = 8;
  std::vector<std::int64_t> input_steps{2, 4};   // eps = 0.5 or 1
  bool halve_output_step = true;                 // delta is eps or eps/2
  std::int64_t max_valuation = 16;               // 4
  std::int64_t min_budget = 1;                   // 0.25
  std::int64_t max_budget = 20;                  // 5

  Market operator()(Rng& rng) const {
    const std::size_t n = static_cast<std::size_t>(uniform_int(rng, static_cast<std::int64_t>(min_buyers), static_cast<std::int64_t>(max_buyers)));
    const std::int64_t m = uniform_int(rng, 1, max_supply);
    const std::int64_t eps = input_steps[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(input_steps.size()) - 1))];
    std::int64_t delta = eps;
    if (halve_output_step && eps % 2 == 0 && uniform_int(rng, 0, 1) == 1) delta = eps / 2;
    std::vector<Money> budgets, values;
    for (std::size_t i = 0; i < n; ++i) {
      budgets.push_back(Money{uniform_int(rng, min_budget, max_budget)});
      values.push_back(Money{eps * uniform_int(rng, 1, std::max<std::int64_t>(1, max_valuation / eps))});
    }
    return Market::make(m, std::move(budgets), std::move(values), GridSpec(base_unit, eps, delta));
  }
};

using MarketSource = std::function<Market(Rng&)>;

// Upper end of the report range used when sampling profiles.
inline Money sample_cap(const Market& market) {
  Money top = market.params.grid.input_step();
  for (Money v : market.true_valuations) top = std::max(top, v);
  return top * 2;
}

inline Money random_report(Rng& rng, const GridSpec& grid, Money lo, Money hi) {
  const std::int64_t eps = grid.input_step().ticks;
  const std::int64_t a = (lo.ticks + eps - 1) / eps;
  const std::int64_t b = hi.ticks / eps;
  if (b < a) return Money{a * eps};
  return Money{eps * uniform_int(rng, a, b)};
}

inline Profile random_profile(Rng& rng, const Market& market, Money cap) {
  Profile p;
  for (std::size_t i = 0; i < market.buyers(); ++i) p.reports.push_back(random_report(rng, market.params.grid, Money{}, cap));
  return p;
}

struct Witness {
  Market market;
  Profile first;
  Profile second;
  std::size_t buyer = 0;
  std::string detail;
};

struct PropertyReport {
  std::string property;
  bool holds = true;
  std::size_t samples = 0;  // samples actually tested
  std::uint64_t seed = 0;
  std::optional<Witness> witness;
};

// Each predicate returns a description of the violation, or nothing.

template <Mechanism M>
std::optional<std::string> price_monotone_violation(const M& mech, const Market& market, const Profile& lower, const Profile& upper) {
  const Money a = mech(lower, market.params).price;
  const Money b = mech(upper, market.params).price;
  if (a > b) return "price " + market.params.grid.format(a) + " at the lower profile exceeds " + market.params.grid.format(b);
  return std::nullopt;
}

template <Mechanism M>
std::optional<std::string> supply_monotone_violation(const M& mech, const Market& market, const Profile& before, const Profile& after, std::size_t buyer) {
  const Outcome x = mech(before, market.params);
  const Outcome y = mech(after, market.params);
  if (x.price != y.price) return std::nullopt;
  if (y.allocation[buyer] < x.allocation[buyer])
    return "buyer gets " + std::to_string(y.allocation[buyer]) + " units with less competition, " + std::to_string(x.allocation[buyer]) + " before";
  return std::nullopt;
}

inline std::optional<std::string> wasteful_outcome(const Profile& profile, const MarketParams& params, const Outcome& out) {
  if (out.units_sold() >= params.supply) return std::nullopt;
  auto st = statuses(profile, params, out.price);
  for (std::size_t i = 0; i < st.size(); ++i) {
    if (st[i].appetite == Appetite::SemiHungry && out.allocation[i] < st[i].max_units)
      return "semi-hungry buyer " + std::to_string(i) + " gets " + std::to_string(out.allocation[i]) + " of " + std::to_string(st[i].max_units) +
             " with " + std::to_string(params.supply - out.units_sold()) + " units unsold";
  }
  return std::nullopt;
}

template <Mechanism M>
std::optional<std::string> consistency_violation(const M& mech, const Market& market, const Profile& a, const Profile& b) {
  const Outcome x = mech(a, market.params);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Money p = x.price;
    bool same_class = (a.reports[i] > p) == (b.reports[i] > p) && (a.reports[i] == p) == (b.reports[i] == p);
    if (!same_class) return std::nullopt;  // not a valid pair
  }
  const Outcome y = mech(b, market.params);
  if (x != y) return "same hungry and semi-hungry sets but a different outcome";
  return std::nullopt;
}

template <Mechanism M>
std::optional<std::string> truthfulness_violation(const M& mech, const Market& market, const Profile& others, std::size_t buyer, Money deviation) {
  Profile truth = others;
  truth.reports[buyer] = market.true_valuations[buyer];
  Profile lie = others;
  lie.reports[buyer] = deviation;
  if (buyer_utility(market, buyer, mech(lie, market.params)) > buyer_utility(market, buyer, mech(truth, market.params)))
    return "report " + market.params.grid.format(deviation) + " beats the truth";
  return std::nullopt;
}

template <Mechanism M>
PropertyReport check_price_monotone(const M& mech, const MarketSource& sampler, std::size_t trials, std::uint64_t seed) {
  PropertyReport r{"price-monotone", true, 0, seed, std::nullopt};
  Rng rng(seed);
  for (std::size_t t = 0; t < trials; ++t) {
    Market market = sampler(rng);
    Profile upper = random_profile(rng, market, sample_cap(market));
    Profile lower = upper;
    for (Money& s : lower.reports) s = random_report(rng, market.params.grid, Money{}, s);
    ++r.samples;
    if (auto v = price_monotone_violation(mech, market, lower, upper)) {
      r.holds = false;
      r.witness = Witness{market, lower, upper, 0, *v};
      return r;
    }
  }
  return r;
}

// Takes an outcome at random reports, then pushes some competitors below the
// price. Only pairs where the price is unchanged count as samples.
template <Mechanism M>
PropertyReport check_supply_monotone(const M& mech, const MarketSource& sampler, std::size_t trials, std::uint64_t seed) {
  PropertyReport r{"supply-monotone", true, 0, seed, std::nullopt};
  Rng rng(seed);
  for (std::size_t t = 0; t < trials; ++t) {
    Market market = sampler(rng);
    const Profile before = random_profile(rng, market, sample_cap(market));
    const std::size_t i = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(market.buyers()) - 1));
    const Money p = mech(before, market.params).price;
    Profile after = before;
    bool changed = false;
    for (std::size_t j = 0; j < after.size(); ++j) {
      if (j == i || after.reports[j] < p || uniform_int(rng, 0, 1) == 0) continue;
      after.reports[j] = random_report(rng, market.params.grid, Money{}, p - Money{1});
      changed = changed || after.reports[j] != before.reports[j];
    }
    if (!changed || mech(after, market.params).price != p) continue;
    ++r.samples;
    if (auto v = supply_monotone_violation(mech, market, before, after, i)) {
      r.holds = false;
      r.witness = Witness{market, before, after, i, *v};
      return r;
    }
  }
  return r;
}

template <Mechanism M>
PropertyReport check_non_wasteful(const M& mech, const MarketSource& sampler, std::size_t trials, std::uint64_t seed) {
  PropertyReport r{"non-wasteful", true, 0, seed, std::nullopt};
  Rng rng(seed);
  for (std::size_t t = 0; t < trials; ++t) {
    Market market = sampler(rng);
    Profile s = random_profile(rng, market, sample_cap(market));
    ++r.samples;
    if (auto v = wasteful_outcome(s, market.params, mech(s, market.params))) {
      r.holds = false;
      r.witness = Witness{market, s, s, 0, *v};
      return r;
    }
  }
  return r;
}

// Moves hungry reports around above the price and uninterested ones below it.
template <Mechanism M>
PropertyReport check_consistent(const M& mech, const MarketSource& sampler, std::size_t trials, std::uint64_t seed) {
  PropertyReport r{"consistent", true, 0, seed, std::nullopt};
  Rng rng(seed);
  for (std::size_t t = 0; t < trials; ++t) {
    Market market = sampler(rng);
    const Money cap = sample_cap(market);
    const Profile a = random_profile(rng, market, cap);
    const Money p = mech(a, market.params).price;
    const Money eps = market.params.grid.input_step();
    Profile b = a;
    for (Money& s : b.reports) {
      if (s > p) s = random_report(rng, market.params.grid, p + Money{1}, std::max(cap, p + eps));
      else if (s < p) s = random_report(rng, market.params.grid, Money{}, p - Money{1});
    }
    if (b == a) continue;
    ++r.samples;
    if (auto v = consistency_violation(mech, market, a, b)) {
      r.holds = false;
      r.witness = Witness{market, a, b, 0, *v};
      return r;
    }
  }
  return r;
}

// Others report at random; buyer i compares a random grid deviation with the
// truth.
template <Mechanism M>
PropertyReport check_truthful(const M& mech, const MarketSource& sampler, std::size_t trials, std::uint64_t seed) {
  PropertyReport r{"truthful", true, 0, seed, std::nullopt};
  Rng rng(seed);
  for (std::size_t t = 0; t < trials; ++t) {
    Market market = sampler(rng);
    const Money cap = sample_cap(market);
    const Profile others = random_profile(rng, market, cap);
    const std::size_t i = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(market.buyers()) - 1));
    const Money dev = random_report(rng, market.params.grid, Money{}, cap);
    ++r.samples;
    if (auto v = truthfulness_violation(mech, market, others, i, dev)) {
      Profile lie = others;
      lie.reports[i] = dev;
      Profile truth = others;
      truth.reports[i] = market.true_valuations[i];
      r.holds = false;
      r.witness = Witness{market, truth, lie, i, *v};
      return r;
    }
  }
  return r;
}

// Re-runs the predicate that produced a witness.
template <Mechanism M>
bool witness_reproduces(const M& mech, const PropertyReport& report) {
  if (!report.witness) return false;
  const Witness& w = *report.witness;
  if (report.property == "price-monotone") return price_monotone_violation(mech, w.market, w.first, w.second).has_value();
  if (report.property == "supply-monotone") return supply_monotone_violation(mech, w.market, w.first, w.second, w.buyer).has_value();
  if (report.property == "non-wasteful") return wasteful_outcome(w.first, w.market.params, mech(w.first, w.market.params)).has_value();
  if (report.property == "consistent") return consistency_violation(mech, w.market, w.first, w.second).has_value();
  if (report.property == "truthful") return truthfulness_violation(mech, w.market, w.first, w.buyer, w.second.reports[w.buyer]).has_value();
  return false;
}

// Semi-hungry buyers holding strictly between nothing and their maximum.
inline std::size_t count_partial(const Outcome& outcome, const Profile& profile, const MarketParams& params) {
  auto st = statuses(profile, params, outcome.price);
  std::size_t k = 0;
  for (std::size_t i = 0; i < st.size(); ++i) {
    if (st[i].appetite == Appetite::SemiHungry && outcome.allocation[i] > 0 && outcome.allocation[i] < st[i].max_units) ++k;
  }
  return k;
}

// Empirical lower bound on the worst-case number of partial allocations.
template <Mechanism M>
std::size_t estimate_gamma(const M& mech, const MarketSource& sampler, std::size_t trials, std::uint64_t seed) {
  Rng rng(seed);
  std::size_t gamma = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    Market market = sampler(rng);
    Profile s = random_profile(rng, market, sample_cap(market));
    gamma = std::max(gamma, count_partial(mech(s, market.params), s, market.params));
  }
  return gamma;
}

struct BoundCheck {
  std::string name;
  Rational lhs;
  Rational rhs;
  bool holds = true;
  bool vacuous = false;
  std::string detail;
};

// SW(truth) - SW(eq) <= gamma * B*, reported as lhs = gamma * B*, rhs = loss.
inline BoundCheck welfare_bound(const Market& market, const Outcome& truth, const Outcome& eq, std::int64_t gamma) {
  const GridSpec& g = market.params.grid;
  BoundCheck c;
  c.name = "welfare-loss";
  c.lhs = g.to_rational(market.params.max_budget() * gamma);
  c.rhs = g.to_rational(social_welfare(market.true_valuations, truth) - social_welfare(market.true_valuations, eq));
  c.holds = c.lhs >= c.rhs;
  c.detail = "loss " + format_rational(c.rhs) + " vs allowance " + format_rational(c.lhs);
  return c;
}

// REV(eq) >= ((beta - gamma * alpha) / 2) * REV(M). With beta and alpha taken
// per instance the right side is (REV(truth) - gamma * B*) / 2.
inline BoundCheck revenue_bound(const Market& market, const Outcome& truth, const Outcome& eq, std::int64_t gamma) {
  const GridSpec& g = market.params.grid;
  BoundCheck c;
  c.name = "revenue";
  c.lhs = g.to_rational(revenue(eq));
  c.rhs = g.to_rational(revenue(truth) - market.params.max_budget() * gamma) / 2;
  c.vacuous = c.rhs <= 0;
  c.holds = c.vacuous || c.lhs >= c.rhs;
  c.detail = "revenue " + format_rational(c.lhs) + " vs bound " + format_rational(c.rhs) + (c.vacuous ? " (vacuous)" : "");
  return c;
}

template <Mechanism M>
BoundCheck check_welfare_bound(const M& mech, const Market& market, const Outcome& equilibrium, std::int64_t gamma) {
  return welfare_bound(market, mech(truth_profile(market), market.params), equilibrium, gamma);
}

template <Mechanism M>
BoundCheck check_revenue_bound(const M& mech, const Market& market, const Outcome& equilibrium, std::int64_t gamma) {
  return revenue_bound(market, mech(truth_profile(market), market.params), equilibrium, gamma);
}

// No buyer that is served under the truth is shut out at the equilibrium.
inline std::optional<std::size_t> zeroed_buyer(const Outcome& truth, const Outcome& eq) {
  for (std::size_t i = 0; i < truth.allocation.size(); ++i) {
    if (truth.allocation[i] > 0 && eq.allocation[i] == 0) return i;
  }
  return std::nullopt;
}

}  // namespace envyfree

#endif  // ENVYFREE_ANALYSIS_HPP
