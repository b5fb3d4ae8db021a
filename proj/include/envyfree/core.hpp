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

// Linear multi-unit market with budgets: demand, utility, envy-free prices and
// the welfare/revenue quantities that the rest of the library measures.
//
// Every monetary amount is an exact integer count of GridSpec::base_unit.

#ifndef ENVYFREE_CORE_HPP
#define ENVYFREE_CORE_HPP

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "envyfree/money.hpp"

namespace envyfree {

class GridSpec {
 public:
  GridSpec() = default;

  // base_unit is the money resolution; steps are given in multiples of it.
  GridSpec(Rational base_unit, std::int64_t input_step, std::int64_t output_step)
      : base_unit_(base_unit), input_step_(input_step), output_step_(output_step) {
    if (base_unit_ <= 0) throw std::invalid_argument("base_unit must be positive");
    if (input_step_ <= 0 || output_step_ <= 0) throw std::invalid_argument("grid steps must be positive");
  }

  // Builds a grid from real-valued steps, each of which must be a multiple of
  // base_unit.
  static GridSpec from_values(Rational base_unit, Rational epsilon, Rational delta) {
    GridSpec probe(base_unit, 1, 1);
    return GridSpec(base_unit, probe.to_money(epsilon).ticks, probe.to_money(delta).ticks);
  }

  const Rational& base_unit() const { return base_unit_; }
  Money input_step() const { return Money{input_step_}; }
  Money output_step() const { return Money{output_step_}; }

  bool on_input_grid(Money m) const { return m.ticks >= 0 && m.ticks % input_step_ == 0; }
  bool on_output_grid(Money m) const { return m.ticks > 0 && m.ticks % output_step_ == 0; }

  // Smallest positive output-grid price that is >= m.
  Money ceil_to_output(Money m) const {
    if (m.ticks <= output_step_) return Money{output_step_};
    return Money{(m.ticks + output_step_ - 1) / output_step_ * output_step_};
  }

  std::optional<Money> try_to_money(const Rational& value) const {
    Rational t = value / base_unit_;
    if (t.denominator() != 1) return std::nullopt;
    return Money{t.numerator()};
  }
  Money to_money(const Rational& value) const {
    auto m = try_to_money(value);
    if (!m) throw std::invalid_argument(format_rational(value) + " is not a multiple of base unit " + format_rational(base_unit_));
    return *m;
  }
  Money parse(std::string_view text) const { return to_money(parse_rational(text)); }

  Rational to_rational(Money m) const { return base_unit_ * m.ticks; }
  std::string format(Money m) const { return format_rational(to_rational(m)); }
  // Text form of a ratio of two amounts (e.g. a budget share).
  static std::string format_ratio(const Rational& r) { return format_rational(r); }

  bool operator==(const GridSpec&) const = default;

 private:
  Rational base_unit_{1};
  std::int64_t input_step_ = 1;
  std::int64_t output_step_ = 1;
};

// The publicly known part of a market: what a mechanism is allowed to see.
struct MarketParams {
  std::int64_t supply = 0;
  std::vector<Money> budgets;
  GridSpec grid;

  std::size_t buyers() const { return budgets.size(); }
  Money max_budget() const { return budgets.empty() ? Money{} : *std::max_element(budgets.begin(), budgets.end()); }
};

struct Market {
  MarketParams params;
  std::vector<Money> true_valuations;

  std::size_t buyers() const { return params.buyers(); }

  static Market make(std::int64_t supply, std::vector<Money> budgets, std::vector<Money> valuations, GridSpec grid) {
    if (supply < 1) throw std::invalid_argument("supply must be at least 1");
    if (budgets.empty()) throw std::invalid_argument("market needs at least one buyer");
    if (budgets.size() != valuations.size()) throw std::invalid_argument("budgets and valuations differ in length");
    for (std::size_t i = 0; i < budgets.size(); ++i) {
      if (!budgets[i].is_positive()) throw std::invalid_argument("budget " + std::to_string(i) + " is not positive");
      if (!grid.on_input_grid(valuations[i]))
        throw std::invalid_argument("valuation " + std::to_string(i) + " is not on the input grid");
    }
    return Market{MarketParams{supply, std::move(budgets), grid}, std::move(valuations)};
  }
};

struct Profile {
  std::vector<Money> reports;

  std::size_t size() const { return reports.size(); }
  Money max_report() const { return reports.empty() ? Money{} : *std::max_element(reports.begin(), reports.end()); }
  bool operator==(const Profile&) const = default;
  auto operator<=>(const Profile&) const = default;
};

inline Profile truth_profile(const Market& market) { return Profile{market.true_valuations}; }

struct Outcome {
  Money price;
  std::vector<std::int64_t> allocation;

  std::int64_t units_sold() const { return std::accumulate(allocation.begin(), allocation.end(), std::int64_t{0}); }
  bool operator==(const Outcome&) const = default;
};

enum class Appetite { Hungry, SemiHungry, Uninterested };

struct BuyerStatus {
  Appetite appetite = Appetite::Uninterested;
  std::int64_t max_units = 0;

  bool interested() const { return appetite != Appetite::Uninterested; }
  // Whether `units` is a member of the demand set.
  bool demands(std::int64_t units) const {
    switch (appetite) {
      case Appetite::Hungry: return units == max_units;
      case Appetite::SemiHungry: return units >= 0 && units <= max_units;
      case Appetite::Uninterested: return units == 0;
    }
    return false;
  }
  bool operator==(const BuyerStatus&) const = default;
};

inline BuyerStatus demand(Money report, Money budget, Money price, std::int64_t supply) {
  if (!price.is_positive()) throw std::invalid_argument("demand: price must be positive");
  if (report < price) return {Appetite::Uninterested, 0};
  std::int64_t affordable = std::min(budget.ticks / price.ticks, supply);
  return {report > price ? Appetite::Hungry : Appetite::SemiHungry, affordable};
}

inline Utility utility(Money true_value, Money budget, Money price, std::int64_t units) {
  if ((price * units) > budget) return Utility::bottom();
  return Utility{(true_value - price) * units};
}

namespace detail {

inline void require_dimensions(const Profile& profile, const MarketParams& params) {
  if (profile.size() != params.buyers()) throw std::invalid_argument("profile length does not match the number of buyers");
}

// Units demanded by hungry buyers at `price`; the only constraint on
// envy-freeness since semi-hungry buyers may receive nothing.
inline std::int64_t hungry_demand(const Profile& profile, const MarketParams& params, Money price) {
  std::int64_t total = 0;
  for (std::size_t i = 0; i < profile.size(); ++i) {
    if (profile.reports[i] > price) total += demand(profile.reports[i], params.budgets[i], price, params.supply).max_units;
  }
  return total;
}

inline std::int64_t interested_demand(const Profile& profile, const MarketParams& params, Money price) {
  std::int64_t total = 0;
  for (std::size_t i = 0; i < profile.size(); ++i) total += demand(profile.reports[i], params.budgets[i], price, params.supply).max_units;
  return total;
}

// Number of output-grid points from output_step up to the first one at or
// above the maximum report (at least one).
inline std::int64_t price_grid_length(const Profile& profile, const MarketParams& params) {
  return params.grid.ceil_to_output(profile.max_report()).ticks / params.grid.output_step().ticks;
}

}  // namespace detail

inline std::vector<BuyerStatus> statuses(const Profile& profile, const MarketParams& params, Money price) {
  detail::require_dimensions(profile, params);
  std::vector<BuyerStatus> out;
  out.reserve(profile.size());
  for (std::size_t i = 0; i < profile.size(); ++i) out.push_back(demand(profile.reports[i], params.budgets[i], price, params.supply));
  return out;
}

inline bool is_envy_free_price(const Profile& profile, const MarketParams& params, Money price) {
  detail::require_dimensions(profile, params);
  if (!price.is_positive()) throw std::invalid_argument("envy-free check needs a positive price");
  return detail::hungry_demand(profile, params, price) <= params.supply;
}

// Smallest positive output-grid price that is envy-free. Feasibility is
// monotone in the price, so binary search over grid indices suffices; the
// first grid point at or above the maximum report is always feasible.
inline Money min_envy_free_price(const Profile& profile, const MarketParams& params) {
  detail::require_dimensions(profile, params);
  const Money step = params.grid.output_step();
  std::int64_t lo = 1;
  std::int64_t hi = detail::price_grid_length(profile, params);
  while (lo < hi) {
    std::int64_t mid = lo + (hi - lo) / 2;
    if (is_envy_free_price(profile, params, step * mid)) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return step * lo;
}

// Smallest envy-free output-grid price that is >= floor.
inline Money min_envy_free_price_at_or_above(const Profile& profile, const MarketParams& params, Money floor) {
  Money p = params.grid.ceil_to_output(floor);
  return std::max(p, min_envy_free_price(profile, params));
}

inline bool validate_outcome(const Profile& profile, const MarketParams& params, const Outcome& outcome) {
  if (profile.size() != params.buyers() || outcome.allocation.size() != params.buyers())
    throw std::invalid_argument("validate_outcome: dimension mismatch");
  if (!outcome.price.is_positive()) return false;
  if (outcome.units_sold() > params.supply) return false;
  for (std::size_t i = 0; i < profile.size(); ++i) {
    if (!demand(profile.reports[i], params.budgets[i], outcome.price, params.supply).demands(outcome.allocation[i])) return false;
  }
  return true;
}

inline Money social_welfare(std::span<const Money> true_valuations, const Outcome& outcome) {
  if (true_valuations.size() != outcome.allocation.size()) throw std::invalid_argument("social_welfare: dimension mismatch");
  Money total;
  for (std::size_t i = 0; i < true_valuations.size(); ++i) total += true_valuations[i] * outcome.allocation[i];
  return total;
}

inline Money revenue(const Outcome& outcome) { return outcome.price * outcome.units_sold(); }

struct RevenueRange {
  Money min;
  Money max;
  bool operator==(const RevenueRange&) const = default;
};

// Least and greatest revenue any envy-free allocation can raise at `price`:
// semi-hungry buyers receiving nothing vs. everything they can take.
inline RevenueRange revenue_bounds_at_price(const Profile& profile, const MarketParams& params, Money price) {
  if (!is_envy_free_price(profile, params, price)) throw std::domain_error("revenue_bounds_at_price: price is not envy-free");
  std::int64_t hungry = detail::hungry_demand(profile, params, price);
  std::int64_t interested = std::min(params.supply, detail::interested_demand(profile, params, price));
  return {price * hungry, price * interested};
}

struct PricedAmount {
  Money price;
  Money amount;
  bool operator==(const PricedAmount&) const = default;
};

// Maximum revenue over envy-free grid prices in (0, max report]; ties go to
// the highest price. When no such price exists (no positive report, or the
// top report is off the output grid and nothing below it is feasible) the
// answer is the first grid price at or above the top report, raising 0.
inline PricedAmount max_envy_free_revenue(const Profile& profile, const MarketParams& params) {
  detail::require_dimensions(profile, params);
  const Money step = params.grid.output_step();
  const Money top = profile.max_report();
  std::optional<PricedAmount> best;
  // Walk downwards: once a price is infeasible every lower one is as well.
  for (Money p = step * (top.ticks / step.ticks); p.is_positive(); p -= step) {
    if (!is_envy_free_price(profile, params, p)) break;
    Money rev = revenue_bounds_at_price(profile, params, p).max;
    if (!best || rev > best->amount) best = PricedAmount{p, rev};
  }
  return best.value_or(PricedAmount{params.grid.ceil_to_output(top), Money{}});
}

// Best welfare over envy-free pricings of the truthful profile. Semi-hungry
// buyers value each unit at exactly the price, so filling them is worth p per
// unit regardless of who receives it.
inline PricedAmount optimal_ef_welfare(const Market& market) {
  const Profile truth = truth_profile(market);
  const MarketParams& params = market.params;
  const Money step = params.grid.output_step();
  const Money top = truth.max_report();
  PricedAmount best{params.grid.ceil_to_output(top), Money{}};
  for (Money p = step * (top.ticks / step.ticks); p.is_positive(); p -= step) {
    if (!is_envy_free_price(truth, params, p)) break;
    Money welfare;
    std::int64_t hungry_units = 0;
    std::int64_t semi_units = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      BuyerStatus st = demand(truth.reports[i], params.budgets[i], p, params.supply);
      if (st.appetite == Appetite::Hungry) {
        welfare += truth.reports[i] * st.max_units;
        hungry_units += st.max_units;
      } else if (st.appetite == Appetite::SemiHungry) {
        semi_units += st.max_units;
      }
    }
    welfare += p * std::min(semi_units, params.supply - hungry_units);
    if (welfare > best.amount) best = {p, welfare};
  }
  return best;
}

// Largest budget as a fraction of the maximum envy-free revenue at truth.
inline Rational budget_share(const Market& market) {
  Money rev = max_envy_free_revenue(truth_profile(market), market.params).amount;
  if (!rev.is_positive()) throw std::domain_error("budget_share: market has zero maximum envy-free revenue");
  return Rational(market.params.max_budget().ticks, rev.ticks);
}

struct MetricsReport {
  Money social_welfare;
  Money revenue;
  Money optimal_welfare;
  Money max_ef_revenue;
  std::optional<Rational> budget_share;  // undefined when max_ef_revenue is 0
  Money max_budget;
  std::optional<Rational> beta_instance;
};

// Metrics of `outcome` (typically a mechanism's truthful outcome) on `market`.
inline MetricsReport compute_metrics(const Market& market, const Outcome& outcome) {
  MetricsReport r;
  r.social_welfare = social_welfare(market.true_valuations, outcome);
  r.revenue = revenue(outcome);
  r.optimal_welfare = optimal_ef_welfare(market).amount;
  r.max_ef_revenue = max_envy_free_revenue(truth_profile(market), market.params).amount;
  r.max_budget = market.params.max_budget();
  if (r.max_ef_revenue.is_positive()) {
    r.budget_share = Rational(r.max_budget.ticks, r.max_ef_revenue.ticks);
    r.beta_instance = Rational(r.revenue.ticks, r.max_ef_revenue.ticks);
  }
  return r;
}

}  // namespace envyfree

#endif  // ENVYFREE_CORE_HPP
