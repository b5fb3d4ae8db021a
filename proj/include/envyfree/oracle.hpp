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

// Brute-force reference implementations. These work on exact rationals
// straight from the model definitions and deliberately avoid the helpers in
// core.hpp and dynamics.hpp (no binary search, no memoization, no
// monotonicity shortcuts). Only the mechanism under test is shared.

#ifndef ENVYFREE_ORACLE_HPP
#define ENVYFREE_ORACLE_HPP

#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "envyfree/core.hpp"
#include "envyfree/mechanisms.hpp"

namespace envyfree::oracle {

struct OracleBudget {
  std::uint64_t max_profiles = 100'000;
  std::uint64_t max_price_points = 100'000;
};

class BudgetExceeded : public std::length_error {
 public:
  using std::length_error::length_error;
};

// nullopt stands for an unaffordable bundle.
using RUtility = std::optional<Rational>;

inline bool better(const RUtility& a, const RUtility& b) {
  if (!a) return false;
  if (!b) return true;
  return *a > *b;
}

inline RUtility rational_utility(const Rational& v, const Rational& budget, const Rational& price, std::int64_t units) {
  if (price * units > budget) return std::nullopt;
  return (v - price) * units;
}

inline std::int64_t floor_div(const Rational& a, const Rational& b) {
  Rational q = a / b;
  std::int64_t f = q.numerator() / q.denominator();
  if (f * q.denominator() > q.numerator()) --f;
  return f;
}

struct OracleResponse {
  Money report;
  Rational utility;
};

template <Mechanism M>
std::optional<OracleResponse> oracle_best_response(const M& mech, const Market& market, const Profile& profile, std::size_t buyer, Money cap,
                                                   OracleBudget budget = {}) {
  const GridSpec& g = market.params.grid;
  const std::int64_t eps = g.input_step().ticks;
  const std::uint64_t points = cap.ticks < eps ? 0 : static_cast<std::uint64_t>(cap.ticks / eps);
  if (points > budget.max_price_points) throw BudgetExceeded("oracle_best_response: report grid exceeds budget");
  const Rational v = g.to_rational(market.true_valuations[buyer]);
  const Rational b = g.to_rational(market.params.budgets[buyer]);
  auto eval = [&](const Profile& p) {
    Outcome out = mech(p, market.params);
    return rational_utility(v, b, g.to_rational(out.price), out.allocation[buyer]);
  };
  const RUtility current = eval(profile);
  std::optional<Money> best_report;
  RUtility best;
  for (std::uint64_t k = 1; k <= points; ++k) {
    Profile trial = profile;
    trial.reports[buyer] = Money{static_cast<std::int64_t>(k) * eps};
    RUtility u = eval(trial);
    if (!best_report || better(u, best)) {
      best_report = trial.reports[buyer];
      best = u;
    }
  }
  if (best_report && better(best, current)) return OracleResponse{*best_report, *best};
  return std::nullopt;
}

// Every profile in {eps..cap}^n from which no buyer has a strictly improving
// grid deviation. Recomputes every neighbour from scratch.
template <Mechanism M>
std::vector<Profile> oracle_equilibria(const M& mech, const Market& market, Money cap, OracleBudget budget = {}) {
  const std::size_t n = market.buyers();
  const std::int64_t eps = market.params.grid.input_step().ticks;
  const std::int64_t points = cap.ticks / eps;
  if (points < 1) return {};
  std::uint64_t total = 1;
  for (std::size_t i = 0; i < n; ++i) {
    total *= static_cast<std::uint64_t>(points);
    if (total > budget.max_profiles) throw BudgetExceeded("oracle_equilibria: profile space exceeds budget");
  }
  std::vector<Profile> out;
  std::vector<std::int64_t> digits(n, 1);
  while (true) {
    Profile p;
    for (std::int64_t d : digits) p.reports.push_back(Money{d * eps});
    bool stable = true;
    for (std::size_t i = 0; i < n && stable; ++i) {
      if (oracle_best_response(mech, market, p, i, cap, budget)) stable = false;
    }
    if (stable) out.push_back(p);
    std::size_t pos = 0;
    while (pos < n && digits[pos] == points) digits[pos++] = 1;
    if (pos == n) break;
    ++digits[pos];
  }
  return out;
}

struct OraclePrice {
  Money price;
  Money amount;
};

namespace detail {

struct RStatus {
  bool hungry = false;
  bool interested = false;
  std::int64_t units = 0;
};

inline RStatus rational_status(const Rational& report, const Rational& budget, const Rational& price, std::int64_t supply) {
  RStatus s;
  if (report < price) return s;
  s.interested = true;
  s.hungry = report > price;
  s.units = std::min(floor_div(budget, price), supply);
  return s;
}

inline bool rational_envy_free(const Profile& profile, const MarketParams& params, const Rational& price) {
  std::int64_t hungry = 0;
  for (std::size_t i = 0; i < profile.size(); ++i) {
    RStatus s = rational_status(params.grid.to_rational(profile.reports[i]), params.grid.to_rational(params.budgets[i]), price, params.supply);
    if (s.hungry) hungry += s.units;
  }
  return hungry <= params.supply;
}

}  // namespace detail

// Every output-grid price up to the top report, plus every budget breakpoint
// B_i / k rounded up to the grid, checked literally.
inline OraclePrice oracle_max_revenue(const Profile& profile, const MarketParams& params, OracleBudget budget = {}) {
  const GridSpec& g = params.grid;
  const std::int64_t delta = g.output_step().ticks;
  Money top;
  for (Money r : profile.reports) top = r > top ? r : top;
  const std::int64_t last = top.ticks / delta;
  if (static_cast<std::uint64_t>(last) > budget.max_price_points) throw BudgetExceeded("oracle_max_revenue: price grid exceeds budget");
  std::set<std::int64_t> candidates;
  for (std::int64_t k = 1; k <= last; ++k) candidates.insert(k * delta);
  for (Money b : params.budgets) {
    for (std::int64_t k = 1; k <= params.supply; ++k) {
      std::int64_t t = (b.ticks + k - 1) / k;
      t = (t + delta - 1) / delta * delta;
      if (t <= top.ticks) candidates.insert(t);
    }
  }
  std::optional<OraclePrice> best;
  for (std::int64_t t : candidates) {
    const Rational price = g.to_rational(Money{t});
    if (!detail::rational_envy_free(profile, params, price)) continue;
    std::int64_t interested = 0;
    for (std::size_t i = 0; i < profile.size(); ++i) {
      interested += detail::rational_status(g.to_rational(profile.reports[i]), g.to_rational(params.budgets[i]), price, params.supply).units;
    }
    Money rev{t * std::min(interested, params.supply)};
    if (!best || rev >= best->amount) best = OraclePrice{Money{t}, rev};
  }
  if (best) return *best;
  std::int64_t fallback = top.ticks <= delta ? delta : (top.ticks + delta - 1) / delta * delta;
  return {Money{fallback}, Money{}};
}

inline Money oracle_min_envy_free_price(const Profile& profile, const MarketParams& params, OracleBudget budget = {}) {
  const GridSpec& g = params.grid;
  const std::int64_t delta = g.output_step().ticks;
  for (std::uint64_t k = 1; k <= budget.max_price_points; ++k) {
    Money p{static_cast<std::int64_t>(k) * delta};
    if (detail::rational_envy_free(profile, params, g.to_rational(p))) return p;
  }
  throw BudgetExceeded("oracle_min_envy_free_price: no envy-free price within budget");
}

}  // namespace envyfree::oracle

#endif  // ENVYFREE_ORACLE_HPP
