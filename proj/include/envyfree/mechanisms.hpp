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

// Envy-free pricing mechanisms. A mechanism maps the reported valuations and
// the public market parameters to an envy-free Outcome; it never sees the true
// valuations.

#ifndef ENVYFREE_MECHANISMS_HPP
#define ENVYFREE_MECHANISMS_HPP

#include <algorithm>
#include <array>
#include <cctype>
#include <concepts>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "envyfree/core.hpp"

namespace envyfree {

template <class M>
concept Mechanism = requires(const M& mech, const Profile& profile, const MarketParams& params) {
  { mech(profile, params) } -> std::convertible_to<Outcome>;
};

namespace alloc {

inline std::vector<std::size_t> index_order(std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  return order;
}

// Hungry buyers receive their full demand; returns the units left over.
inline std::int64_t serve_hungry(const std::vector<BuyerStatus>& st, std::vector<std::int64_t>& x, std::int64_t supply) {
  std::int64_t remaining = supply;
  for (std::size_t i = 0; i < st.size(); ++i) {
    if (st[i].appetite == Appetite::Hungry) {
      x[i] = st[i].max_units;
      remaining -= x[i];
    }
  }
  return remaining;
}

// Semi-hungry buyers taken in `order`, each filled as far as supply allows.
inline Outcome greedy(const Profile& profile, const MarketParams& params, Money price, std::span<const std::size_t> order) {
  auto st = statuses(profile, params, price);
  Outcome out{price, std::vector<std::int64_t>(profile.size(), 0)};
  std::int64_t remaining = serve_hungry(st, out.allocation, params.supply);
  for (std::size_t i : order) {
    if (st[i].appetite != Appetite::SemiHungry) continue;
    std::int64_t take = std::min(st[i].max_units, remaining);
    out.allocation[i] = take;
    remaining -= take;
  }
  return out;
}

inline Outcome greedy(const Profile& profile, const MarketParams& params, Money price) {
  auto order = index_order(profile.size());
  return greedy(profile, params, price, order);
}

}  // namespace alloc

// Minimum envy-free price; semi-hungry buyers in index order get everything
// they can afford or nothing, and later buyers are still considered after a
// refusal.
struct AllOrNothing {
  Outcome operator()(const Profile& profile, const MarketParams& params) const {
    const Money price = min_envy_free_price(profile, params);
    auto st = statuses(profile, params, price);
    Outcome out{price, std::vector<std::int64_t>(profile.size(), 0)};
    std::int64_t remaining = alloc::serve_hungry(st, out.allocation, params.supply);
    for (std::size_t i = 0; i < st.size(); ++i) {
      if (st[i].appetite != Appetite::SemiHungry) continue;
      if (st[i].max_units <= remaining) {
        out.allocation[i] = st[i].max_units;
        remaining -= st[i].max_units;
      }
    }
    return out;
  }
};

// Prices at the top report, or one input step below it when that is still
// envy-free.
struct AlmostTop {
  Outcome operator()(const Profile& profile, const MarketParams& params) const {
    detail::require_dimensions(profile, params);
    const Money top = profile.max_report();
    Money price = params.grid.ceil_to_output(top);
    const Money lower = top - params.grid.input_step();
    if (lower.is_positive()) {
      Money candidate = params.grid.ceil_to_output(lower);
      if (candidate < price && is_envy_free_price(profile, params, candidate)) price = candidate;
    }
    return alloc::greedy(profile, params, price);
  }
};

// Revenue-maximizing price (highest among ties). Among the allocations that
// raise the maximum revenue it allocates to as few buyers as possible: the
// largest semi-hungry capacities first, lower index first on equal capacity.
struct MaxRevenue {
  Outcome operator()(const Profile& profile, const MarketParams& params) const {
    const Money price = max_envy_free_revenue(profile, params).price;
    auto st = statuses(profile, params, price);
    std::vector<std::size_t> order = alloc::index_order(profile.size());
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return st[a].max_units > st[b].max_units; });
    return alloc::greedy(profile, params, price, order);
  }
};

// Lowest price maximizing welfare measured at the reports, semi-hungry buyers
// filled greedily in index order.
struct MaxWelfareGreedy {
  static Money reported_welfare(const Profile& profile, const MarketParams& params, Money price) {
    Money welfare;
    std::int64_t hungry = 0;
    std::int64_t semi = 0;
    for (std::size_t i = 0; i < profile.size(); ++i) {
      BuyerStatus st = demand(profile.reports[i], params.budgets[i], price, params.supply);
      if (st.appetite == Appetite::Hungry) {
        welfare += profile.reports[i] * st.max_units;
        hungry += st.max_units;
      } else if (st.appetite == Appetite::SemiHungry) {
        semi += st.max_units;
      }
    }
    return welfare + price * std::min(semi, params.supply - hungry);
  }

  Outcome operator()(const Profile& profile, const MarketParams& params) const {
    const Money step = params.grid.output_step();
    const Money top = profile.max_report();
    Money best_price = min_envy_free_price(profile, params);
    Money best = reported_welfare(profile, params, best_price);
    for (Money p = best_price + step; p <= top; p += step) {
      Money w = reported_welfare(profile, params, p);
      if (w > best) {
        best = w;
        best_price = p;
      }
    }
    return alloc::greedy(profile, params, best_price);
  }
};

// Second-highest report, raised to the nearest envy-free grid price when
// needed; semi-hungry buyers greedy in index order.
struct SecondHighestGreedy {
  Outcome operator()(const Profile& profile, const MarketParams& params) const {
    detail::require_dimensions(profile, params);
    if (profile.size() < 2) throw std::invalid_argument("second-highest-greedy needs at least two buyers");
    std::vector<Money> sorted = profile.reports;
    std::nth_element(sorted.begin(), sorted.begin() + 1, sorted.end(), std::greater<>{});
    const Money price = min_envy_free_price_at_or_above(profile, params, sorted[1]);
    return alloc::greedy(profile, params, price);
  }
};

// Lowest reported valuation that is an envy-free price; semi-hungry buyers are
// served greedily in a fixed tie order.
struct LowestEfValuation {
  std::vector<std::size_t> tie_order;  // empty means index order

  Outcome operator()(const Profile& profile, const MarketParams& params) const {
    detail::require_dimensions(profile, params);
    std::vector<std::size_t> order = tie_order.empty() ? alloc::index_order(profile.size()) : tie_order;
    check_permutation(order, profile.size());
    std::vector<Money> candidates;
    for (Money r : profile.reports) {
      if (r.is_positive()) candidates.push_back(params.grid.ceil_to_output(r));
    }
    std::sort(candidates.begin(), candidates.end());
    Money price = params.grid.output_step();
    if (!candidates.empty()) {
      price = candidates.back();
      for (Money c : candidates) {
        if (is_envy_free_price(profile, params, c)) {
          price = c;
          break;
        }
      }
    }
    return alloc::greedy(profile, params, price, order);
  }

  static void check_permutation(const std::vector<std::size_t>& order, std::size_t n) {
    std::vector<bool> seen(n, false);
    if (order.size() != n) throw std::invalid_argument("tie order must list every buyer exactly once");
    for (std::size_t i : order) {
      if (i >= n || seen[i]) throw std::invalid_argument("tie order must list every buyer exactly once");
      seen[i] = true;
    }
  }
};

// Two-buyer mechanism with a hand-written price table that makes best
// responses cycle. Only defined for budgets (1.5, 1.5) and two units.
struct CycleAdversarial {
  Outcome operator()(const Profile& profile, const MarketParams& params) const {
    const GridSpec& g = params.grid;
    auto money = [&](std::string_view text) {
      auto m = g.try_to_money(parse_rational(text));
      if (!m) throw std::invalid_argument("cycle-adversarial: base unit too coarse for the price table");
      return *m;
    };
    if (profile.size() != 2 || params.buyers() != 2) throw std::invalid_argument("cycle-adversarial is defined for two buyers only");
    if (params.budgets[0] != money("1.5") || params.budgets[1] != money("1.5"))
      throw std::invalid_argument("cycle-adversarial requires budgets (1.5, 1.5)");
    if (params.supply != 2) throw std::invalid_argument("cycle-adversarial requires two units");

    struct Entry {
      std::string_view alice, bob, price;
    };
    static constexpr std::array<Entry, 4> kTable{{
        {"0.1", "0.3", "0.2"},
        {"3", "0.3", "0.9"},
        {"3", "2", "1.5"},
        {"0.1", "2", "0.5"},
    }};
    Money price = std::max(profile.reports[0], profile.reports[1]) + money("100");
    for (const Entry& e : kTable) {
      if (profile.reports[0] == money(e.alice) && profile.reports[1] == money(e.bob)) {
        price = money(e.price);
        break;
      }
    }
    if (!g.on_output_grid(price)) throw std::invalid_argument("cycle-adversarial: price table is off the output grid");
    return alloc::greedy(profile, params, price);
  }
};

enum class MechanismId { AllOrNothing, AlmostTop, MaxRevenue, MaxWelfareGreedy, SecondHighestGreedy, LowestEfValuation, CycleAdversarial };

inline constexpr std::array<MechanismId, 7> kAllMechanisms{
    MechanismId::AllOrNothing,     MechanismId::AlmostTop,           MechanismId::MaxRevenue,
    MechanismId::MaxWelfareGreedy, MechanismId::SecondHighestGreedy, MechanismId::LowestEfValuation,
    MechanismId::CycleAdversarial,
};

// Mechanisms defined on every market with at least two buyers.
inline constexpr std::array<MechanismId, 6> kGeneralMechanisms{
    MechanismId::AllOrNothing,     MechanismId::AlmostTop,           MechanismId::MaxRevenue,
    MechanismId::MaxWelfareGreedy, MechanismId::SecondHighestGreedy, MechanismId::LowestEfValuation,
};

inline std::string_view mechanism_name(MechanismId id) {
  switch (id) {
    case MechanismId::AllOrNothing: return "all-or-nothing";
    case MechanismId::AlmostTop: return "almost-top";
    case MechanismId::MaxRevenue: return "max-revenue";
    case MechanismId::MaxWelfareGreedy: return "max-welfare-greedy";
    case MechanismId::SecondHighestGreedy: return "second-highest-greedy";
    case MechanismId::LowestEfValuation: return "lowest-ef-valuation";
    case MechanismId::CycleAdversarial: return "cycle-adversarial";
  }
  return "unknown";
}

// Accepts "all-or-nothing", "AllOrNothing", "all_or_nothing", ...
inline MechanismId parse_mechanism_id(std::string_view text) {
  auto squash = [](std::string_view s) {
    std::string out;
    for (char c : s) {
      if (c == '-' || c == '_' || c == ' ') continue;
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
  };
  const std::string key = squash(text);
  for (MechanismId id : kAllMechanisms) {
    if (squash(mechanism_name(id)) == key) return id;
  }
  if (key == "lowestefvaluation" || key == "lowestenvyfreevaluation") return MechanismId::LowestEfValuation;
  throw std::invalid_argument("unknown mechanism '" + std::string(text) + "'");
}

// Type-erased mechanism handle for configuration-driven code.
class AnyMechanism {
 public:
  AnyMechanism(MechanismId id, std::function<Outcome(const Profile&, const MarketParams&)> fn) : id_(id), fn_(std::move(fn)) {}

  Outcome operator()(const Profile& profile, const MarketParams& params) const { return fn_(profile, params); }
  MechanismId id() const { return id_; }
  std::string_view name() const { return mechanism_name(id_); }

 private:
  MechanismId id_;
  std::function<Outcome(const Profile&, const MarketParams&)> fn_;
};

inline AnyMechanism make_mechanism(MechanismId id, std::vector<std::size_t> tie_order = {}) {
  switch (id) {
    case MechanismId::AllOrNothing: return {id, AllOrNothing{}};
    case MechanismId::AlmostTop: return {id, AlmostTop{}};
    case MechanismId::MaxRevenue: return {id, MaxRevenue{}};
    case MechanismId::MaxWelfareGreedy: return {id, MaxWelfareGreedy{}};
    case MechanismId::SecondHighestGreedy: return {id, SecondHighestGreedy{}};
    case MechanismId::LowestEfValuation: return {id, LowestEfValuation{std::move(tie_order)}};
    case MechanismId::CycleAdversarial: return {id, CycleAdversarial{}};
  }
  throw std::invalid_argument("unknown mechanism id");
}

}  // namespace envyfree

#endif  // ENVYFREE_MECHANISMS_HPP
