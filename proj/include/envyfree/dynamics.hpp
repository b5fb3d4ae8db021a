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

// Best-response dynamics over reported valuations.
//
// A buyer's strategy space is the positive input grid {eps, 2 eps, ..., cap}.
// A best response maximizes the buyer's true utility, breaks ties toward the
// lowest report, and is only taken when it strictly improves on the current
// utility. Everything here is deterministic given the order policy.

#ifndef ENVYFREE_DYNAMICS_HPP
#define ENVYFREE_DYNAMICS_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "envyfree/core.hpp"
#include "envyfree/mechanisms.hpp"
#include "envyfree/random.hpp"

namespace envyfree {

inline Utility buyer_utility(const Market& market, std::size_t buyer, const Outcome& outcome) {
  return utility(market.true_valuations[buyer], market.params.budgets[buyer], outcome.price, outcome.allocation[buyer]);
}

// max(true valuations, reports) + eps.
inline Money default_report_cap(const Market& market, const Profile& profile) {
  Money top = profile.max_report();
  for (Money v : market.true_valuations) top = std::max(top, v);
  return top + market.params.grid.input_step();
}

struct Deviation {
  Money report;
  Outcome outcome;
  Utility utility;
};

template <Mechanism M>
std::optional<Deviation> best_response(const M& mech, const Market& market, const Profile& profile, std::size_t buyer, Money report_cap) {
  if (buyer >= profile.size()) throw std::out_of_range("best_response: buyer index");
  const Utility current = buyer_utility(market, buyer, mech(profile, market.params));
  const Money step = market.params.grid.input_step();
  std::optional<Deviation> best;
  Profile trial = profile;
  for (Money r = step; r <= report_cap; r += step) {
    trial.reports[buyer] = r;
    Outcome out = mech(trial, market.params);
    Utility u = buyer_utility(market, buyer, out);
    if (!best || u > best->utility) best = Deviation{r, std::move(out), u};
  }
  if (best && best->utility > current) return best;
  return std::nullopt;
}

template <Mechanism M>
bool is_pure_nash(const M& mech, const Market& market, const Profile& profile, Money report_cap) {
  for (std::size_t i = 0; i < profile.size(); ++i) {
    if (best_response(mech, market, profile, i, report_cap)) return false;
  }
  return true;
}

struct OrderPolicy {
  enum class Kind { RoundRobin, LexFirstImproving, RandomSeeded };
  Kind kind = Kind::RoundRobin;
  std::uint64_t seed = 0;

  static OrderPolicy round_robin() { return {Kind::RoundRobin, 0}; }
  static OrderPolicy lex_first_improving() { return {Kind::LexFirstImproving, 0}; }
  static OrderPolicy random_seeded(std::uint64_t seed) { return {Kind::RandomSeeded, seed}; }
};

struct TraceStep {
  std::size_t deviator = 0;
  Money report;
  Profile profile;  // after the deviation
  Outcome outcome;
  Money revenue;
  Money welfare;  // at true valuations
};

enum class TraceStatus { Converged, CycleDetected, StepLimit };

inline std::string_view status_name(TraceStatus s) {
  switch (s) {
    case TraceStatus::Converged: return "converged";
    case TraceStatus::CycleDetected: return "cycle";
    case TraceStatus::StepLimit: return "step-limit";
  }
  return "unknown";
}

struct Trace {
  Profile start;
  Outcome start_outcome;
  Money start_revenue;
  Money start_welfare;
  std::vector<TraceStep> steps;
  TraceStatus status = TraceStatus::StepLimit;
  // For CycleDetected: the profile after `cycle_entry` steps recurs after
  // `cycle_entry + cycle_length` steps.
  std::size_t cycle_entry = 0;
  std::size_t cycle_length = 0;

  std::size_t length() const { return steps.size(); }
  // State k: k = 0 is the start, k = i + 1 follows steps[i].
  const Profile& profile_at(std::size_t k) const { return k == 0 ? start : steps.at(k - 1).profile; }
  const Outcome& outcome_at(std::size_t k) const { return k == 0 ? start_outcome : steps.at(k - 1).outcome; }
  const Profile& final_profile() const { return profile_at(steps.size()); }
  const Outcome& final_outcome() const { return outcome_at(steps.size()); }
};

template <Mechanism M>
Trace run_dynamics(const M& mech, const Market& market, const Profile& start, OrderPolicy policy = OrderPolicy::round_robin(),
                   std::size_t max_steps = 10000, std::optional<Money> report_cap = std::nullopt) {
  detail::require_dimensions(start, market.params);
  const std::size_t n = start.size();
  const Money cap = report_cap.value_or(default_report_cap(market, start));
  Rng rng(policy.seed);

  Trace trace;
  trace.start = start;
  trace.start_outcome = mech(start, market.params);
  trace.start_revenue = revenue(trace.start_outcome);
  trace.start_welfare = social_welfare(market.true_valuations, trace.start_outcome);

  Profile profile = start;
  std::size_t pointer = 0;  // next buyer offered a move under round robin
  std::map<std::vector<std::int64_t>, std::size_t> visited;
  auto state_key = [&] {
    std::vector<std::int64_t> key;
    key.reserve(n + 1);
    for (Money r : profile.reports) key.push_back(r.ticks);
    if (policy.kind == OrderPolicy::Kind::RoundRobin) key.push_back(static_cast<std::int64_t>(pointer));
    return key;
  };

  std::vector<std::size_t> order(n);
  for (std::size_t step = 0;; ++step) {
    auto [it, inserted] = visited.emplace(state_key(), step);
    if (!inserted) {
      trace.status = TraceStatus::CycleDetected;
      trace.cycle_entry = it->second;
      trace.cycle_length = step - it->second;
      return trace;
    }
    if (step == max_steps) {
      trace.status = TraceStatus::StepLimit;
      return trace;
    }

    for (std::size_t k = 0; k < n; ++k) order[k] = policy.kind == OrderPolicy::Kind::RoundRobin ? (pointer + k) % n : k;
    if (policy.kind == OrderPolicy::Kind::RandomSeeded) shuffle(order, rng);

    std::optional<Deviation> move;
    std::size_t deviator = 0;
    for (std::size_t i : order) {
      move = best_response(mech, market, profile, i, cap);
      if (move) {
        deviator = i;
        break;
      }
    }
    if (!move) {
      trace.status = TraceStatus::Converged;
      return trace;
    }
    profile.reports[deviator] = move->report;
    pointer = (deviator + 1) % n;
    TraceStep s;
    s.deviator = deviator;
    s.report = move->report;
    s.profile = profile;
    s.revenue = revenue(move->outcome);
    s.welfare = social_welfare(market.true_valuations, move->outcome);
    s.outcome = std::move(move->outcome);
    trace.steps.push_back(std::move(s));
  }
}

struct EquilibriumReport {
  Profile profile;
  Outcome outcome;
  bool is_overbidding = false;
  Money social_welfare;
  Money revenue;
};

class EnumerationTooLarge : public std::length_error {
 public:
  EnumerationTooLarge(double estimate, std::uint64_t limit)
      : std::length_error("equilibrium enumeration would visit " + std::to_string(static_cast<long double>(estimate)) +
                          " profiles, limit is " + std::to_string(limit)),
        estimate_(estimate) {}
  double estimate() const { return estimate_; }

 private:
  double estimate_;
};

inline bool is_overbidding(const Market& market, const Profile& profile) {
  for (std::size_t i = 0; i < profile.size(); ++i) {
    if (profile.reports[i] > market.true_valuations[i]) return true;
  }
  return false;
}

inline constexpr std::uint64_t kDefaultEnumerationLimit = 2'000'000;

// Every grid profile in {eps..cap}^n that is a pure Nash equilibrium.
// Outcomes are memoized per profile, so each profile is sent to the mechanism
// once no matter how many neighbours probe it.
template <Mechanism M>
std::vector<EquilibriumReport> enumerate_equilibria(const M& mech, const Market& market, Money report_cap, bool only_non_overbidding,
                                                    std::uint64_t max_profiles = kDefaultEnumerationLimit) {
  const std::size_t n = market.buyers();
  const Money step = market.params.grid.input_step();
  const std::int64_t g = report_cap.ticks / step.ticks;
  if (g < 1) return {};
  double estimate = 1;
  for (std::size_t i = 0; i < n; ++i) estimate *= static_cast<double>(g);
  if (estimate > static_cast<double>(max_profiles)) throw EnumerationTooLarge(estimate, max_profiles);

  std::vector<std::int64_t> radix(n, 1);
  for (std::size_t i = 1; i < n; ++i) radix[i] = radix[i - 1] * g;
  const std::int64_t total = radix[n - 1] * g;

  auto decode = [&](std::int64_t code) {
    Profile p;
    p.reports.resize(n);
    for (std::size_t i = 0; i < n; ++i) p.reports[i] = step * ((code / radix[i]) % g + 1);
    return p;
  };
  std::unordered_map<std::int64_t, Outcome> memo;
  auto outcome_of = [&](std::int64_t code) -> const Outcome& {
    auto it = memo.find(code);
    if (it == memo.end()) it = memo.emplace(code, mech(decode(code), market.params)).first;
    return it->second;
  };

  std::vector<EquilibriumReport> out;
  for (std::int64_t code = 0; code < total; ++code) {
    Profile profile = decode(code);
    const bool overbid = is_overbidding(market, profile);
    if (only_non_overbidding && overbid) continue;
    const Outcome here = outcome_of(code);
    bool stable = true;
    for (std::size_t i = 0; i < n && stable; ++i) {
      const Utility current = buyer_utility(market, i, here);
      const std::int64_t own = (code / radix[i]) % g;
      for (std::int64_t alt = 0; alt < g; ++alt) {
        if (alt == own) continue;
        if (buyer_utility(market, i, outcome_of(code + (alt - own) * radix[i])) > current) {
          stable = false;
          break;
        }
      }
    }
    if (!stable) continue;
    out.push_back({profile, here, overbid, social_welfare(market.true_valuations, here), revenue(here)});
  }
  return out;
}

struct TraceViolation {
  std::size_t step = 0;  // state index the violation was observed at
  std::size_t buyer = 0;
  std::string check;
  std::string detail;
};

struct TraceReport {
  std::vector<TraceViolation> violations;
  bool ok() const { return violations.empty(); }
  std::string summary() const {
    std::ostringstream os;
    for (const auto& v : violations) os << "step " << v.step << " buyer " << v.buyer << " [" << v.check << "] " << v.detail << "\n";
    return os.str();
  }
};

// Checks a truth-started trace against the structure every such dynamic has:
//  (a) the price strictly decreases at every step;
//  (b) apparently hungry buyers are truly hungry, apparently uninterested ones
//      report truthfully, apparently semi-hungry ones are truthful unless they
//      are the current deviator (whose true value is then >= the price);
//  (c) at the end every buyer's true utility is at least its truthful one;
//  (d) at the end every buyer holds at least its truthful units, except
//      possibly the last deviator.
inline TraceReport validate_trace(const Trace& trace, const Market& market) {
  if (trace.start != truth_profile(market)) throw std::invalid_argument("validate_trace: trace does not start at the truth");
  TraceReport report;
  const std::size_t n = market.buyers();
  const auto& v = market.true_valuations;
  const GridSpec& grid = market.params.grid;
  auto add = [&](std::size_t step, std::size_t buyer, std::string check, std::string detail) {
    report.violations.push_back({step, buyer, std::move(check), std::move(detail)});
  };

  for (std::size_t k = 1; k <= trace.length(); ++k) {
    const Money prev = trace.outcome_at(k - 1).price;
    const Money p = trace.outcome_at(k).price;
    if (!(p < prev)) add(k, trace.steps[k - 1].deviator, "a", "price " + grid.format(p) + " does not drop below " + grid.format(prev));
    const Profile& s = trace.profile_at(k);
    const std::size_t dev = trace.steps[k - 1].deviator;
    for (std::size_t j = 0; j < n; ++j) {
      if (s.reports[j] > p) {
        if (!(v[j] > p)) add(k, j, "b", "appears hungry but true value " + grid.format(v[j]) + " <= price " + grid.format(p));
      } else if (s.reports[j] < p) {
        if (s.reports[j] != v[j]) add(k, j, "b", "appears uninterested but misreports");
      } else if (j == dev) {
        if (v[j] < p) add(k, j, "b", "semi-hungry deviator with true value below the price");
      } else if (s.reports[j] != v[j]) {
        add(k, j, "b", "appears semi-hungry but misreports");
      }
    }
  }

  const Outcome& first = trace.start_outcome;
  const Outcome& last = trace.final_outcome();
  const std::optional<std::size_t> last_dev =
      trace.steps.empty() ? std::nullopt : std::optional<std::size_t>(trace.steps.back().deviator);
  for (std::size_t i = 0; i < n; ++i) {
    if (buyer_utility(market, i, last) < buyer_utility(market, i, first)) add(trace.length(), i, "c", "final utility below truthful utility");
    if (last.allocation[i] < first.allocation[i] && last_dev != i) add(trace.length(), i, "d", "lost units without being the last deviator");
  }
  return report;
}

enum class SignType { Minus, Zero, Plus };

inline std::string_view sign_name(SignType t) {
  switch (t) {
    case SignType::Minus: return "-";
    case SignType::Zero: return "0";
    case SignType::Plus: return "+";
  }
  return "?";
}

inline SignType sign_type(std::size_t buyer, const Profile& profile, const Outcome& outcome, const Market& market) {
  detail::require_dimensions(profile, market.params);
  Utility u = buyer_utility(market, buyer, outcome);
  if (u.is_bottom() || u.value().ticks < 0) return SignType::Minus;
  return u.value().is_zero() ? SignType::Zero : SignType::Plus;
}

// Transition rules of two-buyer All-or-Nothing dynamics from any start:
// nobody moves twice in a row, a + buyer never moves, a - buyer moves to 0
// without raising the price, a 0 buyer moves to + without lowering it, and a
// (-,+) state is at most one step from the end of a converged trace.
inline TraceReport validate_aon_two_buyer(const Trace& trace, const Market& market) {
  if (market.buyers() != 2) throw std::invalid_argument("validate_aon_two_buyer: needs exactly two buyers");
  TraceReport report;
  auto add = [&](std::size_t step, std::size_t buyer, std::string check, std::string detail) {
    report.violations.push_back({step, buyer, std::move(check), std::move(detail)});
  };
  auto types_at = [&](std::size_t k) {
    return std::pair{sign_type(0, trace.profile_at(k), trace.outcome_at(k), market), sign_type(1, trace.profile_at(k), trace.outcome_at(k), market)};
  };
  if (trace.status != TraceStatus::Converged) add(trace.length(), 0, "converged", std::string("trace ended with status ") + std::string(status_name(trace.status)));

  for (std::size_t k = 1; k <= trace.length(); ++k) {
    const std::size_t d = trace.steps[k - 1].deviator;
    if (k >= 2 && trace.steps[k - 2].deviator == d) add(k, d, "alternation", "buyer best-responded twice in a row");
    auto [b0, b1] = types_at(k - 1);
    auto [a0, a1] = types_at(k);
    SignType before = d == 0 ? b0 : b1;
    SignType after = d == 0 ? a0 : a1;
    const Money p0 = trace.outcome_at(k - 1).price;
    const Money p1 = trace.outcome_at(k).price;
    if (before == SignType::Plus) add(k, d, "plus-moves", "a + buyer deviated");
    if (before == SignType::Minus) {
      if (after != SignType::Zero) add(k, d, "minus-to-zero", std::string("- buyer became ") + std::string(sign_name(after)));
      if (p1 > p0) add(k, d, "minus-price", "- buyer's deviation raised the price");
    }
    if (before == SignType::Zero) {
      if (after != SignType::Plus) add(k, d, "zero-to-plus", std::string("0 buyer became ") + std::string(sign_name(after)));
      if (p1 < p0) add(k, d, "zero-price", "0 buyer's deviation lowered the price");
    }
  }
  for (std::size_t k = 0; k <= trace.length(); ++k) {
    auto [t0, t1] = types_at(k);
    bool mixed = (t0 == SignType::Minus && t1 == SignType::Plus) || (t0 == SignType::Plus && t1 == SignType::Minus);
    if (mixed && trace.length() > k + 1) add(k, 0, "minus-plus", "(-,+) state not resolved within one step");
  }
  return report;
}

}  // namespace envyfree

#endif  // ENVYFREE_DYNAMICS_HPP
