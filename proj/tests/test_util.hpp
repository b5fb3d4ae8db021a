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

#ifndef ENVYFREE_TESTS_TEST_UTIL_HPP
#define ENVYFREE_TESTS_TEST_UTIL_HPP

#include <initializer_list>
#include <ostream>
#include <string>
#include <vector>

#include "envyfree/core.hpp"

namespace envyfree::testing {

inline GridSpec grid(const char* base, const char* eps, const char* delta) {
  return GridSpec::from_values(parse_rational(base), parse_rational(eps), parse_rational(delta));
}

inline std::vector<Money> amounts(const GridSpec& g, std::initializer_list<const char*> xs) {
  std::vector<Money> out;
  for (const char* x : xs) out.push_back(g.parse(x));
  return out;
}

inline Market market(const GridSpec& g, std::int64_t m, std::initializer_list<const char*> budgets, std::initializer_list<const char*> values) {
  return Market::make(m, amounts(g, budgets), amounts(g, values), g);
}

inline Profile profile(const GridSpec& g, std::initializer_list<const char*> reports) { return Profile{amounts(g, reports)}; }

// Frequently used instances.

// Two buyers valuing 1.1 with unit budgets and three units: no envy-free
// outcome sells everything.
inline Market nonexistence_market() { return market(grid("0.1", "0.1", "0.1"), 3, {"1", "1"}, {"1.1", "1.1"}); }

// Five buyers, ten units.
inline Market five_buyer_market(const char* delta) {
  return market(grid("0.1", "0.1", delta), 10, {"2", "2", "6", "1", "2"}, {"2", "2", "1", "0.5", "0.5"});
}

// Alice, Bob, Carol with three units.
inline Market three_buyer_market() { return market(grid("0.1", "0.1", "0.1"), 3, {"2.2", "2.2", "1"}, {"1.1", "1.1", "1"}); }

// One unit, v = (k, 1), budgets (k, k), integer grids.
inline Market one_unit_market(std::int64_t k) {
  GridSpec g(Rational(1), 1, 1);
  return Market::make(1, {Money{k}, Money{k}}, {Money{k}, Money{1}}, g);
}

// Two buyers with budgets 1.5, two units, v = (1, 2).
inline Market cycle_market() { return market(grid("0.1", "0.1", "0.1"), 2, {"1.5", "1.5"}, {"1", "2"}); }

}  // namespace envyfree::testing

namespace envyfree {

inline void PrintTo(const Money& m, std::ostream* os) { *os << m.ticks << " ticks"; }

inline void PrintTo(const Outcome& o, std::ostream* os) {
  *os << "{price " << o.price.ticks << " ticks, x =";
  for (auto x : o.allocation) *os << ' ' << x;
  *os << '}';
}

}  // namespace envyfree

#endif  // ENVYFREE_TESTS_TEST_UTIL_HPP
