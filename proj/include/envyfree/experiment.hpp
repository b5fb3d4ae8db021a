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

// JSON experiment configs, trace CSV / summary JSON emission and the named
// experiment presets. Money is always written as exact decimal strings.

#ifndef ENVYFREE_EXPERIMENT_HPP
#define ENVYFREE_EXPERIMENT_HPP

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "envyfree/analysis.hpp"
#include "envyfree/core.hpp"
#include "envyfree/dynamics.hpp"
#include "envyfree/mechanisms.hpp"
#include "envyfree/random.hpp"

namespace envyfree::experiment {

using Json = nlohmann::ordered_json;

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& path, const std::string& message)
      : std::runtime_error(path.empty() ? message : path + ": " + message), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

enum class StartKind { Truth, Explicit, Random };
enum class OutputFormat { Csv, Json, Both };

struct RandomMarketSpec {
  std::size_t n = 2;
  std::int64_t m = 1;
  Money budget_lo, budget_hi;
  Money value_lo, value_hi;
  std::uint64_t seed = 0;
};

struct DynamicsSpec {
  StartKind start = StartKind::Truth;
  Profile explicit_start;
  OrderPolicy order = OrderPolicy::round_robin();
  std::uint64_t seed = 0;
  std::size_t max_steps = 10000;
  std::optional<Money> report_cap;
  std::size_t runs = 1;
};

struct EquilibriaSpec {
  std::optional<Money> report_cap;
  bool only_non_overbidding = true;
  std::uint64_t limit = kDefaultEnumerationLimit;
  std::int64_t gamma = 1;
};

struct PropertiesSpec {
  std::vector<std::string> checks{"price-monotone", "supply-monotone", "non-wasteful", "consistent", "truthful"};
  std::size_t trials = 1000;
  std::uint64_t seed = 0;
};

struct OutputSpec {
  std::string dir = "out";
  OutputFormat format = OutputFormat::Both;
};

struct ExperimentConfig {
  std::string name = "run";
  GridSpec grid;
  std::optional<Market> market;
  std::optional<RandomMarketSpec> random_market;
  MechanismId mechanism = MechanismId::AllOrNothing;
  std::vector<std::size_t> tie_order;
  DynamicsSpec dynamics;
  EquilibriaSpec equilibria;
  PropertiesSpec properties;
  OutputSpec output;

  AnyMechanism make() const { return make_mechanism(mechanism, tie_order); }
};

inline Market draw_market(const RandomMarketSpec& spec, const GridSpec& grid) {
  Rng rng(spec.seed);
  const std::int64_t eps = grid.input_step().ticks;
  std::vector<Money> budgets, values;
  for (std::size_t i = 0; i < spec.n; ++i) {
    budgets.push_back(Money{uniform_int(rng, spec.budget_lo.ticks, spec.budget_hi.ticks)});
    const std::int64_t lo = (spec.value_lo.ticks + eps - 1) / eps;
    const std::int64_t hi = spec.value_hi.ticks / eps;
    values.push_back(Money{eps * uniform_int(rng, lo, hi)});
  }
  return Market::make(spec.m, std::move(budgets), std::move(values), grid);
}

inline Market build_market(const ExperimentConfig& cfg) {
  if (cfg.market) return *cfg.market;
  return draw_market(*cfg.random_market, cfg.grid);
}

// Seed of the k-th independent run derived from a base seed.
inline std::uint64_t run_seed(std::uint64_t base, std::size_t k) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(k) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

namespace detail {

inline std::string join_path(const std::string& base, const std::string& key) { return base.empty() ? key : base + "." + key; }
inline std::string index_path(const std::string& base, std::size_t i) { return base + "[" + std::to_string(i) + "]"; }

inline void reject_unknown(const Json& obj, const std::string& path, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw ConfigError(path, "expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) throw ConfigError(join_path(path, it.key()), "unknown key");
  }
}

inline Rational read_rational(const Json& v, const std::string& path) {
  std::string text;
  if (v.is_string()) text = v.get<std::string>();
  else if (v.is_number()) text = v.dump();
  else throw ConfigError(path, "expected a decimal string or number");
  try {
    return parse_rational(text);
  } catch (const std::exception& e) {
    throw ConfigError(path, e.what());
  }
}

inline Money read_money(const Json& v, const std::string& path, const GridSpec& grid) {
  Rational r = read_rational(v, path);
  auto m = grid.try_to_money(r);
  if (!m) throw ConfigError(path, format_rational(r) + " is not a multiple of base_unit " + format_rational(grid.base_unit()));
  return *m;
}

inline Money read_input_money(const Json& v, const std::string& path, const GridSpec& grid) {
  Money m = read_money(v, path, grid);
  if (!grid.on_input_grid(m))
    throw ConfigError(path, grid.format(m) + " is not on the input grid (epsilon " + grid.format(grid.input_step()) + ")");
  return m;
}

inline std::int64_t read_int(const Json& v, const std::string& path, std::int64_t min) {
  if (!v.is_number_integer()) throw ConfigError(path, "expected an integer");
  std::int64_t k = v.get<std::int64_t>();
  if (k < min) throw ConfigError(path, "must be at least " + std::to_string(min));
  return k;
}

inline std::uint64_t read_seed(const Json& v, const std::string& path) {
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
    throw ConfigError(path, "expected a non-negative integer");
  return v.get<std::uint64_t>();
}

inline std::string read_string(const Json& v, const std::string& path) {
  if (!v.is_string()) throw ConfigError(path, "expected a string");
  return v.get<std::string>();
}

inline bool read_bool(const Json& v, const std::string& path) {
  if (!v.is_boolean()) throw ConfigError(path, "expected true or false");
  return v.get<bool>();
}

inline GridSpec read_grid(const Json& block, const std::string& path) {
  auto get = [&](const char* key, const char* fallback) {
    return block.contains(key) ? read_rational(block[key], join_path(path, key)) : parse_rational(fallback);
  };
  Rational base = get("base_unit", "0.1");
  if (base <= 0) throw ConfigError(join_path(path, "base_unit"), "must be positive");
  Rational eps = get("epsilon", "0.1");
  Rational delta = block.contains("delta") ? read_rational(block["delta"], join_path(path, "delta")) : eps;
  GridSpec probe(base, 1, 1);
  auto steps = [&](const Rational& r, const char* key) {
    auto m = probe.try_to_money(r);
    if (!m) throw ConfigError(join_path(path, key), format_rational(r) + " is not a multiple of base_unit " + format_rational(base));
    if (!m->is_positive()) throw ConfigError(join_path(path, key), "must be positive");
    return m->ticks;
  };
  return GridSpec(base, steps(eps, "epsilon"), steps(delta, "delta"));
}

template <class F>
auto read_list(const Json& v, const std::string& path, F item) {
  if (!v.is_array()) throw ConfigError(path, "expected a list");
  std::vector<decltype(item(v, path))> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(item(v[i], index_path(path, i)));
  return out;
}

inline OrderPolicy read_order(const Json& v, const std::string& path, std::uint64_t seed) {
  std::string s = read_string(v, path);
  if (s == "round-robin") return OrderPolicy::round_robin();
  if (s == "lex-first-improving") return OrderPolicy::lex_first_improving();
  if (s == "random") return OrderPolicy::random_seeded(seed);
  throw ConfigError(path, "unknown order '" + s + "' (round-robin, lex-first-improving, random)");
}

}  // namespace detail

inline std::string_view order_name(const OrderPolicy& p) {
  switch (p.kind) {
    case OrderPolicy::Kind::RoundRobin: return "round-robin";
    case OrderPolicy::Kind::LexFirstImproving: return "lex-first-improving";
    case OrderPolicy::Kind::RandomSeeded: return "random";
  }
  return "unknown";
}

inline ExperimentConfig parse_config(const Json& root) {
  using namespace detail;
  reject_unknown(root, "", {"name", "market", "random_market", "mechanism", "dynamics", "equilibria", "properties", "output"});
  ExperimentConfig cfg;
  if (root.contains("name")) cfg.name = read_string(root["name"], "name");

  const bool has_market = root.contains("market");
  const bool has_random = root.contains("random_market");
  if (has_market == has_random) throw ConfigError("", "exactly one of 'market' and 'random_market' is required");

  if (has_market) {
    const Json& b = root["market"];
    reject_unknown(b, "market", {"supply", "budgets", "valuations", "epsilon", "delta", "base_unit"});
    cfg.grid = read_grid(b, "market");
    for (const char* key : {"supply", "budgets", "valuations"}) {
      if (!b.contains(key)) throw ConfigError(join_path("market", key), "required");
    }
    std::int64_t m = read_int(b["supply"], "market.supply", 1);
    auto budgets = read_list(b["budgets"], "market.budgets", [&](const Json& v, const std::string& p) {
      Money x = read_money(v, p, cfg.grid);
      if (!x.is_positive()) throw ConfigError(p, "budget must be positive");
      return x;
    });
    auto values = read_list(b["valuations"], "market.valuations", [&](const Json& v, const std::string& p) { return read_input_money(v, p, cfg.grid); });
    if (budgets.empty()) throw ConfigError("market.budgets", "market needs at least one buyer");
    if (budgets.size() != values.size()) throw ConfigError("market.valuations", "length differs from market.budgets");
    cfg.market = Market::make(m, std::move(budgets), std::move(values), cfg.grid);
  } else {
    const Json& b = root["random_market"];
    reject_unknown(b, "random_market", {"n", "m", "budget_range", "valuation_range", "seed", "epsilon", "delta", "base_unit"});
    cfg.grid = read_grid(b, "random_market");
    for (const char* key : {"n", "m", "budget_range", "valuation_range"}) {
      if (!b.contains(key)) throw ConfigError(join_path("random_market", key), "required");
    }
    RandomMarketSpec spec;
    spec.n = static_cast<std::size_t>(read_int(b["n"], "random_market.n", 1));
    spec.m = read_int(b["m"], "random_market.m", 1);
    auto range = [&](const char* key) {
      const std::string p = join_path("random_market", key);
      auto r = read_list(b[key], p, [&](const Json& v, const std::string& q) { return read_money(v, q, cfg.grid); });
      if (r.size() != 2 || r[1] < r[0]) throw ConfigError(p, "expected [low, high] with low <= high");
      return r;
    };
    auto br = range("budget_range");
    if (!br[0].is_positive()) throw ConfigError("random_market.budget_range", "budgets must be positive");
    auto vr = range("valuation_range");
    if (vr[0].ticks < 0) throw ConfigError("random_market.valuation_range", "valuations must be non-negative");
    const std::int64_t eps = cfg.grid.input_step().ticks;
    if ((vr[0].ticks + eps - 1) / eps > vr[1].ticks / eps) throw ConfigError("random_market.valuation_range", "contains no input-grid point");
    spec.budget_lo = br[0];
    spec.budget_hi = br[1];
    spec.value_lo = vr[0];
    spec.value_hi = vr[1];
    if (b.contains("seed")) spec.seed = read_seed(b["seed"], "random_market.seed");
    cfg.random_market = spec;
  }
  const std::size_t n = cfg.market ? cfg.market->buyers() : cfg.random_market->n;

  if (root.contains("mechanism")) {
    const Json& b = root["mechanism"];
    reject_unknown(b, "mechanism", {"id", "tie_order"});
    if (!b.contains("id")) throw ConfigError("mechanism.id", "required");
    try {
      cfg.mechanism = parse_mechanism_id(read_string(b["id"], "mechanism.id"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError("mechanism.id", e.what());
    }
    if (b.contains("tie_order")) {
      auto order = read_list(b["tie_order"], "mechanism.tie_order",
                             [](const Json& v, const std::string& p) { return static_cast<std::size_t>(read_int(v, p, 0)); });
      try {
        LowestEfValuation::check_permutation(order, n);
      } catch (const std::invalid_argument& e) {
        throw ConfigError("mechanism.tie_order", e.what());
      }
      cfg.tie_order = std::move(order);
    }
  }
  if (cfg.mechanism == MechanismId::CycleAdversarial && n != 2) throw ConfigError("mechanism.id", "cycle-adversarial needs exactly two buyers");
  if (cfg.mechanism == MechanismId::SecondHighestGreedy && n < 2) throw ConfigError("mechanism.id", "second-highest-greedy needs at least two buyers");

  if (root.contains("dynamics")) {
    const Json& b = root["dynamics"];
    reject_unknown(b, "dynamics", {"start", "order", "seed", "max_steps", "report_cap", "runs"});
    DynamicsSpec& d = cfg.dynamics;
    if (b.contains("seed")) d.seed = read_seed(b["seed"], "dynamics.seed");
    if (b.contains("start")) {
      const Json& s = b["start"];
      if (s.is_string() && s.get<std::string>() == "truth") {
        d.start = StartKind::Truth;
      } else if (s.is_string() && s.get<std::string>() == "random") {
        d.start = StartKind::Random;
      } else if (s.is_array()) {
        d.start = StartKind::Explicit;
        d.explicit_start.reports =
            read_list(s, "dynamics.start", [&](const Json& v, const std::string& p) { return read_input_money(v, p, cfg.grid); });
        if (d.explicit_start.size() != n) throw ConfigError("dynamics.start", "profile length differs from the number of buyers");
      } else {
        throw ConfigError("dynamics.start", "expected \"truth\", \"random\" or a list of reports");
      }
    }
    if (b.contains("order")) d.order = read_order(b["order"], "dynamics.order", d.seed);
    if (b.contains("max_steps")) d.max_steps = static_cast<std::size_t>(read_int(b["max_steps"], "dynamics.max_steps", 0));
    if (b.contains("report_cap")) {
      Money cap = read_input_money(b["report_cap"], "dynamics.report_cap", cfg.grid);
      if (!cap.is_positive()) throw ConfigError("dynamics.report_cap", "must be positive");
      d.report_cap = cap;
    }
    if (b.contains("runs")) d.runs = static_cast<std::size_t>(read_int(b["runs"], "dynamics.runs", 1));
  }

  if (root.contains("equilibria")) {
    const Json& b = root["equilibria"];
    reject_unknown(b, "equilibria", {"report_cap", "only_non_overbidding", "limit", "gamma"});
    EquilibriaSpec& e = cfg.equilibria;
    if (b.contains("report_cap")) e.report_cap = read_input_money(b["report_cap"], "equilibria.report_cap", cfg.grid);
    if (b.contains("only_non_overbidding")) e.only_non_overbidding = read_bool(b["only_non_overbidding"], "equilibria.only_non_overbidding");
    if (b.contains("limit")) e.limit = static_cast<std::uint64_t>(read_int(b["limit"], "equilibria.limit", 1));
    if (b.contains("gamma")) e.gamma = read_int(b["gamma"], "equilibria.gamma", 0);
  }

  if (root.contains("properties")) {
    const Json& b = root["properties"];
    reject_unknown(b, "properties", {"checks", "trials", "seed"});
    PropertiesSpec& p = cfg.properties;
    if (b.contains("checks")) {
      p.checks = read_list(b["checks"], "properties.checks", [](const Json& v, const std::string& q) {
        std::string s = read_string(v, q);
        static const std::vector<std::string> known{"price-monotone", "supply-monotone", "non-wasteful", "consistent", "truthful"};
        if (std::find(known.begin(), known.end(), s) == known.end()) throw ConfigError(q, "unknown property '" + s + "'");
        return s;
      });
    }
    if (b.contains("trials")) p.trials = static_cast<std::size_t>(read_int(b["trials"], "properties.trials", 1));
    if (b.contains("seed")) p.seed = read_seed(b["seed"], "properties.seed");
  }

  if (root.contains("output")) {
    const Json& b = root["output"];
    reject_unknown(b, "output", {"dir", "format"});
    if (b.contains("dir")) cfg.output.dir = read_string(b["dir"], "output.dir");
    if (b.contains("format")) {
      std::string f = read_string(b["format"], "output.format");
      if (f == "csv") cfg.output.format = OutputFormat::Csv;
      else if (f == "json") cfg.output.format = OutputFormat::Json;
      else if (f == "both") cfg.output.format = OutputFormat::Both;
      else throw ConfigError("output.format", "expected csv, json or both");
    }
  }
  return cfg;
}

inline ExperimentConfig parse_config_text(std::string_view text) {
  Json root;
  try {
    root = Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    throw ConfigError("", std::string("invalid JSON at byte ") + std::to_string(e.byte) + ": " + e.what());
  }
  return parse_config(root);
}

// Replaces every seed in the config.
inline void override_seed(ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.dynamics.seed = seed;
  if (cfg.dynamics.order.kind == OrderPolicy::Kind::RandomSeeded) cfg.dynamics.order.seed = seed;
  if (cfg.random_market) cfg.random_market->seed = seed;
  cfg.properties.seed = seed;
}

// ---------------------------------------------------------------------------
// Emission

inline std::string profile_text(const Profile& p, const GridSpec& g) {
  std::string out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i) out += ';';
    out += g.format(p.reports[i]);
  }
  return out;
}

inline std::string allocation_text(const Outcome& o) {
  std::string out;
  for (std::size_t i = 0; i < o.allocation.size(); ++i) {
    if (i) out += ';';
    out += std::to_string(o.allocation[i]);
  }
  return out;
}

inline std::string trace_csv(const Trace& trace, const Market& market) {
  const GridSpec& g = market.params.grid;
  std::ostringstream os;
  os << "step,deviator_index,new_report,price,revenue,welfare,profile\n";
  os << "0,,," << g.format(trace.start_outcome.price) << ',' << g.format(trace.start_revenue) << ',' << g.format(trace.start_welfare) << ','
     << profile_text(trace.start, g) << '\n';
  for (std::size_t k = 0; k < trace.steps.size(); ++k) {
    const TraceStep& s = trace.steps[k];
    os << k + 1 << ',' << s.deviator << ',' << g.format(s.report) << ',' << g.format(s.outcome.price) << ',' << g.format(s.revenue) << ','
       << g.format(s.welfare) << ',' << profile_text(s.profile, g) << '\n';
  }
  return os.str();
}

inline Json money_list(const std::vector<Money>& v, const GridSpec& g) {
  Json a = Json::array();
  for (Money m : v) a.push_back(g.format(m));
  return a;
}

inline Json bound_json(const BoundCheck& c) {
  Json j;
  j["holds"] = c.holds;
  j["vacuous"] = c.vacuous;
  j["lhs"] = format_rational(c.lhs);
  j["rhs"] = format_rational(c.rhs);
  return j;
}

struct RunSummary {
  Json json;
  bool validators_ok = true;
};

// Welfare loss bounded by one budget and revenue by (beta - alpha) / 2: the
// guarantees for truth-started best-response dynamics.
inline RunSummary summarize_run(const AnyMechanism& mech, const Market& market, const Trace& trace) {
  const GridSpec& g = market.params.grid;
  const Outcome truth = mech(truth_profile(market), market.params);
  const Outcome& last = trace.final_outcome();
  const MetricsReport metrics = compute_metrics(market, truth);
  RunSummary s;
  Json& j = s.json;
  j["mechanism"] = std::string(mech.name());
  j["status"] = std::string(status_name(trace.status));
  j["steps"] = trace.length();
  if (trace.status == TraceStatus::CycleDetected) {
    j["cycle_entry"] = trace.cycle_entry;
    j["cycle_length"] = trace.cycle_length;
  } else {
    j["cycle_entry"] = nullptr;
    j["cycle_length"] = nullptr;
  }
  j["final_profile"] = money_list(trace.final_profile().reports, g);
  j["final_price"] = g.format(last.price);
  j["final_allocation"] = last.allocation;
  j["sw_truth"] = g.format(metrics.social_welfare);
  j["sw_final"] = g.format(social_welfare(market.true_valuations, last));
  j["rev_truth"] = g.format(metrics.revenue);
  j["rev_final"] = g.format(revenue(last));
  j["max_ef_revenue"] = g.format(metrics.max_ef_revenue);
  j["max_budget"] = g.format(metrics.max_budget);
  j["alpha"] = metrics.budget_share ? Json(format_rational(*metrics.budget_share)) : Json(nullptr);
  j["beta_instance"] = metrics.beta_instance ? Json(format_rational(*metrics.beta_instance)) : Json(nullptr);
  const bool from_truth = trace.start == truth_profile(market);
  Json bounds;
  if (from_truth && trace.status == TraceStatus::Converged) {
    BoundCheck w = welfare_bound(market, truth, last, 1);
    BoundCheck r = revenue_bound(market, truth, last, 1);
    bounds["welfare_loss"] = bound_json(w);
    bounds["revenue"] = bound_json(r);
    TraceReport tr = validate_trace(trace, market);
    bounds["trace_valid"] = tr.ok();
    s.validators_ok = w.holds && r.holds && tr.ok();
  } else {
    bounds["welfare_loss"] = nullptr;
    bounds["revenue"] = nullptr;
    bounds["trace_valid"] = nullptr;
  }
  j["bounds"] = bounds;
  return s;
}

inline Json market_json(const Market& market) {
  const GridSpec& g = market.params.grid;
  Json j;
  j["supply"] = market.params.supply;
  j["budgets"] = money_list(market.params.budgets, g);
  j["valuations"] = money_list(market.true_valuations, g);
  j["base_unit"] = format_rational(g.base_unit());
  j["epsilon"] = g.format(g.input_step());
  j["delta"] = g.format(g.output_step());
  return j;
}

// Writes through a temporary file and a rename so readers never see a
// half-written artifact.
inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw std::runtime_error("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << content;
    if (!out.flush()) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw std::runtime_error("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

// Collected artifacts; paths are relative to the output directory.
struct Artifacts {
  std::map<std::string, std::string> files;
  bool validators_ok = true;
  Json summary;

  void add(const std::string& rel, std::string content, OutputFormat fmt) {
    const bool csv = rel.size() >= 4 && rel.compare(rel.size() - 4, 4, ".csv") == 0;
    if (csv && fmt == OutputFormat::Json) return;
    if (!csv && fmt == OutputFormat::Csv) return;
    files[rel] = std::move(content);
  }
  void write(const std::filesystem::path& dir) const {
    for (const auto& [rel, content] : files) write_file(dir / rel, content);
  }
};

// Runs `count` independent jobs over a few worker threads. Job k only writes
// slot k, so the result does not depend on scheduling.
template <class T, class F>
std::vector<T> parallel_map(std::size_t count, F job) {
  std::vector<T> out(count);
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    for (std::size_t k = next++; k < count; k = next++) {
      try {
        out[k] = job(k);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, 8);
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < std::min(threads, count); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return out;
}

inline Profile start_profile(const ExperimentConfig& cfg, const Market& market, std::size_t run) {
  switch (cfg.dynamics.start) {
    case StartKind::Truth: return truth_profile(market);
    case StartKind::Explicit: return cfg.dynamics.explicit_start;
    case StartKind::Random: {
      Rng rng(run_seed(cfg.dynamics.seed, run));
      const Money eps = market.params.grid.input_step();
      Money top = eps;
      for (Money v : market.true_valuations) top = std::max(top, v);
      Profile p;
      for (std::size_t i = 0; i < market.buyers(); ++i) p.reports.push_back(random_report(rng, market.params.grid, eps, top));
      return p;
    }
  }
  return truth_profile(market);
}

struct RunResult {
  Trace trace;
  RunSummary summary;
  std::string csv;
};

inline RunResult run_once(const ExperimentConfig& cfg, const Market& market, std::size_t run) {
  const AnyMechanism mech = cfg.make();
  OrderPolicy order = cfg.dynamics.order;
  if (order.kind == OrderPolicy::Kind::RandomSeeded) order.seed = run_seed(order.seed, run);
  RunResult r;
  r.trace = run_dynamics(mech, market, start_profile(cfg, market, run), order, cfg.dynamics.max_steps, cfg.dynamics.report_cap);
  r.summary = summarize_run(mech, market, r.trace);
  r.csv = trace_csv(r.trace, market);
  return r;
}

inline std::string run_label(std::size_t k, std::size_t count) {
  std::string digits = std::to_string(count > 0 ? count - 1 : 0);
  std::string s = std::to_string(k);
  return "run-" + std::string(digits.size() > s.size() ? digits.size() - s.size() : 0, '0') + s;
}

// Dynamics block of a config: one run writes trace.csv and summary.json,
// several runs write runs/run-K.{csv,json} plus an aggregate summary.json.
inline Artifacts run_experiment(const ExperimentConfig& cfg) {
  const Market market = build_market(cfg);
  const std::size_t runs = cfg.dynamics.runs;
  auto results = parallel_map<RunResult>(runs, [&](std::size_t k) { return run_once(cfg, market, k); });
  Artifacts art;
  const OutputFormat fmt = cfg.output.format;
  if (runs == 1) {
    Json s = results[0].summary.json;
    art.add("trace.csv", results[0].csv, fmt);
    art.summary = s;
    art.add("summary.json", dump(s), fmt);
    art.validators_ok = results[0].summary.validators_ok;
    return art;
  }
  Json agg;
  agg["name"] = cfg.name;
  agg["mechanism"] = std::string(mechanism_name(cfg.mechanism));
  agg["market"] = market_json(market);
  agg["runs"] = runs;
  std::size_t converged = 0, cycles = 0, limits = 0, max_steps = 0;
  Json per_run = Json::array();
  for (std::size_t k = 0; k < runs; ++k) {
    const RunResult& r = results[k];
    const std::string label = run_label(k, runs);
    art.add("runs/" + label + ".csv", r.csv, fmt);
    art.add("runs/" + label + ".json", dump(r.summary.json), fmt);
    art.validators_ok = art.validators_ok && r.summary.validators_ok;
    converged += r.trace.status == TraceStatus::Converged;
    cycles += r.trace.status == TraceStatus::CycleDetected;
    limits += r.trace.status == TraceStatus::StepLimit;
    max_steps = std::max(max_steps, r.trace.length());
    Json row;
    row["run"] = label;
    row["status"] = std::string(status_name(r.trace.status));
    row["steps"] = r.trace.length();
    row["final_price"] = market.params.grid.format(r.trace.final_outcome().price);
    per_run.push_back(row);
  }
  agg["converged"] = converged;
  agg["cycles"] = cycles;
  agg["step_limit"] = limits;
  agg["max_steps"] = max_steps;
  agg["per_run"] = per_run;
  art.summary = agg;
  art.add("summary.json", dump(agg), fmt);
  return art;
}

// Equilibria block: every pure Nash equilibrium on the report grid.
inline Artifacts run_equilibria(const ExperimentConfig& cfg) {
  const Market market = build_market(cfg);
  const AnyMechanism mech = cfg.make();
  const GridSpec& g = market.params.grid;
  Money cap = cfg.equilibria.report_cap.value_or(default_report_cap(market, truth_profile(market)));
  auto eqs = enumerate_equilibria(mech, market, cap, cfg.equilibria.only_non_overbidding, cfg.equilibria.limit);
  const Outcome truth = mech(truth_profile(market), market.params);
  Artifacts art;
  std::ostringstream csv;
  csv << "profile,price,allocation,is_overbidding,welfare,revenue,welfare_bound,revenue_bound\n";
  Json list = Json::array();
  for (const auto& e : eqs) {
    BoundCheck w = welfare_bound(market, truth, e.outcome, cfg.equilibria.gamma);
    BoundCheck r = revenue_bound(market, truth, e.outcome, cfg.equilibria.gamma);
    art.validators_ok = art.validators_ok && w.holds && r.holds;
    csv << profile_text(e.profile, g) << ',' << g.format(e.outcome.price) << ',' << allocation_text(e.outcome) << ',' << (e.is_overbidding ? 1 : 0)
        << ',' << g.format(e.social_welfare) << ',' << g.format(e.revenue) << ',' << (w.holds ? "holds" : "violated") << ','
        << (r.vacuous ? "vacuous" : r.holds ? "holds" : "violated") << '\n';
    Json j;
    j["profile"] = money_list(e.profile.reports, g);
    j["price"] = g.format(e.outcome.price);
    j["allocation"] = e.outcome.allocation;
    j["is_overbidding"] = e.is_overbidding;
    j["welfare"] = g.format(e.social_welfare);
    j["revenue"] = g.format(e.revenue);
    j["welfare_bound"] = bound_json(w);
    j["revenue_bound"] = bound_json(r);
    list.push_back(j);
  }
  Json s;
  s["mechanism"] = std::string(mech.name());
  s["market"] = market_json(market);
  s["report_cap"] = g.format(cap);
  s["only_non_overbidding"] = cfg.equilibria.only_non_overbidding;
  s["gamma"] = cfg.equilibria.gamma;
  s["count"] = eqs.size();
  s["equilibria"] = list;
  art.summary = s;
  art.add("equilibria.csv", csv.str(), cfg.output.format);
  art.add("equilibria.json", dump(s), cfg.output.format);
  return art;
}

inline Json property_json(const PropertyReport& r) {
  Json j;
  j["property"] = r.property;
  j["verdict"] = r.holds ? "holds" : "violated";
  j["samples"] = r.samples;
  j["seed"] = r.seed;
  if (r.witness) {
    const GridSpec& g = r.witness->market.params.grid;
    Json w;
    w["market"] = market_json(r.witness->market);
    w["first"] = money_list(r.witness->first.reports, g);
    w["second"] = money_list(r.witness->second.reports, g);
    w["buyer"] = r.witness->buyer;
    w["detail"] = r.witness->detail;
    j["witness"] = w;
  } else {
    j["witness"] = nullptr;
  }
  return j;
}

template <Mechanism M>
PropertyReport run_property(const std::string& name, const M& mech, const MarketSource& src, std::size_t trials, std::uint64_t seed) {
  if (name == "price-monotone") return check_price_monotone(mech, src, trials, seed);
  if (name == "supply-monotone") return check_supply_monotone(mech, src, trials, seed);
  if (name == "non-wasteful") return check_non_wasteful(mech, src, trials, seed);
  if (name == "consistent") return check_consistent(mech, src, trials, seed);
  if (name == "truthful") return check_truthful(mech, src, trials, seed);
  throw std::invalid_argument("unknown property " + name);
}

// Properties block. With an explicit market only the profiles are sampled;
// otherwise markets come from the default sampler.
inline Artifacts run_properties(const ExperimentConfig& cfg) {
  const AnyMechanism mech = cfg.make();
  MarketSource src;
  if (cfg.market) {
    Market fixed = *cfg.market;
    src = [fixed](Rng&) { return fixed; };
  } else {
    src = MarketSampler{};
  }
  Json list = Json::array();
  for (const std::string& name : cfg.properties.checks) list.push_back(property_json(run_property(name, mech, src, cfg.properties.trials, cfg.properties.seed)));
  Json s;
  s["mechanism"] = std::string(mech.name());
  s["trials"] = cfg.properties.trials;
  s["properties"] = list;
  Artifacts art;
  art.summary = s;
  art.add("properties.json", dump(s), cfg.output.format);
  return art;
}

// ---------------------------------------------------------------------------
// Presets

struct PresetOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> runs;  // shrinks multi-run presets
  OutputFormat format = OutputFormat::Both;
};

struct Preset {
  std::string name;
  std::string description;
  Json defaults;
};

inline const std::vector<Preset>& presets() {
  static const std::vector<Preset> kPresets = [] {
    std::vector<Preset> p;
    p.push_back({"figure-convergence",
                 "All-or-Nothing dynamics from 100 random start profiles; n=25, m=20, budgets U[1,125], valuations on the grid in [0.1,10]",
                 Json::parse(R"({"name":"figure-convergence",
                   "random_market":{"n":25,"m":20,"budget_range":["1","125"],"valuation_range":["0.1","10"],"seed":2026,
                                    "base_unit":"0.1","epsilon":"0.1","delta":"0.1"},
                   "mechanism":{"id":"all-or-nothing"},
                   "dynamics":{"start":"random","order":"round-robin","seed":1,"max_steps":2000,"runs":100}})")});
    p.push_back({"cycle-demo", "Cycle-Adversarial best responses from (0.1,0.3) revisit the start after four steps",
                 Json::parse(R"({"name":"cycle-demo",
                   "market":{"supply":2,"budgets":["1.5","1.5"],"valuations":["1","2"],"base_unit":"0.1","epsilon":"0.1","delta":"0.1"},
                   "mechanism":{"id":"cycle-adversarial"},
                   "dynamics":{"start":["0.1","0.3"],"order":"lex-first-improving","max_steps":100,"report_cap":"3"}})")});
    p.push_back({"lower-bound-chain", "Almost-Top truth-started chain length for eps in {0.1, 0.05, 0.02, 0.01}",
                 Json::parse(R"({"epsilons":["0.1","0.05","0.02","0.01"],"supply":200,"base_unit":"0.01"})")});
    p.push_back({"bad-revenue", "Max-Revenue with eps=1/4 on integer grids: truth revenue 4, equilibrium revenue 1",
                 Json::parse(R"({"name":"bad-revenue",
                   "market":{"supply":1,"budgets":["4","4"],"valuations":["4","1"],"base_unit":"1","epsilon":"1","delta":"1"},
                   "mechanism":{"id":"max-revenue"},
                   "dynamics":{"start":"truth","order":"round-robin","max_steps":100}})")});
    p.push_back({"aon-two-buyer-convergence", "All-or-Nothing, two buyers, random markets and random starts, 1000 seeds",
                 Json::parse(R"({"runs":1000,"seed":5})")});
    p.push_back({"theorem-validation", "500 random small markets x 6 mechanisms, truth-started dynamics checked against every guarantee",
                 Json::parse(R"({"markets":500,"seed":11})")});
    return p;
  }();
  return kPresets;
}

inline const Preset& find_preset(std::string_view name) {
  for (const Preset& p : presets()) {
    if (p.name == name) return p;
  }
  throw ConfigError("preset", "unknown preset '" + std::string(name) + "'");
}

// v = (1 + eps, 1), B = (1, 1) on an eps grid.
inline Market chain_market(const Rational& base, const Rational& eps, std::int64_t supply) {
  GridSpec g = GridSpec::from_values(base, eps, eps);
  Money one = g.to_money(Rational(1));
  return Market::make(supply, {one, one}, {one + g.input_step(), one}, g);
}

inline Artifacts run_chain_preset(const Json& d, const PresetOptions& opt) {
  const Rational base = parse_rational(d["base_unit"].get<std::string>());
  const std::int64_t supply = d["supply"].get<std::int64_t>();
  std::vector<Rational> eps;
  for (const auto& e : d["epsilons"]) eps.push_back(parse_rational(e.get<std::string>()));
  const AnyMechanism mech = make_mechanism(MechanismId::AlmostTop);
  auto results = parallel_map<RunResult>(eps.size(), [&](std::size_t k) {
    Market market = chain_market(base, eps[k], supply);
    RunResult r;
    r.trace = run_dynamics(mech, market, truth_profile(market), OrderPolicy::round_robin(), 100000);
    r.summary = summarize_run(mech, market, r.trace);
    r.csv = trace_csv(r.trace, market);
    return r;
  });
  Artifacts art;
  Json agg;
  agg["name"] = "lower-bound-chain";
  agg["mechanism"] = "almost-top";
  Json rows = Json::array();
  for (std::size_t k = 0; k < eps.size(); ++k) {
    const std::string label = "eps-" + format_rational(eps[k]);
    art.add("runs/" + label + ".csv", results[k].csv, opt.format);
    art.add("runs/" + label + ".json", dump(results[k].summary.json), opt.format);
    art.validators_ok = art.validators_ok && results[k].summary.validators_ok;
    Json row;
    row["epsilon"] = format_rational(eps[k]);
    row["inverse_epsilon"] = format_rational(1 / eps[k]);
    row["status"] = std::string(status_name(results[k].trace.status));
    row["chain_length"] = results[k].trace.length();
    rows.push_back(row);
  }
  agg["chains"] = rows;
  art.summary = agg;
  art.add("summary.json", dump(agg), opt.format);
  return art;
}

inline MarketSampler two_buyer_sampler() {
  MarketSampler s;
  s.min_buyers = 2;
  s.max_buyers = 2;
  return s;
}

struct TwoBuyerRun {
  Market market;
  Trace trace;
  TraceReport report;
};

inline TwoBuyerRun two_buyer_run(std::uint64_t seed) {
  Rng rng(seed);
  TwoBuyerRun r{two_buyer_sampler()(rng), {}, {}};
  Profile start;
  const Money eps = r.market.params.grid.input_step();
  const Money cap = sample_cap(r.market);
  for (std::size_t i = 0; i < 2; ++i) start.reports.push_back(random_report(rng, r.market.params.grid, eps, cap));
  r.trace = run_dynamics(AllOrNothing{}, r.market, start, OrderPolicy::round_robin(), 10000);
  r.report = validate_aon_two_buyer(r.trace, r.market);
  return r;
}

inline Artifacts run_two_buyer_preset(const Json& d, const PresetOptions& opt) {
  const std::size_t runs = opt.runs.value_or(d["runs"].get<std::size_t>());
  const std::uint64_t seed = opt.seed.value_or(d["seed"].get<std::uint64_t>());
  const AnyMechanism mech = make_mechanism(MechanismId::AllOrNothing);
  struct Out {
    std::string csv, json;
    bool converged = false, valid = false;
  };
  auto results = parallel_map<Out>(runs, [&](std::size_t k) {
    TwoBuyerRun r = two_buyer_run(run_seed(seed, k));
    RunSummary s = summarize_run(mech, r.market, r.trace);
    s.json["market"] = market_json(r.market);
    s.json["start_profile"] = money_list(r.trace.start.reports, r.market.params.grid);
    s.json["state_machine_valid"] = r.report.ok();
    s.json["state_machine_violations"] = r.report.violations.size();
    return Out{trace_csv(r.trace, r.market), dump(s.json), r.trace.status == TraceStatus::Converged, r.report.ok()};
  });
  Artifacts art;
  std::size_t converged = 0, valid = 0;
  for (std::size_t k = 0; k < runs; ++k) {
    const std::string label = run_label(k, runs);
    art.add("runs/" + label + ".csv", results[k].csv, opt.format);
    art.add("runs/" + label + ".json", results[k].json, opt.format);
    converged += results[k].converged;
    valid += results[k].valid;
  }
  art.validators_ok = valid == runs;
  Json agg;
  agg["name"] = "aon-two-buyer-convergence";
  agg["runs"] = runs;
  agg["seed"] = seed;
  agg["converged"] = converged;
  agg["state_machine_valid"] = valid;
  art.summary = agg;
  art.add("summary.json", dump(agg), opt.format);
  return art;
}

struct TheoremRun {
  MechanismId mechanism = MechanismId::AllOrNothing;
  std::size_t market_index = 0;
  std::size_t buyers = 0;
  TraceStatus status = TraceStatus::StepLimit;
  std::size_t steps = 0;
  TraceReport trace_report;
  BoundCheck welfare;
  BoundCheck revenue;
};

inline TheoremRun theorem_run(MechanismId id, const Market& market, std::size_t index) {
  const AnyMechanism mech = make_mechanism(id);
  TheoremRun r;
  r.mechanism = id;
  r.market_index = index;
  r.buyers = market.buyers();
  Trace t = run_dynamics(mech, market, truth_profile(market), OrderPolicy::round_robin(), 10000);
  r.status = t.status;
  r.steps = t.length();
  r.trace_report = validate_trace(t, market);
  const Outcome truth = mech(truth_profile(market), market.params);
  r.welfare = welfare_bound(market, truth, t.final_outcome(), 1);
  r.revenue = revenue_bound(market, truth, t.final_outcome(), 1);
  return r;
}

inline std::vector<Market> theorem_markets(std::size_t count, std::uint64_t seed) {
  std::vector<Market> out;
  MarketSampler sampler;
  for (std::size_t k = 0; k < count; ++k) {
    Rng rng(run_seed(seed, k));
    out.push_back(sampler(rng));
  }
  return out;
}

inline std::vector<TheoremRun> theorem_runs(const std::vector<Market>& markets) {
  const std::size_t per = kGeneralMechanisms.size();
  return parallel_map<TheoremRun>(markets.size() * per, [&](std::size_t k) { return theorem_run(kGeneralMechanisms[k % per], markets[k / per], k / per); });
}

inline Artifacts run_theorem_preset(const Json& d, const PresetOptions& opt) {
  const std::size_t count = opt.runs.value_or(d["markets"].get<std::size_t>());
  const std::uint64_t seed = opt.seed.value_or(d["seed"].get<std::uint64_t>());
  const auto markets = theorem_markets(count, seed);
  const auto runs = theorem_runs(markets);
  std::ostringstream csv;
  csv << "market,mechanism,buyers,status,steps,trace_valid,welfare_bound,revenue_bound\n";
  std::map<std::string, Json> per_mech;
  Artifacts art;
  for (const TheoremRun& r : runs) {
    const std::string name(mechanism_name(r.mechanism));
    const std::string rb = r.revenue.vacuous ? "vacuous" : r.revenue.holds ? "holds" : "violated";
    csv << r.market_index << ',' << name << ',' << r.buyers << ',' << status_name(r.status) << ',' << r.steps << ',' << (r.trace_report.ok() ? 1 : 0) << ','
        << (r.welfare.holds ? "holds" : "violated") << ',' << rb << '\n';
    Json& m = per_mech[name];
    if (m.is_null()) {
      m["runs"] = 0;
      m["converged"] = 0;
      m["trace_violations"] = 0;
      m["welfare_violations"] = 0;
      m["revenue_violations"] = 0;
      m["revenue_vacuous"] = 0;
      m["max_steps"] = 0;
    }
    m["runs"] = m["runs"].get<std::size_t>() + 1;
    m["converged"] = m["converged"].get<std::size_t>() + (r.status == TraceStatus::Converged);
    m["trace_violations"] = m["trace_violations"].get<std::size_t>() + r.trace_report.violations.size();
    m["welfare_violations"] = m["welfare_violations"].get<std::size_t>() + !r.welfare.holds;
    m["revenue_violations"] = m["revenue_violations"].get<std::size_t>() + !r.revenue.holds;
    m["revenue_vacuous"] = m["revenue_vacuous"].get<std::size_t>() + r.revenue.vacuous;
    m["max_steps"] = std::max(m["max_steps"].get<std::size_t>(), r.steps);
    art.validators_ok = art.validators_ok && r.status == TraceStatus::Converged && r.trace_report.ok() && r.welfare.holds && r.revenue.holds;
  }
  Json agg;
  agg["name"] = "theorem-validation";
  agg["markets"] = count;
  agg["seed"] = seed;
  Json mechs;
  for (MechanismId id : kGeneralMechanisms) mechs[std::string(mechanism_name(id))] = per_mech[std::string(mechanism_name(id))];
  agg["mechanisms"] = mechs;
  art.summary = agg;
  art.add("runs.csv", csv.str(), opt.format);
  art.add("summary.json", dump(agg), opt.format);
  return art;
}

inline Artifacts run_preset(std::string_view name, const PresetOptions& opt = {}) {
  const Preset& p = find_preset(name);
  if (p.name == "lower-bound-chain") return run_chain_preset(p.defaults, opt);
  if (p.name == "aon-two-buyer-convergence") return run_two_buyer_preset(p.defaults, opt);
  if (p.name == "theorem-validation") return run_theorem_preset(p.defaults, opt);
  ExperimentConfig cfg = parse_config(p.defaults);
  if (opt.seed) override_seed(cfg, *opt.seed);
  if (opt.runs && cfg.dynamics.runs > 1) cfg.dynamics.runs = *opt.runs;
  cfg.output.format = opt.format;
  return run_experiment(cfg);
}

}  // namespace envyfree::experiment

#endif  // ENVYFREE_EXPERIMENT_HPP
