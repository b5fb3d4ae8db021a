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

// Command-line experiment runner.
//
//   envyfree dynamics   --config run.json [--seed N] [--out DIR] [--format csv|json|both] [--strict]
//   envyfree equilibria --config run.json ...
//   envyfree properties --config run.json ...
//   envyfree experiment <preset> [--seed N] [--runs K] [--out DIR] ...
//   envyfree experiment --list
//
// Exit codes: 0 ok, 1 runtime failure, 2 config error, 3 validator failure
// under --strict.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "envyfree/experiment.hpp"

namespace ex = envyfree::experiment;

namespace {

constexpr int kConfigError = 2;
constexpr int kValidatorFailure = 3;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::string> format;
  bool strict = false;
};

void add_common(CLI::App* cmd, Common& c, bool needs_config) {
  auto* opt = cmd->add_option("--config", c.config, "experiment config (JSON)");
  if (needs_config) opt->required();
  cmd->add_option("--seed", c.seed, "override every seed in the config");
  cmd->add_option("--out", c.out, "output directory (default: the config's output.dir)");
  cmd->add_option("--format", c.format, "csv, json or both (default: the config's output.format)")->check(CLI::IsMember({"csv", "json", "both"}));
  cmd->add_flag("--strict", c.strict, "exit with 3 when a validator fails");
}

ex::OutputFormat format_of(const std::string& f) {
  if (f == "csv") return ex::OutputFormat::Csv;
  if (f == "json") return ex::OutputFormat::Json;
  return ex::OutputFormat::Both;
}

ex::ExperimentConfig load(const Common& c) {
  std::ifstream in(c.config, std::ios::binary);
  if (!in) throw ex::ConfigError("--config", "cannot read " + c.config);
  std::stringstream buf;
  buf << in.rdbuf();
  ex::ExperimentConfig cfg = ex::parse_config_text(buf.str());
  if (c.seed) ex::override_seed(cfg, *c.seed);
  if (!c.out.empty()) cfg.output.dir = c.out;
  if (c.format) cfg.output.format = format_of(*c.format);
  return cfg;
}

int finish(const ex::Artifacts& art, const std::string& dir, bool strict) {
  art.write(dir);
  for (const auto& [rel, content] : art.files) std::cout << (std::filesystem::path(dir) / rel).string() << "\n";
  if (!art.validators_ok) {
    std::cerr << "validator failure\n";
    if (strict) return kValidatorFailure;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Envy-free pricing mechanisms: best-response dynamics and equilibrium lab"};
  app.require_subcommand(1);

  Common dyn, eq, prop, exp;
  auto* dyn_cmd = app.add_subcommand("dynamics", "run best-response dynamics from a config");
  add_common(dyn_cmd, dyn, true);
  auto* eq_cmd = app.add_subcommand("equilibria", "enumerate pure Nash equilibria on the report grid");
  add_common(eq_cmd, eq, true);
  auto* prop_cmd = app.add_subcommand("properties", "sampled mechanism property checks");
  add_common(prop_cmd, prop, true);

  auto* exp_cmd = app.add_subcommand("experiment", "run a named preset");
  std::string preset;
  bool list = false;
  std::optional<std::size_t> runs;
  exp_cmd->add_option("preset", preset, "preset name");
  exp_cmd->add_flag("--list", list, "list presets");
  exp_cmd->add_option("--runs", runs, "number of runs / markets for multi-run presets");
  exp_cmd->add_option("--seed", exp.seed, "override the preset seed");
  exp_cmd->add_option("--out", exp.out, "output directory (default: out/<preset>)");
  exp_cmd->add_option("--format", exp.format, "csv, json or both")->check(CLI::IsMember({"csv", "json", "both"}));
  exp_cmd->add_flag("--strict", exp.strict, "exit with 3 when a validator fails");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (*dyn_cmd) {
      auto cfg = load(dyn);
      return finish(ex::run_experiment(cfg), cfg.output.dir, dyn.strict);
    }
    if (*eq_cmd) {
      auto cfg = load(eq);
      return finish(ex::run_equilibria(cfg), cfg.output.dir, eq.strict);
    }
    if (*prop_cmd) {
      auto cfg = load(prop);
      return finish(ex::run_properties(cfg), cfg.output.dir, prop.strict);
    }
    if (list) {
      for (const auto& p : ex::presets()) std::cout << p.name << "\t" << p.description << "\n";
      return 0;
    }
    if (preset.empty()) throw ex::ConfigError("preset", "missing preset name (try --list)");
    ex::PresetOptions opt;
    opt.seed = exp.seed;
    opt.runs = runs;
    opt.format = format_of(exp.format.value_or("both"));
    const std::string dir = exp.out.empty() ? "out/" + preset : exp.out;
    return finish(ex::run_preset(preset, opt), dir, exp.strict);
  } catch (const ex::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
