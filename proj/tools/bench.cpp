// Copyright 2026 The predserve Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdio>
#include <string>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "predserve/bench/experiments.hpp"
#include "predserve/core/errors.hpp"

using namespace predserve;

int main(int argc, char** argv) {
  CLI::App cli{"predserve experiment harness"};
  cli.require_subcommand(1);

  auto* list = cli.add_subcommand("list", "list experiments and their parameters");

  auto* run = cli.add_subcommand("run", "run one experiment and write CSV results");
  std::string name;
  std::uint64_t seed = 1;
  std::string out_dir = "bench-results";
  std::string config_path;
  std::string log_level = "warn";
  run->add_option("experiment", name, "experiment name")->required();
  run->add_option("--seed", seed, "random seed");
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--config", config_path, "parameter overrides, read from the [EXPERIMENT] section")
      ->check(CLI::ExistingFile);
  run->add_option("--log-level", log_level, "trace, debug, info, warn or error");

  CLI11_PARSE(cli, argc, argv);

  if (list->parsed()) {
    for (const auto& e : bench::experiments()) {
      fmt::print("{}\n  {}\n", e.name, e.description);
      for (const auto& [key, value] : e.defaults) fmt::print("    {} = {}\n", key, value);
    }
    return 0;
  }

  spdlog::set_level(spdlog::level::from_str(log_level));
  try {
    bench::Params params;
    if (!config_path.empty()) params = bench::load_params(config_path, name);
    const auto report = bench::run_experiment(name, seed, params);
    const auto dir = std::filesystem::path(out_dir) / name;
    report.write(dir);
    for (const auto& [key, value] : report.summary) fmt::print("{} = {}\n", key, bench::fmt_double(value));
    for (const auto& c : report.checks) {
      fmt::print("{} {}: {}\n", c.passed ? "PASS" : "FAIL", c.name, c.detail);
    }
    fmt::print("results written to {}\n", dir.string());
    return report.passed() ? 0 : 1;
  } catch (const ServingError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  }
}
