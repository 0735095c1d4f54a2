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

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "predserve/core/clock.hpp"

namespace predserve::bench {

struct Table {
  std::string name;  // file stem
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row) { rows.push_back(std::move(row)); }
  // RFC 4180 quoting where needed.
  std::string csv() const;
};

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ExperimentReport {
  std::string experiment;
  std::uint64_t seed = 0;
  std::vector<Table> tables;
  // Named scalar results, also written as summary.csv.
  std::map<std::string, double> summary;
  std::vector<Check> checks;

  bool passed() const;
  double value(const std::string& key) const;  // throws NotFound
  void check(std::string name, bool passed, std::string detail);
  // Writes every table plus summary.csv and checks.csv under dir.
  void write(const std::filesystem::path& dir) const;
};

// Nearest-rank percentile, q in [0, 100]. Zero for an empty sample.
double percentile(std::vector<double> values, double q);

std::string fmt_double(double v);

}  // namespace predserve::bench
