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


#include "predserve/frontend/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "predserve/core/errors.hpp"

namespace predserve::frontend {

namespace {

class LineParser {
 public:
  LineParser(std::string_view line, const std::string& source, int lineno)
      : s_(line), source_(source), lineno_(lineno) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError(fmt::format("{}:{}: {}", source_, lineno_, what));
  }

  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }

  bool at_end_or_comment() {
    skip_ws();
    return pos_ >= s_.size() || s_[pos_] == '#';
  }

  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }

  bool consume(char c) {
    skip_ws();
    if (peek() == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  std::string bare_word() {
    skip_ws();
    const auto start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) ||
                                s_[pos_] == '_' || s_[pos_] == '-' || s_[pos_] == '.')) {
      ++pos_;
    }
    return std::string(s_.substr(start, pos_ - start));
  }

  std::string quoted() {
    // Opening quote already consumed.
    std::string out;
    while (pos_ < s_.size()) {
      const char c = s_[pos_++];
      if (c == '"') return out;
      if (c != '\\') {
        out += c;
        continue;
      }
      if (pos_ >= s_.size()) break;
      switch (const char e = s_[pos_++]) {
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        default: fail(fmt::format("unsupported escape '\\{}'", e));
      }
    }
    fail("unterminated string");
  }

  double number() {
    skip_ws();
    const auto start = pos_;
    while (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) ||
                                std::strchr("+-.eE_", s_[pos_]) != nullptr)) {
      ++pos_;
    }
    std::string text(s_.substr(start, pos_ - start));
    text.erase(std::remove(text.begin(), text.end(), '_'), text.end());
    double v = 0;
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    if (!text.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || text.empty()) {
      fail(fmt::format("invalid number '{}'", text));
    }
    return v;
  }

  std::variant<std::string, double> scalar_element() {
    skip_ws();
    if (consume('"')) return quoted();
    return number();
  }

  ConfigValue value() {
    skip_ws();
    ConfigValue v;
    v.line = lineno_;
    if (consume('"')) {
      v.value = quoted();
    } else if (consume('[')) {
      ConfigValue::Array arr;
      if (!consume(']')) {
        do {
          arr.push_back(scalar_element());
        } while (consume(','));
        if (!consume(']')) fail("expected ']' to close the array");
      }
      v.value = std::move(arr);
    } else if (s_.substr(pos_, 4) == "true") {
      pos_ += 4;
      v.value = true;
    } else if (s_.substr(pos_, 5) == "false") {
      pos_ += 5;
      v.value = false;
    } else {
      v.value = number();
    }
    if (!at_end_or_comment()) fail("unexpected text after value");
    return v;
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
  const std::string& source_;
  int lineno_;
};

}  // namespace

std::vector<ConfigSection> parse_config_document(std::string_view text, const std::string& source) {
  std::vector<ConfigSection> sections;
  sections.push_back({"", 0, {}});
  std::set<std::string> seen;
  int lineno = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    start = end + 1;
    ++lineno;
    LineParser p(line, source, lineno);
    if (p.at_end_or_comment()) continue;
    if (p.consume('[')) {
      std::string name = p.bare_word();
      if (name.empty() || !p.consume(']')) p.fail("malformed section header");
      if (!p.at_end_or_comment()) p.fail("unexpected text after section header");
      if (!seen.insert(name).second) p.fail(fmt::format("duplicate section [{}]", name));
      sections.push_back({name, lineno, {}});
      continue;
    }
    std::string key = p.bare_word();
    if (key.empty()) p.fail("expected a key");
    if (!p.consume('=')) p.fail(fmt::format("expected '=' after '{}'", key));
    auto value = p.value();
    auto& entries = sections.back().entries;
    if (entries.count(key) != 0) p.fail(fmt::format("duplicate key '{}'", key));
    entries.emplace(std::move(key), std::move(value));
  }
  if (sections.front().entries.empty()) sections.erase(sections.begin());
  return sections;
}

namespace {

class SectionReader {
 public:
  SectionReader(const ConfigSection& s, const std::string& source) : s_(s), source_(source) {}

  [[noreturn]] void fail_at(int line, const std::string& what) const {
    throw ConfigError(fmt::format("{}:{}: {}", source_, line, what));
  }

  [[noreturn]] void fail_key(const std::string& key, const std::string& what) const {
    const auto it = s_.entries.find(key);
    fail_at(it == s_.entries.end() ? s_.line : it->second.line,
            fmt::format("[{}] {}: {}", s_.name, key, what));
  }

  const ConfigValue* find(const std::string& key) {
    used_.insert(key);
    auto it = s_.entries.find(key);
    return it == s_.entries.end() ? nullptr : &it->second;
  }

  bool has(const std::string& key) const { return s_.entries.count(key) != 0; }

  const ConfigValue& require(const std::string& key) {
    const auto* v = find(key);
    if (v == nullptr) fail_at(s_.line, fmt::format("[{}] is missing required key '{}'", s_.name, key));
    return *v;
  }

  std::optional<std::string> str(const std::string& key) {
    const auto* v = find(key);
    if (v == nullptr) return std::nullopt;
    if (const auto* s = std::get_if<std::string>(&v->value)) return *s;
    fail_key(key, "expected a string");
  }

  std::optional<double> num(const std::string& key) {
    const auto* v = find(key);
    if (v == nullptr) return std::nullopt;
    if (const auto* d = std::get_if<double>(&v->value)) return *d;
    fail_key(key, "expected a number");
  }

  std::optional<bool> boolean(const std::string& key) {
    const auto* v = find(key);
    if (v == nullptr) return std::nullopt;
    if (const auto* b = std::get_if<bool>(&v->value)) return *b;
    fail_key(key, "expected true or false");
  }

  template <typename T>
  std::optional<T> integer(const std::string& key, double lo, double hi) {
    auto v = num(key);
    if (!v) return std::nullopt;
    if (std::floor(*v) != *v || *v < lo || *v > hi) {
      fail_key(key, fmt::format("expected an integer in [{}, {}]", lo, hi));
    }
    return static_cast<T>(*v);
  }

  std::optional<std::vector<std::string>> strings(const std::string& key) {
    const auto* v = find(key);
    if (v == nullptr) return std::nullopt;
    const auto* arr = std::get_if<ConfigValue::Array>(&v->value);
    if (arr == nullptr) fail_key(key, "expected an array of strings");
    std::vector<std::string> out;
    for (const auto& e : *arr) {
      const auto* s = std::get_if<std::string>(&e);
      if (s == nullptr) fail_key(key, "expected an array of strings");
      out.push_back(*s);
    }
    return out;
  }

  void reject_unknown() const {
    for (const auto& [key, v] : s_.entries) {
      if (used_.count(key) == 0) fail_at(v.line, fmt::format("[{}] unknown key '{}'", s_.name, key));
    }
  }

  const ConfigSection& section() const { return s_; }

 private:
  const ConfigSection& s_;
  const std::string& source_;
  std::set<std::string> used_;
};

void read_service(SectionReader& r, ServiceConfig& svc) {
  if (auto addr = r.str("listen_addr")) {
    try {
      svc.listen_addr = rpc::HostPort::parse(*addr);
    } catch (const std::exception& e) {
      r.fail_key("listen_addr", e.what());
    }
  }
  if (auto p = r.integer<std::uint16_t>("container_port", 0, 65535)) svc.container_port = *p;
  if (auto s = r.integer<std::uint64_t>("seed", 0, 9007199254740992.0)) svc.seed = *s;
  if (auto m = r.num("combine_margin_ms")) {
    if (!(*m >= 0)) r.fail_key("combine_margin_ms", "must be >= 0");
    svc.combine_margin = from_millis(*m);
  }
  if (auto q = r.integer<std::size_t>("feedback_queue", 1, 1e9)) svc.feedback_queue = *q;
}

AppConfig read_app(SectionReader& r, const std::string& name) {
  AppConfig app;
  app.name = name;
  r.require("slo_ms");
  const double slo_ms = *r.num("slo_ms");
  if (!(slo_ms > 0)) r.fail_key("slo_ms", "must be > 0");
  app.slo = from_millis(slo_ms);
  if (auto policy = r.str("policy")) {
    if (*policy == "exp3" || *policy == "exp4") {
      app.policy = {*policy, false};
    } else if (policy->rfind("custom:", 0) == 0 && policy->size() > 7) {
      app.policy = {policy->substr(7), true};
    } else {
      r.fail_key("policy", "expected exp3, exp4 or custom:NAME");
    }
  }
  if (auto eta = r.num("eta")) {
    if (!(*eta > 0)) r.fail_key("eta", "must be > 0");
    app.eta = *eta;
  }
  r.require("input_type");
  if (auto t = parse_input_type(*r.str("input_type"))) {
    app.input_type = *t;
  } else {
    r.fail_key("input_type", "expected bytes, ints, floats, doubles or string");
  }
  if (auto d = r.str("default_output")) app.default_output = Output(*d);
  if (auto c = r.num("confidence_threshold")) {
    if (!(*c >= 0 && *c <= 1)) r.fail_key("confidence_threshold", "must be in [0, 1]");
    app.confidence_threshold = *c;
  }
  r.require("models");
  app.candidate_models = *r.strings("models");
  if (app.candidate_models.empty()) r.fail_key("models", "must list at least one model");
  if (auto loss = r.str("loss")) {
    if (*loss == "zero_one") {
      app.loss.kind = LossKind::kZeroOne;
    } else if (*loss == "clipped_absolute") {
      app.loss.kind = LossKind::kClippedAbsolute;
    } else {
      r.fail_key("loss", "expected zero_one or clipped_absolute");
    }
  }
  if (auto scale = r.num("loss_scale")) {
    if (!(*scale > 0)) r.fail_key("loss_scale", "must be > 0");
    app.loss.scale = *scale;
  }
  if (auto kind = r.str("output_kind")) {
    if (*kind == "categorical") {
      app.output_kind = OutputKind::kCategorical;
    } else if (*kind == "scalar") {
      app.output_kind = OutputKind::kScalar;
    } else {
      r.fail_key("output_kind", "expected categorical or scalar");
    }
  }
  if (auto f = r.num("weight_floor")) app.weight_floor = *f;
  if (auto t = r.num("agreement_tolerance")) app.agreement_tolerance = *t;
  if (auto s = r.boolean("straggler_mitigation")) app.straggler_mitigation = *s;
  if (auto b = r.num("blocking_timeout_ms")) {
    if (!(*b > 0)) r.fail_key("blocking_timeout_ms", "must be > 0");
    app.blocking_timeout = from_millis(*b);
  }
  try {
    app.validate();
  } catch (const ConfigError& e) {
    r.fail_at(r.section().line, e.what());
  }
  return app;
}

ModelConfig read_model(SectionReader& r, const std::string& name) {
  ModelConfig m;
  m.name = name;
  if (auto s = r.str("batch_strategy")) {
    auto parsed = model::parse_batch_strategy(*s);
    if (!parsed) r.fail_key("batch_strategy", "expected aimd, quantile or fixed");
    m.batch_strategy = *parsed;
  }
  if (auto d = r.num("batch_delay_ms")) {
    if (!(*d >= 0)) r.fail_key("batch_delay_ms", "must be >= 0");
    m.batch_delay = from_millis(*d);
  }
  if (auto a = r.integer<std::uint32_t>("additive_step", 1, 65536)) m.additive_step = *a;
  if (auto b = r.integer<std::uint32_t>("max_batch_size", 1, model::kMaxBatchCap)) {
    m.max_batch_size = *b;
  }
  if (auto t = r.num("replica_timeout_ms")) {
    if (!(*t > 0)) r.fail_key("replica_timeout_ms", "must be > 0");
    m.replica_timeout = from_millis(*t);
  }
  if (auto t = r.str("input_type")) {
    auto parsed = parse_input_type(*t);
    if (!parsed) r.fail_key("input_type", "expected bytes, ints, floats, doubles or string");
    m.input_type = *parsed;
  }
  return m;
}

}  // namespace

const AppConfig* RuntimeConfig::find_app(std::string_view name) const {
  for (const auto& a : apps) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

const ModelConfig* RuntimeConfig::find_model(std::string_view name) const {
  for (const auto& m : models) {
    if (m.name == name) return &m;
  }
  return nullptr;
}

void finalize_config(RuntimeConfig& config) {
  std::set<std::string> app_names, model_names;
  for (const auto& a : config.apps) {
    a.validate();
    if (!app_names.insert(a.name).second) {
      throw ConfigError(fmt::format("app '{}' declared twice", a.name));
    }
  }
  for (auto& m : config.models) {
    if (!model_names.insert(m.name).second) {
      throw ConfigError(fmt::format("model '{}' declared twice", m.name));
    }
    std::optional<Duration> min_slo;
    for (const auto& a : config.apps) {
      if (std::find(a.candidate_models.begin(), a.candidate_models.end(), m.name) ==
          a.candidate_models.end()) {
        continue;
      }
      min_slo = min_slo ? std::min(*min_slo, a.slo) : a.slo;
    }
    if (min_slo) {
      m.batch_slo = std::chrono::duration_cast<Duration>(*min_slo * kBatchSloFraction);
    }
  }
  for (const auto& a : config.apps) {
    for (const auto& name : a.candidate_models) {
      if (model_names.count(name) == 0) {
        throw ConfigError(fmt::format("app '{}' uses undeclared model '{}'", a.name, name));
      }
    }
  }
}

RuntimeConfig parse_config(std::string_view text, const std::string& source) {
  RuntimeConfig config;
  std::map<std::string, int> model_lines;
  std::map<std::string, std::pair<InputType, std::string>> model_types;  // from apps
  std::set<std::string> explicit_model_type;
  std::map<std::string, int> app_lines;

  for (const auto& section : parse_config_document(text, source)) {
    SectionReader r(section, source);
    const auto dot = section.name.find('.');
    const std::string kind = section.name.substr(0, dot);
    const std::string name = dot == std::string::npos ? "" : section.name.substr(dot + 1);
    if (section.name.empty()) {
      r.fail_at(section.entries.begin()->second.line, "key outside of any section");
    } else if (section.name == "service") {
      read_service(r, config.service);
    } else if (section.name == "cache") {
      if (auto c = r.integer<std::size_t>("capacity", 1, 1e12)) config.cache.capacity = *c;
    } else if (section.name == "selection") {
      if (auto s = r.str("store")) {
        if (*s != "memory" && *s != "file") r.fail_key("store", "expected memory or file");
        config.store.backend = *s;
      }
      if (auto p = r.str("store_path")) config.store.path = *p;
      if (auto m = r.integer<std::size_t>("max_contexts", 1, 1e12)) config.store.max_contexts = *m;
      if (config.store.backend == "file" && config.store.path.empty()) {
        r.fail_at(section.line, "[selection] store = \"file\" needs store_path");
      }
    } else if (kind == "app" && !name.empty()) {
      config.apps.push_back(read_app(r, name));
      app_lines[name] = section.line;
    } else if (kind == "model" && !name.empty()) {
      if (r.has("input_type")) explicit_model_type.insert(name);
      config.models.push_back(read_model(r, name));
      model_lines[name] = section.line;
    } else {
      r.fail_at(section.line, fmt::format("unknown section [{}]", section.name));
    }
    r.reject_unknown();
  }

  for (const auto& app : config.apps) {
    for (const auto& m : app.candidate_models) {
      if (model_lines.count(m) == 0) {
        throw ConfigError(fmt::format("{}:{}: app '{}' uses undeclared model '{}'", source,
                                      app_lines[app.name], app.name, m));
      }
      auto [it, inserted] = model_types.emplace(m, std::make_pair(app.input_type, app.name));
      if (!inserted && it->second.first != app.input_type) {
        throw ConfigError(fmt::format("{}:{}: model '{}' gets {} inputs from app '{}' but {} from '{}'",
                                      source, app_lines[app.name], m,
                                      input_type_name(app.input_type), app.name,
                                      input_type_name(it->second.first), it->second.second));
      }
    }
  }
  for (auto& m : config.models) {
    auto it = model_types.find(m.name);
    if (it == model_types.end()) continue;
    if (explicit_model_type.count(m.name) != 0 && m.input_type != it->second.first) {
      throw ConfigError(fmt::format("{}:{}: model '{}' declares {} inputs but app '{}' sends {}",
                                    source, model_lines[m.name], m.name,
                                    input_type_name(m.input_type), it->second.second,
                                    input_type_name(it->second.first)));
    }
    m.input_type = it->second.first;
  }
  try {
    finalize_config(config);
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}: {}", source, e.what()));
  }
  return config;
}

RuntimeConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read config file '{}'", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

}  // namespace predserve::frontend
