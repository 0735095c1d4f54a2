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

#include "predserve/core/types.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/spdlog.h>

#include "predserve/core/errors.hpp"

namespace predserve {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kNotFound: return "NotFound";
    case ErrorCode::kUnavailable: return "Unavailable";
    case ErrorCode::kModelUnavailable: return "ModelUnavailable";
    case ErrorCode::kProtocol: return "ProtocolError";
    case ErrorCode::kConnectionClosed: return "ConnectionClosed";
    case ErrorCode::kReplicaTimeout: return "ReplicaTimeout";
    case ErrorCode::kEncode: return "EncodeError";
    case ErrorCode::kConfig: return "ConfigError";
  }
  return "Unknown";
}

std::size_t element_width(InputType type) {
  switch (type) {
    case InputType::kBytes: return 1;
    case InputType::kInts: return 4;
    case InputType::kFloats: return 4;
    case InputType::kDoubles: return 8;
    case InputType::kString: return 1;
  }
  return 1;
}

std::string_view input_type_name(InputType type) {
  switch (type) {
    case InputType::kBytes: return "bytes";
    case InputType::kInts: return "ints";
    case InputType::kFloats: return "floats";
    case InputType::kDoubles: return "doubles";
    case InputType::kString: return "string";
  }
  return "unknown";
}

std::optional<InputType> parse_input_type(std::string_view name) {
  for (auto t : {InputType::kBytes, InputType::kInts, InputType::kFloats,
                 InputType::kDoubles, InputType::kString}) {
    if (input_type_name(t) == name) return t;
  }
  return std::nullopt;
}

std::optional<InputType> input_type_from_tag(std::uint32_t tag) {
  if (tag > static_cast<std::uint32_t>(InputType::kString)) return std::nullopt;
  return static_cast<InputType>(tag);
}

InputPayload::InputPayload(InputType type, std::vector<std::uint8_t> bytes)
    : type_(type), bytes_(std::move(bytes)) {
  if (bytes_.empty()) throw InvalidArgument("input payload must be non-empty");
  if (bytes_.size() % element_width(type_) != 0) {
    throw InvalidArgument(fmt::format(
        "input payload of {} bytes is not a whole number of {} elements",
        bytes_.size(), input_type_name(type_)));
  }
}

namespace {

template <typename T>
std::vector<std::uint8_t> raw_bytes(std::span<const T> data) {
  std::vector<std::uint8_t> out(data.size_bytes());
  if (!out.empty()) std::memcpy(out.data(), data.data(), out.size());
  return out;
}

template <typename T>
std::vector<T> from_raw(std::span<const std::uint8_t> bytes) {
  std::vector<T> out(bytes.size() / sizeof(T));
  if (!out.empty()) std::memcpy(out.data(), bytes.data(), out.size() * sizeof(T));
  return out;
}

}  // namespace

InputPayload InputPayload::from_bytes(std::span<const std::uint8_t> data) {
  return InputPayload(InputType::kBytes, raw_bytes(data));
}
InputPayload InputPayload::from_ints(std::span<const std::int32_t> data) {
  return InputPayload(InputType::kInts, raw_bytes(data));
}
InputPayload InputPayload::from_floats(std::span<const float> data) {
  return InputPayload(InputType::kFloats, raw_bytes(data));
}
InputPayload InputPayload::from_doubles(std::span<const double> data) {
  return InputPayload(InputType::kDoubles, raw_bytes(data));
}
InputPayload InputPayload::from_string(std::string_view text) {
  return InputPayload(InputType::kString,
                      std::vector<std::uint8_t>(text.begin(), text.end()));
}

std::vector<std::int32_t> InputPayload::as_ints() const {
  if (type_ != InputType::kInts) throw InvalidArgument("payload is not ints");
  return from_raw<std::int32_t>(bytes_);
}
std::vector<float> InputPayload::as_floats() const {
  if (type_ != InputType::kFloats) throw InvalidArgument("payload is not floats");
  return from_raw<float>(bytes_);
}
std::vector<double> InputPayload::as_doubles() const {
  if (type_ != InputType::kDoubles) throw InvalidArgument("payload is not doubles");
  return from_raw<double>(bytes_);
}
std::string InputPayload::as_string() const {
  return std::string(bytes_.begin(), bytes_.end());
}

std::vector<double> InputPayload::to_doubles() const {
  switch (type_) {
    case InputType::kInts: {
      auto v = as_ints();
      return {v.begin(), v.end()};
    }
    case InputType::kFloats: {
      auto v = as_floats();
      return {v.begin(), v.end()};
    }
    case InputType::kDoubles:
      return as_doubles();
    case InputType::kBytes:
    case InputType::kString:
      return {bytes_.begin(), bytes_.end()};
  }
  return {};
}

std::string InputPayload::render() const {
  switch (type_) {
    case InputType::kString:
      return as_string();
    case InputType::kInts:
    case InputType::kBytes:
      return fmt::format("{}", fmt::join(to_doubles(), ","));
    case InputType::kFloats:
    case InputType::kDoubles: {
      std::string out;
      for (double x : to_doubles()) {
        if (!out.empty()) out += ',';
        out += format_scalar(x);
      }
      return out;
    }
  }
  return {};
}

std::uint64_t fnv1a_64(std::span<const std::uint8_t> data,
                       std::uint64_t seed) noexcept {
  std::uint64_t h = seed;
  for (std::uint8_t b : data) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t InputPayload::hash() const noexcept {
  const std::uint8_t tag = static_cast<std::uint8_t>(type_);
  return fnv1a_64(bytes_, fnv1a_64(std::span(&tag, 1)));
}

namespace {

std::optional<double> parse_decimal(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double x = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(x)) {
    return std::nullopt;
  }
  return x;
}

}  // namespace

Output::Output(std::string v) : value(std::move(v)), parsed_scalar(parse_decimal(value)) {}

Output Output::from_scalar(double x) { return Output(format_scalar(x)); }

std::string format_scalar(double x) { return fmt::format("{:.17g}", x); }

bool is_valid_utf8(std::string_view text) noexcept {
  std::size_t i = 0;
  const auto n = text.size();
  while (i < n) {
    const auto c = static_cast<unsigned char>(text[i]);
    std::size_t len;
    std::uint32_t cp;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c >> 5) == 0x6) {
      len = 2;
      cp = c & 0x1f;
    } else if ((c >> 4) == 0xe) {
      len = 3;
      cp = c & 0x0f;
    } else if ((c >> 3) == 0x1e) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > n) return false;
    for (std::size_t j = 1; j < len; ++j) {
      const auto cc = static_cast<unsigned char>(text[i + j]);
      if ((cc >> 6) != 0x2) return false;
      cp = (cp << 6) | (cc & 0x3f);
    }
    // Overlong forms, surrogates, out of range.
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) ||
        (len == 4 && (cp < 0x10000 || cp > 0x10ffff)) ||
        (cp >= 0xd800 && cp <= 0xdfff)) {
      return false;
    }
    i += len;
  }
  return true;
}

Query::Query(std::string app, std::string context, InputPayload in,
             TimePoint recv, Duration slo)
    : app_name(std::move(app)),
      context_id(std::move(context)),
      input(std::move(in)),
      recv_time(recv),
      deadline(recv + slo) {
  if (slo <= Duration::zero()) throw InvalidArgument("query slo must be positive");
}

double compute_loss(const LossFn& fn, const Output& truth, const Output& pred) {
  switch (fn.kind) {
    case LossKind::kZeroOne:
      return truth.value == pred.value ? 0.0 : 1.0;
    case LossKind::kClippedAbsolute: {
      if (!truth.parsed_scalar || !pred.parsed_scalar) {
        spdlog::debug("clipped-absolute loss on non-scalar output ('{}' vs '{}')",
                      truth.value, pred.value);
        return 1.0;
      }
      const double d = std::abs(*truth.parsed_scalar - *pred.parsed_scalar);
      return std::min(1.0, d / fn.scale);
    }
  }
  return 1.0;
}

void AppConfig::validate() const {
  auto fail = [&](const std::string& what) {
    throw ConfigError(fmt::format("app '{}': {}", name, what));
  };
  if (name.empty()) fail("name must be non-empty");
  if (slo <= Duration::zero()) fail("slo_ms must be > 0");
  if (!(eta > 0.0) || !std::isfinite(eta)) fail("eta must be > 0");
  if (candidate_models.empty()) fail("models must be non-empty");
  if (!(confidence_threshold >= 0.0 && confidence_threshold <= 1.0)) {
    fail("confidence_threshold must be in [0,1]");
  }
  if (loss.kind == LossKind::kClippedAbsolute && !(loss.scale > 0.0)) {
    fail("loss_scale must be > 0");
  }
  if (!(weight_floor >= 0.0) || weight_floor >= 1.0) {
    fail("weight_floor must be in [0,1)");
  }
  if (!(agreement_tolerance >= 0.0)) fail("agreement_tolerance must be >= 0");
  if (!is_valid_utf8(default_output.value)) fail("default_output must be UTF-8");
  std::vector<ModelName> sorted = candidate_models;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    fail("models contains duplicates");
  }
}

}  // namespace predserve
