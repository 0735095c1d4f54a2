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

#include <bit>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "predserve/core/clock.hpp"

namespace predserve {

static_assert(std::endian::native == std::endian::little,
              "payload bytes are stored in wire (little-endian) order");

using ModelName = std::string;

// Numeric values double as the wire tag in handshakes.
enum class InputType : std::uint32_t {
  kBytes = 0,
  kInts = 1,     // int32
  kFloats = 2,   // IEEE-754 binary32
  kDoubles = 3,  // IEEE-754 binary64
  kString = 4,   // UTF-8 bytes
};

std::size_t element_width(InputType type);
std::string_view input_type_name(InputType type);
std::optional<InputType> parse_input_type(std::string_view name);
std::optional<InputType> input_type_from_tag(std::uint32_t tag);

// A typed, non-empty element sequence. Elements are kept as raw
// little-endian bytes so hashing and wire encoding need no conversion.
class InputPayload {
 public:
  // Throws InvalidArgument when bytes is empty or not a whole number of
  // elements.
  InputPayload(InputType type, std::vector<std::uint8_t> bytes);

  static InputPayload from_bytes(std::span<const std::uint8_t> data);
  static InputPayload from_ints(std::span<const std::int32_t> data);
  static InputPayload from_floats(std::span<const float> data);
  static InputPayload from_doubles(std::span<const double> data);
  static InputPayload from_string(std::string_view text);

  InputType type() const noexcept { return type_; }
  std::span<const std::uint8_t> bytes() const noexcept { return bytes_; }
  std::size_t size() const noexcept { return bytes_.size() / element_width(type_); }

  std::vector<std::int32_t> as_ints() const;
  std::vector<float> as_floats() const;
  std::vector<double> as_doubles() const;
  std::string as_string() const;

  // Numeric elements widened to double (Bytes as 0..255, String as bytes).
  std::vector<double> to_doubles() const;

  // Human-readable rendering: "1,2,3" for numbers, the text for strings.
  std::string render() const;

  // 64-bit FNV-1a over the tag byte followed by the raw element bytes.
  std::uint64_t hash() const noexcept;

  friend bool operator==(const InputPayload&, const InputPayload&) = default;

 private:
  InputType type_;
  std::vector<std::uint8_t> bytes_;
};

std::uint64_t fnv1a_64(std::span<const std::uint8_t> data,
                       std::uint64_t seed = 0xcbf29ce484222325ULL) noexcept;

// A model output. The value is opaque to the serving core; parsed_scalar is
// filled when the whole value parses as a decimal number.
struct Output {
  std::string value;
  std::optional<double> parsed_scalar;

  Output() = default;
  explicit Output(std::string v);

  static Output from_scalar(double x);

  friend bool operator==(const Output& a, const Output& b) {
    return a.value == b.value;
  }
};

bool is_valid_utf8(std::string_view text) noexcept;

// Renders with 17 significant digits so the value round-trips.
std::string format_scalar(double x);

using OutputMap = std::map<ModelName, Output>;

struct Query {
  std::string app_name;
  std::string context_id;
  InputPayload input;
  TimePoint recv_time;
  TimePoint deadline;

  Query(std::string app, std::string context, InputPayload in, TimePoint recv,
        Duration slo);
};

struct Feedback {
  std::string app_name;
  std::string context_id;
  InputPayload input;
  Output label;
};

struct FinalPrediction {
  Output output;
  double confidence = 0.0;
  std::uint32_t models_used = 0;
  std::uint32_t models_missing = 0;
  bool is_default = false;
};

enum class LossKind { kZeroOne, kClippedAbsolute };

struct LossFn {
  LossKind kind = LossKind::kZeroOne;
  double scale = 1.0;  // ClippedAbsolute only
};

// Always in [0,1]. Unparseable scalars under ClippedAbsolute count as total
// disagreement.
double compute_loss(const LossFn& fn, const Output& truth, const Output& pred);

// Categorical outputs are combined by weighted vote, scalar outputs by
// weighted mean.
enum class OutputKind { kCategorical, kScalar };

struct PolicyRef {
  std::string name = "exp3";  // "exp3", "exp4" or a registered custom name
  bool custom = false;
};

struct AppConfig {
  std::string name;
  InputType input_type = InputType::kDoubles;
  Duration slo{milliseconds(20)};
  PolicyRef policy;
  double eta = 0.1;
  Output default_output;
  double confidence_threshold = 0.0;
  std::vector<ModelName> candidate_models;

  LossFn loss;
  OutputKind output_kind = OutputKind::kCategorical;
  // Lower bound on each renormalized weight (sum of weights = k). Zero
  // disables it.
  double weight_floor = 1e-6;
  // Scalar agreement tolerance is this times max(1, |final|).
  double agreement_tolerance = 1e-6;
  // When false, wait for every selected model (up to blocking_timeout)
  // instead of combining at the deadline.
  bool straggler_mitigation = true;
  // Upper bound on the wait when straggler_mitigation is off.
  Duration blocking_timeout{seconds(1)};

  // Throws ConfigError naming the violated invariant.
  void validate() const;
};

}  // namespace predserve
