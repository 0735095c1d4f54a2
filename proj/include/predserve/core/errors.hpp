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

#include <stdexcept>
#include <string>

namespace predserve {

enum class ErrorCode {
  kInvalidArgument,   // malformed request (400)
  kNotFound,          // unknown application (404)
  kUnavailable,       // retryable, e.g. feedback back-pressure (503)
  kModelUnavailable,  // no connected replica for a model
  kProtocol,          // wire protocol violation
  kConnectionClosed,  // peer went away / truncated stream
  kReplicaTimeout,    // replica did not answer in time
  kEncode,            // message could not be encoded
  kConfig,            // invalid configuration
};

const char* error_code_name(ErrorCode code);

class ServingError : public std::runtime_error {
 public:
  ServingError(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

#define PREDSERVE_DEFINE_ERROR(Name, Code)                 \
  class Name : public ServingError {                       \
   public:                                                 \
    explicit Name(const std::string& what)                 \
        : ServingError(ErrorCode::Code, what) {}           \
  }

PREDSERVE_DEFINE_ERROR(InvalidArgument, kInvalidArgument);
PREDSERVE_DEFINE_ERROR(NotFound, kNotFound);
PREDSERVE_DEFINE_ERROR(Unavailable, kUnavailable);
PREDSERVE_DEFINE_ERROR(ModelUnavailable, kModelUnavailable);
PREDSERVE_DEFINE_ERROR(ProtocolError, kProtocol);
PREDSERVE_DEFINE_ERROR(ConnectionClosed, kConnectionClosed);
PREDSERVE_DEFINE_ERROR(ReplicaTimeout, kReplicaTimeout);
PREDSERVE_DEFINE_ERROR(EncodeError, kEncode);
PREDSERVE_DEFINE_ERROR(ConfigError, kConfig);

#undef PREDSERVE_DEFINE_ERROR

}  // namespace predserve
