// Copyright 2026 The PoisonForge Authors
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

#pragma once

#include <stdexcept>
#include <string>

namespace poisonforge {

// Categories map one-to-one onto CLI exit codes.
enum class ErrorKind { config, input, service, invariant };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error(ErrorKind::config, message) {}
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& message) : Error(ErrorKind::input, message) {}
};

class ServiceError : public Error {
 public:
  explicit ServiceError(const std::string& message) : Error(ErrorKind::service, message) {}
};

/// A generator gave up on one example; the poisoner leaves it benign.
class PoisonSkip : public ServiceError {
 public:
  explicit PoisonSkip(const std::string& message) : ServiceError(message) {}
};

/// Raised in offline mode when a request is not in the generation cache.
class OfflineCacheMiss : public ServiceError {
 public:
  explicit OfflineCacheMiss(const std::string& message) : ServiceError(message) {}
};

class InvariantError : public Error {
 public:
  explicit InvariantError(const std::string& message) : Error(ErrorKind::invariant, message) {}
};

inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config:
    case ErrorKind::input:
      return 2;
    case ErrorKind::service:
      return 3;
    case ErrorKind::invariant:
      return 4;
  }
  return 4;
}

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return "config";
    case ErrorKind::input: return "input";
    case ErrorKind::service: return "service";
    case ErrorKind::invariant: return "invariant";
  }
  return "unknown";
}

}  // namespace poisonforge
