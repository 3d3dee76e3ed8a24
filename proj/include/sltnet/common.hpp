/*
 * Copyright 2026 SLTNet Contributors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#ifndef SLTNET_COMMON_HPP
#define SLTNET_COMMON_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sltnet {

// Error taxonomy. The CLI maps user-input problems (argument, validation,
// format, corruption, config) to exit code 1 and everything else to 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class CorruptionError : public Error {
 public:
  using Error::Error;
};

class StateError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

inline void require_arg(bool cond, const std::string& msg) {
  if (!cond) throw ArgumentError(msg);
}

inline void require_valid(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError(msg);
}

}  // namespace sltnet

#endif  // SLTNET_COMMON_HPP
