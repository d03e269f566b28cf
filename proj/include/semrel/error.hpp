// Copyright 2026 The semrel Authors.
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

#include <cstddef>
#include <stdexcept>
#include <string>

namespace semrel {

/// Violated precondition on a numeric argument (empty input, bad temperature, ...).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Operand shapes do not agree.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed configuration document.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// I/O failure or malformed file. `offset` is the byte offset at which
/// decoding stopped, when that is meaningful.
class FormatError : public std::runtime_error {
 public:
  enum class Kind { kIo, kBadMagic, kBadVersion, kTruncated, kDimensionOverflow, kParse };

  FormatError(Kind kind, std::size_t offset, const std::string& what)
      : std::runtime_error(what + " (byte offset " + std::to_string(offset) + ")"),
        kind_(kind),
        offset_(offset) {}

  Kind kind() const noexcept { return kind_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  Kind kind_;
  std::size_t offset_;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw PreconditionError(msg);
}

inline void require_shape(bool cond, const std::string& msg) {
  if (!cond) throw ShapeError(msg);
}

}  // namespace semrel
