// Copyright 2026 The selfdistill Authors.
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

#ifndef SELFDISTILL_ERROR_H_
#define SELFDISTILL_ERROR_H_

#include <stdexcept>
#include <string>

namespace selfdistill {

// Root of every error thrown by the library. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration value or combination (exit code 1).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed input data: bad JSONL, unknown token, length mismatch (exit 2).
class DataError : public Error {
 public:
  using Error::Error;
};

// A violated operation precondition, e.g. wrong checkpoint stage (exit 2).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Filesystem failure (exit 3).
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace selfdistill

#endif  // SELFDISTILL_ERROR_H_
