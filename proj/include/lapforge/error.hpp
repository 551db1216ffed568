// Copyright 2026 The lapforge Authors.
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

#ifndef LAPFORGE_ERROR_HPP_
#define LAPFORGE_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace lapforge {

// Base class for every error raised by the library. The CLI maps the three
// subclasses onto exit codes 1, 2 and 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments, mismatched sizes, violated preconditions.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent files and records.
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, degenerate instances, diverging training.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace lapforge

#endif  // LAPFORGE_ERROR_HPP_
