// Copyright 2026 the objx authors
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

#ifndef OBJX_ERRORS_HPP
#define OBJX_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace objx {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Inconsistent tensor/signal dimensions.
struct ShapeError : Error {
  using Error::Error;
};

// Values outside their contract (NaN samples, masks outside [0,1], ...).
struct ValidationError : Error {
  using Error::Error;
};

// Missing or malformed files, unreadable inputs. CLI exit code 3.
struct DataError : Error {
  using Error::Error;
};

// Bad command-line usage. CLI exit code 2.
struct UsageError : Error {
  using Error::Error;
};

// Non-finite loss or gradients during training. CLI exit code 4.
struct DivergenceError : Error {
  using Error::Error;
};

}  // namespace objx

#endif  // OBJX_ERRORS_HPP
