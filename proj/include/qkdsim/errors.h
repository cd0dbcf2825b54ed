// Copyright 2026 The qkdsim Authors
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

#ifndef QKDSIM_ERRORS_H
#define QKDSIM_ERRORS_H

#include <stdexcept>
#include <string>

namespace qkdsim {

/// A caller broke a documented precondition (non-normalized state, voltage
/// outside the drive range, ...).
struct ContractError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Invalid or inconsistent configuration values. `line` is the 1-based line
/// of the offending entry when it came from a config file, 0 otherwise.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string &msg, int line = 0)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg), line(line) {
    }
    int line;
};

/// A computed result violated an invariant the module promises.
struct InvariantError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// QBER requested for a basis with no sifted detections.
struct UndefinedQberError : std::domain_error {
    using std::domain_error::domain_error;
};

}  // namespace qkdsim

#endif
