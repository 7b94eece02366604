/*
 * Copyright 2026 The mmpc Authors
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

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mmpc {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid scenario or solver configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Rejection sampling could not place a user within its attempt budget.
class GenerationError : public Error {
public:
    GenerationError(int cell, int slot, const std::string& what)
        : Error(what), cell_(cell), slot_(slot) {}

    int cell() const noexcept { return cell_; }
    int slot() const noexcept { return slot_; }

private:
    int cell_;
    int slot_;
};

/// A power allocation violates its box constraints or the activity mask.
class InfeasiblePowerError : public Error {
public:
    InfeasiblePowerError(int cell, int slot, const std::string& what)
        : Error(what), cell_(cell), slot_(slot) {}

    int cell() const noexcept { return cell_; }
    int slot() const noexcept { return slot_; }

private:
    int cell_;
    int slot_;
};

/// Malformed or truncated dataset / prediction file.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::uint64_t byte_offset, std::int64_t record = -1)
        : Error(what), byte_offset_(byte_offset), record_(record) {}

    std::uint64_t byte_offset() const noexcept { return byte_offset_; }
    /// Index of the offending record, or -1 for header-level problems.
    std::int64_t record() const noexcept { return record_; }

private:
    std::uint64_t byte_offset_;
    std::int64_t record_;
};

/// Too many solves hit the iteration cap during dataset generation.
class SolverBudgetError : public Error {
public:
    using Error::Error;
};

/// An internal invariant of an algorithm was violated.
class InternalError : public Error {
public:
    using Error::Error;
};

}  // namespace mmpc
