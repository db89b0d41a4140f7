// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace csiloc {

// Invalid or inconsistent user configuration (config files, CLI values, recipes).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Geometry that makes a path length vanish or two floors coincide.
class DegenerateGeometryError : public ConfigError {
public:
    explicit DegenerateGeometryError(const std::string& what) : ConfigError(what) {}
};

// Binary file problems. Each kind is distinguishable by callers.
class FormatError : public std::runtime_error {
public:
    enum class Kind { io, bad_magic, version, truncated, geometry_mismatch, corrupt, architecture_mismatch };

    FormatError(Kind kind, const std::string& what, std::optional<std::uint64_t> record = std::nullopt)
        : std::runtime_error(what), kind_(kind), record_(record) {}

    Kind kind() const { return kind_; }
    std::optional<std::uint64_t> record() const { return record_; }

private:
    Kind kind_;
    std::optional<std::uint64_t> record_;
};

// Non-finite loss or gradient during training.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// API misuse that indicates a programming error (e.g. backward on a stale cache).
class ContractViolation : public std::logic_error {
public:
    explicit ContractViolation(const std::string& what) : std::logic_error(what) {}
};

}  // namespace csiloc
