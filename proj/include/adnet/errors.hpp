#pragma once

#include <stdexcept>
#include <string>

namespace adnet {

// Base for all library errors. `kind()` is the stable one-word class the CLI
// prints as a prefix ("error: <kind>: <message>").
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

// Tensor extent / rank mismatches.
struct ShapeError : Error {
    explicit ShapeError(const std::string& m) : Error("shape", m) {}
};

// Invalid configuration values (model, attrs, run options).
struct ConfigError : Error {
    explicit ConfigError(const std::string& m) : Error("config", m) {}
};

// Bad input data: labels out of range, unreadable images, empty classes.
struct DataError : Error {
    explicit DataError(const std::string& m) : Error("data", m) {}
};

// Filesystem failures.
struct IoError : Error {
    explicit IoError(const std::string& m) : Error("io", m) {}
};

// Malformed weight files (magic, version, checksum, truncation).
struct FormatError : Error {
    explicit FormatError(const std::string& m) : Error("format", m) {}
};

// Weights that do not match the caller's model configuration.
struct CompatError : Error {
    explicit CompatError(const std::string& m) : Error("compat", m) {}
};

// API misuse: tape/graph mismatch, gradient map out of sync with the store.
struct StateError : Error {
    explicit StateError(const std::string& m) : Error("state", m) {}
};

} // namespace adnet
