#pragma once

#include <stdexcept>
#include <string>

namespace ufl {

/// Invalid architecture spec, schedule, or experiment configuration.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A precondition of an operation was violated by the caller.
class ContractError : public std::logic_error {
public:
    explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

/// Malformed serialized stream or data file.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& msg, std::size_t offset)
        : std::runtime_error(msg + " (at byte " + std::to_string(offset) + ")"),
          byte_offset(offset) {}
    explicit ParseError(const std::string& msg) : std::runtime_error(msg), byte_offset(0) {}
    std::size_t byte_offset;
};

/// Non-finite value encountered during numeric computation.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ufl
