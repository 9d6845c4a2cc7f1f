#pragma once

#include <stdexcept>
#include <string>

namespace kwalk {

/// Raised when an argument violates an operation's precondition.
class InvalidParameter : public std::invalid_argument {
public:
    explicit InvalidParameter(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised when a request would need a table larger than the supported limit.
class ResourceError : public std::length_error {
public:
    explicit ResourceError(const std::string& what) : std::length_error(what) {}
};

/// Numerical failure that indicates a construction bug (e.g. a non-PD matrix).
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool condition, const std::string& message) {
    if (!condition) throw InvalidParameter(message);
}

}  // namespace kwalk
