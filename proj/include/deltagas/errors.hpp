#pragma once

#include <stdexcept>
#include <string>

namespace deltagas {

/// Bad or inconsistent arguments (wrong sizes, out-of-range parameters,
/// unordered configurations, method/sign mismatch).
class invalid_argument : public std::invalid_argument {
public:
    explicit invalid_argument(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Request exceeds a documented size cap (factorial enumeration, particle count).
class resource_limit : public std::runtime_error {
public:
    explicit resource_limit(const std::string& msg) : std::runtime_error(msg) {}
};

/// A computation produced non-finite values or failed to converge.
class numerical_failure : public std::runtime_error {
public:
    explicit numerical_failure(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace deltagas
