#pragma once

#include <stdexcept>
#include <string>

namespace qfc {

// Bad configuration, schema violation, missing file: CLI exit code 1.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Numeric failure at runtime (divergence, singular matrix): CLI exit code 2.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace qfc
