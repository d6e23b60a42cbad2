#pragma once

#include <stdexcept>
#include <string>

namespace aodfill {

// Bad configuration or command-line usage. The CLI maps this to exit code 1.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Missing or malformed input data (files, tables). Also exit code 1.
class InputError : public std::runtime_error {
public:
    explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace aodfill
