#pragma once

#include <stdexcept>
#include <string>

namespace mrd {

// Malformed input text (scene configs, mesh files, weight files).
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Structurally valid input violating a documented invariant; message names the field.
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct InvalidArgument : std::runtime_error {
    explicit InvalidArgument(const std::string& msg) : std::runtime_error(msg) {}
};

struct ResourceLimit : std::runtime_error {
    explicit ResourceLimit(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mrd
