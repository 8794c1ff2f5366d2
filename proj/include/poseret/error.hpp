#pragma once

#include <stdexcept>
#include <string>

namespace poseret {

enum class ErrorCategory {
    DegenerateDimensions,
    DegenerateGeometry,
    DegenerateMesh,
    BehindCamera,
    Parse,
    Shape,
    Parameter,
    EmptyInput,
    InsufficientNegatives,
    Configuration,
    Io,
};

/// Stable short name used in CLI error lines ("degenerate-dimensions", ...).
const char* error_slug(ErrorCategory c);

class Error : public std::runtime_error {
public:
    Error(ErrorCategory cat, const std::string& msg)
        : std::runtime_error(std::string(error_slug(cat)) + ": " + msg), cat_(cat) {}

    ErrorCategory category() const { return cat_; }

private:
    ErrorCategory cat_;
};

[[noreturn]] inline void fail(ErrorCategory cat, const std::string& msg) {
    throw Error(cat, msg);
}

} // namespace poseret
