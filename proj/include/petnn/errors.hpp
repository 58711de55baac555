#pragma once

#include <stdexcept>
#include <string>

namespace petnn {

// non-finite values during compute; maps to exit code 3 at the CLI
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// a stated precondition could not be satisfied (e.g. switch-safe resampling
// exhausted); maps to exit code 4 at the CLI
struct PreconditionError : std::runtime_error {
    explicit PreconditionError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace petnn
