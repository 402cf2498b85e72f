#pragma once

#include <stdexcept>
#include <string>

namespace morphbench {

// Bad inputs, malformed files, impossible requests. CLI exit code 2.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite values, degenerate geometry, diverged optimization. CLI exit code 3.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace morphbench
