#pragma once

#include <stdexcept>
#include <string>

namespace scsa {

// Error taxonomy. The CLI maps these onto exit codes:
// validation errors (shape/config) -> 1, numeric failures -> 2, I/O -> 3.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace scsa
