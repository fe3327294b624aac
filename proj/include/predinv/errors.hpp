#pragma once

#include <stdexcept>
#include <string>

namespace predinv {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad user input: malformed config, out-of-range argument, shape mismatch.
struct ValidationError : Error {
    using Error::Error;
};

// Missing/corrupt dataset files or containers.
struct DataError : Error {
    using Error::Error;
};

// Diverging or misconfigured training runs.
struct TrainingError : Error {
    using Error::Error;
};

// Transport or protocol failures of the prediction service.
struct OracleError : Error {
    using Error::Error;
};

}  // namespace predinv
