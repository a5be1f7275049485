#pragma once

#include <stdexcept>
#include <string>

namespace lcmt {

// base for everything thrown by the library
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// incompatible tensor shapes / dimensions
struct ShapeError : Error {
    using Error::Error;
};

// bad or missing input data (files, corpora, annotations)
struct DataError : Error {
    using Error::Error;
};

// command-line / configuration misuse
struct UsageError : Error {
    using Error::Error;
};

// mutually unsatisfiable decoding constraints
struct ConstraintConflict : Error {
    using Error::Error;
};

}  // namespace lcmt
