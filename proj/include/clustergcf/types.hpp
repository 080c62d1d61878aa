#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cgcf {

using Real = double;
using Index = std::int64_t;

// Error taxonomy. The CLI maps these onto exit codes:
// usage/config -> 1, data -> 2, numeric -> 3.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidArgumentError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

// Malformed input record; message carries the line number.
struct ParseError : Error {
    using Error::Error;
};

// Empty dataset, isolated node, stuck sampler, bad cache file.
struct DataError : Error {
    using Error::Error;
};

// Non-finite values in kernels or training.
struct NumericError : Error {
    using Error::Error;
};

struct InvalidStateError : Error {
    using Error::Error;
};

// Kernel parallelism cap. Reads CGCF_THREADS once (>=1); falls back to the
// hardware concurrency when unset.
int thread_count();

}  // namespace cgcf
