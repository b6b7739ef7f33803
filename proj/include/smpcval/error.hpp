#pragma once

#include <stdexcept>
#include <string>

namespace smpcval {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Matrix/vector shapes that do not fit together.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Invalid, malformed or inconsistent experiment configuration (CLI exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A numerical procedure failed: non-convergence, solver breakdown, loss of
/// interior after tightening (CLI exit code 3).
class NumericalError : public Error {
public:
    using Error::Error;
};

/// An upstream artifact expected on disk is absent (CLI exit code 4).
class MissingArtifactError : public Error {
public:
    using Error::Error;
};

}  // namespace smpcval
