#pragma once

#include <stdexcept>
#include <string>

namespace kseg {

// Error taxonomy. Callers that need to distinguish failure modes catch the
// specific type; the CLI maps anything derived from Error to a nonzero exit.

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem trouble: missing file, unreadable, unwritable.
class IoError : public Error {
public:
    using Error::Error;
};

// File exists but its contents violate the expected format.
class FormatError : public Error {
public:
    using Error::Error;
};

// Caller passed arguments that violate a precondition.
class ArgumentError : public Error {
public:
    using Error::Error;
};

// Two grids that must share geometry (shape/spacing/origin) do not.
class AlignmentError : public Error {
public:
    using Error::Error;
};

// Tensor shape incompatible with an operation (e.g. indivisible extents).
class ShapeError : public Error {
public:
    using Error::Error;
};

// Coarse stage produced no kidney voxels; callers decide the fallback.
class NoKidneyError : public Error {
public:
    using Error::Error;
};

// Training aborted (empty set, non-finite loss, bad checkpoint, ...).
class TrainingError : public Error {
public:
    using Error::Error;
};

}  // namespace kseg
