#pragma once

#include <stdexcept>
#include <string>

namespace dho {

// Data/config problems map to CLI exit code 3.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeMismatch : DataError {
    using DataError::DataError;
};

struct DimensionMismatch : DataError {
    using DataError::DataError;
};

struct MissingAnchor : DataError {
    using DataError::DataError;
};

struct EmptyImage : DataError {
    using DataError::DataError;
};

struct EmptyList : DataError {
    using DataError::DataError;
};

struct MaskUnavailable : DataError {
    using DataError::DataError;
};

struct ZeroPrompt : DataError {
    using DataError::DataError;
};

struct EmptySelection : DataError {
    using DataError::DataError;
};

struct SpecValidation : DataError {
    using DataError::DataError;
};

struct MetricUndefined : DataError {
    using DataError::DataError;
};

// Numerical failures (e.g. a failed gradient check) map to CLI exit code 4.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace dho
