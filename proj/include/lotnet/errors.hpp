#pragma once

#include <stdexcept>
#include <string>

namespace lotnet {

/// Malformed input data: bad files, inconsistent shapes, empty clouds.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public DataError {
public:
    using DataError::DataError;
};

/// Unreadable or version-mismatched model bundle / config document.
class FormatError : public DataError {
public:
    using DataError::DataError;
};

/// NaN/Inf produced or consumed by a numerical routine.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid user-supplied configuration value.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline void require_dims(bool ok, const std::string& what) {
    if (!ok) throw DimensionError("dimension mismatch: " + what);
}

}  // namespace lotnet
