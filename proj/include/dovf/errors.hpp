#pragma once

#include <stdexcept>
#include <string>

namespace dovf {

/// Bad argument or violated precondition of a library call.
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed file content (manifest, matrix, score or model files).
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Structurally valid data that violates a cross-record constraint.
class IntegrityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The SVM solver hit its iteration cap.
class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace dovf
