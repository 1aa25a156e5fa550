#pragma once

#include <stdexcept>
#include <string>

namespace cerase {

/// Base class for all library errors.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller supplied an argument that violates a precondition
/// (shape mismatch, negative threshold, unknown block label, ...).
class invalid_input_error : public error {
public:
    using error::error;
};

/// A serialized artifact is malformed: bad magic, truncated payload,
/// inconsistent manifest, or a CSR invariant violation.
class format_error : public error {
public:
    using error::error;
};

/// A value exceeds a fixed-width field of the on-disk format.
class capacity_error : public error {
public:
    using error::error;
};

/// Numerical failure: ill-conditioned linear system or a non-finite
/// value produced where the contract requires finite results.
class numerical_error : public error {
public:
    using error::error;
};

} // namespace cerase
