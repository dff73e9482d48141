#pragma once

#include <stdexcept>
#include <string>

namespace hsdop {

/// Base class for all errors raised by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IndexOutOfRange : Error { using Error::Error; };
struct DegenerateSimplex : Error { using Error::Error; };
struct DegreeMismatch : Error { using Error::Error; };
struct ComplexMismatch : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct InvalidParameter : Error { using Error::Error; };
struct InvalidTruncation : Error { using Error::Error; };
struct ConvergenceFailure : Error { using Error::Error; };
struct BandwidthTooLarge : Error { using Error::Error; };
struct DimensionMismatch : Error { using Error::Error; };
struct CflViolation : Error { using Error::Error; };
struct SolverFailure : Error { using Error::Error; };
struct NonConnected : Error { using Error::Error; };
struct SingularSystem : Error { using Error::Error; };
struct ZeroNormTarget : Error { using Error::Error; };
struct NonFiniteLoss : Error { using Error::Error; };
struct HashMismatch : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

} // namespace hsdop
