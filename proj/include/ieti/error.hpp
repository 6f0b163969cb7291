#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ieti {

enum class ErrorKind {
    SingularMatrix,
    NoConvergence,
    InvalidSpace,
    OutOfDomain,
    InconsistentOrientation,
    DegenerateEdge,
    NotBilinear,
    ParseError,
    ValidationError,
    NonManifold,
    DegenerateQuad,
    SingularJacobian,
    NotBoundaryPatch,
    GluingSingular,
    SingularD2,
    ComplementMismatch,
    ComplementIncomplete,
    DependentConstraints,
    TooCoarse,
    SingularKRR,
    SingularCoupling,
    SingularT,
    DimensionMismatch,
    ZeroDenominator,
    SingularSystem,
    ConfigError,
    IoError,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message);

    ErrorKind kind() const { return kind_; }
    const std::string& detail() const { return detail_; }

private:
    ErrorKind kind_;
    std::string detail_;
};

// Wraps an error raised inside a pipeline stage so the stage name travels with it.
[[noreturn]] void rethrow_in_stage(std::string_view stage);

}  // namespace ieti
