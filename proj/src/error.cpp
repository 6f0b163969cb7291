#include "ieti/error.hpp"

#include <exception>

namespace ieti {

std::string_view to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::SingularMatrix: return "SingularMatrix";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::InvalidSpace: return "InvalidSpace";
    case ErrorKind::OutOfDomain: return "OutOfDomain";
    case ErrorKind::InconsistentOrientation: return "InconsistentOrientation";
    case ErrorKind::DegenerateEdge: return "DegenerateEdge";
    case ErrorKind::NotBilinear: return "NotBilinear";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::ValidationError: return "ValidationError";
    case ErrorKind::NonManifold: return "NonManifold";
    case ErrorKind::DegenerateQuad: return "DegenerateQuad";
    case ErrorKind::SingularJacobian: return "SingularJacobian";
    case ErrorKind::NotBoundaryPatch: return "NotBoundaryPatch";
    case ErrorKind::GluingSingular: return "GluingSingular";
    case ErrorKind::SingularD2: return "SingularD2";
    case ErrorKind::ComplementMismatch: return "ComplementMismatch";
    case ErrorKind::ComplementIncomplete: return "ComplementIncomplete";
    case ErrorKind::DependentConstraints: return "DependentConstraints";
    case ErrorKind::TooCoarse: return "TooCoarse";
    case ErrorKind::SingularKRR: return "SingularKRR";
    case ErrorKind::SingularCoupling: return "SingularCoupling";
    case ErrorKind::SingularT: return "SingularT";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::ZeroDenominator: return "ZeroDenominator";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
    }
    return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), detail_(message)
{
}

void rethrow_in_stage(std::string_view stage)
{
    try {
        throw;
    } catch (const Error& e) {
        throw Error(e.kind(), "[" + std::string(stage) + "] " + e.detail());
    }
}

}  // namespace ieti
