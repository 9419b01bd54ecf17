#include "score/error.hpp"

namespace score {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::StaleFactorization: return "StaleFactorization";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::RankOutOfRange: return "RankOutOfRange";
    case ErrorCode::SvdFailure: return "SvdFailure";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::RatioInfeasible: return "RatioInfeasible";
    case ErrorCode::MalformedFactors: return "MalformedFactors";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::BadVersion: return "BadVersion";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::InstanceTooLarge: return "InstanceTooLarge";
    case ErrorCode::MissingClass: return "MissingClass";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

}  // namespace score
