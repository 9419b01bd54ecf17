#ifndef SCORE_ERROR_HPP
#define SCORE_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace score {

enum class ErrorCode {
  InvalidArgument,
  NonFinite,
  NotPositiveDefinite,
  InvalidParams,
  DimensionMismatch,
  StaleFactorization,
  LabelOutOfRange,
  InsufficientSamples,
  RankOutOfRange,
  SvdFailure,
  NoConvergence,
  RatioInfeasible,
  MalformedFactors,
  BadMagic,
  BadVersion,
  TruncatedPayload,
  ChecksumMismatch,
  SchemaMismatch,
  InvalidSpec,
  InstanceTooLarge,
  MissingClass,
  Io,
};

std::string_view to_string(ErrorCode code);

/// Every failure in the library surfaces as this exception; `code()` names the kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool condition, ErrorCode code, const char* what) {
  if (!condition) fail(code, what);
}

}  // namespace score

#endif  // SCORE_ERROR_HPP
