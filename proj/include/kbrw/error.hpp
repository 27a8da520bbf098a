#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kbrw {

enum class ErrorCode {
  InvalidArgument,
  NonFinite,
  NoBracket,
  Inconclusive,
  CapExceeded,
  DepthExceeded,
  MissingSampler,
  AlphaOutOfScope,
  Config,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so the
/// CLI can map it onto an exit status without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::NoBracket: return "NoBracket";
    case ErrorCode::Inconclusive: return "Inconclusive";
    case ErrorCode::CapExceeded: return "CapExceeded";
    case ErrorCode::DepthExceeded: return "DepthExceeded";
    case ErrorCode::MissingSampler: return "MissingSampler";
    case ErrorCode::AlphaOutOfScope: return "AlphaOutOfScope";
    case ErrorCode::Config: return "Config";
  }
  return "Unknown";
}

inline void require(bool condition, const std::string& what) {
  if (!condition) throw Error(ErrorCode::InvalidArgument, what);
}

}  // namespace kbrw
