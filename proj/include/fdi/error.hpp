#ifndef FDI_ERROR_HPP_
#define FDI_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace fdi {

enum class Errc {
  kInvalidArgument,
  kEmptyDataset,
  kSpaceMismatch,
  kIoError,
  kParseError,
  kInfeasibleSeparation,
  kNotBinary,
  kDegenerateP,
  kBadK,
  kBadP,
  kBadNorm,
  kBadXi,
  kEqualMeans,
  kZeroVector,
  kDegenerateBounds,
  kEmptyOverlap,
  kEmptyTraining,
};

inline std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::kInvalidArgument: return "InvalidArgument";
    case Errc::kEmptyDataset: return "EmptyDataset";
    case Errc::kSpaceMismatch: return "SpaceMismatch";
    case Errc::kIoError: return "IoError";
    case Errc::kParseError: return "ParseError";
    case Errc::kInfeasibleSeparation: return "InfeasibleSeparation";
    case Errc::kNotBinary: return "NotBinary";
    case Errc::kDegenerateP: return "DegenerateP";
    case Errc::kBadK: return "BadK";
    case Errc::kBadP: return "BadP";
    case Errc::kBadNorm: return "BadNorm";
    case Errc::kBadXi: return "BadXi";
    case Errc::kEqualMeans: return "EqualMeans";
    case Errc::kZeroVector: return "ZeroVector";
    case Errc::kDegenerateBounds: return "DegenerateBounds";
    case Errc::kEmptyOverlap: return "EmptyOverlap";
    case Errc::kEmptyTraining: return "EmptyTraining";
  }
  return "Unknown";
}

// Every failure raised by the library carries one of the codes above so
// callers (the CLI in particular) can map it onto an exit status.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace fdi

#endif  // FDI_ERROR_HPP_
