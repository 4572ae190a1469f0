#include "amml/error.hpp"

namespace amml {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParameter: return "parameter error";
    case ErrorCode::kIo: return "I/O error";
    case ErrorCode::kParse: return "parse error";
    case ErrorCode::kShape: return "shape mismatch";
    case ErrorCode::kConfig: return "configuration error";
    case ErrorCode::kDegenerateParameter: return "degenerate parameter";
    case ErrorCode::kNonconverged: return "subproblem did not converge";
    case ErrorCode::kMissingOracle: return "missing ground truth";
    case ErrorCode::kRuntime: return "runtime error";
  }
  return "unknown error";
}

}  // namespace amml
