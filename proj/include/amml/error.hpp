#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace amml {

enum class ErrorCode {
  kParameter = 1,
  kIo,
  kParse,
  kShape,
  kConfig,
  kDegenerateParameter,
  kNonconverged,
  kMissingOracle,
  kRuntime,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// An inner solver ran out of iterations. Carries the best iterate seen so the
// caller can decide whether to continue from it.
class NonconvergedError : public Error {
 public:
  NonconvergedError(const std::string& what, Eigen::VectorXd best, double residual, int node = -1)
      : Error(ErrorCode::kNonconverged, what), best_(std::move(best)), residual_(residual), node_(node) {}

  const Eigen::VectorXd& best() const { return best_; }
  double residual() const { return residual_; }
  int node() const { return node_; }

 private:
  Eigen::VectorXd best_;
  double residual_;
  int node_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool ok, ErrorCode code, const std::string& what) {
  if (!ok) fail(code, what);
}

}  // namespace amml
