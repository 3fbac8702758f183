#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace hetwls {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class ErrorCode {
  InvalidArgument,
  MissingColumn,
  ParseError,
  IoError,
  SingularDesign,
  SingularCovariance,
  InvalidGamma,
  InvalidMoments,
  EmptyGroup,
  DegenerateGroupVariance,
  QuadratureFailure,
  AllFrequenciesSingular,
  InvalidTarget,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// (C + C^T) / 2
inline Matrix symmetrize(const Matrix& c) { return 0.5 * (c + c.transpose()); }

}  // namespace hetwls
