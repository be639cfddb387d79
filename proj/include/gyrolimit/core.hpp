#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace gyrolimit {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

enum class ErrorCode {
  InvalidArgument,
  ZeroField,
  NotEquilibrium,
  StepSizeUnderflow,
  NotUnit,
  DomainExit,
  DomainViolation,
  FitDegenerate,
  PassingViolated,
  ParseError,
  SchemaError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ZeroField: return "ZeroField";
    case ErrorCode::NotEquilibrium: return "NotEquilibrium";
    case ErrorCode::StepSizeUnderflow: return "StepSizeUnderflow";
    case ErrorCode::NotUnit: return "NotUnit";
    case ErrorCode::DomainExit: return "DomainExit";
    case ErrorCode::DomainViolation: return "DomainViolation";
    case ErrorCode::FitDegenerate: return "FitDegenerate";
    case ErrorCode::PassingViolated: return "PassingViolated";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SchemaError: return "SchemaError";
  }
  return "Unknown";
}

/// Library error. `operation` names the failing routine; `time` carries the
/// simulation time where one is meaningful (exit times, underflow location).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string operation, const std::string& detail,
        std::optional<double> time = std::nullopt)
      : std::runtime_error(std::string(to_string(code)) + " in " + operation +
                           ": " + detail),
        code_(code),
        operation_(std::move(operation)),
        time_(time) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& operation() const noexcept { return operation_; }
  std::optional<double> time() const noexcept { return time_; }

 private:
  ErrorCode code_;
  std::string operation_;
  std::optional<double> time_;
};

inline void require(bool condition, std::string_view operation,
                    std::string_view detail) {
  if (!condition)
    throw Error(ErrorCode::InvalidArgument, std::string(operation),
                std::string(detail));
}

inline bool all_finite(const Vec3& v) { return v.allFinite(); }

inline double cylindrical_radius(const Vec3& x) { return std::hypot(x[0], x[1]); }

/// curl of a vector field from its Jacobian J(i,j) = d_j F_i.
inline Vec3 curl_from_jacobian(const Mat3& J) {
  return {J(2, 1) - J(1, 2), J(0, 2) - J(2, 0), J(1, 0) - J(0, 1)};
}

template <class T>
constexpr T sqr(T v) {
  return v * v;
}

}  // namespace gyrolimit
