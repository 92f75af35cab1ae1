#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace vpc {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = 3.14159265358979323846;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}

  /// Short machine-readable identifier ("domain", "config", ...).
  const std::string& code() const noexcept { return code_; }

private:
  std::string code_;
};

/// Invalid arguments or configuration values.
class InvalidArgument : public Error {
public:
  explicit InvalidArgument(const std::string& what) : Error("invalid-argument", what) {}
};

/// A point left the spatial domain on which fields are known.
class DomainError : public Error {
public:
  explicit DomainError(const std::string& what) : Error("domain", what) {}
};

/// A computed quantity became NaN or infinite.
class NumericError : public Error {
public:
  explicit NumericError(const std::string& what) : Error("numeric", what) {}
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw InvalidArgument(what);
}

inline bool all_finite(const Vec3& a) {
  return std::isfinite(a[0]) && std::isfinite(a[1]) && std::isfinite(a[2]);
}

}  // namespace vpc
