#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace fpn {

using cplx = std::complex<double>;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

// Rounded value; the reference parameter set (lambda = 1 mm at 300 GHz) uses it.
inline constexpr double kSpeedOfLight = 3.0e8;
inline constexpr double kPi = 3.14159265358979323846;

/// Raised for inputs that violate an operation's preconditions.
class InvalidInput : public std::invalid_argument {
public:
  explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidInput(what);
}

/// Stacks real parts over imaginary parts.
inline Vec stack_real(const CVec& z) {
  Vec out(2 * z.size());
  out.head(z.size()) = z.real();
  out.tail(z.size()) = z.imag();
  return out;
}

inline CVec unstack_real(const Vec& x) {
  require(x.size() % 2 == 0, "unstack_real: odd length");
  const Eigen::Index n = x.size() / 2;
  CVec out(n);
  out.real() = x.head(n);
  out.imag() = x.tail(n);
  return out;
}

}  // namespace fpn
