#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <string>

namespace evlab {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

inline constexpr double kPi = 3.14159265358979323846;

enum class Side { Right, Left };

/// FNV-1a over a byte range; used for matrix and config digests.
inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t digest(const CMatrix& m) {
  return fnv1a(m.data(), sizeof(Complex) * static_cast<std::size_t>(m.size()));
}

inline std::uint64_t digest(const std::string& s) { return fnv1a(s.data(), s.size()); }

}  // namespace evlab
