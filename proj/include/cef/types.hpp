#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace cef {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using IVec = Eigen::VectorXi;

// Input rejected by a precondition (dimension mismatch, out-of-range value).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A linear system needed by an attack lacks full column rank.
class RankDeficient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// lambda_1 - lambda_2 below the degeneracy threshold.
class DegenerateSpectrum : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Pruning removed every block.
class AllBlocksPruned : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidInput(what);
}

// |a^T b| / (|a| |b|), zero when either vector vanishes.
inline double normalized_projection(const Vec& a, const Vec& b) {
  const double den = a.norm() * b.norm();
  if (den == 0.0) return 0.0;
  const double s = std::abs(a.dot(b)) / den;
  return s > 1.0 ? 1.0 : s;
}

}  // namespace cef
