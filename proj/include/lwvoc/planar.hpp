// Planar (2-phase) vector and matrix utilities shared by all modules.
//
// States are stacked per node: x = [x_1^T, ..., x_n^T]^T with x_k in R^2.
// Scalar matrices extend to this layout as M (x) I2, so every scalar entry
// becomes a 2x2 block m_ij * I2.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>

namespace lwvoc {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// 90-degree rotation generator, J2 = [[0,-1],[1,0]].
inline Eigen::Matrix2d j2_matrix() {
  Eigen::Matrix2d j;
  j << 0.0, -1.0, 1.0, 0.0;
  return j;
}

// R(g) = [[cos g, sin g], [-sin g, cos g]]; R(g)^T = R(-g).
inline Eigen::Matrix2d rotation2(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Eigen::Matrix2d r;
  r << c, s, -s, c;
  return r;
}

// Maps x to the representative in (-pi, pi].
inline double wrap_angle(double x) {
  double y = std::remainder(x, kTwoPi);
  if (y <= -kPi) y += kTwoPi;
  return y;
}

// Kronecker extension M (x) I2: each scalar entry becomes m_ij * I2.
inline Eigen::MatrixXd extend_planar(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(2 * m.rows(), 2 * m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      out(2 * i, 2 * j) = m(i, j);
      out(2 * i + 1, 2 * j + 1) = m(i, j);
    }
  return out;
}

// Block-diagonal stack of J2 (the matrix script-J).
inline Eigen::MatrixXd stacked_j(int blocks) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(2 * blocks, 2 * blocks);
  for (int k = 0; k < blocks; ++k) {
    out(2 * k, 2 * k + 1) = -1.0;
    out(2 * k + 1, 2 * k) = 1.0;
  }
  return out;
}

// Block-diagonal stack of R(angle) (the matrix script-R).
inline Eigen::MatrixXd stacked_rotation(int blocks, double angle) {
  const Eigen::Matrix2d r = rotation2(angle);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(2 * blocks, 2 * blocks);
  for (int k = 0; k < blocks; ++k) out.block<2, 2>(2 * k, 2 * k) = r;
  return out;
}

// In-place blockwise rotation of a stacked planar vector.
// inverse = false applies R(angle), inverse = true applies R(angle)^T.
inline void rotate_stacked(Eigen::VectorXd& v, double angle, bool inverse = false) {
  const double c = std::cos(angle);
  const double s = inverse ? -std::sin(angle) : std::sin(angle);
  for (Eigen::Index k = 0; 2 * k + 1 < v.size(); ++k) {
    const double a = v[2 * k];
    const double b = v[2 * k + 1];
    v[2 * k] = c * a + s * b;
    v[2 * k + 1] = -s * a + c * b;
  }
}

inline Eigen::Vector2d planar_block(const Eigen::VectorXd& v, int k) {
  return v.segment<2>(2 * k);
}

inline double block_amplitude(const Eigen::VectorXd& v, int k) {
  return std::hypot(v[2 * k], v[2 * k + 1]);
}

// Angle of the k-th planar block; returns fallback for the zero vector.
inline double block_angle(const Eigen::VectorXd& v, int k, double fallback = 0.0) {
  const double a = v[2 * k];
  const double b = v[2 * k + 1];
  if (a == 0.0 && b == 0.0) return fallback;
  return std::atan2(b, a);
}

}  // namespace lwvoc
