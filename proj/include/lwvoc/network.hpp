// Electrical network description: graph incidence, per-node and per-edge
// impedance blocks, and the reduced network impedance
// L = Z_G + B Z_O^{-1} B^T.

#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <stdexcept>
#include <string>
#include <vector>

#include "lwvoc/planar.hpp"

namespace lwvoc {

struct NetworkEdge {
  int from = 0;              // 1-based node indices
  int to = 0;
  double resistance = 0.0;   // R_O, ohm
  double inductance = 0.0;   // L_O, henry
  double shunt_capacitance = 0.0;  // C_O, farad; already lumped into node C
};

struct NetworkSpec {
  int node_count = 0;
  std::vector<NetworkEdge> edges;
  std::vector<double> capacitance;  // per node, farad (output + line shunt)
  std::vector<double> conductance;  // per node, siemens

  int edge_count() const { return static_cast<int>(edges.size()); }

  void validate() const {
    if (node_count < 1) throw std::invalid_argument("node count must be at least 1");
    if (static_cast<int>(capacitance.size()) != node_count ||
        static_cast<int>(conductance.size()) != node_count)
      throw std::invalid_argument("per-node parameter count does not match node count");
    for (int k = 0; k < node_count; ++k) {
      if (!(capacitance[k] > 0.0)) throw std::invalid_argument("capacitance must be positive");
      if (!(conductance[k] > 0.0)) throw std::invalid_argument("conductance must be positive");
    }
    for (size_t e = 0; e < edges.size(); ++e) {
      const NetworkEdge& edge = edges[e];
      if (edge.from < 1 || edge.from > node_count || edge.to < 1 || edge.to > node_count)
        throw std::invalid_argument("edge " + std::to_string(e + 1) + " references a node outside [1, n]");
      if (edge.from == edge.to)
        throw std::invalid_argument("edge " + std::to_string(e + 1) + " is a self loop");
      if (!(edge.resistance > 0.0))
        throw std::invalid_argument("edge " + std::to_string(e + 1) + ": line resistance must be positive");
      if (!(edge.inductance > 0.0))
        throw std::invalid_argument("edge " + std::to_string(e + 1) + ": line inductance must be positive");
      if (edge.shunt_capacitance < 0.0)
        throw std::invalid_argument("edge " + std::to_string(e + 1) + ": shunt capacitance must be non-negative");
    }
  }
};

// Signed node-by-edge incidence: +1 where the edge leaves, -1 where it enters.
inline Eigen::MatrixXd incidence_matrix(const NetworkSpec& spec) {
  spec.validate();
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(spec.node_count, spec.edge_count());
  for (int e = 0; e < spec.edge_count(); ++e) {
    b(spec.edges[e].from - 1, e) = 1.0;
    b(spec.edges[e].to - 1, e) = -1.0;
  }
  return b;
}

// Per-node and per-edge impedance matrices at the rotation frequency omega.
// Every 2x2 block has the form a*I2 + b*J2 = [[a,-b],[b,a]].
struct Impedances {
  Eigen::MatrixXd node;  // Z_G, 2n x 2n
  Eigen::MatrixXd line;  // Z_O, 2m x 2m
};

inline Impedances build_impedances(const NetworkSpec& spec, double omega) {
  spec.validate();
  const int n = spec.node_count;
  const int m = spec.edge_count();
  Impedances z;
  z.node = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  z.line = Eigen::MatrixXd::Zero(2 * m, 2 * m);
  for (int k = 0; k < n; ++k) {
    const double a = spec.conductance[k];
    const double b = spec.capacitance[k] * omega;
    z.node(2 * k, 2 * k) = a;
    z.node(2 * k + 1, 2 * k + 1) = a;
    z.node(2 * k, 2 * k + 1) = -b;
    z.node(2 * k + 1, 2 * k) = b;
  }
  for (int e = 0; e < m; ++e) {
    const double a = spec.edges[e].resistance;
    const double b = spec.edges[e].inductance * omega;
    z.line(2 * e, 2 * e) = a;
    z.line(2 * e + 1, 2 * e + 1) = a;
    z.line(2 * e, 2 * e + 1) = -b;
    z.line(2 * e + 1, 2 * e) = b;
  }
  return z;
}

// Blockwise inverse of a block-diagonal matrix of a*I2 + b*J2 blocks.
inline Eigen::MatrixXd invert_planar_diagonal(const Eigen::MatrixXd& z) {
  Eigen::MatrixXd inv = Eigen::MatrixXd::Zero(z.rows(), z.cols());
  for (Eigen::Index k = 0; 2 * k + 1 < z.rows(); ++k) {
    const double a = z(2 * k, 2 * k);
    const double b = z(2 * k + 1, 2 * k);
    const double d = a * a + b * b;
    if (!(d > 0.0)) throw std::runtime_error("singular planar diagonal block");
    inv(2 * k, 2 * k) = a / d;
    inv(2 * k + 1, 2 * k + 1) = a / d;
    inv(2 * k, 2 * k + 1) = b / d;
    inv(2 * k + 1, 2 * k) = -b / d;
  }
  return inv;
}

// Network impedance L = Z_G + B Z_O^{-1} B^T with B the planar-extended
// incidence. -L is verified Hurwitz; G > 0 makes this hold for every valid
// network.
inline Eigen::MatrixXd network_impedance(const Impedances& z, const Eigen::MatrixXd& b_ext) {
  Eigen::MatrixXd l = z.node;
  if (b_ext.cols() > 0) l += b_ext * invert_planar_diagonal(z.line) * b_ext.transpose();
  Eigen::EigenSolver<Eigen::MatrixXd> es(l, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigensolve of network impedance failed");
  for (Eigen::Index i = 0; i < l.rows(); ++i)
    if (!(es.eigenvalues()[i].real() > 0.0))
      throw std::runtime_error("network impedance is not stabilizing (-L not Hurwitz)");
  return l;
}

inline Eigen::MatrixXd network_impedance(const NetworkSpec& spec, double omega) {
  const Impedances z = build_impedances(spec, omega);
  return network_impedance(z, extend_planar(incidence_matrix(spec)));
}

// Rotating-frame steady state induced by a constant current injection u_ref:
// v = L^{-1} u_ref and i = Z_O^{-1} B^T v, the unique solution of
//   0 = -Z_G v - B i + u_ref,   0 = -Z_O i + B^T v.
struct SteadyState {
  Eigen::VectorXd v;  // capacitor voltage, 2n
  Eigen::VectorXd i;  // line current, 2m
};

inline SteadyState solve_steady_state(const Eigen::VectorXd& u_ref, const NetworkSpec& spec,
                                      double omega) {
  spec.validate();
  const int n = spec.node_count;
  if (u_ref.size() != 2 * n) throw std::invalid_argument("current reference has wrong dimension");
  const Impedances z = build_impedances(spec, omega);
  const Eigen::MatrixXd b_ext = extend_planar(incidence_matrix(spec));
  const Eigen::MatrixXd l = network_impedance(z, b_ext);

  SteadyState ss;
  ss.v = l.partialPivLu().solve(u_ref);
  ss.i = invert_planar_diagonal(z.line) * (b_ext.transpose() * ss.v);

  const double scale = std::sqrt(u_ref.squaredNorm() + ss.v.squaredNorm() + ss.i.squaredNorm());
  if (scale > 0.0) {
    const double res_v = (-z.node * ss.v - b_ext * ss.i + u_ref).norm();
    const double res_i = (-z.line * ss.i + b_ext.transpose() * ss.v).norm();
    if (std::sqrt(res_v * res_v + res_i * res_i) > 1e-9 * scale)
      throw std::runtime_error("steady-state residual exceeds tolerance");
  }
  return ss;
}

}  // namespace lwvoc
