// Lambda-omega virtual oscillator control: amplitude and angle-based
// frequency functions, voltage projectors, and the controller vector field
// in rectangular (stationary and rotating frame) and polar coordinates.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "lwvoc/network.hpp"
#include "lwvoc/planar.hpp"

namespace lwvoc {

enum class Frame { AlphaBeta, Dq };

struct ControllerGains {
  std::vector<double> gamma;  // per-node amplitude gain, 1/s
  std::vector<double> alpha;  // per-node frequency gain, 1/s

  void validate(int node_count) const {
    if (static_cast<int>(gamma.size()) != node_count ||
        static_cast<int>(alpha.size()) != node_count)
      throw std::invalid_argument("gain count does not match node count");
    for (double g : gamma)
      if (!(g > 0.0)) throw std::invalid_argument("amplitude gain must be positive");
    for (double a : alpha)
      if (!(a > 0.0)) throw std::invalid_argument("frequency gain must be positive");
  }
  double gamma_max() const { return *std::max_element(gamma.begin(), gamma.end()); }
  double alpha_max() const { return *std::max_element(alpha.begin(), alpha.end()); }
};

// lambda_k(r, r*) = gamma * (r/r* - 1)
inline double amplitude_fn(double r, double r_ref, double gamma) {
  if (!(r_ref > 0.0)) throw std::invalid_argument("amplitude setpoint must be positive");
  return gamma * (r / r_ref - 1.0);
}

// Stationary frame: omega_tilde = alpha * wrap(theta - theta_ref) - omega,
// with theta_ref the rotating reference omega*t + theta0.
// Rotating frame: alpha * wrap(theta - theta_ref) with constant theta_ref.
inline double frequency_fn(double theta, double theta_ref, double alpha, double omega,
                           Frame frame) {
  const double err = alpha * wrap_angle(theta - theta_ref);
  return frame == Frame::AlphaBeta ? err - omega : err;
}

// Symmetric idempotent projector onto the orthogonal complement of v_ref.
// Works for per-node 2-vectors and for full stacked vectors alike.
inline Eigen::MatrixXd projector_from(const Eigen::VectorXd& v_ref) {
  const double nrm2 = v_ref.squaredNorm();
  if (!(nrm2 > 0.0)) throw std::invalid_argument("projector reference vector must be nonzero");
  Eigen::MatrixXd p = Eigen::MatrixXd::Identity(v_ref.size(), v_ref.size());
  p.noalias() -= v_ref * v_ref.transpose() / nrm2;
  return p;
}

inline Eigen::Matrix2d projector_from(const Eigen::Vector2d& v_ref) {
  const double nrm2 = v_ref.squaredNorm();
  if (!(nrm2 > 0.0)) throw std::invalid_argument("projector reference vector must be nonzero");
  return Eigen::Matrix2d::Identity() - (v_ref * v_ref.transpose()) / nrm2;
}

// Amplitude and phase setpoints plus the induced steady state. The voltage
// and line-current references are derived from the current setpoint and the
// network parameters alone; they are never supplied by the user.
struct Setpoints {
  Eigen::VectorXd amplitude;  // r*, per node, ampere
  Eigen::VectorXd phase;      // theta0*, per node, wrapped to (-pi, pi]
  double omega = 0.0;         // nominal frequency, rad/s

  Eigen::VectorXd u_ref;  // rotating-frame current setpoint, 2n
  Eigen::VectorXd v_ref;  // L^{-1} u_ref, 2n
  Eigen::VectorXd i_ref;  // Z_O^{-1} B^T v_ref, 2m

  std::vector<Eigen::Matrix2d> proj_dq;  // per-node projector complement of v_ref

  int node_count() const { return static_cast<int>(amplitude.size()); }

  Eigen::Vector2d u_ref_block(int k) const { return u_ref.segment<2>(2 * k); }
  Eigen::Vector2d v_ref_block(int k) const { return v_ref.segment<2>(2 * k); }
};

inline Setpoints derive_setpoints(const NetworkSpec& spec, const Eigen::VectorXd& amplitude,
                                  const Eigen::VectorXd& phase, double omega) {
  spec.validate();
  const int n = spec.node_count;
  if (amplitude.size() != n || phase.size() != n)
    throw std::invalid_argument("setpoint count does not match node count");
  if (omega < 0.0) throw std::invalid_argument("nominal frequency must be non-negative");

  Setpoints sp;
  sp.amplitude = amplitude;
  sp.phase = phase;
  sp.omega = omega;
  sp.u_ref.resize(2 * n);
  for (int k = 0; k < n; ++k) {
    if (!(amplitude[k] > 0.0)) throw std::invalid_argument("amplitude setpoint must be positive");
    sp.phase[k] = wrap_angle(phase[k]);
    sp.u_ref[2 * k] = amplitude[k] * std::cos(sp.phase[k]);
    sp.u_ref[2 * k + 1] = amplitude[k] * std::sin(sp.phase[k]);
  }
  const SteadyState ss = solve_steady_state(sp.u_ref, spec, omega);
  sp.v_ref = ss.v;
  sp.i_ref = ss.i;
  sp.proj_dq.reserve(n);
  for (int k = 0; k < n; ++k)
    sp.proj_dq.push_back(projector_from(Eigen::Vector2d(sp.v_ref.segment<2>(2 * k))));
  return sp;
}

// Controller vector field du/dt = -(Lambda + K) u - Pi v_c, assembled
// blockwise. In the stationary frame the angle reference and the voltage
// projector rotate at omega; in the rotating frame both are constant.
// The angle of a zero block falls back to the reference so the K-term stays
// finite (it multiplies u = 0 anyway).
inline void controller_rhs_into(const Eigen::VectorXd& u, const Eigen::VectorXd& v_c,
                                const Setpoints& sp, const ControllerGains& gains, double t,
                                Frame frame, Eigen::VectorXd& du) {
  const int n = sp.node_count();
  du.resize(2 * n);
  const double rot = sp.omega * t;
  for (int k = 0; k < n; ++k) {
    const double ua = u[2 * k];
    const double ub = u[2 * k + 1];
    const double r = std::hypot(ua, ub);
    const double theta_ref = frame == Frame::AlphaBeta ? rot + sp.phase[k] : sp.phase[k];
    const double theta = (r > 0.0) ? std::atan2(ub, ua) : theta_ref;
    const double lam = amplitude_fn(r, sp.amplitude[k], gains.gamma[k]);
    const double w = frequency_fn(theta, theta_ref, gains.alpha[k], sp.omega, frame);

    // -(lam I + w J2) u
    double da = -lam * ua + w * ub;
    double db = -lam * ub - w * ua;

    // projector applied to the local voltage measurement
    Eigen::Vector2d pv;
    if (frame == Frame::AlphaBeta) {
      // v_ref rotated into the stationary frame: R(omega t)^T v_ref_k
      const double c = std::cos(rot);
      const double s = std::sin(rot);
      const double va = c * sp.v_ref[2 * k] - s * sp.v_ref[2 * k + 1];
      const double vb = s * sp.v_ref[2 * k] + c * sp.v_ref[2 * k + 1];
      const double nrm2 = va * va + vb * vb;
      const double dot = (va * v_c[2 * k] + vb * v_c[2 * k + 1]) / nrm2;
      pv[0] = v_c[2 * k] - dot * va;
      pv[1] = v_c[2 * k + 1] - dot * vb;
    } else {
      pv.noalias() = sp.proj_dq[k] * v_c.segment<2>(2 * k);
    }
    du[2 * k] = da - pv[0];
    du[2 * k + 1] = db - pv[1];
  }
}

inline Eigen::VectorXd controller_rhs(const Eigen::VectorXd& u, const Eigen::VectorXd& v_c,
                                      const Setpoints& sp, const ControllerGains& gains,
                                      double t, Frame frame) {
  Eigen::VectorXd du;
  controller_rhs_into(u, v_c, sp, gains, t, frame, du);
  return du;
}

// Decoupled polar form (voltage feedback absent):
//   r_k'     = -r_k lambda_k(r_k, r*_k)
//   theta_k' = omega - alpha_k wrap(theta_k - omega t - theta0*_k)
inline void polar_rhs(const Eigen::VectorXd& r, const Eigen::VectorXd& theta,
                      const Setpoints& sp, const ControllerGains& gains, double t,
                      Eigen::VectorXd& dr, Eigen::VectorXd& dtheta) {
  const int n = sp.node_count();
  dr.resize(n);
  dtheta.resize(n);
  for (int k = 0; k < n; ++k) {
    if (!(r[k] > 0.0)) throw std::invalid_argument("polar amplitude must be positive");
    dr[k] = -r[k] * amplitude_fn(r[k], sp.amplitude[k], gains.gamma[k]);
    dtheta[k] = -frequency_fn(theta[k], sp.omega * t + sp.phase[k], gains.alpha[k], sp.omega,
                              Frame::AlphaBeta);
  }
}

}  // namespace lwvoc
