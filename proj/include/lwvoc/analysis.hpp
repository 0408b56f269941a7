// Numerical stability certificates for the closed loop: time-scale
// separation check, the small-gain condition set, the largest admissible
// frequency gain, origin instability, Lyapunov function evaluation, and
// droop identity verification along trajectories.

#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "lwvoc/controller.hpp"
#include "lwvoc/dynamics.hpp"
#include "lwvoc/network.hpp"
#include "lwvoc/planar.hpp"

namespace lwvoc {

struct Assumption1Result {
  double tau = 0.0;       // worst-edge L_O / sqrt(L_O^2 w^2 + R_O^2), seconds
  double tau_star = 0.0;  // threshold in use
  bool ok = false;
};

inline Assumption1Result check_assumption1(const NetworkSpec& spec, double omega,
                                           double tau_star) {
  if (!(tau_star > 0.0)) throw std::invalid_argument("tau threshold must be positive");
  Assumption1Result res;
  res.tau = line_time_constant(spec, omega);
  res.tau_star = tau_star;
  res.ok = res.tau < tau_star;
  return res;
}

struct StabilityReport {
  double tau = 0.0;       // line time-scale parameter
  double tau_star = 0.0;  // threshold used for the time-scale check
  double epsilon = 0.0;   // worst-node C / sqrt(C^2 w^2 + G^2)
  double xi1 = 0.0;
  double xi2 = 0.0;
  double beta1 = 1.0;
  double beta2 = 0.0;
  double zeta = 0.0;
  double gamma_max = 0.0;
  double alpha_max = 0.0;
  double alpha_star = 0.0;
  double cond_13c_rhs = 0.0;  // xi1 xi2 / (xi1 zeta + beta1 beta2)
  bool assumption1_ok = false;
  bool cond_13a_ok = false;
  bool cond_13b_ok = false;
  bool cond_13c_ok = false;

  bool all_ok() const { return assumption1_ok && cond_13a_ok && cond_13b_ok && cond_13c_ok; }
};

// Largest admissible frequency gain per node. For each node the 2x2 blocks
//   D1 = 2 gamma (I2 - kappa nhat nhat^T),   kappa = r*^2 / ||u_ref||^2,
//   D2(alpha, d) = alpha d kappa [[sin 2t*, -cos 2t*], [-cos 2t*, -sin 2t*]]
// are the diagonal blocks of Pi (M1 + M2) + (M1 + M2)^T Pi evaluated at
// r = r*; D1 - D2 must stay positive semidefinite over the worst wrapped
// angle deviation |d| <= pi. D2 is linear in d, so only d = +-pi matters,
// and the admissible set in alpha is an interval, found by bisection.
// The result is invariant to t* (conjugation by a rotation).
inline double compute_alpha_star(const Setpoints& sp, const ControllerGains& gains) {
  const int n = sp.node_count();
  gains.validate(n);
  const double norm2 = sp.u_ref.squaredNorm();
  double alpha_star = std::numeric_limits<double>::infinity();
  for (int k = 0; k < n; ++k) {
    const double kappa = sp.amplitude[k] * sp.amplitude[k] / norm2;
    const double c = std::cos(sp.phase[k]);
    const double s = std::sin(sp.phase[k]);
    Eigen::Matrix2d d1;
    d1 << 1.0 - kappa * c * c, -kappa * c * s, -kappa * c * s, 1.0 - kappa * s * s;
    d1 *= 2.0 * gains.gamma[k];
    Eigen::Matrix2d t2;  // reflection-type block, eigenvalues +-1 scaled by kappa
    t2 << 2.0 * s * c, s * s - c * c, s * s - c * c, -2.0 * s * c;
    t2 *= kappa;

    const double tol = 1e-12 * 2.0 * gains.gamma[k];
    auto feasible = [&](double alpha) {
      for (double dev : {kPi, -kPi}) {
        const Eigen::Matrix2d m = d1 - alpha * dev * t2;
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(m);
        if (es.eigenvalues().minCoeff() < -tol) return false;
      }
      return true;
    };

    double lo = 0.0;
    double hi = 1.0;
    while (feasible(hi) && hi < 1e9) {
      lo = hi;
      hi *= 2.0;
    }
    if (hi >= 1e9) {
      alpha_star = std::min(alpha_star, hi);
      continue;
    }
    while (hi - lo > 1e-6 * std::max(hi, 1e-30)) {
      const double mid = 0.5 * (lo + hi);
      if (feasible(mid))
        lo = mid;
      else
        hi = mid;
    }
    alpha_star = std::min(alpha_star, lo);
  }
  return alpha_star;
}

inline Eigen::MatrixXd block_diagonal_projector(const Setpoints& sp) {
  const int n = sp.node_count();
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  for (int k = 0; k < n; ++k) p.block<2, 2>(2 * k, 2 * k) = sp.proj_dq[k];
  return p;
}

// Orthonormal basis of the complement of u_ref (the range of the full
// projector), taken from a Householder factorization of u_ref.
inline Eigen::MatrixXd projector_range_basis(const Eigen::VectorXd& u_ref) {
  const Eigen::Index d = u_ref.size();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(u_ref);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, d);
  return q.rightCols(d - 1);
}

// Evaluates the certificate quantities:
//   xi2  = lambda_min(L + L^T)
//   zeta = ||L^{-1}|| (spectral norm)
//   beta2 = zeta^2 + gamma_max zeta
//   xi1  = largest value with Pi X + X^T Pi <= -xi1 Pi on range(Pi),
//          X = gamma_max I - Pi_dq L^{-1}; equality holds trivially on
//          ker(Pi), so the eigenproblem is projected onto range(Pi).
//   load condition: worst-node C / sqrt(C^2 w^2 + G^2) < xi1 xi2 / (xi1 zeta + beta2)
//
// Pi_dq here is the rank-one-deficient projector I - v v^T / v^T v built
// from the stacked voltage reference. The per-node block-diagonal variant
// that drives the dynamics makes the gain inequality infeasible for every network with
// n >= 2: any x = L y with y in the per-node reference spans satisfies
// Pi_dq_block L^{-1} x = 0, and enough such x lie in range(Pi) to pin
// lambda_max at 2 gamma_max.
inline StabilityReport compute_condition1(const NetworkSpec& spec, const Setpoints& sp,
                                          const ControllerGains& gains, double tau_star = 1e-3) {
  spec.validate();
  gains.validate(spec.node_count);
  StabilityReport rep;
  rep.gamma_max = gains.gamma_max();
  rep.alpha_max = gains.alpha_max();
  rep.tau_star = tau_star;

  const Assumption1Result a1 = check_assumption1(spec, sp.omega, tau_star);
  rep.tau = a1.tau;
  rep.assumption1_ok = a1.ok;

  const Eigen::MatrixXd l = network_impedance(spec, sp.omega);
  const Eigen::Index d = l.rows();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> sym(l + l.transpose());
  rep.xi2 = sym.eigenvalues().minCoeff();

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(l);
  rep.zeta = 1.0 / svd.singularValues().minCoeff();
  rep.beta2 = rep.zeta * rep.zeta + rep.gamma_max * rep.zeta;

  const Eigen::MatrixXd l_inv = l.partialPivLu().solve(Eigen::MatrixXd::Identity(d, d));
  const Eigen::MatrixXd pi_full = projector_from(sp.u_ref);
  const Eigen::MatrixXd x =
      rep.gamma_max * Eigen::MatrixXd::Identity(d, d) - projector_from(sp.v_ref) * l_inv;
  Eigen::MatrixXd m = pi_full * x + x.transpose() * pi_full;
  m = 0.5 * (m + m.transpose()).eval();
  const Eigen::MatrixXd basis = projector_range_basis(sp.u_ref);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> proj(basis.transpose() * m * basis);
  rep.xi1 = -proj.eigenvalues().maxCoeff();
  rep.cond_13b_ok = rep.xi1 > 0.0;

  double eps = 0.0;
  for (int k = 0; k < spec.node_count; ++k) {
    const double c = spec.capacitance[k];
    eps = std::max(eps, c / std::hypot(c * sp.omega, spec.conductance[k]));
  }
  rep.epsilon = eps;
  rep.cond_13c_rhs =
      rep.xi1 > 0.0 ? rep.xi1 * rep.xi2 / (rep.xi1 * rep.zeta + rep.beta1 * rep.beta2) : 0.0;
  rep.cond_13c_ok = rep.cond_13b_ok && rep.epsilon < rep.cond_13c_rhs;

  rep.alpha_star = compute_alpha_star(sp, gains);
  rep.cond_13a_ok = rep.alpha_max < rep.alpha_star;
  return rep;
}

// Jacobian of the projected reduced dynamics at the origin,
// blockdiag(gamma_k I2 + alpha_k theta*_k J2) - Pi_dq L^{-1}, together with
// the count of eigenvalues in the open right half plane. The desired
// equilibrium is reachable from almost everywhere exactly because this
// count is at least two.
struct OriginJacobian {
  Eigen::MatrixXd jacobian;
  Eigen::VectorXcd eigenvalues;
  int unstable_count = 0;
};

inline OriginJacobian jacobian_at_origin(const NetworkSpec& spec, const Setpoints& sp,
                                         const ControllerGains& gains) {
  spec.validate();
  gains.validate(spec.node_count);
  const int n = spec.node_count;
  const Eigen::MatrixXd l = network_impedance(spec, sp.omega);
  const Eigen::MatrixXd l_inv = l.partialPivLu().solve(Eigen::MatrixXd::Identity(2 * n, 2 * n));

  OriginJacobian out;
  out.jacobian = -block_diagonal_projector(sp) * l_inv;
  for (int k = 0; k < n; ++k) {
    const double g = gains.gamma[k];
    const double aj = gains.alpha[k] * sp.phase[k];
    out.jacobian(2 * k, 2 * k) += g;
    out.jacobian(2 * k + 1, 2 * k + 1) += g;
    out.jacobian(2 * k, 2 * k + 1) += -aj;
    out.jacobian(2 * k + 1, 2 * k) += aj;
  }
  Eigen::EigenSolver<Eigen::MatrixXd> es(out.jacobian);
  if (es.info() != Eigen::Success) throw std::runtime_error("origin jacobian eigensolve failed");
  out.eigenvalues = es.eigenvalues();
  for (Eigen::Index i = 0; i < out.eigenvalues.size(); ++i)
    if (out.eigenvalues[i].real() > 0.0) ++out.unstable_count;
  return out;
}

struct LyapunovValues {
  double v1 = 0.0;  // u^T Pi u, misalignment from span(u_ref)
  double z = 0.0;   // amplitude error sum
  double v2 = 0.0;  // boundary-layer energy of y = v - L^{-1} u
  double w = 0.0;   // (1-d) v1 + d v2
};

// Evaluates the Lyapunov functions along rotating-frame states. Holds the
// factorized network impedance so repeated evaluation along trajectories
// stays cheap.
class LyapunovEvaluator {
 public:
  LyapunovEvaluator(const NetworkSpec& spec, const Setpoints& sp, double mixing = 0.5)
      : amplitude_(sp.amplitude),
        pi_full_(projector_from(sp.u_ref)),
        lu_(network_impedance(spec, sp.omega)),
        mixing_(mixing) {
    if (!(mixing > 0.0 && mixing < 1.0))
      throw std::invalid_argument("mixing constant must lie in (0, 1)");
  }

  LyapunovValues operator()(const Eigen::VectorXd& u_dq, const Eigen::VectorXd& v_dq) const {
    LyapunovValues out;
    out.v1 = u_dq.dot(pi_full_ * u_dq);
    for (int k = 0; k < amplitude_.size(); ++k) {
      const double miss = 1.0 - block_amplitude(u_dq, k) / amplitude_[k];
      out.z += 0.5 * miss * miss;
    }
    const Eigen::VectorXd y = v_dq - lu_.solve(u_dq);
    out.v2 = 0.5 * y.squaredNorm();
    out.w = (1.0 - mixing_) * out.v1 + mixing_ * out.v2;
    return out;
  }

 private:
  Eigen::VectorXd amplitude_;
  Eigen::MatrixXd pi_full_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  double mixing_;
};

inline LyapunovValues lyapunov_values(const SystemState& s, const NetworkSpec& spec,
                                      const Setpoints& sp, double mixing = 0.5) {
  if (s.frame != Frame::Dq)
    throw std::invalid_argument("Lyapunov functions are defined on rotating-frame states");
  return LyapunovEvaluator(spec, sp, mixing)(s.u, s.v_c);
}

// Distance to the two-point target set {u_ref, -u_ref}.
inline double dist_to_su(const Eigen::VectorXd& u_dq, const Setpoints& sp) {
  return std::min((u_dq - sp.u_ref).norm(), (u_dq + sp.u_ref).norm());
}

// Instantaneous power quantities. Active power pairs the current with the
// voltage, reactive power with the quarter-turned voltage
// (q = u_a v_b - u_b v_a); the reference values pass the voltage through
// the rank-one projector onto the voltage reference.
struct DroopSample {
  double p = 0.0;
  double q = 0.0;
  double p_ref = 0.0;
  double q_ref = 0.0;
  double r = 0.0;
  double theta = 0.0;
  double t = 0.0;
};

inline std::vector<DroopSample> droop_quantities(const Eigen::VectorXd& u,
                                                 const Eigen::VectorXd& v_c,
                                                 const Setpoints& sp, Frame frame,
                                                 double t = 0.0) {
  const int n = sp.node_count();
  std::vector<DroopSample> out(n);
  const double rot = sp.omega * t;
  for (int k = 0; k < n; ++k) {
    const double ua = u[2 * k];
    const double ub = u[2 * k + 1];
    const double va = v_c[2 * k];
    const double vb = v_c[2 * k + 1];
    double ra = sp.v_ref[2 * k];
    double rb = sp.v_ref[2 * k + 1];
    if (frame == Frame::AlphaBeta) {
      const double c = std::cos(rot);
      const double s = std::sin(rot);
      const double na = c * ra - s * rb;
      const double nb = s * ra + c * rb;
      ra = na;
      rb = nb;
    }
    const double nrm2 = ra * ra + rb * rb;
    const double proj = (ra * va + rb * vb) / nrm2;  // component along the reference
    const double pa = proj * ra;
    const double pb = proj * rb;

    DroopSample& d = out[k];
    d.p = ua * va + ub * vb;
    d.q = ua * vb - ub * va;
    d.p_ref = ua * pa + ub * pb;
    d.q_ref = ua * pb - ub * pa;
    d.r = std::hypot(ua, ub);
    d.theta = (d.r > 0.0) ? std::atan2(ub, ua) : 0.0;
    d.t = t;
  }
  return out;
}

// Residuals of the droop identities along a stationary-frame trajectory:
//   r'     = -gamma r (r/r* - 1) + (-P + P_ref) / r
//   theta' = omega - alpha wrap(theta - omega t - theta0*) + (-Q + Q_ref) / r^2
// Left sides come from central differences with angle unwrapping. Samples
// with near-zero amplitude are skipped, as are samples whose difference
// stencil straddles a parameter discontinuity.
struct DroopResiduals {
  double max_abs_amplitude = 0.0;  // ampere/s
  double max_abs_angle = 0.0;      // rad/s
  double scale_amplitude = 0.0;
  double scale_angle = 0.0;
  int skipped_low_amplitude = 0;
  int skipped_discontinuity = 0;
  int used_samples = 0;

  double rel_amplitude() const {
    return scale_amplitude > 0.0 ? max_abs_amplitude / scale_amplitude : 0.0;
  }
  double rel_angle() const { return scale_angle > 0.0 ? max_abs_angle / scale_angle : 0.0; }
};

inline DroopResiduals verify_droop_identity(const Trajectory& traj, const Setpoints& sp,
                                            const ControllerGains& gains,
                                            const std::vector<double>& discontinuities = {}) {
  if (traj.model != ModelKind::AlphaBetaFull)
    throw std::invalid_argument("droop identities are verified on stationary-frame trajectories");
  if (traj.sample_count() < 3) throw std::invalid_argument("trajectory too short for differences");
  const int n = traj.node_count;
  const size_t samples = traj.sample_count();
  const double h = traj.sample_dt();

  DroopResiduals res;
  std::vector<double> r(samples), theta(samples), p(samples), q(samples), p_ref(samples),
      q_ref(samples);
  for (int k = 0; k < n; ++k) {
    for (size_t i = 0; i < samples; ++i) {
      const Eigen::VectorXd& x = traj.states[i];
      const auto u = x.segment(0, 2 * n);
      const auto v = x.segment(2 * n, 2 * n);
      const std::vector<DroopSample> d = droop_quantities(u, v, sp, Frame::AlphaBeta, traj.times[i]);
      r[i] = d[k].r;
      p[i] = d[k].p;
      q[i] = d[k].q;
      p_ref[i] = d[k].p_ref;
      q_ref[i] = d[k].q_ref;
      theta[i] = i == 0 ? d[k].theta : theta[i - 1] + wrap_angle(d[k].theta - theta[i - 1]);
    }
    for (size_t i = 1; i + 1 < samples; ++i) {
      bool straddles = false;
      for (double ev : discontinuities)
        if (ev > traj.times[i - 1] - 0.5 * h && ev < traj.times[i + 1] + 0.5 * h) straddles = true;
      if (straddles) {
        ++res.skipped_discontinuity;
        continue;
      }
      if (r[i] < 1e-6 * sp.amplitude[k]) {
        ++res.skipped_low_amplitude;
        continue;
      }
      const double t = traj.times[i];
      const double r_dot = (r[i + 1] - r[i - 1]) / (2.0 * h);
      const double theta_dot = (theta[i + 1] - theta[i - 1]) / (2.0 * h);
      const double rhs_r = -gains.gamma[k] * r[i] * (r[i] / sp.amplitude[k] - 1.0) +
                           (-p[i] + p_ref[i]) / r[i];
      const double rhs_theta =
          sp.omega - gains.alpha[k] * wrap_angle(theta[i] - sp.omega * t - sp.phase[k]) +
          (-q[i] + q_ref[i]) / (r[i] * r[i]);
      res.max_abs_amplitude = std::max(res.max_abs_amplitude, std::abs(r_dot - rhs_r));
      res.max_abs_angle = std::max(res.max_abs_angle, std::abs(theta_dot - rhs_theta));
      res.scale_amplitude = std::max({res.scale_amplitude, std::abs(r_dot), std::abs(rhs_r)});
      res.scale_angle = std::max({res.scale_angle, std::abs(theta_dot), std::abs(rhs_theta)});
      ++res.used_samples;
    }
  }
  return res;
}

}  // namespace lwvoc
