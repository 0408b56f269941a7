// Closed-loop models and integration: full stationary-frame model, full
// rotating-frame model, reduced (time-scale separated) model, boundary-layer
// systems, frame transforms, and a fixed-step RK4 integrator.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lwvoc/controller.hpp"
#include "lwvoc/network.hpp"
#include "lwvoc/planar.hpp"

namespace lwvoc {

enum class ModelKind { AlphaBetaFull, DqFull, DqReduced };

inline Frame model_frame(ModelKind m) {
  return m == ModelKind::AlphaBetaFull ? Frame::AlphaBeta : Frame::Dq;
}

inline bool model_has_lines(ModelKind m) { return m != ModelKind::DqReduced; }

struct SystemState {
  Eigen::VectorXd u;    // controller current, 2n
  Eigen::VectorXd v_c;  // capacitor voltage, 2n
  Eigen::VectorXd i_o;  // line current, 2m; empty for the reduced model
  Frame frame = Frame::Dq;
  double t = 0.0;
};

inline Eigen::VectorXd pack_state(const SystemState& s) {
  Eigen::VectorXd x(s.u.size() + s.v_c.size() + s.i_o.size());
  x << s.u, s.v_c, s.i_o;
  return x;
}

inline SystemState unpack_state(const Eigen::VectorXd& x, int n, int m, Frame frame, double t) {
  SystemState s;
  s.u = x.segment(0, 2 * n);
  s.v_c = x.segment(2 * n, 2 * n);
  s.i_o = x.segment(4 * n, x.size() - 4 * n);
  if (s.i_o.size() != 2 * m && s.i_o.size() != 0)
    throw std::invalid_argument("packed state has inconsistent dimension");
  s.frame = frame;
  s.t = t;
  return s;
}

// Rotating-frame transform: every planar sub-vector is multiplied blockwise
// by R(omega t); the inverse applies R(omega t)^T.
inline SystemState to_dq(const SystemState& s, double omega) {
  if (s.frame != Frame::AlphaBeta) throw std::invalid_argument("to_dq expects a stationary-frame state");
  SystemState out = s;
  rotate_stacked(out.u, omega * s.t);
  rotate_stacked(out.v_c, omega * s.t);
  rotate_stacked(out.i_o, omega * s.t);
  out.frame = Frame::Dq;
  return out;
}

inline SystemState from_dq(const SystemState& s, double omega) {
  if (s.frame != Frame::Dq) throw std::invalid_argument("from_dq expects a rotating-frame state");
  SystemState out = s;
  rotate_stacked(out.u, omega * s.t, /*inverse=*/true);
  rotate_stacked(out.v_c, omega * s.t, /*inverse=*/true);
  rotate_stacked(out.i_o, omega * s.t, /*inverse=*/true);
  out.frame = Frame::AlphaBeta;
  return out;
}

// Quasi-steady line current i = Z_O^{-1} B^T v used to initialize the full
// models on the slow manifold.
inline Eigen::VectorXd slow_manifold_current(const NetworkSpec& spec, double omega,
                                             const Eigen::VectorXd& v) {
  const Impedances z = build_impedances(spec, omega);
  const Eigen::MatrixXd b_ext = extend_planar(incidence_matrix(spec));
  return invert_planar_diagonal(z.line) * (b_ext.transpose() * v);
}

// Closed-loop right-hand side. One functor serves all three models; scratch
// vectors are preallocated so repeated evaluation does not allocate.
class ClosedLoopRhs {
 public:
  ClosedLoopRhs(ModelKind kind, const NetworkSpec& spec, const Setpoints& sp,
                const ControllerGains& gains)
      : kind_(kind), spec_(spec), sp_(sp), gains_(gains) {
    spec_.validate();
    gains_.validate(spec_.node_count);
    b_ext_ = extend_planar(incidence_matrix(spec_));
    if (kind_ == ModelKind::DqReduced)
      impedance_ = network_impedance(build_impedances(spec_, sp_.omega), b_ext_);
    bi_.resize(2 * spec_.node_count);
    btv_.resize(2 * spec_.edge_count());
    du_.resize(2 * spec_.node_count);
  }

  ModelKind kind() const { return kind_; }
  int state_size() const {
    return kind_ == ModelKind::DqReduced ? 4 * spec_.node_count
                                         : 4 * spec_.node_count + 2 * spec_.edge_count();
  }
  const NetworkSpec& spec() const { return spec_; }

  void operator()(double t, const Eigen::VectorXd& x, Eigen::VectorXd& dx) {
    const int n = spec_.node_count;
    const int m = spec_.edge_count();
    dx.resize(x.size());
    const auto u = x.segment(0, 2 * n);
    const auto v = x.segment(2 * n, 2 * n);
    controller_rhs_into(u, v, sp_, gains_, t, model_frame(kind_), du_);
    dx.segment(0, 2 * n) = du_;

    switch (kind_) {
      case ModelKind::AlphaBetaFull: {
        const auto i = x.segment(4 * n, 2 * m);
        bi_.noalias() = b_ext_ * i;
        btv_.noalias() = b_ext_.transpose() * v;
        for (int k = 0; k < n; ++k) {
          const double g = spec_.conductance[k];
          const double c = spec_.capacitance[k];
          dx[2 * n + 2 * k] = (-g * v[2 * k] - bi_[2 * k] + u[2 * k]) / c;
          dx[2 * n + 2 * k + 1] = (-g * v[2 * k + 1] - bi_[2 * k + 1] + u[2 * k + 1]) / c;
        }
        for (int e = 0; e < m; ++e) {
          const double r = spec_.edges[e].resistance;
          const double l = spec_.edges[e].inductance;
          dx[4 * n + 2 * e] = (-r * i[2 * e] + btv_[2 * e]) / l;
          dx[4 * n + 2 * e + 1] = (-r * i[2 * e + 1] + btv_[2 * e + 1]) / l;
        }
        break;
      }
      case ModelKind::DqFull: {
        const auto i = x.segment(4 * n, 2 * m);
        bi_.noalias() = b_ext_ * i;
        btv_.noalias() = b_ext_.transpose() * v;
        const double w = sp_.omega;
        for (int k = 0; k < n; ++k) {
          const double g = spec_.conductance[k];
          const double c = spec_.capacitance[k];
          // Z_G block: g I2 + c w J2
          const double za = g * v[2 * k] - c * w * v[2 * k + 1];
          const double zb = g * v[2 * k + 1] + c * w * v[2 * k];
          dx[2 * n + 2 * k] = (-za - bi_[2 * k] + u[2 * k]) / c;
          dx[2 * n + 2 * k + 1] = (-zb - bi_[2 * k + 1] + u[2 * k + 1]) / c;
        }
        for (int e = 0; e < m; ++e) {
          const double r = spec_.edges[e].resistance;
          const double l = spec_.edges[e].inductance;
          const double za = r * i[2 * e] - l * w * i[2 * e + 1];
          const double zb = r * i[2 * e + 1] + l * w * i[2 * e];
          dx[4 * n + 2 * e] = (-za + btv_[2 * e]) / l;
          dx[4 * n + 2 * e + 1] = (-zb + btv_[2 * e + 1]) / l;
        }
        break;
      }
      case ModelKind::DqReduced: {
        bi_.noalias() = impedance_ * v;  // L v
        for (int k = 0; k < n; ++k) {
          const double c = spec_.capacitance[k];
          dx[2 * n + 2 * k] = (-bi_[2 * k] + u[2 * k]) / c;
          dx[2 * n + 2 * k + 1] = (-bi_[2 * k + 1] + u[2 * k + 1]) / c;
        }
        break;
      }
    }
  }

 private:
  ModelKind kind_;
  NetworkSpec spec_;
  Setpoints sp_;
  ControllerGains gains_;
  Eigen::MatrixXd b_ext_;
  Eigen::MatrixXd impedance_;
  Eigen::VectorXd bi_, btv_, du_;
};

// Boundary-layer dynamics y' = -A y.
inline Eigen::VectorXd boundary_layer_rhs(const Eigen::VectorXd& y, const Eigen::MatrixXd& a) {
  return -a * y;
}

struct IntegrationError : std::runtime_error {
  explicit IntegrationError(double t)
      : std::runtime_error("integration diverged at t = " + std::to_string(t)),
        last_good_time(t) {}
  double last_good_time;
};

// One classical RK4 step, in place.
template <class Rhs>
class Rk4Stepper {
 public:
  explicit Rk4Stepper(int dim) : k1_(dim), k2_(dim), k3_(dim), k4_(dim), tmp_(dim) {}

  void step(Rhs& f, double t, double dt, Eigen::VectorXd& x) {
    f(t, x, k1_);
    tmp_ = x + 0.5 * dt * k1_;
    f(t + 0.5 * dt, tmp_, k2_);
    tmp_ = x + 0.5 * dt * k2_;
    f(t + 0.5 * dt, tmp_, k3_);
    tmp_ = x + dt * k3_;
    f(t + dt, tmp_, k4_);
    x += (dt / 6.0) * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);
  }

 private:
  Eigen::VectorXd k1_, k2_, k3_, k4_, tmp_;
};

// Fixed-step integration with an observer called at t0 and after every
// stride-th step. Deterministic for identical inputs. Throws
// IntegrationError when the state stops being finite.
template <class Rhs, class Observer>
inline void integrate_observe(Rhs& f, Eigen::VectorXd& x, double t0, double t_end, double dt,
                              int stride, Observer&& observe) {
  if (!(dt > 0.0) || !(t_end > t0)) throw std::invalid_argument("integration window must be positive");
  if (stride < 1) throw std::invalid_argument("output stride must be at least 1");
  const std::int64_t steps = static_cast<std::int64_t>(std::llround((t_end - t0) / dt));
  if (steps < 1) throw std::invalid_argument("integration window shorter than one step");
  Rk4Stepper<Rhs> stepper(static_cast<int>(x.size()));
  observe(t0, x);
  double t = t0;
  for (std::int64_t s = 1; s <= steps; ++s) {
    stepper.step(f, t, dt, x);
    t = t0 + static_cast<double>(s) * dt;
    if (!x.allFinite()) throw IntegrationError(t0 + static_cast<double>(s - 1) * dt);
    if (s % stride == 0) observe(t, x);
  }
}

struct Trajectory {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;  // packed [u; v; i]
  ModelKind model = ModelKind::DqFull;
  double dt = 0.0;
  int stride = 1;
  int node_count = 0;
  int edge_count = 0;
  std::string scenario_id;

  size_t sample_count() const { return times.size(); }
  double sample_dt() const { return times.size() > 1 ? times[1] - times[0] : 0.0; }
  SystemState state_at(size_t idx) const {
    return unpack_state(states[idx], node_count, edge_count, model_frame(model), times[idx]);
  }
};

inline Trajectory integrate(ClosedLoopRhs& rhs, const Eigen::VectorXd& x0, double t_end,
                            double dt, int stride = 20, const std::string& scenario_id = {}) {
  if (x0.size() != rhs.state_size()) throw std::invalid_argument("initial state has wrong dimension");
  Trajectory traj;
  traj.model = rhs.kind();
  traj.dt = dt;
  traj.stride = stride;
  traj.node_count = rhs.spec().node_count;
  traj.edge_count = rhs.kind() == ModelKind::DqReduced ? 0 : rhs.spec().edge_count();
  traj.scenario_id = scenario_id;
  Eigen::VectorXd x = x0;
  integrate_observe(rhs, x, 0.0, t_end, dt, stride, [&](double t, const Eigen::VectorXd& s) {
    traj.times.push_back(t);
    traj.states.push_back(s);
  });
  return traj;
}

// Deviation between the full and reduced rotating-frame models from
// consistent initial conditions. epsilon is the time-scale separation
// parameter max_e L_O / sqrt(L_O^2 w^2 + R_O^2).
struct FullReducedDeviation {
  double max_u = 0.0;
  double max_v = 0.0;
  double max_combined = 0.0;
  double rms_combined = 0.0;
  double epsilon = 0.0;
  double t_end = 0.0;
};

inline double line_time_constant(const NetworkSpec& spec, double omega) {
  double tau = 0.0;
  for (const NetworkEdge& e : spec.edges)
    tau = std::max(tau, e.inductance / std::hypot(e.inductance * omega, e.resistance));
  return tau;
}

// Integrates both models and compares (u, v) at common sample times. The
// full model starts on the slow manifold unless an explicit line current is
// provided in x0.
inline FullReducedDeviation compare_full_reduced(const NetworkSpec& spec, const Setpoints& sp,
                                                 const ControllerGains& gains,
                                                 const SystemState& x0, double t_end,
                                                 double dt_full = 1e-6, double dt_reduced = 1e-5,
                                                 double sample_dt = 2e-5) {
  if (x0.frame != Frame::Dq)
    throw std::invalid_argument("full/reduced comparison expects a rotating-frame initial state");
  const int stride_full = static_cast<int>(std::llround(sample_dt / dt_full));
  const int stride_red = static_cast<int>(std::llround(sample_dt / dt_reduced));
  if (stride_full < 1 || stride_red < 1 ||
      std::abs(stride_full * dt_full - sample_dt) > 1e-12 ||
      std::abs(stride_red * dt_reduced - sample_dt) > 1e-12)
    throw std::invalid_argument("sample interval must be a multiple of both step sizes");

  ClosedLoopRhs full(ModelKind::DqFull, spec, sp, gains);
  ClosedLoopRhs reduced(ModelKind::DqReduced, spec, sp, gains);

  SystemState full0 = x0;
  if (full0.i_o.size() == 0) full0.i_o = slow_manifold_current(spec, sp.omega, full0.v_c);
  SystemState red0 = x0;
  red0.i_o.resize(0);

  const Trajectory tf = integrate(full, pack_state(full0), t_end, dt_full, stride_full);
  const Trajectory tr = integrate(reduced, pack_state(red0), t_end, dt_reduced, stride_red);
  const size_t samples = std::min(tf.sample_count(), tr.sample_count());

  FullReducedDeviation dev;
  dev.epsilon = line_time_constant(spec, sp.omega);
  dev.t_end = t_end;
  const int n = spec.node_count;
  double sum2 = 0.0;
  for (size_t s = 0; s < samples; ++s) {
    const double du = (tf.states[s].segment(0, 2 * n) - tr.states[s].segment(0, 2 * n)).norm();
    const double dv =
        (tf.states[s].segment(2 * n, 2 * n) - tr.states[s].segment(2 * n, 2 * n)).norm();
    dev.max_u = std::max(dev.max_u, du);
    dev.max_v = std::max(dev.max_v, dv);
    const double combined = std::sqrt(du * du + dv * dv);
    dev.max_combined = std::max(dev.max_combined, combined);
    sum2 += combined * combined;
  }
  dev.rms_combined = samples > 0 ? std::sqrt(sum2 / static_cast<double>(samples)) : 0.0;
  return dev;
}

}  // namespace lwvoc
