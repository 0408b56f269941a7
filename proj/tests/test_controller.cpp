#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "lwvoc/controller.hpp"
#include "lwvoc/dynamics.hpp"

using Catch::Approx;
using namespace lwvoc;

namespace {

NetworkSpec ring3() {
  NetworkSpec s;
  s.node_count = 3;
  s.edges = {{1, 2, 0.2, 5e-5, 1e-8}, {2, 3, 0.2, 5e-5, 1e-8}, {3, 1, 0.2, 5e-5, 1e-8}};
  s.capacitance = {1e-3, 1e-3, 1e-3};
  s.conductance = {0.5, 0.5, 0.5};
  return s;
}

const double kOmega = 2.0 * kPi * 50.0;

Setpoints nominal_setpoints() {
  return derive_setpoints(ring3(), Eigen::VectorXd::Constant(3, 20.0),
                          Eigen::VectorXd::Constant(3, 1.1780), kOmega);
}

ControllerGains nominal_gains() { return {{0.1, 0.1, 0.1}, {0.03, 0.03, 0.03}}; }

}  // namespace

TEST_CASE("amplitude function", "[controller]") {
  CHECK(amplitude_fn(20.0, 20.0, 0.1) == 0.0);
  CHECK(amplitude_fn(0.0, 20.0, 0.1) == Approx(-0.1));
  CHECK(amplitude_fn(40.0, 20.0, 0.1) == Approx(0.1));
  CHECK_THROWS(amplitude_fn(1.0, 0.0, 0.1));
  CHECK_THROWS(amplitude_fn(1.0, -2.0, 0.1));
}

TEST_CASE("frequency function in both frames", "[controller]") {
  CHECK(frequency_fn(1.0, 1.0, 0.03, kOmega, Frame::AlphaBeta) == Approx(-kOmega));
  CHECK(frequency_fn(1.0, 1.0, 0.03, kOmega, Frame::Dq) == 0.0);
  CHECK(frequency_fn(1.1, 1.0, 0.03, kOmega, Frame::Dq) == Approx(0.003));
  // invariant under 2 pi shifts of either argument
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 50; ++i) {
    const double th = u(rng), ref = u(rng);
    const double base = frequency_fn(th, ref, 0.03, kOmega, Frame::Dq);
    CHECK(frequency_fn(th + kTwoPi, ref, 0.03, kOmega, Frame::Dq) == Approx(base).margin(1e-12));
    CHECK(frequency_fn(th, ref - kTwoPi, 0.03, kOmega, Frame::Dq) == Approx(base).margin(1e-12));
  }
}

TEST_CASE("projector examples and properties", "[controller]") {
  Eigen::Matrix2d p = projector_from(Eigen::Vector2d(1.0, 0.0));
  Eigen::Matrix2d expect;
  expect << 0, 0, 0, 1;
  CHECK((p - expect).norm() == 0.0);

  p = projector_from(Eigen::Vector2d(1.0, 1.0));
  expect << 0.5, -0.5, -0.5, 0.5;
  CHECK((p - expect).norm() < 1e-15);

  CHECK_THROWS(projector_from(Eigen::Vector2d(0.0, 0.0)));

  std::mt19937_64 rng(17);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 30; ++trial) {
    const int dim = 2 + 2 * (trial % 4);
    Eigen::VectorXd v(dim);
    for (int i = 0; i < dim; ++i) v[i] = nd(rng);
    if (v.norm() < 1e-6) continue;
    const Eigen::MatrixXd pi = projector_from(v);
    CHECK((pi * pi - pi).norm() < 1e-12);
    CHECK((pi - pi.transpose()).norm() < 1e-12);
    CHECK((pi * v).norm() < 1e-12 * v.norm());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(pi);
    for (int i = 0; i < dim; ++i) {
      const double ev = es.eigenvalues()[i];
      CHECK(std::min(std::abs(ev), std::abs(ev - 1.0)) < 1e-12);
    }
  }
}

TEST_CASE("derived setpoints satisfy the steady-state equations", "[controller]") {
  const Setpoints sp = nominal_setpoints();
  const NetworkSpec spec = ring3();
  const Impedances z = build_impedances(spec, kOmega);
  const Eigen::MatrixXd b = extend_planar(incidence_matrix(spec));
  const double scale =
      std::sqrt(sp.u_ref.squaredNorm() + sp.v_ref.squaredNorm() + sp.i_ref.squaredNorm());
  CHECK((-z.node * sp.v_ref - b * sp.i_ref + sp.u_ref).norm() <= 1e-9 * scale);
  CHECK((-z.line * sp.i_ref + b.transpose() * sp.v_ref).norm() <= 1e-9 * scale);
  for (int k = 0; k < 3; ++k) {
    CHECK((sp.proj_dq[k] * sp.v_ref_block(k)).norm() < 1e-12 * sp.v_ref_block(k).norm());
    CHECK(block_amplitude(sp.u_ref, k) == Approx(20.0));
  }
}

TEST_CASE("controller field on the synchronous orbit is a pure rotation", "[controller]") {
  const Setpoints sp = nominal_setpoints();
  const ControllerGains g = nominal_gains();
  for (double t : {0.0, 1.7e-3, 0.011}) {
    Eigen::VectorXd u = sp.u_ref, v = sp.v_ref;
    rotate_stacked(u, kOmega * t, /*inverse=*/true);
    rotate_stacked(v, kOmega * t, /*inverse=*/true);
    const Eigen::VectorXd du = controller_rhs(u, v, sp, g, t, Frame::AlphaBeta);
    Eigen::VectorXd expect(6);
    for (int k = 0; k < 3; ++k) {
      expect[2 * k] = -kOmega * u[2 * k + 1];
      expect[2 * k + 1] = kOmega * u[2 * k];
    }
    CHECK((du - expect).norm() < 1e-10 * expect.norm());
  }
}

TEST_CASE("rotating-frame controller field vanishes at the setpoint", "[controller]") {
  const Setpoints sp = nominal_setpoints();
  const Eigen::VectorXd du =
      controller_rhs(sp.u_ref, sp.v_ref, sp, nominal_gains(), 0.37, Frame::Dq);
  CHECK(du.norm() <= 1e-12 * sp.u_ref.norm());
}

TEST_CASE("single-node rotating-frame field with angle offset", "[controller]") {
  NetworkSpec spec;
  spec.node_count = 1;
  spec.capacitance = {1e-3};
  spec.conductance = {0.5};
  const Setpoints sp = derive_setpoints(spec, Eigen::VectorXd::Constant(1, 20.0),
                                        Eigen::VectorXd::Zero(1), kOmega);
  ControllerGains g{{0.1}, {0.03}};
  Eigen::VectorXd u(2);
  u << 20.0 * std::cos(0.1), 20.0 * std::sin(0.1);  // r = r*, angle error 0.1
  const Eigen::VectorXd du = controller_rhs(u, Eigen::VectorXd::Zero(2), sp, g, 0.0, Frame::Dq);
  // -(0.03 * 0.1) J2 u
  CHECK(du[0] == Approx(0.003 * u[1]).epsilon(1e-12));
  CHECK(du[1] == Approx(-0.003 * u[0]).epsilon(1e-12));
}

TEST_CASE("controller field is finite at a zero block", "[controller]") {
  const Setpoints sp = nominal_setpoints();
  Eigen::VectorXd u = sp.u_ref;
  u.segment<2>(0).setZero();
  const Eigen::VectorXd du = controller_rhs(u, sp.v_ref, sp, nominal_gains(), 0.0, Frame::Dq);
  CHECK(du.allFinite());
}

TEST_CASE("polar field examples", "[controller]") {
  const Setpoints sp = nominal_setpoints();
  const ControllerGains g = nominal_gains();
  Eigen::VectorXd r = Eigen::VectorXd::Constant(3, 20.0);
  Eigen::VectorXd th = Eigen::VectorXd::Constant(3, 1.1780);
  Eigen::VectorXd dr, dth;
  polar_rhs(r, th, sp, g, 0.0, dr, dth);
  CHECK(dr.norm() == 0.0);
  for (int k = 0; k < 3; ++k) CHECK(dth[k] == Approx(kOmega));

  r = Eigen::VectorXd::Constant(3, 40.0);
  polar_rhs(r, th, sp, g, 0.0, dr, dth);
  for (int k = 0; k < 3; ++k) CHECK(dr[k] == Approx(-0.2 * 20.0));

  th = Eigen::VectorXd::Constant(3, 1.2780);
  r = Eigen::VectorXd::Constant(3, 20.0);
  polar_rhs(r, th, sp, g, 0.0, dr, dth);
  for (int k = 0; k < 3; ++k) CHECK(dth[k] == Approx(kOmega - 0.003));

  r[1] = -1.0;
  CHECK_THROWS(polar_rhs(r, th, sp, g, 0.0, dr, dth));
}

// With the voltage feedback forced to zero, the rectangular and polar forms
// describe the same flow; integrate both and compare.
TEST_CASE("polar and rectangular integrations agree", "[controller][property]") {
  const Setpoints sp = nominal_setpoints();
  const ControllerGains g = nominal_gains();

  struct RectNoVoltage {
    const Setpoints& sp;
    const ControllerGains& g;
    Eigen::VectorXd zero{Eigen::VectorXd::Zero(6)};
    void operator()(double t, const Eigen::VectorXd& u, Eigen::VectorXd& du) {
      controller_rhs_into(u, zero, sp, g, t, Frame::AlphaBeta, du);
    }
  } rect{sp, g};

  struct Polar {
    const Setpoints& sp;
    const ControllerGains& g;
    Eigen::VectorXd dr{3}, dth{3};
    void operator()(double t, const Eigen::VectorXd& x, Eigen::VectorXd& dx) {
      polar_rhs(x.segment(0, 3), x.segment(3, 3), sp, g, t, dr, dth);
      dx.resize(6);
      dx << dr, dth;
    }
  } polar{sp, g};

  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> ur(5.0, 45.0), uth(-1.5, 1.5);
  for (int trial = 0; trial < 4; ++trial) {
    Eigen::VectorXd rect_x(6), polar_x(6);
    for (int k = 0; k < 3; ++k) {
      const double r0 = ur(rng);
      const double th0 = 1.1780 + uth(rng);
      rect_x[2 * k] = r0 * std::cos(th0);
      rect_x[2 * k + 1] = r0 * std::sin(th0);
      polar_x[k] = r0;
      polar_x[3 + k] = th0;
    }
    const double dt = 1e-5, t_end = 0.2;
    integrate_observe(rect, rect_x, 0.0, t_end, dt, 1 << 30, [](double, const Eigen::VectorXd&) {});
    integrate_observe(polar, polar_x, 0.0, t_end, dt, 1 << 30, [](double, const Eigen::VectorXd&) {});
    for (int k = 0; k < 3; ++k) {
      const double r_rect = std::hypot(rect_x[2 * k], rect_x[2 * k + 1]);
      const double th_rect = std::atan2(rect_x[2 * k + 1], rect_x[2 * k]);
      CHECK(r_rect == Approx(polar_x[k]).epsilon(1e-6));
      CHECK(std::abs(wrap_angle(th_rect - polar_x[3 + k])) < 1e-6);
    }
  }
}

TEST_CASE("setpoint inputs are validated", "[controller]") {
  CHECK_THROWS(derive_setpoints(ring3(), Eigen::VectorXd::Constant(3, -1.0),
                                Eigen::VectorXd::Zero(3), kOmega));
  CHECK_THROWS(derive_setpoints(ring3(), Eigen::VectorXd::Constant(3, 20.0),
                                Eigen::VectorXd::Zero(3), -1.0));
  ControllerGains bad{{0.1, -0.1, 0.1}, {0.03, 0.03, 0.03}};
  CHECK_THROWS(bad.validate(3));
}
