// Trajectory CSV emission and key=value report files. Numbers are printed
// with 15 significant digits: identical runs produce identical bytes, and
// the emitted rows stay numerically self-consistent well below 1e-12.

#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lwvoc/analysis.hpp"
#include "lwvoc/dynamics.hpp"

namespace lwvoc {

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.15g", v);
  return buf;
}

// Columns: t, then per node u_alpha_k, u_beta_k, v_alpha_k, v_beta_k, r_k,
// theta_k (wrapped), theta_err_k (wrapped tracking error), P_k, Q_k; line
// currents iO_alpha_e, iO_beta_e appended on request. The tracking error is
// wrap(theta_k - omega t - theta0*_k) in the stationary frame and
// wrap(theta_k - theta0*_k) in the rotating one.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj, const Setpoints& sp,
                                 bool with_lines) {
  const int n = traj.node_count;
  const int m = traj.edge_count;
  const bool lines = with_lines && m > 0;
  os << "t";
  for (int k = 1; k <= n; ++k)
    os << ",u_alpha_" << k << ",u_beta_" << k << ",v_alpha_" << k << ",v_beta_" << k << ",r_" << k
       << ",theta_" << k << ",theta_err_" << k << ",P_" << k << ",Q_" << k;
  if (lines)
    for (int e = 1; e <= m; ++e) os << ",iO_alpha_" << e << ",iO_beta_" << e;
  os << "\n";

  const Frame frame = model_frame(traj.model);
  for (size_t i = 0; i < traj.sample_count(); ++i) {
    const double t = traj.times[i];
    const Eigen::VectorXd& x = traj.states[i];
    const auto u = x.segment(0, 2 * n);
    const auto v = x.segment(2 * n, 2 * n);
    const std::vector<DroopSample> d = droop_quantities(u, v, sp, frame, t);
    os << format_number(t);
    for (int k = 0; k < n; ++k) {
      const double ref = frame == Frame::AlphaBeta ? sp.omega * t + sp.phase[k] : sp.phase[k];
      const std::string ua = format_number(u[2 * k]);
      const std::string ub = format_number(u[2 * k + 1]);
      // derive r and theta from the printed current so every row stays
      // self-consistent at the emitted precision
      const double ua_r = std::strtod(ua.c_str(), nullptr);
      const double ub_r = std::strtod(ub.c_str(), nullptr);
      const double r = std::hypot(ua_r, ub_r);
      const double theta = (r > 0.0) ? std::atan2(ub_r, ua_r) : ref;
      os << ',' << ua << ',' << ub << ',' << format_number(v[2 * k]) << ','
         << format_number(v[2 * k + 1]) << ',' << format_number(r) << ','
         << format_number(wrap_angle(theta)) << ',' << format_number(wrap_angle(theta - ref))
         << ',' << format_number(d[k].p) << ',' << format_number(d[k].q);
    }
    if (lines)
      for (int e = 0; e < m; ++e)
        os << ',' << format_number(x[4 * n + 2 * e]) << ',' << format_number(x[4 * n + 2 * e + 1]);
    os << "\n";
  }
}

inline void write_trajectory_csv(const std::string& path, const Trajectory& traj,
                                 const Setpoints& sp, bool with_lines) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  write_trajectory_csv(os, traj, sp, with_lines);
}

using KeyValues = std::vector<std::pair<std::string, std::string>>;

inline void write_kv(const std::string& path, const KeyValues& kv) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  for (const auto& [k, v] : kv) os << k << "=" << v << "\n";
}

}  // namespace lwvoc
