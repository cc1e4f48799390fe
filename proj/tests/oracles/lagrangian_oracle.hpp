#pragma once

// Brute-force inverse dynamics used as an oracle. Builds everything from
// finite differences of the kinematic map and of the energies:
//
//   tau = M(q) qdd + dM/dt qd - 1/2 d/dq (qd' M qd) + dV/dq
//
// with M assembled from numerically differentiated link jacobians. Shares only
// forward kinematics with the library (which is itself checked against a
// stepwise transform composition), never the RNEA path under test.

#include <Eigen/Dense>

#include "tactorque/dynamics.hpp"

namespace tactorque::oracle {

inline Vec3 vee(const Mat3& w) {
  return Vec3(0.5 * (w(2, 1) - w(1, 2)), 0.5 * (w(0, 2) - w(2, 0)),
              0.5 * (w(1, 0) - w(0, 1)));
}

// 3 x n jacobians of link COM position and orientation, by central differences.
inline void fd_link_jacobians(const RobotModel& model, const Vec& q, int link,
                              Mat& jv, Mat& jw, double h = 1e-5) {
  const int n = model.n();
  jv.setZero(3, n);
  jw.setZero(3, n);
  const Mat3 r0 = forward_kinematics(model, q, link, model.joints[link].com).second;
  for (int k = 0; k < n; ++k) {
    Vec qp = q, qm = q;
    qp[k] += h;
    qm[k] -= h;
    auto [pp, rp] = forward_kinematics(model, qp, link, model.joints[link].com);
    auto [pm, rm] = forward_kinematics(model, qm, link, model.joints[link].com);
    jv.col(k) = (pp - pm) / (2 * h);
    jw.col(k) = vee(((rp - rm) / (2 * h)) * r0.transpose());
  }
}

inline Mat fd_mass_matrix(const RobotModel& model, const Vec& q) {
  const int n = model.n();
  Mat m = Mat::Zero(n, n);
  Mat jv, jw;
  for (int link = 0; link < n; ++link) {
    const auto& jp = model.joints[link];
    fd_link_jacobians(model, q, link, jv, jw);
    const Mat3 r = forward_kinematics(model, q, link, jp.com).second;
    const Mat3 inertia_base = r * jp.inertia * r.transpose();
    m += jp.mass * jv.transpose() * jv + jw.transpose() * inertia_base * jw;
  }
  for (int j = 0; j < n; ++j) m(j, j) += model.joints[j].reflected_inertia;
  return m;
}

inline double fd_potential(const RobotModel& model, const Vec& q) {
  double v = 0.0;
  for (int link = 0; link < model.n(); ++link) {
    const Vec3 p = forward_kinematics(model, q, link, model.joints[link].com).first;
    v -= model.joints[link].mass * model.gravity.dot(p);
  }
  return v;
}

inline Vec fd_gravity(const RobotModel& model, const Vec& q, double h = 1e-5) {
  const int n = model.n();
  Vec g(n);
  for (int k = 0; k < n; ++k) {
    Vec qp = q, qm = q;
    qp[k] += h;
    qm[k] -= h;
    g[k] = (fd_potential(model, qp) - fd_potential(model, qm)) / (2 * h);
  }
  return g;
}

// Outer step is wide on purpose: differencing the already-differenced mass
// matrix amplifies its rounding noise by 1/(2h).
inline Vec fd_inverse_dynamics(const RobotModel& model, const Vec& q,
                               const Vec& qd, const Vec& qdd, double h = 1e-4) {
  const int n = model.n();
  const Mat m = fd_mass_matrix(model, q);

  Mat mdot = Mat::Zero(n, n);   // sum_k dM/dq_k qd_k
  Vec dkin(n);                  // d/dq (qd' M qd)
  for (int k = 0; k < n; ++k) {
    Vec qp = q, qm = q;
    qp[k] += h;
    qm[k] -= h;
    const Mat dm = (fd_mass_matrix(model, qp) - fd_mass_matrix(model, qm)) / (2 * h);
    mdot += dm * qd[k];
    dkin[k] = qd.dot(dm * qd);
  }
  return m * qdd + mdot * qd - 0.5 * dkin + fd_gravity(model, q, h);
}

}  // namespace tactorque::oracle
