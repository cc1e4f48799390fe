#include "tactorque/dynamics.hpp"

#include <cmath>

#include "tactorque/errors.hpp"

namespace tactorque {

void RobotModel::validate() const {
  require(!joints.empty(), "robot model has no joints");
  require(gravity.allFinite(), "gravity must be finite");
  require(std::isfinite(torque_constant) && torque_constant > 0.0,
          "torque constant must be positive");
  for (size_t i = 0; i < joints.size(); ++i) {
    const auto& j = joints[i];
    const std::string tag = "joint " + std::to_string(i + 1) + ": ";
    require(j.axis.allFinite() && std::abs(j.axis.norm() - 1.0) < 1e-9,
            tag + "axis must be unit norm");
    require(j.origin.allFinite() && j.com.allFinite(), tag + "non-finite geometry");
    require(std::isfinite(j.mass) && j.mass >= 0.0, tag + "mass must be >= 0");
    require(j.inertia.allFinite(), tag + "non-finite inertia");
    require((j.inertia - j.inertia.transpose()).lpNorm<Eigen::Infinity>() < 1e-12,
            tag + "inertia must be symmetric");
    Eigen::SelfAdjointEigenSolver<Mat3> es(j.inertia);
    require(es.eigenvalues().minCoeff() > -1e-12,
            tag + "inertia must be positive semidefinite");
    require(j.reflected_inertia >= 0.0, tag + "reflected inertia must be >= 0");
    require(j.limit_lo < j.limit_hi, tag + "empty joint limit range");
  }
}

void JointState::validate(int n) const {
  require(q.size() == n && qd.size() == n && qdd.size() == n,
          "joint state dimension mismatch");
  require(q.allFinite() && qd.allFinite() && qdd.allFinite(),
          "joint state must be finite");
}

void ContactFrame::validate() const {
  require(point.allFinite(), "contact point must be finite");
  require((rotation * rotation.transpose() - Mat3::Identity())
                  .lpNorm<Eigen::Infinity>() < 1e-9,
          "contact rotation must be orthonormal");
  require(rotation.determinant() > 0.0, "contact rotation must be right-handed");
}

LinkFrames chain_frames(const RobotModel& model, const Vec& q) {
  const int n = model.n();
  require(q.size() == n, "configuration dimension mismatch");
  LinkFrames f;
  f.joint_origin.resize(n);
  f.orientation.resize(n);
  f.axis.resize(n);
  Vec3 p = Vec3::Zero();
  Mat3 r = Mat3::Identity();
  for (int i = 0; i < n; ++i) {
    const auto& j = model.joints[i];
    p += r * j.origin;
    const Vec3 axis_base = r * j.axis;
    r = r * Eigen::AngleAxisd(q[i], j.axis).toRotationMatrix();
    f.joint_origin[i] = p;
    f.orientation[i] = r;
    f.axis[i] = axis_base;
  }
  return f;
}

std::pair<Vec3, Mat3> forward_kinematics(const RobotModel& model, const Vec& q,
                                         int link, const Vec3& local_offset,
                                         const Mat3& local_rot) {
  require(link >= 0 && link < model.n(), "link index out of range");
  const LinkFrames f = chain_frames(model, q);
  return {f.joint_origin[link] + f.orientation[link] * local_offset,
          f.orientation[link] * local_rot};
}

Vec inverse_dynamics(const RobotModel& model, const JointState& s) {
  const int n = model.n();
  s.validate(n);
  const LinkFrames f = chain_frames(model, s.q);

  std::vector<Vec3> omega(n), alpha(n), acc_com(n), com(n), force(n), moment(n);
  Vec3 w = Vec3::Zero();          // angular velocity of the parent link
  Vec3 dw = Vec3::Zero();         // angular acceleration of the parent link
  Vec3 a = -model.gravity;        // linear acceleration of the parent joint origin
  Vec3 p_prev = Vec3::Zero();

  for (int i = 0; i < n; ++i) {
    const auto& j = model.joints[i];
    const Vec3& z = f.axis[i];
    const Vec3& p = f.joint_origin[i];
    const Vec3 dp = p - p_prev;

    a = a + dw.cross(dp) + w.cross(w.cross(dp));   // revolute: origin rides the parent
    dw = dw + z * s.qdd[i] + w.cross(z) * s.qd[i];
    w = w + z * s.qd[i];

    com[i] = p + f.orientation[i] * j.com;
    const Vec3 rc = com[i] - p;
    acc_com[i] = a + dw.cross(rc) + w.cross(w.cross(rc));

    const Mat3 inertia_base =
        f.orientation[i] * j.inertia * f.orientation[i].transpose();
    omega[i] = w;
    alpha[i] = dw;
    force[i] = j.mass * acc_com[i];
    moment[i] = inertia_base * dw + w.cross(inertia_base * w);
    p_prev = p;
  }

  Vec tau(n);
  Vec3 f_child = Vec3::Zero();
  Vec3 n_child = Vec3::Zero();   // moment about the child joint origin
  for (int i = n - 1; i >= 0; --i) {
    const Vec3& p = f.joint_origin[i];
    Vec3 n_here = moment[i] + (com[i] - p).cross(force[i]);
    if (i + 1 < n) {
      n_here += n_child + (f.joint_origin[i + 1] - p).cross(f_child);
    }
    const Vec3 f_here = force[i] + f_child;
    tau[i] = f.axis[i].dot(n_here) + model.joints[i].reflected_inertia * s.qdd[i];
    f_child = f_here;
    n_child = n_here;
  }
  return tau;
}

Vec gravity_vector(const RobotModel& model, const Vec& q) {
  JointState s;
  s.q = q;
  s.qd = Vec::Zero(model.n());
  s.qdd = Vec::Zero(model.n());
  return inverse_dynamics(model, s);
}

Mat mass_matrix(const RobotModel& model, const Vec& q) {
  const int n = model.n();
  RobotModel no_g = model;
  no_g.gravity.setZero();
  JointState s;
  s.q = q;
  s.qd = Vec::Zero(n);
  Mat m(n, n);
  for (int j = 0; j < n; ++j) {
    s.qdd = Vec::Zero(n);
    s.qdd[j] = 1.0;
    m.col(j) = inverse_dynamics(no_g, s);
  }
  return m;
}

Vec bias_forces(const RobotModel& model, const Vec& q, const Vec& qd) {
  JointState s;
  s.q = q;
  s.qd = qd;
  s.qdd = Vec::Zero(model.n());
  return inverse_dynamics(model, s);
}

Mat contact_jacobian(const RobotModel& model, const Vec& q, int link,
                     const ContactFrame& frame) {
  const int n = model.n();
  require(link >= 0 && link < n, "link index out of range");
  frame.validate();
  const LinkFrames f = chain_frames(model, q);
  Mat j = Mat::Zero(6, n);
  for (int i = 0; i <= link; ++i) {
    j.block<3, 1>(0, i) = f.axis[i].cross(frame.point - f.joint_origin[i]);
    j.block<3, 1>(3, i) = f.axis[i];
  }
  const Mat3 rt = frame.rotation.transpose();
  j.topRows(3) = rt * j.topRows(3);
  j.bottomRows(3) = rt * j.bottomRows(3);
  return j;
}

double mechanical_energy(const RobotModel& model, const Vec& q, const Vec& qd) {
  const LinkFrames f = chain_frames(model, q);
  double v = 0.0;
  for (int i = 0; i < model.n(); ++i) {
    const Vec3 com = f.joint_origin[i] + f.orientation[i] * model.joints[i].com;
    v -= model.joints[i].mass * model.gravity.dot(com);
  }
  return 0.5 * qd.dot(mass_matrix(model, q) * qd) + v;
}

}  // namespace tactorque
