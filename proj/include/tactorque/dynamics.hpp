#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

namespace tactorque {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// One revolute joint plus the link it moves. The joint frame is reached from
// the parent frame by translating `origin` and rotating `axis` by q.
struct JointParams {
  Vec3 axis = Vec3::UnitZ();      // rotation axis in parent frame, unit norm
  Vec3 origin = Vec3::Zero();     // joint origin offset in parent frame [m]
  double mass = 0.0;              // link mass [kg]
  Vec3 com = Vec3::Zero();        // link COM in link frame [m]
  Mat3 inertia = Mat3::Zero();    // inertia about COM in link frame [kg m^2]
  double reflected_inertia = 0.0; // gearbox/rotor inertia seen at the joint [kg m^2]
  double limit_lo = -3.14;
  double limit_hi = 3.14;
};

struct RobotModel {
  std::vector<JointParams> joints;
  Vec3 gravity = Vec3(0, 0, -9.81);  // gravitational acceleration [m/s^2]
  double torque_constant = 1.0;      // torque per current unit

  int n() const { return static_cast<int>(joints.size()); }
  void validate() const;  // throws ContractError on bad axes/masses/inertias
};

struct JointState {
  double t = 0.0;
  Vec q, qd, qdd;
  void validate(int n) const;
};

// Right-handed frame at a contact: columns are (tangent, tangent, outward normal).
struct ContactFrame {
  Vec3 point = Vec3::Zero();          // base frame [m]
  Mat3 rotation = Mat3::Identity();   // base-from-contact rotation
  void validate() const;
};

// All joint frames of the chain at configuration q, expressed in base.
struct LinkFrames {
  std::vector<Vec3> joint_origin;   // origin of joint i
  std::vector<Mat3> orientation;    // link i orientation
  std::vector<Vec3> axis;           // joint i axis, unit
};

LinkFrames chain_frames(const RobotModel& model, const Vec& q);

// Pose of a frame rigidly attached to `link` (0-based) at a local offset.
std::pair<Vec3, Mat3> forward_kinematics(const RobotModel& model, const Vec& q,
                                         int link, const Vec3& local_offset,
                                         const Mat3& local_rot = Mat3::Identity());

// Joint torques that realize (q, qd, qdd) under gravity: M(q)qdd + C(q,qd)qd + G(q).
Vec inverse_dynamics(const RobotModel& model, const JointState& s);

// Gravity load G(q); identical to inverse_dynamics with qd = qdd = 0.
Vec gravity_vector(const RobotModel& model, const Vec& q);

// M(q) assembled by probing inverse_dynamics columns with unit accelerations.
Mat mass_matrix(const RobotModel& model, const Vec& q);

// C(q,qd)qd + G(q); inverse_dynamics with qdd = 0.
Vec bias_forces(const RobotModel& model, const Vec& q, const Vec& qd);

// 6 x n jacobian of a point rigidly attached to `link`, rows expressed in the
// contact frame: rows 0-2 linear, rows 3-5 angular. Joints distal to `link`
// contribute zero columns.
Mat contact_jacobian(const RobotModel& model, const Vec& q, int link,
                     const ContactFrame& frame);

// Kinetic + potential energy of the chain (includes reflected rotor terms).
double mechanical_energy(const RobotModel& model, const Vec& q, const Vec& qd);

}  // namespace tactorque
