#pragma once

// Reference 4-DoF arm shared by the test suites. Mirrors configs/reference.cfg;
// test_config cross-checks the two stay in sync.

#include "tactorque/config.hpp"
#include "tactorque/dynamics.hpp"
#include "tactorque/skin.hpp"

namespace tactorque::testing {

inline RobotModel reference_model() {
  RobotModel m;
  m.gravity = Vec3(0, 0, -9.81);
  m.torque_constant = 1.0;
  m.joints.resize(4);

  auto& j1 = m.joints[0];
  j1.axis = Vec3(0, 0, 1);
  j1.origin = Vec3(0, 0, 0);
  j1.mass = 2.0;
  j1.com = Vec3(0, 0, 0.15);
  j1.inertia = Vec3(0.015, 0.015, 0.001).asDiagonal();
  j1.reflected_inertia = 2.5;
  j1.limit_lo = -2.6;
  j1.limit_hi = 2.6;

  auto& j2 = m.joints[1];
  j2.axis = Vec3(0, 1, 0);
  j2.origin = Vec3(0, 0, 0.30);
  j2.mass = 1.5;
  j2.com = Vec3(0.15, 0, 0);
  j2.inertia = Vec3(0.001, 0.01125, 0.01125).asDiagonal();
  j2.reflected_inertia = 2.5;
  j2.limit_lo = -2.6;
  j2.limit_hi = 2.6;

  auto& j3 = m.joints[2];
  j3.axis = Vec3(0, 1, 0);
  j3.origin = Vec3(0.30, 0, 0);
  j3.mass = 1.0;
  j3.com = Vec3(0.125, 0, 0);
  j3.inertia = Vec3(0.0006, 0.0052, 0.0052).asDiagonal();
  j3.reflected_inertia = 1.6;
  j3.limit_lo = -2.6;
  j3.limit_hi = 2.6;

  auto& j4 = m.joints[3];
  j4.axis = Vec3(1, 0, 0);
  j4.origin = Vec3(0.25, 0, 0);
  j4.mass = 0.5;
  j4.com = Vec3(0.05, 0, 0);
  j4.inertia = Vec3(0.0003, 0.00042, 0.00042).asDiagonal();
  j4.reflected_inertia = 0.9;
  j4.limit_lo = -2.6;
  j4.limit_hi = 2.6;

  return m;
}

// Four pads per link on links 2-4, 90 degrees apart around the link axis.
inline PadLayout reference_pads() {
  PadLayout layout;
  struct Ring {
    int link;
    double mid;
    double radius;
  };
  const Ring rings[] = {{1, 0.15, 0.045}, {2, 0.125, 0.040}, {3, 0.05, 0.030}};
  int id = 1;
  for (const Ring& ring : rings) {
    const Vec3 dirs[] = {Vec3(0, 1, 0), Vec3(0, 0, 1), Vec3(0, -1, 0),
                         Vec3(0, 0, -1)};
    for (const Vec3& d : dirs) {
      Pad p;
      p.id = id++;
      p.link = ring.link;
      p.center = Vec3(ring.mid, 0, 0) + ring.radius * d;
      p.normal = d;
      p.area = 0.002;
      p.gain = 0.001;
      p.noise_std = 0.02;
      layout.pads.push_back(p);
    }
  }
  return layout;
}

inline FrictionParams reference_friction() {
  FrictionParams p;
  p.coulomb = Vec(4);
  p.coulomb << 3.0, 4.0, 3.3, 2.0;
  p.breakaway = Vec(4);
  p.breakaway << 4.5, 6.0, 5.0, 3.0;
  p.stribeck_vel = Vec::Constant(4, 0.01);
  p.shape = Vec::Constant(4, 2.0);
  p.viscous = Vec(4);
  p.viscous << 4.0, 5.0, 4.0, 2.5;
  p.load_coulomb = Vec(4);
  p.load_coulomb << 0.12, 0.15, 0.12, 0.08;
  p.load_viscous = Vec(4);
  p.load_viscous << 0.06, 0.08, 0.06, 0.04;
  return p;
}

inline ServoParams reference_servo() {
  ServoParams s;
  s.kp = Vec(4);
  s.kp << 4000, 4000, 2500, 1200;
  s.kd = Vec(4);
  s.kd << 60, 60, 40, 25;
  s.ki = Vec(4);
  s.ki << 100000, 100000, 60000, 30000;
  s.tau_max = Vec(4);
  s.tau_max << 60, 60, 40, 25;
  s.integral_limit = Vec(4);
  s.integral_limit << 20, 20, 15, 10;
  s.integrator_gate = 0.005;
  s.integral_slew = 10.0;
  return s;
}

inline SystemConfig reference_config() {
  SystemConfig cfg;
  cfg.model = reference_model();
  cfg.friction = reference_friction();
  cfg.bristle = default_bristle(cfg.friction);
  cfg.pads = reference_pads();
  cfg.servo = reference_servo();
  cfg.plant.current_noise_std = 0.05;
  cfg.validate();
  return cfg;
}

}  // namespace tactorque::testing
