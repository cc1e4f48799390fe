#pragma once

#include <vector>

#include "tactorque/dynamics.hpp"

namespace tactorque {

// Static friction curve parameters, per joint, in current units. The load
// terms scale with the magnitude of the gravity torque at the joint.
struct FrictionParams {
  Vec coulomb;       // tau_c >= 0
  Vec breakaway;     // tau_s >= tau_c
  Vec stribeck_vel;  // > 0 [rad/s]
  Vec shape;         // delta > 0
  Vec viscous;       // b >= 0 [current units per rad/s]
  Vec load_coulomb;  // alpha_c [current units per N m]
  Vec load_viscous;  // alpha_v

  int n() const { return static_cast<int>(coulomb.size()); }
  void validate() const;
  static FrictionParams zeros(int n);
};

// tau = [tau_c + (tau_s - tau_c) exp(-|qd/qd_s|^delta)] sgn(qd) + b qd, sgn(0) = 0.
double stribeck_scalar(double tau_c, double tau_s, double qd_s, double delta,
                       double b, double qd);
Vec stribeck_friction(const FrictionParams& p, const Vec& qd);

// Substitutes tau_c + alpha_c |G| and b + alpha_v |G|; other fields unchanged.
FrictionParams load_adjusted_params(const FrictionParams& p, const Vec& g_abs);

// Bristle (internal state) friction used as plant ground truth.
struct BristleParams {
  Vec stiffness;  // sigma0 [current units / rad]
  Vec damping;    // sigma1 [current units s / rad]
  void validate(int n) const;
};

// sigma0 = 100 tau_s / qd_s, sigma1 = sqrt(sigma0).
BristleParams default_bristle(const FrictionParams& p);

struct BristleState {
  Vec z;  // bristle deflection [rad]
  static BristleState zero(int n) { return {Vec::Zero(n)}; }
};

// One integration step of dz = qd - sigma0 |qd| z / g(qd); returns the friction
// torque sigma0 z + sigma1 dz + b_load qd. `loaded` must already be
// load-adjusted. The z update is implicit, which keeps |z| <= g_max/sigma0 for
// any step size.
Vec hysteretic_step(BristleState& state, const BristleParams& bp,
                    const FrictionParams& loaded, const Vec& qd, double dt);

// Least-squares identification of the static curve from moving samples.
struct FrictionSample {
  double qd;     // measured joint velocity [rad/s]
  double g_abs;  // |G(q)| at the joint [N m]
  double tau;    // observed friction torque [current units]
};

struct IdentifiedFriction {
  FrictionParams params;
  Vec rmse;  // per-joint fit residual
};

// Throws IdentifiabilityError unless every joint has both velocity signs
// represented (>= 20 samples each).
IdentifiedFriction identify_friction(
    const std::vector<std::vector<FrictionSample>>& per_joint);

}  // namespace tactorque
