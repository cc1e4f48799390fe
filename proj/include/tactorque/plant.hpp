#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "tactorque/config.hpp"
#include "tactorque/scenario.hpp"
#include "tactorque/skin.hpp"

namespace tactorque {

struct Command {
  Vec q_cmd;
  Vec qd_cmd;
};

// Dense command track at the motor rate, column k = command for tick k.
struct CommandTrack {
  Mat q_cmd;   // n x T
  Mat qd_cmd;  // n x T
  int length() const { return static_cast<int>(q_cmd.cols()); }
  Command at(int k) const;  // clamps past the end (hold the last command)
};

struct MotorSample {
  double t = 0.0;
  Vec current;  // servo torque seen through the drive, plus sensor noise
  Vec q;        // joint encoder [rad]
  Vec qd;       // backward difference, first-order low-passed [rad/s]
  Vec qdd;      // difference of qd above, low-passed again [rad/s^2]
};

struct PlantTruth {
  Vec q, qd;     // true state after the step
  Vec tau_fric;  // bristle friction torque, current units
  // External joint torque in the convention the current residual reports:
  // a contact force F on the arm enters the dynamics as +J^T F, but it
  // *lowers* the servo torque needed to hold the pose, so the measured
  // current moves by -J^T F. tau_ext stores that sensed value (-J^T F,
  // current units); estimator outputs are directly comparable to it.
  Vec tau_ext;
  Vec3 force_base = Vec3::Zero();  // net scripted force on the arm, base frame
  int pad_id = -1;                 // strongest active scripted pad, -1 if none
};

struct PlantOutput {
  MotorSample motor;
  std::vector<SkinFrameSample> skin;  // frames since the previous tick, oldest first
  PlantTruth truth;
};

// Rigid-body arm with a bristle friction element per joint, a PID+gravity
// servo, scripted pad forces, and the sensor stack (noisy current, filtered
// velocity/acceleration estimates, noisy pad pressures at their own rate).
// Semi-implicit Euler at plant.dt. All randomness comes from the seed given
// at construction; identical (config, script, commands, seed) give
// bit-identical outputs.
class Plant {
 public:
  Plant(const SystemConfig& cfg, std::uint64_t seed);

  void set_script(const ForceScript& script);

  // Teleports the true state and clears every internal state (bristle,
  // integrator, filters, clock). Does not reset the noise stream.
  void set_state(const Vec& q, const Vec& qd);

  PlantOutput step(const Command& cmd);
  PlantOutput step_free();  // servo off

  double time() const { return t_; }
  const Vec& q() const { return q_; }
  const Vec& qd() const { return qd_; }
  const BristleState& bristle() const { return z_; }
  // Elastic energy parked in the bristle springs [J].
  double stored_bristle_energy() const;
  int limit_hits() const { return limit_hits_; }

 private:
  PlantOutput step_impl(const Command* cmd);

  SystemConfig cfg_;
  ForceScript script_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> gauss_{0.0, 1.0};

  Vec q_, qd_;
  BristleState z_;
  Vec integ_;          // integral torque contribution [N m]
  double t_ = 0.0;
  long tick_ = 0;
  long next_skin_ = 1;  // index of the next skin frame (t = next_skin_ * skin_dt)
  Vec q_prev_;         // encoder value at the previous tick
  Vec qd_filt_, qd_filt_prev_, qdd_filt_;
  double alpha_v_ = 0.0, alpha_a_ = 0.0;
  int limit_hits_ = 0;
};

struct ExcitationParams {
  double v_lo = 0.05, v_hi = 0.5;      // cruise speed range [rad/s]
  double hold_lo = 0.5, hold_hi = 2.0; // dwell duration range [s]
  double move_lo = 0.8, move_hi = 2.5; // move duration range [s]
  double margin = 0.15;                // stay this far inside the joint limits
};

// Hold one pose for the whole track.
CommandTrack hold_track(const Vec& q, double duration, double dt);

// Seeded hold-then-move schedule per joint: trapezoidal velocity ramps with
// randomized speed, duration, and direction, separated by standstill dwells.
// Every 10 s window contains at least two full dwells (period <= 4.5 s), so
// static-phase data shows up throughout a recording.
CommandTrack excitation_track(const RobotModel& model, std::uint64_t seed,
                              double duration, double dt,
                              const ExcitationParams& params = {});

}  // namespace tactorque
