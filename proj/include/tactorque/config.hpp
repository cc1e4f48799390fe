#pragma once

#include <string>
#include <vector>

#include "tactorque/dynamics.hpp"
#include "tactorque/friction.hpp"
#include "tactorque/skin.hpp"

namespace tactorque {

// Joint-space PID with gravity feedforward. The integral term only
// accumulates near standstill (|qd| < integrator_gate): it exists to give the
// position loop authority over the stiction spring, and freezing it during
// motion avoids windup against kinetic friction.
struct ServoParams {
  Vec kp, kd, ki;
  Vec tau_max;          // element-wise clamp on the servo output [N m]
  Vec integral_limit;   // clamp on the integral contribution [N m]
  double integrator_gate = 0.02;  // [rad/s]
  double integral_slew = 50.0;    // ramp-rate cap on the integral term [N m / s]
  void validate(int n) const;
};

struct PlantParams {
  double dt = 2.5e-3;               // motor tick (400 Hz)
  double skin_dt = 1e-3;            // skin frame period (1 kHz)
  double current_noise_std = 5.0;   // current units
  double vel_filter_hz = 25.0;      // first-order low-pass on backward-diff qd
  double acc_filter_hz = 15.0;      // second stage for qdd
  void validate() const;
};

struct EstimatorParams {
  double static_threshold = 1e-4;   // |qd| below this counts as static [rad/s]
  int transition_window = 30;       // samples after a static->kinetic crossing
  double contact_threshold = 0.1;   // pressure units
  double contact_hysteresis = 0.04; // release band below the threshold
  double deadband_k = 1.5;          // multiples of per-joint sigma
  double debounce_time = 0.05;      // dynamic -> static-no-contact delay [s]
  void validate() const;
};

struct CompensatorParams {
  int window = 30;        // input length L
  int channels = 32;
  int layers = 4;         // dilations 1, 2, 4, ... doubling per layer
  int kernel = 4;
  double w_low = 1.0;
  double w_high = 2.0;
  double split_hz = 5.0;        // zero-phase split cutoff
  double gate_threshold = 1e-4; // residual passes into the input when |qd| <= this
  bool zeroed_channel = false;  // friction_channel = latched (false) | zeroed (true)
  int dynamic_downsample = 10;  // keep 1 in N all-moving windows
  double lr = 0.02;
  double momentum = 0.9;
  int batch = 64;
  int epochs = 6;
  int receptive_field() const;  // 1 + (kernel-1) * (2^layers - 1)
  void validate() const;
};

struct ControlParams {
  double mass = 0.5;     // admittance inertia
  double damping = 4.0;  // admittance damping
  double v_limit = 0.8;  // [rad/s]
  void validate() const;
};

struct ScenarioParams {
  double rise_time = 0.2;  // smoothstep envelope on scripted forces [s]
};

struct SystemConfig {
  RobotModel model;
  FrictionParams friction;  // plant ground-truth curve, current units
  BristleParams bristle;    // sigma0/sigma1 of the ground-truth bristle
  PadLayout pads;
  ServoParams servo;
  PlantParams plant;
  EstimatorParams estimator;
  CompensatorParams compensator;
  ControlParams control;
  ScenarioParams scenario;

  bool friction_enabled() const { return friction.breakaway.maxCoeff() > 0.0; }
  void validate() const;
};

// Parses `key = value` lines ('#' starts a comment). `overrides` are further
// key=value strings applied on top (CLI --set). Unknown keys are rejected.
SystemConfig parse_config_text(const std::string& text,
                               const std::vector<std::string>& overrides = {});
SystemConfig load_config(const std::string& path,
                         const std::vector<std::string>& overrides = {});

}  // namespace tactorque
