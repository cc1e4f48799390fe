#include "tactorque/plant.hpp"

#include <algorithm>
#include <cmath>

#include "tactorque/errors.hpp"

namespace tactorque {

Command CommandTrack::at(int k) const {
  const int last = length() - 1;
  require(last >= 0, "empty command track");
  k = std::clamp(k, 0, last);
  return Command{q_cmd.col(k), qd_cmd.col(k)};
}

Plant::Plant(const SystemConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), rng_(seed) {
  cfg_.validate();
  const int n = cfg_.model.n();
  q_ = Vec::Zero(n);
  qd_ = Vec::Zero(n);
  z_ = BristleState::zero(n);
  integ_ = Vec::Zero(n);
  q_prev_ = q_;
  qd_filt_ = Vec::Zero(n);
  qd_filt_prev_ = Vec::Zero(n);
  qdd_filt_ = Vec::Zero(n);
  const double dt = cfg_.plant.dt;
  alpha_v_ = 1.0 - std::exp(-2.0 * M_PI * cfg_.plant.vel_filter_hz * dt);
  alpha_a_ = 1.0 - std::exp(-2.0 * M_PI * cfg_.plant.acc_filter_hz * dt);
}

void Plant::set_script(const ForceScript& script) {
  script.validate(cfg_.pads);
  script_ = script;
}

void Plant::set_state(const Vec& q, const Vec& qd) {
  const int n = cfg_.model.n();
  require(q.size() == n && qd.size() == n, "state dimension mismatch");
  q_ = q;
  qd_ = qd;
  z_ = BristleState::zero(n);
  integ_ = Vec::Zero(n);
  t_ = 0.0;
  tick_ = 0;
  next_skin_ = 1;
  q_prev_ = q;
  qd_filt_ = Vec::Zero(n);
  qd_filt_prev_ = Vec::Zero(n);
  qdd_filt_ = Vec::Zero(n);
}

PlantOutput Plant::step(const Command& cmd) { return step_impl(&cmd); }

PlantOutput Plant::step_free() { return step_impl(nullptr); }

PlantOutput Plant::step_impl(const Command* cmd) {
  const RobotModel& model = cfg_.model;
  const int n = model.n();
  const double dt = cfg_.plant.dt;
  const double kt = model.torque_constant;
  const double t0 = t_;

  const Vec g = gravity_vector(model, q_);

  Vec tau_servo = Vec::Zero(n);
  if (cmd) {
    require(cmd->q_cmd.size() == n && cmd->qd_cmd.size() == n, "command dimension mismatch");
    const Vec e = cmd->q_cmd - q_;
    const double slew = cfg_.servo.integral_slew * dt;
    for (int j = 0; j < n; ++j) {
      if (std::abs(qd_[j]) < cfg_.servo.integrator_gate) {
        integ_[j] += std::clamp(cfg_.servo.ki[j] * e[j] * dt, -slew, slew);
        integ_[j] = std::clamp(integ_[j], -cfg_.servo.integral_limit[j],
                               cfg_.servo.integral_limit[j]);
      }
    }
    tau_servo = cfg_.servo.kp.cwiseProduct(e) +
                cfg_.servo.kd.cwiseProduct(cmd->qd_cmd - qd_) + integ_ + g;
    tau_servo = tau_servo.cwiseMax(-cfg_.servo.tau_max).cwiseMin(cfg_.servo.tau_max);
  }

  // Scripted contact forces, applied at the pad centers.
  Vec tau_ext = Vec::Zero(n);  // +J^T F, N m
  Vec3 force_base = Vec3::Zero();
  int strongest_pad = -1;
  double strongest = 0.0;
  for (const Pad& pad : cfg_.pads.pads) {
    const ForceScript::PadForce pf = script_.pad_state(t0, pad.id);
    if (pf.force.isZero()) continue;
    auto [p_base, r_link] = forward_kinematics(model, q_, pad.link, pad.center);
    const Mat3 r_pad = r_link * frame_from_normal(pad.normal);
    const Vec3 f_base = r_pad * pf.force;
    ContactFrame frame;
    frame.point = p_base;
    frame.rotation = Mat3::Identity();
    const Mat jac = contact_jacobian(model, q_, pad.link, frame);
    tau_ext += jac.topRows(3).transpose() * f_base;
    force_base += f_base;
    if (pf.force.norm() > strongest) {
      strongest = pf.force.norm();
      strongest_pad = pad.id;
    }
  }

  Vec tau_fric_units = Vec::Zero(n);
  if (cfg_.friction_enabled()) {
    const FrictionParams loaded = load_adjusted_params(cfg_.friction, (g / kt).cwiseAbs());
    tau_fric_units = hysteretic_step(z_, cfg_.bristle, loaded, qd_, dt);
  }

  const Mat m = mass_matrix(model, q_);
  JointState st;
  st.t = t0;
  st.q = q_;
  st.qd = qd_;
  st.qdd = Vec::Zero(n);
  const Vec bias = inverse_dynamics(model, st);  // C(q,qd) qd + G(q)
  const Vec qdd = m.ldlt().solve(tau_servo + tau_ext - bias - kt * tau_fric_units);

  qd_ += dt * qdd;
  q_ += dt * qd_;
  for (int j = 0; j < n; ++j) {
    const JointParams& jp = model.joints[j];
    if (q_[j] < jp.limit_lo || q_[j] > jp.limit_hi) {
      q_[j] = std::clamp(q_[j], jp.limit_lo, jp.limit_hi);
      qd_[j] = 0.0;
      ++limit_hits_;
    }
  }
  ++tick_;
  t_ = dt * static_cast<double>(tick_);  // no cumulative rounding on long runs

  PlantOutput out;

  // Skin frames run on their own clock; every frame due in (t0, t_] is
  // emitted, pads sampled in layout order so the noise stream is stable.
  const double skin_dt = cfg_.plant.skin_dt;
  while (static_cast<double>(next_skin_) * skin_dt <= t_ + 1e-12) {
    SkinFrameSample frame;
    frame.t = static_cast<double>(next_skin_) * skin_dt;
    frame.pressures = Vec::Zero(static_cast<Eigen::Index>(cfg_.pads.size()));
    for (std::size_t k = 0; k < cfg_.pads.size(); ++k) {
      const Pad& pad = cfg_.pads.pads[k];
      const ForceScript::PadForce pf = script_.pad_state(frame.t, pad.id);
      frame.pressures[static_cast<Eigen::Index>(k)] =
          pad_pressure(pad, pf.force, pf.area_fraction, rng_);
    }
    out.skin.push_back(std::move(frame));
    ++next_skin_;
  }

  MotorSample& motor = out.motor;
  motor.t = t_;
  motor.current = tau_servo / kt;
  if (cfg_.plant.current_noise_std > 0.0) {
    for (int j = 0; j < n; ++j) motor.current[j] += cfg_.plant.current_noise_std * gauss_(rng_);
  }
  motor.q = q_;
  const Vec fd = (q_ - q_prev_) / dt;
  qd_filt_ += alpha_v_ * (fd - qd_filt_);
  const Vec fdd = (qd_filt_ - qd_filt_prev_) / dt;
  qdd_filt_ += alpha_a_ * (fdd - qdd_filt_);
  qd_filt_prev_ = qd_filt_;
  q_prev_ = q_;
  motor.qd = qd_filt_;
  motor.qdd = qdd_filt_;

  PlantTruth& truth = out.truth;
  truth.q = q_;
  truth.qd = qd_;
  truth.tau_fric = tau_fric_units;
  truth.tau_ext = -tau_ext / kt;
  truth.force_base = force_base;
  truth.pad_id = strongest_pad;
  return out;
}

double Plant::stored_bristle_energy() const {
  const double kt = cfg_.model.torque_constant;
  double e = 0.0;
  for (int j = 0; j < cfg_.model.n(); ++j) {
    e += 0.5 * kt * cfg_.bristle.stiffness[j] * z_.z[j] * z_.z[j];
  }
  return e;
}

CommandTrack hold_track(const Vec& q, double duration, double dt) {
  require(duration > 0.0 && dt > 0.0, "hold track needs positive duration and dt");
  const int T = static_cast<int>(std::lround(duration / dt));
  CommandTrack track;
  track.q_cmd = q.replicate(1, T);
  track.qd_cmd = Mat::Zero(q.size(), T);
  return track;
}

CommandTrack excitation_track(const RobotModel& model, std::uint64_t seed,
                              double duration, double dt,
                              const ExcitationParams& p) {
  require(duration > 0.0 && dt > 0.0, "excitation track needs positive duration and dt");
  require(p.v_lo > 0.0 && p.v_hi >= p.v_lo, "excitation speed range invalid");
  require(p.hold_lo >= 0.0 && p.hold_hi >= p.hold_lo, "excitation hold range invalid");
  require(p.move_lo > 0.0 && p.move_hi >= p.move_lo, "excitation move range invalid");

  const int n = model.n();
  const int T = static_cast<int>(std::lround(duration / dt));
  CommandTrack track;
  track.q_cmd = Mat::Zero(n, T);
  track.qd_cmd = Mat::Zero(n, T);

  for (int j = 0; j < n; ++j) {
    // Independent stream per joint so adding a joint does not reshuffle the rest.
    std::mt19937_64 rng(seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(j + 1)));
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };

    const double lo = model.joints[j].limit_lo + p.margin;
    const double hi = model.joints[j].limit_hi - p.margin;
    require(hi > lo, "joint limits too tight for the excitation margin");

    double q = 0.0;
    int k = 0;
    while (k < T) {
      // Dwell.
      const int hold_ticks = static_cast<int>(std::lround(uniform(p.hold_lo, p.hold_hi) / dt));
      for (int i = 0; i < hold_ticks && k < T; ++i, ++k) {
        track.q_cmd(j, k) = q;
        track.qd_cmd(j, k) = 0.0;
      }
      if (k >= T) break;

      // Trapezoidal move: accel and decel take `ta` each, cruise in between.
      const double v = uniform(p.v_lo, p.v_hi);
      const double move_dur = uniform(p.move_lo, p.move_hi);
      const double ta = std::min(0.3, move_dur / 4.0);
      const double dist = v * (move_dur - ta);  // trapezoid area
      double dir = (u01(rng) < 0.5) ? 1.0 : -1.0;
      if (q + dir * dist > hi || q + dir * dist < lo) dir = -dir;
      double scale = 1.0;
      if (q + dir * dist > hi) scale = (hi - q) / (dir * dist);
      if (q + dir * dist < lo) scale = (lo - q) / (dir * dist);

      const int move_ticks = static_cast<int>(std::lround(move_dur / dt));
      for (int i = 0; i < move_ticks && k < T; ++i, ++k) {
        const double tt = (i + 1) * dt;
        double vt = v;
        if (tt < ta)
          vt = v * tt / ta;
        else if (tt > move_dur - ta)
          vt = v * std::max(0.0, move_dur - tt) / ta;
        const double qd = dir * scale * vt;
        q += qd * dt;
        track.q_cmd(j, k) = q;
        track.qd_cmd(j, k) = qd;
      }
    }
  }
  return track;
}

}  // namespace tactorque
