#include "tactorque/estimator.hpp"

#include <Eigen/SVD>
#include <cmath>

#include "tactorque/errors.hpp"

namespace tactorque {

const char* to_string(FsmMode mode) {
  switch (mode) {
    case FsmMode::StaticNoContact: return "static_no_contact";
    case FsmMode::StaticWithContact: return "static_with_contact";
    case FsmMode::Dynamic: return "dynamic";
  }
  return "?";
}

TorqueDecomposition compute_residual(const MotorSample& motor,
                                     const RobotModel& model,
                                     const FrictionParams& friction,
                                     double zero_velocity_band) {
  const int n = model.n();
  require(motor.current.size() == n && motor.q.size() == n &&
              motor.qd.size() == n && motor.qdd.size() == n,
          "compute_residual: sample dimension does not match the model");
  require(friction.n() == n, "compute_residual: friction dimension mismatch");

  Vec qd = motor.qd;
  for (int j = 0; j < n; ++j) {
    if (std::abs(qd[j]) < zero_velocity_band) qd[j] = 0.0;
  }

  const double kt = model.torque_constant;
  JointState s;
  s.t = motor.t;
  s.q = motor.q;
  s.qd = qd;
  s.qdd = motor.qdd;

  TorqueDecomposition d;
  d.t = motor.t;
  d.tau_meas = motor.current;
  d.tau_dyn = inverse_dynamics(model, s) / kt;
  const Vec g_abs = (gravity_vector(model, motor.q) / kt).cwiseAbs();
  d.tau_fric = stribeck_friction(load_adjusted_params(friction, g_abs), qd);
  d.tau_res = d.tau_meas - d.tau_dyn - d.tau_fric;
  return d;
}

FsmState fsm_step(const FsmState& state, bool is_contact, bool is_static,
                  double t, const TorqueDecomposition& prev) {
  FsmState next = state;
  switch (state.mode) {
    case FsmMode::StaticNoContact:
      if (is_contact && is_static) {
        next.mode = FsmMode::StaticWithContact;
        next.latch = ContactLatch{t, prev.tau_res, prev.tau_meas};
      }
      break;
    case FsmMode::StaticWithContact:
      if (!is_static) next.mode = FsmMode::Dynamic;
      break;
    case FsmMode::Dynamic:
      if (is_static && !is_contact) {
        next.mode = FsmMode::StaticNoContact;
        next.latch.reset();
      }
      break;
  }
  return next;
}

Vec static_external_torque(const TorqueDecomposition& decomp,
                           const FsmState& state) {
  require(state.latch.has_value(),
          "static_external_torque: no pre-contact baseline latched");
  return decomp.tau_meas - state.latch->tau_meas;
}

Vec compensated_external_torque(const TorqueDecomposition& decomp,
                                const Vec& tau_tcn) {
  require(tau_tcn.size() == decomp.tau_res.size(),
          "compensated_external_torque: dimension mismatch");
  return decomp.tau_res - tau_tcn;
}

Vec dead_band(const Vec& tau, const Vec& sigma, double k) {
  require(sigma.size() == tau.size(), "dead_band: dimension mismatch");
  require(k >= 0.0 && (sigma.array() >= 0.0).all(),
          "dead_band: band must be non-negative");
  Vec out = Vec::Zero(tau.size());
  for (int j = 0; j < tau.size(); ++j) {
    const double band = k * sigma[j];
    if (tau[j] > band) out[j] = tau[j] - band;
    else if (tau[j] < -band) out[j] = tau[j] + band;
  }
  return out;
}

WrenchEstimate wrench_from_torque(const Vec& tau_ext, const Mat& jac,
                                  const ContactFrame& frame) {
  require(jac.rows() == 6 && jac.cols() == tau_ext.size(),
          "wrench_from_torque: jacobian must be 6 x n");
  frame.validate();

  const Mat a = jac.topRows(3).transpose();  // n x 3, tau = a * f
  Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec& sv = svd.singularValues();

  WrenchEstimate w;
  const double s_max = sv.size() > 0 ? sv[0] : 0.0;
  if (s_max == 0.0) {
    w.partially_observable = true;
    return w;
  }
  const double lambda = 1e-6 * s_max;
  double s_min_kept = s_max;
  Vec3 f = Vec3::Zero();
  const Vec uty = svd.matrixU().transpose() * tau_ext;
  for (int i = 0; i < sv.size(); ++i) {
    if (sv[i] > lambda) {
      ++w.rank;
      s_min_kept = sv[i];
    }
    f += svd.matrixV().col(i) * (sv[i] / (sv[i] * sv[i] + lambda * lambda)) * uty[i];
  }
  w.force = f;
  w.force_base = frame.rotation * f;
  w.partially_observable = w.rank < 3;
  w.condition = s_max / s_min_kept;
  return w;
}

ContactAwareEstimator::ContactAwareEstimator(const SystemConfig& cfg,
                                             const FrictionParams& friction)
    : model_(cfg.model),
      friction_(friction),
      params_(cfg.estimator),
      detector_(cfg.pads.size(), cfg.estimator.contact_threshold,
                cfg.estimator.contact_hysteresis) {
  require(friction_.n() == model_.n(),
          "estimator: friction dimension does not match the model");
  debounce_samples_ =
      std::max(1, static_cast<int>(std::lround(params_.debounce_time / cfg.plant.dt)));
}

void ContactAwareEstimator::reset() {
  detector_ = ContactDetector(static_cast<int>(detector_.active().size()),
                              params_.contact_threshold,
                              params_.contact_hysteresis);
  state_ = FsmState{};
  prev_.reset();
  quiet_streak_ = 0;
}

EstimatorStep ContactAwareEstimator::step(
    const MotorSample& motor, const std::vector<SkinFrameSample>& skin) {
  for (const SkinFrameSample& frame : skin) detector_.update(frame);

  EstimatorStep out;
  out.decomp =
      compute_residual(motor, model_, friction_, params_.static_threshold);
  out.is_contact = detector_.any();
  out.is_static = motor.qd.cwiseAbs().maxCoeff() < params_.static_threshold;

  if (state_.mode == FsmMode::Dynamic && out.is_static && !out.is_contact) {
    ++quiet_streak_;
  } else {
    quiet_streak_ = 0;
  }
  // Re-entry to StaticNoContact only after a full quiet period.
  const bool static_for_fsm =
      (state_.mode == FsmMode::Dynamic && !out.is_contact)
          ? quiet_streak_ >= debounce_samples_
          : out.is_static;

  const bool had_latch = state_.latch.has_value();
  // A contact already present at the very first sample is its own baseline.
  state_ = fsm_step(state_, out.is_contact, static_for_fsm, motor.t,
                    prev_.value_or(out.decomp));
  out.onset = !had_latch && state_.latch.has_value();
  out.state = state_;
  out.tau_ext = state_.latch.has_value()
                    ? static_external_torque(out.decomp, state_)
                    : Vec::Zero(model_.n());

  prev_ = out.decomp;
  return out;
}

}  // namespace tactorque
