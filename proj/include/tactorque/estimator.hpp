#pragma once

#include <optional>
#include <vector>

#include "tactorque/config.hpp"
#include "tactorque/friction.hpp"
#include "tactorque/plant.hpp"
#include "tactorque/skin.hpp"

namespace tactorque {

enum class FsmMode { StaticNoContact, StaticWithContact, Dynamic };

const char* to_string(FsmMode mode);

// Captured at contact onset, alive until the machine returns to
// StaticNoContact. tau_res and tau_meas are taken from the last sample
// before the onset, so they describe the load-free friction equilibrium.
struct ContactLatch {
  double t_on = 0.0;
  Vec tau_res;
  Vec tau_meas;
};

// Latch is present exactly when mode != StaticNoContact: Dynamic is only
// reachable through StaticWithContact, which always latches.
struct FsmState {
  FsmMode mode = FsmMode::StaticNoContact;
  std::optional<ContactLatch> latch;
};

struct TorqueDecomposition {
  double t = 0.0;
  Vec tau_meas;  // measured current
  Vec tau_dyn;   // rigid-body model at the measured (q, qd, qdd)
  Vec tau_fric;  // static friction curve at the measured qd
  Vec tau_res;   // tau_meas - tau_dyn - tau_fric
};

// Splits the measured current into model, friction and residual terms, all
// in current units. Measured velocities inside `zero_velocity_band` are
// treated as exact standstill before the friction curve is evaluated: a
// discrete evaluation of a curve with a sign discontinuity needs a zero
// band, or filter-noise velocities at rest make the friction term chatter
// between +/- breakaway.
TorqueDecomposition compute_residual(const MotorSample& motor,
                                     const RobotModel& model,
                                     const FrictionParams& friction,
                                     double zero_velocity_band = 0.0);

// Pure transition function, one motor sample per call.
//
//   mode             contact static -> next             action
//   StaticNoContact  0       0         StaticNoContact
//   StaticNoContact  0       1         StaticNoContact
//   StaticNoContact  1       0         StaticNoContact   (no static baseline to latch)
//   StaticNoContact  1       1         StaticWithContact latch t_on = t, prev sample
//   StaticWithContact 0      0         Dynamic           latch retained
//   StaticWithContact 0      1         StaticWithContact (released but parked: estimate decays to zero)
//   StaticWithContact 1      0         Dynamic           latch retained
//   StaticWithContact 1      1         StaticWithContact
//   Dynamic          0       0         Dynamic
//   Dynamic          0       1         StaticNoContact   latch cleared
//   Dynamic          1       0         Dynamic
//   Dynamic          1       1         Dynamic           (still touching: no clean re-entry)
//
// `prev` is the decomposition of the previous sample; its residual becomes
// the pre-contact baseline when an onset fires at time t.
FsmState fsm_step(const FsmState& state, bool is_contact, bool is_static,
                  double t, const TorqueDecomposition& prev);

// External torque while parked: the measured current minus its latched
// pre-contact value. While the static premise of the mode holds, the model
// and friction terms of the residual are evaluated on identical inputs and
// cancel, so this equals tau_res - latch.tau_res; the measured form is used
// because it keeps the estimate independent of the dynamics model down to
// the last bit, which is the property the mode exists to provide.
// Throws ContractError when the state carries no latch.
Vec static_external_torque(const TorqueDecomposition& decomp,
                           const FsmState& state);

// tau_meas - (tau_dyn + tau_fric + tau_tcn).
Vec compensated_external_torque(const TorqueDecomposition& decomp,
                                const Vec& tau_tcn);

// Componentwise soft threshold: zero inside k*sigma, shrunk toward zero by
// k*sigma outside. Odd, monotone, 1-Lipschitz, continuous at the band edge.
Vec dead_band(const Vec& tau, const Vec& sigma, double k);

struct WrenchEstimate {
  Vec3 force = Vec3::Zero();       // contact frame
  Vec3 force_base = Vec3::Zero();  // same force in the base frame
  int rank = 0;                    // numerical rank of the linear jacobian rows
  bool partially_observable = false;  // rank < 3, null-space component unseen
  double condition = 0.0;          // sigma_max / sigma_min over kept directions
};

// Least-squares solve of tau = J_v^T f for the force through the contact
// point, where J_v is the linear rows of `jac` (a point contact transmits no
// moment, so the angular rows are dropped). Tikhonov-regularized at 1e-6 of
// the largest singular value; directions below that scale are reported as
// unobservable. The sign of `tau` decides the sign of f: pass the negated
// sensed estimate to recover the force the environment applies to the arm.
WrenchEstimate wrench_from_torque(const Vec& tau_ext, const Mat& jac,
                                  const ContactFrame& frame);

struct EstimatorStep {
  TorqueDecomposition decomp;
  FsmState state;           // after this sample
  bool is_static = false;
  bool is_contact = false;
  bool onset = false;       // this sample latched a new baseline
  Vec tau_ext;              // static-mode estimate; zero when nothing is latched
};

// Single-owner streaming front end: one motor sample in, one estimate out.
// Skin frames since the previous tick are folded into the contact flag
// (zero-order hold across the rate mismatch). Dynamic-to-quiet re-entry is
// debounced so a velocity zero crossing cannot flicker the machine back to
// StaticNoContact.
class ContactAwareEstimator {
 public:
  // `friction` is the nominal curve the estimator believes in (identified,
  // not the plant's ground truth).
  ContactAwareEstimator(const SystemConfig& cfg, const FrictionParams& friction);

  EstimatorStep step(const MotorSample& motor,
                     const std::vector<SkinFrameSample>& skin);

  const FsmState& state() const { return state_; }
  const ContactDetector& detector() const { return detector_; }
  void reset();

 private:
  RobotModel model_;
  FrictionParams friction_;
  EstimatorParams params_;
  ContactDetector detector_;
  FsmState state_;
  std::optional<TorqueDecomposition> prev_;
  int quiet_streak_ = 0;
  int debounce_samples_ = 1;
};

}  // namespace tactorque
