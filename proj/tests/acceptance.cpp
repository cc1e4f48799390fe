// Acceptance gate: ten independent checks over the whole pipeline, one
// pass/fail line each. Exit status is the number of failed checks, so a
// clean run exits 0. Checks 8 and 9 consume the model and noise statistics
// produced by check 7; everything else is self-contained and seeded.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "oracles/fd_gradient.hpp"
#include "oracles/lagrangian_oracle.hpp"
#include "support.hpp"
#include "tactorque/compensator.hpp"
#include "tactorque/dynamics.hpp"
#include "tactorque/errors.hpp"
#include "tactorque/estimator.hpp"
#include "tactorque/friction.hpp"
#include "tactorque/harness.hpp"
#include "tactorque/plant.hpp"
#include "tactorque/scenario.hpp"
#include "tactorque/tcn.hpp"

using namespace tactorque;

namespace {

struct Checker {
  bool ok = true;
  std::string detail;

  void append(const char* fmt, va_list ap) {
    char buf[512];
    std::vsnprintf(buf, sizeof buf, fmt, ap);
    if (!detail.empty()) detail += "; ";
    detail += buf;
  }
  void note(const char* fmt, ...) {
    va_list ap;
    va_start(ap, fmt);
    append(fmt, ap);
    va_end(ap);
  }
  // Message describes the violated condition; recorded only on failure.
  bool expect(bool cond, const char* fmt, ...) {
    if (!cond) {
      ok = false;
      va_list ap;
      va_start(ap, fmt);
      append(fmt, ap);
      va_end(ap);
    }
    return cond;
  }
};

Vec random_config(const RobotModel& m, std::mt19937_64& rng, double scale = 0.9) {
  Vec q(m.n());
  for (int j = 0; j < m.n(); ++j) {
    std::uniform_real_distribution<double> d(scale * m.joints[j].limit_lo,
                                             scale * m.joints[j].limit_hi);
    q[j] = d(rng);
  }
  return q;
}

Vec random_vec(int n, std::mt19937_64& rng, double lim) {
  std::uniform_real_distribution<double> d(-lim, lim);
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = d(rng);
  return v;
}

double draw_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

Mat random_mat(std::mt19937_64& rng, int rows, int cols, double amp) {
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = amp * (2.0 * draw_unit(rng) - 1.0);
  return m;
}

Vec random_amp_vec(std::mt19937_64& rng, int size, double amp) {
  Vec v(size);
  for (int i = 0; i < size; ++i) v(i) = amp * (2.0 * draw_unit(rng) - 1.0);
  return v;
}

FrictionParams one_joint(double tc, double ts, double qs, double delta, double b) {
  FrictionParams p;
  p.coulomb = Vec::Constant(1, tc);
  p.breakaway = Vec::Constant(1, ts);
  p.stribeck_vel = Vec::Constant(1, qs);
  p.shape = Vec::Constant(1, delta);
  p.viscous = Vec::Constant(1, b);
  p.load_coulomb = Vec::Zero(1);
  p.load_viscous = Vec::Zero(1);
  return p;
}

TorqueDecomposition fixed_decomp(double t, double res, double meas) {
  TorqueDecomposition d;
  d.t = t;
  d.tau_meas = Vec::Constant(4, meas);
  d.tau_dyn = Vec::Zero(4);
  d.tau_fric = Vec::Zero(4);
  d.tau_res = Vec::Constant(4, res);
  return d;
}

// Outputs of check 7, consumed by checks 8 and 9.
struct PipelineArtifacts {
  FrictionParams belief;
  TcnModel model;
  Vec sigma_nominal;  // per-joint std of the raw residual, transition phase
  Vec sigma_comp;     // same statistic for the compensated residual
  bool ready = false;
};

// --- check 1: rigid-body terms against finite-difference oracles ------------

bool check_dynamics(Checker& c) {
  const RobotModel m = testing::reference_model();

  std::mt19937_64 rng(777);
  double worst_id = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    JointState s;
    s.q = random_config(m, rng);
    s.qd = random_vec(4, rng, 2.0);
    s.qdd = random_vec(4, rng, 5.0);
    const Vec tau = inverse_dynamics(m, s);
    const Vec ref = oracle::fd_inverse_dynamics(m, s.q, s.qd, s.qdd);
    worst_id = std::max(worst_id, (tau - ref).lpNorm<Eigen::Infinity>());
  }
  c.expect(worst_id < 1e-6, "inverse dynamics off oracle by %.2e (tol 1e-6)",
           worst_id);

  std::mt19937_64 rng2(98);
  double worst_jac = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Vec q = random_config(m, rng2);
    std::uniform_int_distribution<int> pick(0, 3);
    const int link = pick(rng2);
    const Vec3 local(0.08, 0.03, -0.02);
    ContactFrame frame;
    frame.point = forward_kinematics(m, q, link, local).first;
    frame.rotation = Mat3::Identity();
    const Mat j = contact_jacobian(m, q, link, frame);
    const double h = 1e-6;
    for (int k = 0; k < 4; ++k) {
      Vec qp = q, qm = q;
      qp[k] += h;
      qm[k] -= h;
      const Vec3 fd = (forward_kinematics(m, qp, link, local).first -
                       forward_kinematics(m, qm, link, local).first) /
                      (2 * h);
      worst_jac =
          std::max(worst_jac, (j.block<3, 1>(0, k) - fd).lpNorm<Eigen::Infinity>());
    }
  }
  c.expect(worst_jac < 1e-5, "jacobian off finite differences by %.2e (tol 1e-5)",
           worst_jac);

  if (c.ok)
    c.note("inverse dynamics %.1e (tol 1e-6), jacobian %.1e (tol 1e-5)",
           worst_id, worst_jac);
  return c.ok;
}

// --- check 2: static curve shape and hysteretic ground truth -----------------

bool check_friction(Checker& c) {
  const double point = stribeck_scalar(0.5, 1.0, 0.1, 2.0, 0.2, 0.1);
  c.expect(std::abs(point - 0.70394) < 1e-5,
           "analytic point %.6f vs 0.70394 (tol 1e-5)", point);

  c.expect(stribeck_scalar(3.0, 4.5, 0.01, 2.0, 4.0, 0.0) == 0.0,
           "curve not zero at rest");
  bool odd = true;
  for (int i = 0; i < 60 && odd; ++i) {
    const double qd = 1e-6 * std::pow(2.0e6, i / 59.0);  // 1e-6 .. 2 rad/s
    const double fwd = stribeck_scalar(3.0, 4.5, 0.01, 2.0, 4.0, qd);
    const double rev = stribeck_scalar(3.0, 4.5, 0.01, 2.0, 4.0, -qd);
    odd = fwd == -rev && fwd > 0.0;
  }
  c.expect(odd, "curve is not odd");

  const double near_rest = stribeck_scalar(0.5, 1.0, 0.1, 2.0, 0.2, 1e-9);
  c.expect(std::abs(near_rest - 1.0) < 1e-8,
           "breakaway limit %.9f vs 1.0", near_rest);
  const double fast = stribeck_scalar(0.5, 1.0, 0.1, 2.0, 0.2, 3.0);
  c.expect(std::abs(fast - (0.5 + 0.2 * 3.0)) < 1e-9,
           "kinetic limit %.9f vs coulomb + viscous", fast);

  // The bristle element must settle onto the static curve when dragged at
  // constant speed, within 1%.
  const FrictionParams p = one_joint(0.5, 1.0, 0.05, 2.0, 0.2);
  const BristleParams bp = default_bristle(p);
  const double dt = 2.5e-3;
  double worst_rel = 0.0;
  for (double speed : {0.02, 0.05, 0.3}) {
    BristleState s = BristleState::zero(1);
    const Vec qd = Vec::Constant(1, speed);
    Vec tau;
    for (int k = 0; k < 1200; ++k) tau = hysteretic_step(s, bp, p, qd, dt);
    const double want = stribeck_friction(p, qd)[0];
    worst_rel = std::max(worst_rel, std::abs(tau[0] - want) / std::abs(want));
  }
  c.expect(worst_rel < 0.01,
           "constant-velocity convergence off by %.2f%% (tol 1%%)",
           100.0 * worst_rel);

  // Slow sinusoidal reversal: the same velocity must map to clearly separated
  // torques depending on travel direction.
  BristleState s = BristleState::zero(1);
  const double period = 10.0, amp = 0.05, probe = 0.005;
  double up_branch = 0.0, down_branch = 0.0, prev_qd = 0.0;
  for (double t = 0; t < period; t += dt) {
    const double qd = amp * std::sin(2.0 * M_PI * t / period);
    const Vec tau = hysteretic_step(s, bp, p, Vec::Constant(1, qd), dt);
    const bool rising = qd > prev_qd;
    if (std::abs(qd - probe) < amp * 2.0 * M_PI * dt / period)
      (rising ? up_branch : down_branch) = tau[0];
    prev_qd = qd;
  }
  const double loop = std::abs(up_branch - down_branch);
  c.expect(loop > 0.05 * p.breakaway[0],
           "reversal loop %.4f below 5%% of breakaway", loop);

  if (c.ok)
    c.note("point %.5f, convergence %.2f%%, reversal loop %.3f",
           point, 100.0 * worst_rel, loop);
  return c.ok;
}

// --- check 3: latched static estimate, accuracy and model independence ------

bool check_static_estimate(Checker& c) {
  SystemConfig cfg = testing::reference_config();
  const Vec q0 = (Vec(4) << 0.0, -0.5, 0.6, 0.0).finished();
  const double dt = cfg.plant.dt;

  // A slow 10 N press keeps the measured velocity inside the static band for
  // the whole event, which is the regime the latched estimate is defined on.
  ForceEvent press;
  press.t_start = 2.0;
  press.t_end = 12.0;
  press.pad_id = 1;
  press.force = Vec3(0, 0, -10.0);
  const ForceScript script({press}, 1.5);

  const CommandTrack track = hold_track(q0, 13.0, dt);
  PipelineOptions opts;
  opts.friction = cfg.friction;
  opts.seed = 29;
  const RunLog log = run_pipeline(cfg, track, script, opts);

  const int k0 = static_cast<int>(6.0 / dt);
  const int k1 = static_cast<int>(11.0 / dt);
  bool parked = true;
  for (int k = k0; k < k1; ++k)
    parked = parked &&
             log.fsm_mode[static_cast<std::size_t>(k)] ==
                 static_cast<int>(FsmMode::StaticWithContact) &&
             log.quality[static_cast<std::size_t>(k)] == 0;
  c.expect(parked, "plant or estimator left the static-contact regime");

  const Vec err_mean =
      (log.tau_ext_hat - log.tau_ext_true).middleCols(k0, k1 - k0).rowwise().mean();
  const Vec truth_mean = log.tau_ext_true.middleCols(k0, k1 - k0).rowwise().mean();
  // The estimate is a difference of two noisy current samples.
  const double bound = 3.0 * std::sqrt(2.0) * cfg.plant.current_noise_std;
  c.expect(truth_mean.cwiseAbs().maxCoeff() > 0.5,
           "press produced no usable joint torque");
  c.expect(err_mean.cwiseAbs().maxCoeff() <= bound,
           "estimate off truth by %.3f (3 sigma bound %.3f)",
           err_mean.cwiseAbs().maxCoeff(), bound);

  // Same recorded stream through a nominal and a heavily corrupted dynamics
  // model: the latched estimate is a measured-current difference, so the two
  // must agree to the bit whenever a baseline is held.
  SystemConfig bad = cfg;
  for (JointParams& j : bad.model.joints) {
    j.mass *= 1.5;
    j.com *= 1.5;
    j.inertia *= 0.5;
    j.reflected_inertia *= 1.5;
  }
  bad.validate();

  Plant plant(cfg, opts.seed);
  plant.set_state(q0, Vec::Zero(4));
  plant.set_script(script);
  ContactAwareEstimator nominal(cfg, cfg.friction);
  ContactAwareEstimator corrupted(bad, cfg.friction);

  int latched_ticks = 0;
  bool flags_agree = true, bitwise = true, models_differ = false;
  for (int k = 0; k < track.length(); ++k) {
    const PlantOutput out = plant.step(track.at(k));
    const EstimatorStep a = nominal.step(out.motor, out.skin);
    const EstimatorStep b = corrupted.step(out.motor, out.skin);
    flags_agree =
        flags_agree && a.state.latch.has_value() == b.state.latch.has_value();
    if (a.state.latch.has_value()) {
      ++latched_ticks;
      bitwise = bitwise && (a.tau_ext - b.tau_ext).norm() == 0.0;
    }
    if ((a.decomp.tau_res - b.decomp.tau_res).norm() > 0.0) models_differ = true;
  }
  c.expect(flags_agree, "corruption changed the episode timeline");
  c.expect(latched_ticks > 1000, "baseline held for only %d ticks", latched_ticks);
  c.expect(models_differ, "corruption never reached the residual");
  c.expect(bitwise, "estimates diverge under inertial corruption");

  if (c.ok)
    c.note("mean error %.3f vs bound %.3f, bit-equal over %d latched ticks",
           err_mean.cwiseAbs().maxCoeff(), bound, latched_ticks);
  return c.ok;
}

// --- check 4: transition table and single-latch episodes --------------------

bool check_fsm(Checker& c) {
  const TorqueDecomposition prev = fixed_decomp(2.0, 1.25, 7.5);

  FsmState snc;
  FsmState swc;
  swc.mode = FsmMode::StaticWithContact;
  swc.latch = ContactLatch{1.0, Vec::Constant(4, 0.5), Vec::Constant(4, 3.0)};
  FsmState dyn;
  dyn.mode = FsmMode::Dynamic;
  dyn.latch = swc.latch;

  struct Row {
    const FsmState* from;
    bool contact;
    bool still;
    FsmMode to;
  };
  const Row table[] = {
      {&snc, false, false, FsmMode::StaticNoContact},
      {&snc, false, true, FsmMode::StaticNoContact},
      {&snc, true, false, FsmMode::StaticNoContact},
      {&snc, true, true, FsmMode::StaticWithContact},
      {&swc, false, false, FsmMode::Dynamic},
      {&swc, false, true, FsmMode::StaticWithContact},
      {&swc, true, false, FsmMode::Dynamic},
      {&swc, true, true, FsmMode::StaticWithContact},
      {&dyn, false, false, FsmMode::Dynamic},
      {&dyn, false, true, FsmMode::StaticNoContact},
      {&dyn, true, false, FsmMode::Dynamic},
      {&dyn, true, true, FsmMode::Dynamic},
  };

  int row_id = 0;
  for (const Row& row : table) {
    ++row_id;
    const FsmState next = fsm_step(*row.from, row.contact, row.still, 2.5, prev);
    c.expect(next.mode == row.to, "row %d lands in %s", row_id,
             to_string(next.mode));

    const bool latched_now = row.from->mode == FsmMode::StaticNoContact &&
                             row.to == FsmMode::StaticWithContact;
    if (latched_now) {
      c.expect(next.latch.has_value() && next.latch->t_on == 2.5 &&
                   (next.latch->tau_res - prev.tau_res).norm() == 0.0 &&
                   (next.latch->tau_meas - prev.tau_meas).norm() == 0.0,
               "row %d did not latch the previous sample", row_id);
    } else if (row.to == FsmMode::StaticNoContact) {
      c.expect(!next.latch.has_value(), "row %d kept a latch", row_id);
    } else {
      c.expect(next.latch.has_value() &&
                   next.latch->t_on == row.from->latch->t_on &&
                   (next.latch->tau_res - row.from->latch->tau_res).norm() == 0.0,
               "row %d rewrote the carried latch", row_id);
    }
  }

  // Two full episodes: each engages the latch exactly once and never rebases
  // it mid-flight.
  FsmState s;
  int engagements = 0;
  double episode_ton = -1.0;
  const auto feed = [&](bool contact, bool still, double t) {
    const bool had = s.latch.has_value();
    s = fsm_step(s, contact, still, t, fixed_decomp(t - 0.1, 0.3 * t, 2.0 * t));
    if (!had && s.latch.has_value()) {
      ++engagements;
      episode_ton = s.latch->t_on;
    }
    if (had && s.latch.has_value())
      c.expect(s.latch->t_on == episode_ton, "latch rebased at t=%.1f", t);
  };
  feed(true, true, 1.0);    // onset: engage
  feed(true, true, 1.1);    // parked contact
  feed(true, false, 1.2);   // starts moving
  feed(false, false, 1.3);  // released mid-motion
  feed(false, true, 1.4);   // quiet again: episode over
  c.expect(s.mode == FsmMode::StaticNoContact && !s.latch.has_value() &&
               engagements == 1,
           "first episode engaged %d latches", engagements);
  feed(true, true, 2.0);    // second onset
  feed(false, false, 2.1);  // moving free
  feed(true, true, 2.2);    // re-touch while moving: same episode
  feed(false, true, 2.3);   // done
  c.expect(engagements == 2 && !s.latch.has_value(),
           "second episode engaged %d latches total", engagements);

  if (c.ok) c.note("12 transitions, 2 episodes, 1 latch each");
  return c.ok;
}

// --- check 5: network gradients, causality, overfit, seeded training --------

bool check_tcn(Checker& c) {
  CompensatorParams tiny;
  tiny.window = 8;
  tiny.channels = 6;
  tiny.layers = 2;
  tiny.kernel = 4;

  // Analytic gradients against central differences, relative to each entry.
  TcnModel model = init_tcn(tiny, 5, 3, 11);
  for (int i = 0; i < 5; ++i) {
    model.input_mean(i) = 0.05 * i - 0.1;
    model.input_scale(i) = 0.5 + 0.2 * i;
  }
  std::mt19937_64 rng(17);
  for (ConvLayer& layer : model.layers)
    layer.bias = random_amp_vec(rng, static_cast<int>(layer.bias.size()), 0.1);
  model.low.bias = random_amp_vec(rng, 3, 0.1);
  model.high.bias = random_amp_vec(rng, 3, 0.1);
  TcnBatch batch;
  for (int s = 0; s < 3; ++s) {
    batch.inputs.push_back(random_mat(rng, 5, 8, 1.0));
    batch.label_low.push_back(random_amp_vec(rng, 3, 1.0));
    batch.label_high.push_back(random_amp_vec(rng, 3, 1.0));
  }
  const TcnGradients analytic = tcn_loss_gradients(model, batch);
  const testing::FdGradients fd = testing::fd_gradients(model, batch);
  double worst_rel = 0.0;
  const auto compare = [&worst_rel](const Mat& a, const Mat& f) {
    for (Eigen::Index r = 0; r < a.rows(); ++r)
      for (Eigen::Index col = 0; col < a.cols(); ++col) {
        const double scale =
            std::max({std::abs(a(r, col)), std::abs(f(r, col)), 1e-3});
        worst_rel = std::max(worst_rel, std::abs(a(r, col) - f(r, col)) / scale);
      }
  };
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    compare(analytic.layer_w[i], fd.layer_w[i]);
    compare(analytic.layer_b[i], fd.layer_b[i]);
  }
  compare(analytic.low_w, fd.low_w);
  compare(analytic.low_b, fd.low_b);
  compare(analytic.high_w, fd.high_w);
  compare(analytic.high_b, fd.high_b);
  c.expect(worst_rel <= 1e-4, "gradient off by %.2e relative (tol 1e-4)",
           worst_rel);

  // Causality: poking column j must leave feature columns left of j unchanged
  // to the bit, and must change column j itself.
  CompensatorParams deep = tiny;
  deep.window = 12;
  deep.layers = 3;
  const TcnModel causal = init_tcn(deep, 4, 2, 23);
  std::mt19937_64 rng2(29);
  const Mat base = random_mat(rng2, 4, 12, 1.0);
  const Mat ref = tcn_features(causal, base);
  bool causal_ok = true;
  for (int j : {3, 7, 11}) {
    Mat poked = base;
    poked.col(j).array() += 0.5;
    const Mat out = tcn_features(causal, poked);
    causal_ok = causal_ok && (out.leftCols(j) - ref.leftCols(j)).norm() == 0.0 &&
                (out.col(j) - ref.col(j)).norm() > 0.0;
  }
  c.expect(causal_ok, "future samples leak into past features");

  // One sample must be memorizable to 1e-6 of the starting loss.
  CompensatorParams wide = tiny;
  wide.channels = 8;
  TcnModel memo = init_tcn(wide, 5, 2, 77);
  std::mt19937_64 rng3(47);
  TcnBatch one;
  one.inputs.push_back(random_mat(rng3, 5, 8, 1.0));
  one.label_low.push_back((Vec(2) << 0.4, -0.3).finished());
  one.label_high.push_back((Vec(2) << 0.6, 0.2).finished());
  const double initial = tcn_loss(memo, one);
  TcnVelocity vel = zero_velocity(memo);
  double best = initial;
  int used = 0;
  for (int step = 0; step < 2000; ++step) {
    const TcnGradients g = tcn_loss_gradients(memo, one);
    sgd_step(memo, vel, g, 0.02, 0.9);
    best = std::min(best, g.loss);
    used = step + 1;
    if (g.loss <= 1e-6 * initial) break;
  }
  c.expect(best <= 1e-6 * initial, "overfit stalled at %.2e relative",
           best / initial);

  // Full training loop twice with one seed: every weight identical.
  SystemConfig cfg = testing::reference_config();
  cfg.compensator = tiny;
  cfg.compensator.batch = 16;
  cfg.compensator.epochs = 2;
  cfg.compensator.lr = 0.01;
  RunLog log(1, 0, 160);
  for (int k = 0; k < 160; ++k) {
    log.t[static_cast<std::size_t>(k)] = 2.5e-3 * k;
    log.q(0, k) = 0.1;
    log.qd(0, k) = k >= 80 ? 0.5 : 0.0;
    log.tau_res(0, k) = 0.3 + 0.2 * std::sin(0.05 * k);
    log.tau_dyn(0, k) = 0.05;
  }
  const Dataset data = build_dataset({log}, cfg, 21);
  TrainReport rep_a, rep_b;
  const TcnModel first = train_compensator(data, cfg.compensator, 33, &rep_a);
  const TcnModel second = train_compensator(data, cfg.compensator, 33, &rep_b);
  bool reproducible = rep_a.val_loss.back() == rep_b.val_loss.back();
  for (std::size_t i = 0; i < first.layers.size(); ++i)
    reproducible = reproducible &&
                   (first.layers[i].weight - second.layers[i].weight).norm() == 0.0 &&
                   (first.layers[i].bias - second.layers[i].bias).norm() == 0.0;
  reproducible = reproducible &&
                 (first.low.weight - second.low.weight).norm() == 0.0 &&
                 (first.low.bias - second.low.bias).norm() == 0.0 &&
                 (first.high.weight - second.high.weight).norm() == 0.0 &&
                 (first.high.bias - second.high.bias).norm() == 0.0;
  c.expect(reproducible, "same-seed training runs disagree");

  if (c.ok)
    c.note("gradient %.1e rel, causal, overfit %.1e in %d steps, seeded twice",
           worst_rel, best / initial, used);
  return c.ok;
}

// --- check 6: paired replay, injected contact is invisible to the network ---

bool check_latch_replay(Checker& c) {
  const SystemConfig cfg = testing::reference_config();
  const Vec q0 = (Vec(4) << 0.0, -0.5, 0.6, 0.0).finished();
  const double dt = cfg.plant.dt;
  const double t_on = 1.5;

  // One recorded force-free stream at rest; the contact twin gets a constant
  // current shift and a pressed pad from t_on onward, at measurement level.
  const CommandTrack track = hold_track(q0, 3.0, dt);
  Plant plant(cfg, 41);
  plant.set_state(q0, Vec::Zero(4));
  std::vector<PlantOutput> clean;
  clean.reserve(static_cast<std::size_t>(track.length()));
  for (int k = 0; k < track.length(); ++k) clean.push_back(plant.step(track.at(k)));

  std::vector<PlantOutput> touched = clean;
  const Vec shift = (Vec(4) << 1.4, -0.6, 0.0, 0.0).finished();
  const int pad_pos = cfg.pads.index_of(1);
  for (PlantOutput& out : touched) {
    if (out.motor.t >= t_on) out.motor.current += shift;
    for (SkinFrameSample& frame : out.skin)
      if (frame.t >= t_on) frame.pressures(pad_pos) += 5.0;
  }

  const TcnModel model = init_tcn(cfg.compensator, 20, 4, 9);
  ContactAwareEstimator detector(cfg, cfg.friction);
  OnlineCompensator with_contact(model, cfg.compensator);
  OnlineCompensator force_free(model, cfg.compensator);

  int episode_ticks = 0;
  bool inputs_equal = true;
  bool residual_saw_it = false;
  double worst = 0.0, magnitude = 0.0;
  for (int k = 0; k < track.length(); ++k) {
    const EstimatorStep est = detector.step(touched[static_cast<std::size_t>(k)].motor,
                                            touched[static_cast<std::size_t>(k)].skin);
    const TorqueDecomposition counterfactual =
        compute_residual(clean[static_cast<std::size_t>(k)].motor, cfg.model,
                         cfg.friction, cfg.estimator.static_threshold);
    const bool episode = est.state.latch.has_value();
    episode_ticks += episode ? 1 : 0;

    const OnlineCompensator::Result a = with_contact.step(
        touched[static_cast<std::size_t>(k)].motor, est.decomp, episode);
    const OnlineCompensator::Result b = force_free.step(
        clean[static_cast<std::size_t>(k)].motor, counterfactual, episode);

    inputs_equal = inputs_equal &&
                   (with_contact.last_column() - force_free.last_column()).norm() == 0.0;
    worst = std::max(worst, (a.total - b.total).lpNorm<Eigen::Infinity>());
    magnitude = std::max(magnitude, a.total.lpNorm<Eigen::Infinity>());
    if ((est.decomp.tau_res - counterfactual.tau_res).cwiseAbs().maxCoeff() > 0.5)
      residual_saw_it = true;
  }

  c.expect(episode_ticks > 400, "injection latched for only %d ticks",
           episode_ticks);
  c.expect(residual_saw_it, "injection never reached the residual");
  c.expect(inputs_equal, "network inputs differ between the twin runs");
  c.expect(worst <= 1e-9, "outputs differ by %.2e (tol 1e-9)", worst);
  c.expect(magnitude > 0.0, "network output identically zero, test is vacuous");

  if (c.ok)
    c.note("inputs bit-equal, output difference %.1e over %d contact ticks",
           worst, episode_ticks);
  return c.ok;
}

// --- check 7: residual reduction on held-out excitation ----------------------

bool check_reduction(Checker& c, PipelineArtifacts* art) {
  const SystemConfig cfg = testing::reference_config();

  // The estimator works from an identified curve, never the plant's own.
  const IdentifiedFriction fit = identify_from_excitation(cfg, 60.0, 71);

  const CommandTrack train_track =
      excitation_track(cfg.model, 101, 600.0, cfg.plant.dt);
  PipelineOptions train_opts;
  train_opts.friction = fit.params;
  train_opts.seed = 101;
  const RunLog train_log = run_pipeline(cfg, train_track, ForceScript(), train_opts);

  const Dataset data = build_dataset({train_log}, cfg, 7);
  TrainReport rep;
  const TcnModel model = train_compensator(data, cfg.compensator, 13, &rep);

  const CommandTrack eval_track =
      excitation_track(cfg.model, 202, 120.0, cfg.plant.dt);
  PipelineOptions eval_opts;
  eval_opts.friction = fit.params;
  eval_opts.model = &model;
  eval_opts.seed = 202;
  const RunLog eval_log = run_pipeline(cfg, eval_track, ForceScript(), eval_opts);

  const ResidualReport report = residual_report(eval_log, eval_log, cfg.estimator);
  const int s = static_cast<int>(PhaseLabel::Static);
  const int t = static_cast<int>(PhaseLabel::StaticToKinetic);

  bool populated = true;
  for (int j = 0; j < 4; ++j)
    populated = populated && report.nominal[s][static_cast<std::size_t>(j)].count > 1000 &&
                report.nominal[t][static_cast<std::size_t>(j)].count > 100;
  c.expect(populated, "held-out run left a phase underpopulated");

  c.expect(report.reduction_pct[s] >= 70.0,
           "static reduction %.1f%% below the 70%% floor", report.reduction_pct[s]);
  c.expect(report.reduction_pct[t] >= 30.0,
           "transition reduction %.1f%% below the 30%% floor",
           report.reduction_pct[t]);

  art->belief = fit.params;
  art->model = model;
  art->sigma_nominal = Vec(4);
  art->sigma_comp = Vec(4);
  for (int j = 0; j < 4; ++j) {
    art->sigma_nominal(j) = report.nominal[t][static_cast<std::size_t>(j)].std_dev;
    art->sigma_comp(j) = report.compensated[t][static_cast<std::size_t>(j)].std_dev;
  }
  art->ready = true;

  c.note("static %.1f%% (floor 70%%), transition %.1f%% (floor 30%%), "
         "aggregates %.2f->%.2f and %.2f->%.2f",
         report.reduction_pct[s], report.reduction_pct[t],
         round_cents(report.nominal_aggregate[s]),
         round_cents(report.compensated_aggregate[s]),
         round_cents(report.nominal_aggregate[t]),
         round_cents(report.compensated_aggregate[t]));
  return c.ok;
}

// --- check 8: dead band keeps quiet and reacts inside 100 ms -----------------

bool check_dead_band(Checker& c, const PipelineArtifacts& art) {
  if (!c.expect(art.ready, "check 7 artifacts unavailable")) return false;
  const SystemConfig cfg = testing::reference_config();
  const Vec q0 = (Vec(4) << 0.0, -0.5, 0.6, 0.0).finished();
  const double dt = cfg.plant.dt;

  PipelineOptions opts;
  opts.friction = art.belief;
  opts.model = &art.model;
  opts.compliance = true;
  opts.sigma = art.sigma_comp;
  opts.seed = 404;

  const RunLog quiet =
      run_pipeline(cfg, hold_track(q0, 60.0, dt), ForceScript(), opts);
  c.expect(quiet.v_cmd.norm() == 0.0,
           "force-free hour-long hold commanded motion");

  // A firm, fast push well above the band.
  ForceEvent push;
  push.t_start = 1.0;
  push.t_end = 3.0;
  push.pad_id = 10;
  push.force = Vec3(0, 0, -25.0);
  const ForceScript script({push}, 0.1);
  opts.seed = 405;
  const RunLog pushed = run_pipeline(cfg, hold_track(q0, 4.0, dt), script, opts);

  const int onset = static_cast<int>(1.0 / dt);
  c.expect(pushed.v_cmd.leftCols(onset).norm() == 0.0,
           "motion before the push landed");
  double first = -1.0;
  for (int k = onset; k < onset + static_cast<int>(0.1 / dt) + 1; ++k) {
    if (pushed.v_cmd.col(k).cwiseAbs().maxCoeff() > 1e-9) {
      first = pushed.t[static_cast<std::size_t>(k)];
      break;
    }
  }
  c.expect(first > 0.0 && first - 1.0 <= 0.1,
           "no motion within 100 ms of the push");

  if (c.ok)
    c.note("quiet 60 s, onset +%0.0f ms, sigma [%.2f %.2f %.2f %.2f]",
           (first - 1.0) * 1e3, art.sigma_comp(0), art.sigma_comp(1),
           art.sigma_comp(2), art.sigma_comp(3));
  return c.ok;
}

// --- check 9: push-release compliance, overshoot and reverse motion ----------

struct ReleaseMetrics {
  Vec disp;          // net commanded displacement while the force is on
  double overshoot;  // peak commanded speed after release
  double reverse;    // peak speed against the push direction after release
};

ReleaseMetrics release_metrics(const RunLog& log, double t_release, double dt) {
  ReleaseMetrics m;
  m.disp = Vec::Zero(log.n);
  m.overshoot = 0.0;
  m.reverse = 0.0;
  const int k_rel = static_cast<int>(t_release / dt);
  for (int k = 0; k <= k_rel && k < log.length(); ++k)
    m.disp += log.v_cmd.col(k) * dt;
  for (int k = k_rel + 1; k < log.length(); ++k) {
    for (int j = 0; j < log.n; ++j) {
      const double v = log.v_cmd(j, k);
      m.overshoot = std::max(m.overshoot, std::abs(v));
      if (std::abs(m.disp(j)) > 1e-4) {
        const double against = m.disp(j) > 0.0 ? -v : v;
        m.reverse = std::max(m.reverse, against);
      }
    }
  }
  return m;
}

bool check_push_release(Checker& c, const PipelineArtifacts& art) {
  if (!c.expect(art.ready, "check 7 artifacts unavailable")) return false;
  const SystemConfig cfg = testing::reference_config();
  const Vec q0 = (Vec(4) << 0.0, -0.5, 0.6, 0.0).finished();
  const double dt = cfg.plant.dt;

  ForceEvent push;
  push.t_start = 1.0;
  push.t_end = 3.0;
  push.pad_id = 10;
  push.force = Vec3(0, 0, -10.0);
  const ForceScript script({push}, cfg.scenario.rise_time);
  const CommandTrack track = hold_track(q0, 7.0, dt);

  PipelineOptions nominal;
  nominal.friction = art.belief;
  nominal.compliance = true;
  nominal.sigma = art.sigma_nominal;
  nominal.seed = 505;
  PipelineOptions comp = nominal;
  comp.model = &art.model;
  comp.sigma = art.sigma_comp;

  const RunLog log_nom = run_pipeline(cfg, track, script, nominal);
  const RunLog log_comp = run_pipeline(cfg, track, script, comp);

  const ReleaseMetrics nom = release_metrics(log_nom, push.t_end, dt);
  const ReleaseMetrics cmp = release_metrics(log_comp, push.t_end, dt);

  c.expect(nom.disp.cwiseAbs().maxCoeff() > 1e-3 &&
               cmp.disp.cwiseAbs().maxCoeff() > 1e-3,
           "push failed to guide one of the runs");
  c.expect(cmp.overshoot < nom.overshoot,
           "overshoot %.4f not below nominal %.4f", cmp.overshoot, nom.overshoot);
  c.expect(cmp.reverse <= 1e-3, "post-release reverse motion %.2e rad/s",
           cmp.reverse);

  if (c.ok)
    c.note("overshoot %.3f -> %.3f rad/s, reverse %.1e -> %.1e rad/s",
           nom.overshoot, cmp.overshoot, nom.reverse, cmp.reverse);
  return c.ok;
}

// --- check 10: report arithmetic on published per-joint values ---------------

bool check_report_arithmetic(Checker& c) {
  Vec static_nominal(4), static_comp(4);
  static_nominal << 92.56, 387.10, 329.22, 311.81;
  static_comp << 18.32, 37.73, 43.89, 27.88;
  const double a = round_cents(aggregate_mean(static_nominal));
  const double b = round_cents(aggregate_mean(static_comp));
  c.expect(a == 280.17, "nominal aggregate %.2f != 280.17", a);
  c.expect(b == 31.96, "compensated aggregate %.2f != 31.96", b);
  if (c.ok) c.note("aggregates %.2f and %.2f, exact at two decimals", a, b);
  return c.ok;
}

}  // namespace

int main() {
  using clock = std::chrono::steady_clock;
  PipelineArtifacts art;

  struct Entry {
    int id;
    const char* name;
    double budget_s;  // 0 = no stated budget
    std::function<bool(Checker&)> run;
  };
  const std::vector<Entry> entries = {
      {1, "dynamics vs finite-difference oracles", 10.0, check_dynamics},
      {2, "friction curve and hysteretic bristle", 30.0, check_friction},
      {3, "latched static estimate", 30.0, check_static_estimate},
      {4, "contact fsm transitions", 0.0, check_fsm},
      {5, "network integrity", 120.0, check_tcn},
      {6, "paired-replay latch disambiguation", 60.0, check_latch_replay},
      {7, "held-out residual reduction", 900.0,
       [&art](Checker& c) { return check_reduction(c, &art); }},
      {8, "dead-band behavior", 0.0,
       [&art](Checker& c) { return check_dead_band(c, art); }},
      {9, "push-release compliance demo", 0.0,
       [&art](Checker& c) { return check_push_release(c, art); }},
      {10, "report arithmetic", 0.0, check_report_arithmetic},
  };

  int failures = 0;
  for (const Entry& entry : entries) {
    Checker c;
    const auto start = clock::now();
    bool ok = false;
    try {
      ok = entry.run(c);
    } catch (const std::exception& e) {
      c.note("exception: %s", e.what());
      ok = false;
    }
    const double seconds =
        std::chrono::duration<double>(clock::now() - start).count();
    if (entry.budget_s > 0.0 && seconds >= entry.budget_s) {
      ok = false;
      c.note("took %.1f s, budget %.0f s", seconds, entry.budget_s);
    }
    std::printf("[criterion %2d] %s  %s: %s  (%.1f s)\n", entry.id,
                ok ? "PASS" : "FAIL", entry.name, c.detail.c_str(), seconds);
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  std::printf("%d/10 criteria passed\n",
              static_cast<int>(entries.size()) - failures);
  return failures;
}
