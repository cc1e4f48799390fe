#include "tactorque/harness.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "tactorque/compensator.hpp"
#include "tactorque/control.hpp"
#include "tactorque/errors.hpp"
#include "tactorque/estimator.hpp"

namespace tactorque {
namespace {

PhaseStats stats_of(const std::vector<double>& errors) {
  PhaseStats s;
  s.count = static_cast<long>(errors.size());
  if (errors.empty()) return s;
  double sum = 0.0;
  for (double e : errors) sum += e;
  s.mean = sum / static_cast<double>(s.count);
  double sq = 0.0;
  double dev = 0.0;
  for (double e : errors) {
    sq += e * e;
    dev += (e - s.mean) * (e - s.mean);
  }
  s.rmse = std::sqrt(sq / static_cast<double>(s.count));
  s.std_dev = std::sqrt(dev / static_cast<double>(s.count));
  return s;
}

void write_phase(std::ostream& out, const ResidualReport& report, int phase) {
  char buf[160];
  out << "phase: " << to_string(static_cast<PhaseLabel>(phase)) << "\n";
  out << "  joint    nominal rmse    nominal std    compens. rmse    "
         "compens. std\n";
  const std::size_t joints = report.nominal[phase].size();
  for (std::size_t j = 0; j < joints; ++j) {
    const PhaseStats& a = report.nominal[phase][j];
    const PhaseStats& b = report.compensated[phase][j];
    std::snprintf(buf, sizeof buf, "  %5zu %15.2f %14.2f %16.2f %15.2f\n",
                  j + 1, round_cents(a.rmse), round_cents(a.std_dev),
                  round_cents(b.rmse), round_cents(b.std_dev));
    out << buf;
  }
  std::snprintf(buf, sizeof buf,
                "  aggregate rmse %.2f -> %.2f   reduction %.1f%%\n\n",
                round_cents(report.nominal_aggregate[phase]),
                round_cents(report.compensated_aggregate[phase]),
                round_tenths(report.reduction_pct[phase]));
  out << buf;
}

Vec parse_friction_row(const std::string& line, const char* key, int n,
                       const std::string& path) {
  std::istringstream in(line);
  std::string head;
  in >> head;
  if (head != key)
    throw IoError(path + ": expected '" + key + "' row, got '" + head + "'");
  Vec v(n);
  for (int j = 0; j < n; ++j)
    if (!(in >> v(j))) throw IoError(path + ": short '" + std::string(key) + "' row");
  return v;
}

}  // namespace

const char* to_string(PhaseLabel label) {
  switch (label) {
    case PhaseLabel::Static: return "static";
    case PhaseLabel::StaticToKinetic: return "static-to-kinetic";
    case PhaseLabel::Kinetic: return "kinetic";
  }
  return "?";
}

std::vector<std::vector<PhaseLabel>> phase_segmentation(const Mat& qd,
                                                        double omega_static,
                                                        int window_samples) {
  require(omega_static > 0.0, "segmentation threshold must be positive");
  require(window_samples >= 1, "transition window must be at least one sample");
  const int n = static_cast<int>(qd.rows());
  const int len = static_cast<int>(qd.cols());
  require(n > 0 && len > 0, "empty velocity stream");

  std::vector<std::vector<PhaseLabel>> labels(
      static_cast<std::size_t>(n),
      std::vector<PhaseLabel>(static_cast<std::size_t>(len)));
  for (int j = 0; j < n; ++j) {
    bool prev_static = false;  // a run that starts moving saw no crossing
    int remaining = 0;
    for (int k = 0; k < len; ++k) {
      if (std::abs(qd(j, k)) < omega_static) {
        labels[j][k] = PhaseLabel::Static;
        remaining = 0;
        prev_static = true;
        continue;
      }
      if (prev_static) remaining = window_samples;
      prev_static = false;
      if (remaining > 0) {
        labels[j][k] = PhaseLabel::StaticToKinetic;
        --remaining;
      } else {
        labels[j][k] = PhaseLabel::Kinetic;
      }
    }
  }
  return labels;
}

ResidualReport residual_report(const RunLog& nominal, const RunLog& compensated,
                               const EstimatorParams& params) {
  nominal.validate();
  compensated.validate();
  params.validate();
  require(nominal.n == compensated.n && nominal.length() == compensated.length(),
          "misaligned logs: shape");
  require(nominal.force_free && compensated.force_free,
          "residual statistics are defined on force-free runs");
  require((nominal.qd - compensated.qd).cwiseAbs().maxCoeff() == 0.0,
          "misaligned logs: the two runs move differently");

  const auto labels = phase_segmentation(nominal.qd, params.static_threshold,
                                         params.transition_window);
  const Mat err_nom = nominal.tau_res;
  const Mat err_comp = compensated.tau_res - compensated.tau_tcn;

  ResidualReport report;
  for (int p = 0; p < kPhaseCount; ++p) {
    report.nominal[p].resize(static_cast<std::size_t>(nominal.n));
    report.compensated[p].resize(static_cast<std::size_t>(nominal.n));
  }
  for (int j = 0; j < nominal.n; ++j) {
    std::vector<double> nom[kPhaseCount], comp[kPhaseCount];
    for (int k = 0; k < nominal.length(); ++k) {
      const int p = static_cast<int>(labels[j][k]);
      nom[p].push_back(err_nom(j, k));
      comp[p].push_back(err_comp(j, k));
    }
    for (int p = 0; p < kPhaseCount; ++p) {
      report.nominal[p][static_cast<std::size_t>(j)] = stats_of(nom[p]);
      report.compensated[p][static_cast<std::size_t>(j)] = stats_of(comp[p]);
    }
  }
  for (int p = 0; p < kPhaseCount; ++p) {
    double sum_nom = 0.0, sum_comp = 0.0;
    int with_data = 0;
    for (int j = 0; j < nominal.n; ++j) {
      if (report.nominal[p][static_cast<std::size_t>(j)].count == 0) continue;
      sum_nom += report.nominal[p][static_cast<std::size_t>(j)].rmse;
      sum_comp += report.compensated[p][static_cast<std::size_t>(j)].rmse;
      ++with_data;
    }
    report.nominal_aggregate[p] = with_data ? sum_nom / with_data : 0.0;
    report.compensated_aggregate[p] = with_data ? sum_comp / with_data : 0.0;
    report.reduction_pct[p] = reduction_percent(report.nominal_aggregate[p],
                                                report.compensated_aggregate[p]);
  }
  return report;
}

double aggregate_mean(const Vec& per_joint) {
  require(per_joint.size() > 0, "aggregate of nothing");
  return per_joint.mean();
}

double reduction_percent(double before, double after) {
  if (before <= 0.0) return 0.0;
  return (before - after) / before * 100.0;
}

double round_cents(double x) {
  return std::floor(x * 100.0 + 0.5 + 1e-6) / 100.0;
}

double round_tenths(double x) {
  return std::floor(x * 10.0 + 0.5 + 1e-6) / 10.0;
}

void write_report(const ResidualReport& report, std::ostream& out) {
  out << "residual statistics (current units)\n\n";
  for (int p = 0; p < kPhaseCount; ++p) write_phase(out, report, p);
}

RunLog run_pipeline(const SystemConfig& cfg, const CommandTrack& track,
                    const ForceScript& script, const PipelineOptions& opts) {
  cfg.validate();
  opts.friction.validate();
  const int n = static_cast<int>(cfg.model.joints.size());
  require(opts.friction.n() == n, "estimator friction size mismatch");
  const int len = track.length();
  require(len > 0, "empty command track");
  script.validate(cfg.pads);
  if (opts.compliance)
    require(opts.sigma.size() == n && (opts.sigma.array() >= 0.0).all(),
            "compliance needs a per-joint dead-band scale");
  if (opts.model) {
    opts.model->validate();
    require(opts.model->n_out == n && opts.model->c_in == 5 * n,
            "model shape does not fit this arm");
  }

  Plant plant(cfg, opts.seed);
  // The run begins on the track, at rest, so there is no startup swing.
  plant.set_state(track.at(0).q_cmd, track.at(0).qd_cmd);
  plant.set_script(script);
  ContactAwareEstimator estimator(cfg, opts.friction);
  std::optional<OnlineCompensator> online;
  if (opts.model) online.emplace(*opts.model, cfg.compensator);

  RunLog log(n, static_cast<int>(cfg.pads.pads.size()), len);
  log.force_free = script.empty();

  Vec v_cmd = Vec::Zero(n);
  Vec q_offset = Vec::Zero(n);

  for (int k = 0; k < len; ++k) {
    Command cmd = track.at(k);
    if (opts.compliance) {
      cmd.q_cmd += q_offset;
      cmd.qd_cmd += v_cmd;
    }
    const PlantOutput out = plant.step(cmd);
    const EstimatorStep est = estimator.step(out.motor, out.skin);
    const bool episode = est.state.latch.has_value();

    Vec tau_tcn = Vec::Zero(n);
    bool warm = false;
    if (online) {
      const OnlineCompensator::Result r =
          online->step(out.motor, est.decomp, episode);
      warm = r.warm;
      // Until the window has filled once the output is left out of the
      // estimate and out of the log, so statistics never see cold outputs.
      if (warm) tau_tcn = r.total;
    }

    Vec tau_hat = Vec::Zero(n);
    int quality = 0;
    if (online && warm) {
      tau_hat = est.decomp.tau_res - tau_tcn;
    } else {
      switch (est.state.mode) {
        case FsmMode::StaticWithContact:
          tau_hat = est.tau_ext;  // latched measured delta
          break;
        case FsmMode::Dynamic:
          tau_hat = est.decomp.tau_res;  // friction-polluted raw residual
          quality = 1;
          break;
        case FsmMode::StaticNoContact:
          break;
      }
    }

    if (opts.compliance) {
      // Compliance rides on the contact episode: inside it the dead-banded
      // estimate drives the admittance, outside it the virtual damper brings
      // the command to rest without reversing.
      Vec drive = Vec::Zero(n);
      if (episode)
        drive = -dead_band(tau_hat, opts.sigma, cfg.estimator.deadband_k);
      v_cmd = admittance_update(cfg.control, v_cmd, drive, cfg.plant.dt);
      q_offset += v_cmd * cfg.plant.dt;
    }

    log.t[static_cast<std::size_t>(k)] = out.motor.t;
    log.q.col(k) = out.motor.q;
    log.qd.col(k) = out.motor.qd;
    log.qdd.col(k) = out.motor.qdd;
    log.current.col(k) = out.motor.current;
    log.tau_dyn.col(k) = est.decomp.tau_dyn;
    log.tau_fric.col(k) = est.decomp.tau_fric;
    log.tau_res.col(k) = est.decomp.tau_res;
    log.tau_tcn.col(k) = tau_tcn;
    log.tau_ext_hat.col(k) = tau_hat;
    log.v_cmd.col(k) = v_cmd;
    log.fsm_mode[static_cast<std::size_t>(k)] = static_cast<int>(est.state.mode);
    log.quality[static_cast<std::size_t>(k)] = quality;
    if (!out.skin.empty()) log.pressures.col(k) = out.skin.back().pressures;
    log.tau_fric_true.col(k) = out.truth.tau_fric;
    log.tau_ext_true.col(k) = out.truth.tau_ext;
    log.force_base.col(k) = out.truth.force_base;
    log.pad_id[static_cast<std::size_t>(k)] = out.truth.pad_id;
  }
  return log;
}

IdentifiedFriction identify_from_excitation(const SystemConfig& cfg,
                                            double duration,
                                            std::uint64_t seed,
                                            double min_vel) {
  cfg.validate();
  require(duration > 0.0 && min_vel > 0.0, "bad identification window");
  const int n = static_cast<int>(cfg.model.joints.size());
  const CommandTrack track =
      excitation_track(cfg.model, seed, duration, cfg.plant.dt);
  Plant plant(cfg, seed);
  const FrictionParams none = FrictionParams::zeros(n);
  const double kt = cfg.model.torque_constant;

  std::vector<std::vector<FrictionSample>> samples(
      static_cast<std::size_t>(n));
  for (int k = 0; k < track.length(); ++k) {
    const PlantOutput out = plant.step(track.at(k));
    // With a zero friction curve the residual is the raw friction
    // observation tau_meas - tau_dyn.
    const TorqueDecomposition d = compute_residual(out.motor, cfg.model, none);
    const Vec g_abs = (gravity_vector(cfg.model, out.motor.q) / kt).cwiseAbs();
    for (int j = 0; j < n; ++j)
      if (std::abs(out.motor.qd(j)) >= min_vel)
        samples[static_cast<std::size_t>(j)].push_back(
            {out.motor.qd(j), g_abs(j), d.tau_res(j)});
  }
  return identify_friction(samples);
}

void save_friction(const FrictionParams& params, const std::string& path) {
  params.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "# tactorque friction v1 joints=" << params.n() << "\n";
  char buf[40];
  const auto row = [&](const char* key, const Vec& v) {
    out << key;
    for (int j = 0; j < v.size(); ++j) {
      std::snprintf(buf, sizeof buf, " %.17g", v(j));
      out << buf;
    }
    out << "\n";
  };
  row("coulomb", params.coulomb);
  row("breakaway", params.breakaway);
  row("stribeck_vel", params.stribeck_vel);
  row("shape", params.shape);
  row("viscous", params.viscous);
  row("load_coulomb", params.load_coulomb);
  row("load_viscous", params.load_viscous);
  if (!out) throw IoError("short write to " + path);
}

FrictionParams load_friction(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string header;
  if (!std::getline(in, header) ||
      header.rfind("# tactorque friction v1 joints=", 0) != 0)
    throw IoError(path + ": not a friction parameter file");
  const int n = std::stoi(header.substr(header.rfind('=') + 1));
  require(n >= 1 && n <= 64, "implausible joint count");

  FrictionParams p;
  std::string line;
  const auto next_row = [&](const char* key) {
    if (!std::getline(in, line)) throw IoError(path + ": missing " + key);
    return parse_friction_row(line, key, n, path);
  };
  p.coulomb = next_row("coulomb");
  p.breakaway = next_row("breakaway");
  p.stribeck_vel = next_row("stribeck_vel");
  p.shape = next_row("shape");
  p.viscous = next_row("viscous");
  p.load_coulomb = next_row("load_coulomb");
  p.load_viscous = next_row("load_viscous");
  p.validate();
  return p;
}

}  // namespace tactorque
