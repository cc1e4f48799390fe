#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tactorque/compensator.hpp"
#include "tactorque/config.hpp"
#include "tactorque/errors.hpp"
#include "tactorque/harness.hpp"
#include "tactorque/log.hpp"
#include "tactorque/plant.hpp"
#include "tactorque/scenario.hpp"
#include "tactorque/tcn.hpp"

namespace tq = tactorque;

namespace {

tq::Vec parse_vec(const std::string& text, int expect) {
  std::vector<double> vals;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = text.find(',', pos);
    const std::string tok =
        text.substr(pos, comma == std::string::npos ? comma : comma - pos);
    try {
      std::size_t used = 0;
      vals.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw tq::ContractError("not a number list: '" + text + "'");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  tq::require(expect < 0 || static_cast<int>(vals.size()) == expect,
              "expected " + std::to_string(expect) + " values in '" + text + "'");
  tq::Vec v(static_cast<Eigen::Index>(vals.size()));
  for (std::size_t i = 0; i < vals.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = vals[i];
  return v;
}

tq::Vec parse_pose(const std::string& text, int n) {
  if (text.empty()) return tq::Vec::Zero(n);
  return parse_vec(text, n);
}

struct RunArgs {
  std::string config;
  std::vector<std::string> sets;
  std::string scenario = "none";
  std::string friction;
  std::string model;
  std::string pose;
  std::string sigma;
  bool excite = false;
  bool compliance = false;
  double duration = 10.0;
  std::uint64_t seed = 0;
};

// Shared by simulate and demo: config, track, script, and estimator belief.
struct RunSetup {
  tq::SystemConfig cfg;
  tq::CommandTrack track;
  tq::ForceScript script;
  tq::PipelineOptions opts;
  std::optional<tq::TcnModel> model;
};

RunSetup prepare_run(const RunArgs& a) {
  RunSetup s;
  s.cfg = tq::load_config(a.config, a.sets);
  const int n = s.cfg.model.n();
  s.track = a.excite
                ? tq::excitation_track(s.cfg.model, a.seed, a.duration,
                                       s.cfg.plant.dt)
                : tq::hold_track(parse_pose(a.pose, n), a.duration,
                                 s.cfg.plant.dt);
  if (a.scenario != "none")
    s.script = tq::ForceScript::load(a.scenario, s.cfg.scenario.rise_time);
  s.opts.friction =
      a.friction.empty() ? s.cfg.friction : tq::load_friction(a.friction);
  if (!a.model.empty()) {
    s.model = tq::load_tcn(a.model);
    s.opts.model = &*s.model;
  }
  s.opts.compliance = a.compliance;
  if (a.compliance) {
    tq::require(!a.sigma.empty(),
                "--compliance needs --sigma (per-joint dead-band scale)");
    s.opts.sigma = parse_vec(a.sigma, n);
  }
  s.opts.seed = a.seed;
  return s;
}

// First commanded motion, last motion, and the peak speeds around the
// release instant, per run.
struct MotionEvents {
  double onset = -1.0;
  double stop = -1.0;
  double push_peak = 0.0;     // max joint speed while the force is on
  double reverse_peak = 0.0;  // post-release speed against the push direction
};

MotionEvents motion_events(const tq::RunLog& log, double t_release) {
  MotionEvents ev;
  const int len = log.length();
  int k_onset = -1, k_release = len - 1;
  for (int k = 0; k < len; ++k) {
    if (log.v_cmd.col(k).cwiseAbs().maxCoeff() > 1e-9) {
      if (k_onset < 0) {
        k_onset = k;
        ev.onset = log.t[static_cast<std::size_t>(k)];
      }
      ev.stop = log.t[static_cast<std::size_t>(k)];
    }
    if (log.t[static_cast<std::size_t>(k)] <= t_release) k_release = k;
  }
  if (k_onset < 0) return ev;
  for (int k = k_onset; k <= k_release; ++k)
    ev.push_peak = std::max(ev.push_peak, log.qd.col(k).cwiseAbs().maxCoeff());
  // Push direction per joint: net commanded displacement up to release.
  const tq::Vec disp =
      log.q.col(k_release) - log.q.col(std::max(0, k_onset - 1));
  for (int k = k_release + 1; k < len; ++k)
    for (int j = 0; j < log.n; ++j) {
      const double against = -(disp(j) < 0 ? -1.0 : 1.0) * log.qd(j, k);
      ev.reverse_peak = std::max(ev.reverse_peak, against);
    }
  return ev;
}

void print_events(const char* name, const MotionEvents& ev) {
  if (ev.onset < 0) {
    std::printf("%-12s no commanded motion\n", name);
    return;
  }
  std::printf(
      "%-12s motion %.3f s .. %.3f s   push peak %.4f rad/s   "
      "post-release reverse %.6f rad/s\n",
      name, ev.onset, ev.stop, ev.push_peak, ev.reverse_peak);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "tactorque: simulated tactile-proprioceptive external torque "
      "estimation on a 4-DoF geared arm"};
  app.require_subcommand(1);

  RunArgs sim;
  std::string sim_out;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "Run plant + estimator (optionally compensated), write a log");
  simulate->add_option("--config", sim.config, "key = value config file")
      ->required();
  simulate->add_option("--set", sim.sets, "override, e.g. plant.dt=0.005");
  simulate->add_option("--scenario", sim.scenario,
                       "force script file, or 'none'")->capture_default_str();
  simulate->add_option("--friction", sim.friction,
                       "estimator friction belief (default: config curve)");
  simulate->add_option("--model", sim.model, "compensator weights file");
  simulate->add_option("--pose", sim.pose, "hold pose, comma separated rad");
  simulate->add_flag("--excite", sim.excite,
                     "drive the seeded excitation track instead of a hold");
  simulate->add_flag("--compliance", sim.compliance, "enable admittance");
  simulate->add_option("--sigma", sim.sigma,
                       "per-joint dead-band scale, comma separated");
  simulate->add_option("--duration", sim.duration, "run length [s]")->capture_default_str();
  simulate->add_option("--seed", sim.seed, "noise and excitation seed")->capture_default_str();
  simulate->add_option("--out", sim_out, "log file to write")->required();
  simulate->callback([&] {
    RunSetup s = prepare_run(sim);
    const tq::RunLog log = tq::run_pipeline(s.cfg, s.track, s.script, s.opts);
    tq::save_log(log, sim_out);
    std::printf("wrote %s: %d samples, %d joints, force_free=%d\n",
                sim_out.c_str(), log.length(), log.n, log.force_free ? 1 : 0);
  });

  struct {
    std::string config, out;
    std::vector<std::string> sets;
    double duration = 60.0, min_vel = 0.02;
    std::uint64_t seed = 1;
  } ident;
  CLI::App* identify = app.add_subcommand(
      "identify", "Fit the static friction curve from a seeded excitation run");
  identify->add_option("--config", ident.config, "config file")->required();
  identify->add_option("--set", ident.sets, "config override");
  identify->add_option("--duration", ident.duration, "excitation length [s]")->capture_default_str();
  identify->add_option("--min-vel", ident.min_vel,
                       "lowest |qd| a sample may have [rad/s]")->capture_default_str();
  identify->add_option("--seed", ident.seed, "excitation seed")->capture_default_str();
  identify->add_option("--out", ident.out, "parameter file to write")
      ->required();
  identify->callback([&] {
    const tq::SystemConfig cfg = tq::load_config(ident.config, ident.sets);
    const tq::IdentifiedFriction fit =
        tq::identify_from_excitation(cfg, ident.duration, ident.seed,
                                     ident.min_vel);
    tq::save_friction(fit.params, ident.out);
    std::printf("joint  coulomb  breakaway  stribeck_vel  shape  viscous  "
                "load_c  load_v  fit_rmse\n");
    for (int j = 0; j < fit.params.n(); ++j)
      std::printf("%5d  %7.3f  %9.3f  %12.4f  %5.2f  %7.3f  %6.3f  %6.3f  %8.4f\n",
                  j + 1, fit.params.coulomb[j], fit.params.breakaway[j],
                  fit.params.stribeck_vel[j], fit.params.shape[j],
                  fit.params.viscous[j], fit.params.load_coulomb[j],
                  fit.params.load_viscous[j], fit.rmse[j]);
    std::printf("wrote %s\n", ident.out.c_str());
  });

  struct {
    std::string config;
    std::vector<std::string> sets, logs;
    std::uint64_t split_seed = 1;
  } ds;
  CLI::App* build_ds = app.add_subcommand(
      "build-dataset", "Inspect the training set built from force-free logs");
  build_ds->add_option("--config", ds.config, "config file")->required();
  build_ds->add_option("--set", ds.sets, "config override");
  build_ds->add_option("--log", ds.logs, "force-free log file (repeatable)")
      ->required();
  build_ds->add_option("--split-seed", ds.split_seed, "train/val shuffle seed")->capture_default_str();
  build_ds->callback([&] {
    const tq::SystemConfig cfg = tq::load_config(ds.config, ds.sets);
    std::vector<tq::RunLog> logs;
    for (const auto& path : ds.logs) logs.push_back(tq::load_log(path));
    const tq::Dataset data = tq::build_dataset(logs, cfg, ds.split_seed);
    std::printf("logs: %zu, joints: %d, input channels: %d, window: %d\n",
                logs.size(), data.n, data.c_in, data.window);
    std::printf("windows: %d total, %zu train, %zu val (split seed %llu)\n",
                data.total_windows(), data.train.size(), data.val.size(),
                static_cast<unsigned long long>(ds.split_seed));
    std::printf("labels split at %.3g Hz into low and high bands\n",
                cfg.compensator.split_hz);
  });

  struct {
    std::string config, out;
    std::vector<std::string> sets, logs;
    std::uint64_t seed = 1, split_seed = 1;
  } tr;
  CLI::App* train = app.add_subcommand(
      "train", "Fit the compensator on force-free logs, write weights");
  train->add_option("--config", tr.config, "config file")->required();
  train->add_option("--set", tr.sets, "config override");
  train->add_option("--log", tr.logs, "force-free log file (repeatable)")
      ->required();
  train->add_option("--seed", tr.seed, "weight init / shuffle seed")->capture_default_str();
  train->add_option("--split-seed", tr.split_seed, "train/val shuffle seed")->capture_default_str();
  train->add_option("--out", tr.out, "weights file to write")->required();
  train->callback([&] {
    const tq::SystemConfig cfg = tq::load_config(tr.config, tr.sets);
    std::vector<tq::RunLog> logs;
    for (const auto& path : tr.logs) logs.push_back(tq::load_log(path));
    const tq::Dataset data = tq::build_dataset(logs, cfg, tr.split_seed);
    std::printf("training on %zu windows, validating on %zu\n",
                data.train.size(), data.val.size());
    tq::TrainReport report;
    const tq::TcnModel model =
        tq::train_compensator(data, cfg.compensator, tr.seed, &report);
    for (std::size_t e = 0; e < report.train_loss.size(); ++e)
      std::printf("epoch %zu  train %.6g  val %.6g\n", e + 1,
                  report.train_loss[e], report.val_loss[e]);
    tq::save_tcn(model, tr.out);
    std::printf("wrote %s\n", tr.out.c_str());
  });

  struct {
    std::string config, nominal, compensated, out;
    std::vector<std::string> sets;
  } ev;
  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "Per-phase residual statistics of nominal vs compensated logs");
  evaluate->add_option("--config", ev.config, "config file")->required();
  evaluate->add_option("--set", ev.sets, "config override");
  evaluate->add_option("--nominal", ev.nominal, "force-free nominal log")
      ->required();
  evaluate->add_option("--compensated", ev.compensated,
                       "force-free compensated log")
      ->required();
  evaluate->add_option("--out", ev.out, "also write the report here");
  evaluate->callback([&] {
    const tq::SystemConfig cfg = tq::load_config(ev.config, ev.sets);
    const tq::RunLog nom = tq::load_log(ev.nominal);
    const tq::RunLog comp = tq::load_log(ev.compensated);
    const tq::ResidualReport report =
        tq::residual_report(nom, comp, cfg.estimator);
    tq::write_report(report, std::cout);
    if (!ev.out.empty()) {
      std::ofstream f(ev.out, std::ios::binary);
      if (!f) throw tq::IoError("cannot open " + ev.out + " for writing");
      tq::write_report(report, f);
    }
  });

  RunArgs dm;
  std::string dm_dir = ".";
  CLI::App* demo = app.add_subcommand(
      "demo", "Push-release comparison: nominal vs compensated compliance");
  demo->add_option("--config", dm.config, "config file")->required();
  demo->add_option("--set", dm.sets, "config override");
  demo->add_option("--scenario", dm.scenario, "force script file")->required();
  demo->add_option("--model", dm.model, "compensator weights file")->required();
  demo->add_option("--friction", dm.friction,
                   "estimator friction belief (default: config curve)");
  demo->add_option("--pose", dm.pose, "hold pose, comma separated rad");
  demo->add_option("--sigma", dm.sigma,
                   "per-joint dead-band scale, comma separated")
      ->required();
  demo->add_option("--duration", dm.duration,
                   "run length [s]; 0 = script end + 3 s")->capture_default_str();
  demo->add_option("--seed", dm.seed, "noise seed (shared by both runs)")->capture_default_str();
  demo->add_option("--out-dir", dm_dir, "directory for the two logs")->capture_default_str();
  demo->callback([&] {
    dm.compliance = true;
    if (dm.duration <= 0.0) {
      const tq::SystemConfig cfg = tq::load_config(dm.config, dm.sets);
      dm.duration =
          tq::ForceScript::load(dm.scenario, cfg.scenario.rise_time).end_time() +
          3.0;
    }
    RunSetup s = prepare_run(dm);
    tq::require(s.opts.model != nullptr, "demo needs a model");
    const double t_release = s.script.end_time();

    tq::PipelineOptions nominal_opts = s.opts;
    nominal_opts.model = nullptr;
    const tq::RunLog nominal =
        tq::run_pipeline(s.cfg, s.track, s.script, nominal_opts);
    const tq::RunLog comp = tq::run_pipeline(s.cfg, s.track, s.script, s.opts);

    tq::save_log(nominal, dm_dir + "/nominal.csv");
    tq::save_log(comp, dm_dir + "/compensated.csv");
    print_events("nominal", motion_events(nominal, t_release));
    print_events("compensated", motion_events(comp, t_release));
  });

  struct {
    std::string nominal, compensated;
  } rp;
  CLI::App* report = app.add_subcommand(
      "report", "Aggregate arithmetic on per-joint RMSE values");
  report->add_option("--nominal", rp.nominal,
                     "per-joint RMSEs, comma separated")
      ->required();
  report->add_option("--compensated", rp.compensated,
                     "per-joint RMSEs, comma separated")
      ->required();
  report->callback([&] {
    const tq::Vec a = parse_vec(rp.nominal, -1);
    const tq::Vec b = parse_vec(rp.compensated, -1);
    tq::require(a.size() == b.size(), "value lists differ in length");
    const double am = tq::aggregate_mean(a);
    const double bm = tq::aggregate_mean(b);
    std::printf("nominal aggregate     %.2f\n", tq::round_cents(am));
    std::printf("compensated aggregate %.2f\n", tq::round_cents(bm));
    std::printf("reduction             %.1f%%\n",
                tq::round_tenths(tq::reduction_percent(am, bm)));
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const tq::IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
