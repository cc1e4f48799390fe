#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tactorque/config.hpp"
#include "tactorque/friction.hpp"
#include "tactorque/log.hpp"
#include "tactorque/plant.hpp"
#include "tactorque/scenario.hpp"
#include "tactorque/tcn.hpp"

namespace tactorque {

enum class PhaseLabel { Static = 0, StaticToKinetic = 1, Kinetic = 2 };
constexpr int kPhaseCount = 3;
const char* to_string(PhaseLabel label);

// Per-joint, per-sample labels. Static wherever |qd| < omega_static; an
// upward crossing opens a window_samples-long StaticToKinetic stretch; the
// threshold rule wins inside the window, and a dip back below it starts a
// fresh window on the next rise. Everything else is Kinetic.
std::vector<std::vector<PhaseLabel>> phase_segmentation(const Mat& qd,
                                                        double omega_static,
                                                        int window_samples);

struct PhaseStats {
  double rmse = 0.0;
  double std_dev = 0.0;  // population
  double mean = 0.0;
  long count = 0;
};

// Residual error statistics per phase, for the nominal model (tau_res) and
// the compensated one (tau_res - tau_tcn), over force-free runs. Aggregates
// are the plain mean of the per-joint RMSEs.
struct ResidualReport {
  std::array<std::vector<PhaseStats>, kPhaseCount> nominal;  // [phase][joint]
  std::array<std::vector<PhaseStats>, kPhaseCount> compensated;
  std::array<double, kPhaseCount> nominal_aggregate{};
  std::array<double, kPhaseCount> compensated_aggregate{};
  std::array<double, kPhaseCount> reduction_pct{};
};

ResidualReport residual_report(const RunLog& nominal, const RunLog& compensated,
                               const EstimatorParams& params);

double aggregate_mean(const Vec& per_joint);
double reduction_percent(double before, double after);
// Presentation rounding, half away from zero with a guard against binary
// representation sitting a hair under the half.
double round_cents(double x);   // two decimals, current units
double round_tenths(double x);  // one decimal, percentages

void write_report(const ResidualReport& report, std::ostream& out);

// One end-to-end pass: plant, contact-aware estimator, optional network
// compensation, optional admittance compliance. Fully determined by
// (cfg, track, script, opts).
struct PipelineOptions {
  FrictionParams friction;          // curve the estimator believes in
  const TcnModel* model = nullptr;  // compensated run when set
  bool compliance = false;
  Vec sigma;                        // per-joint dead-band scale, compliance only
  std::uint64_t seed = 0;
};

RunLog run_pipeline(const SystemConfig& cfg, const CommandTrack& track,
                    const ForceScript& script, const PipelineOptions& opts);

// Excitation run against the true plant, then a least-squares fit of the
// static curve on clearly-moving samples. This is the curve the estimator
// is given; the plant keeps its own.
IdentifiedFriction identify_from_excitation(const SystemConfig& cfg,
                                            double duration,
                                            std::uint64_t seed,
                                            double min_vel = 0.02);

void save_friction(const FrictionParams& params, const std::string& path);
FrictionParams load_friction(const std::string& path);

}  // namespace tactorque
