#pragma once

#include <string>
#include <vector>

#include "tactorque/dynamics.hpp"

namespace tactorque {

// Flat per-tick record of a scenario run: measurements, estimator outputs,
// and plant ground truth side by side. One fixed-size block per signal,
// column k = motor tick k. Serialized as CSV with a versioned header; the
// same file feeds evaluation, dataset building, and plotting.
struct RunLog {
  RunLog() = default;
  RunLog(int n_joints, int n_pads, int length);

  int n = 0;
  int n_pads = 0;
  bool force_free = true;  // no scripted contact anywhere in the run

  std::vector<double> t;
  Mat q, qd, qdd;      // measured kinematics, n x T
  Mat current;         // measured current (tau_meas in current units)
  Mat tau_dyn, tau_fric, tau_res;  // estimator decomposition
  Mat tau_tcn;         // network output, zero when no model is loaded
  Mat tau_ext_hat;     // reported external torque estimate
  Mat v_cmd;           // admittance command, zero when compliance is off
  std::vector<int> fsm_mode;  // FsmMode as int
  std::vector<int> quality;   // 0 = normal, 1 = low confidence (warm-up fallback)
  Mat pressures;       // n_pads x T
  Mat tau_fric_true;   // plant bristle friction, current units
  Mat tau_ext_true;    // sensed-convention ground truth (-J^T F / Kt)
  Mat force_base;      // scripted contact force, base frame, 3 x T
  std::vector<int> pad_id;    // strongest scripted pad, -1 when untouched

  int length() const { return static_cast<int>(t.size()); }
  void validate() const;  // consistent shapes
};

void save_log(const RunLog& log, const std::string& path);
RunLog load_log(const std::string& path);

}  // namespace tactorque
