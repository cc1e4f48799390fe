#include "tactorque/config.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "tactorque/errors.hpp"

namespace tactorque {

void ServoParams::validate(int n) const {
  auto dim = [&](const Vec& v, const char* name) {
    require(v.size() == n, std::string("servo.") + name + " has wrong length");
  };
  dim(kp, "kp");
  dim(kd, "kd");
  dim(ki, "ki");
  dim(tau_max, "tau_max");
  dim(integral_limit, "integral_limit");
  require(kp.minCoeff() >= 0.0 && kd.minCoeff() >= 0.0 && ki.minCoeff() >= 0.0,
          "servo gains must be non-negative");
  require(tau_max.minCoeff() > 0.0, "servo.tau_max must be positive");
  require(integral_limit.minCoeff() >= 0.0, "servo.integral_limit must be non-negative");
  require(integrator_gate >= 0.0, "servo.integrator_gate must be non-negative");
  require(integral_slew >= 0.0, "servo.integral_slew must be non-negative");
}

void PlantParams::validate() const {
  require(dt > 0.0, "plant.dt must be positive");
  require(skin_dt > 0.0 && skin_dt <= dt + 1e-12, "plant.skin_dt must be in (0, dt]");
  require(current_noise_std >= 0.0, "plant.current_noise_std must be non-negative");
  require(vel_filter_hz > 0.0 && acc_filter_hz > 0.0, "filter cutoffs must be positive");
}

void EstimatorParams::validate() const {
  require(static_threshold > 0.0, "estimator.static_threshold must be positive");
  require(transition_window > 0, "estimator.transition_window must be positive");
  require(contact_threshold > 0.0, "estimator.contact_threshold must be positive");
  require(contact_hysteresis >= 0.0 && contact_hysteresis < contact_threshold,
          "estimator.contact_hysteresis must be in [0, contact_threshold)");
  require(deadband_k >= 0.0, "estimator.deadband_k must be non-negative");
  require(debounce_time >= 0.0, "estimator.debounce_time must be non-negative");
}

int CompensatorParams::receptive_field() const {
  return 1 + (kernel - 1) * ((1 << layers) - 1);
}

void CompensatorParams::validate() const {
  require(window > 0, "compensator.window must be positive");
  require(channels > 0 && layers > 0 && kernel >= 2, "compensator net shape invalid");
  require(w_low >= 0.0 && w_high >= 0.0, "compensator band weights must be non-negative");
  require(split_hz > 0.0, "compensator.split_hz must be positive");
  require(gate_threshold > 0.0, "compensator.gate_threshold must be positive");
  require(dynamic_downsample >= 1, "compensator.dynamic_downsample must be >= 1");
  require(lr > 0.0 && momentum >= 0.0 && momentum < 1.0, "compensator optimizer params invalid");
  require(batch > 0 && epochs > 0, "compensator training params invalid");
}

void ControlParams::validate() const {
  require(mass > 0.0 && damping > 0.0, "control mass/damping must be positive");
  require(v_limit > 0.0, "control.v_limit must be positive");
}

void SystemConfig::validate() const {
  model.validate();
  const int n = model.n();
  require(friction.n() == n, "friction parameter length does not match joint count");
  friction.validate();
  if (friction_enabled()) bristle.validate(n);
  if (pads.size() > 0) pads.validate(n);
  servo.validate(n);
  plant.validate();
  estimator.validate();
  compensator.validate();
  control.validate();
  require(scenario.rise_time >= 0.0, "scenario.rise_time must be non-negative");
}

namespace {

struct KvStore {
  std::map<std::string, std::string> values;
  mutable std::map<std::string, bool> used;

  bool has(const std::string& key) const {
    auto it = values.find(key);
    if (it == values.end()) return false;
    used[key] = true;
    return true;
  }
  const std::string& raw(const std::string& key) const {
    used[key] = true;
    return values.at(key);
  }
  double number(const std::string& key) const {
    const std::string& s = raw(key);
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &pos);
    } catch (const std::exception&) {
      throw ContractError("config key '" + key + "' is not a number: '" + s + "'");
    }
    require(pos == s.size(), "config key '" + key + "' has trailing junk: '" + s + "'");
    return v;
  }
  double number_or(const std::string& key, double fallback) const {
    return has(key) ? number(key) : fallback;
  }
  Vec vector(const std::string& key, int n) const {
    std::istringstream in(raw(key));
    Vec v(n);
    for (int i = 0; i < n; ++i) {
      if (!(in >> v[i]))
        throw ContractError("config key '" + key + "' needs " + std::to_string(n) + " numbers");
    }
    double extra;
    require(!(in >> extra), "config key '" + key + "' has more than " + std::to_string(n) + " numbers");
    return v;
  }
  Vec vector_or(const std::string& key, const Vec& fallback) const {
    return has(key) ? vector(key, static_cast<int>(fallback.size())) : fallback;
  }
};

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

void insert_pair(KvStore& kv, const std::string& line, const std::string& where) {
  std::size_t eq = line.find('=');
  require(eq != std::string::npos, "malformed config entry (" + where + "): '" + line + "'");
  std::string key = trim(line.substr(0, eq));
  std::string val = trim(line.substr(eq + 1));
  require(!key.empty(), "empty config key (" + where + ")");
  kv.values[key] = val;
}

Mat3 inertia_from_six(const Vec& v) {
  Mat3 m;
  m << v[0], v[3], v[4],
       v[3], v[1], v[5],
       v[4], v[5], v[2];
  return m;
}

}  // namespace

SystemConfig parse_config_text(const std::string& text,
                               const std::vector<std::string>& overrides) {
  KvStore kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    insert_pair(kv, line, "line " + std::to_string(lineno));
  }
  for (const std::string& ov : overrides) insert_pair(kv, ov, "override");

  SystemConfig cfg;

  require(kv.has("robot.n_joints"), "config must set robot.n_joints");
  const int n = static_cast<int>(kv.number("robot.n_joints"));
  require(n >= 1 && n <= 16, "robot.n_joints out of range");

  cfg.model.gravity = kv.vector_or("robot.gravity", Vec3(0.0, 0.0, -9.81));
  cfg.model.torque_constant = kv.number_or("robot.torque_constant", 1.0);
  cfg.model.joints.resize(n);
  for (int j = 0; j < n; ++j) {
    const std::string p = "joint" + std::to_string(j + 1) + ".";
    JointParams& jp = cfg.model.joints[j];
    jp.axis = kv.vector(p + "axis", 3);
    jp.origin = kv.vector(p + "origin", 3);
    jp.mass = kv.number(p + "mass");
    jp.com = kv.vector(p + "com", 3);
    jp.inertia = inertia_from_six(kv.vector(p + "inertia", 6));
    jp.reflected_inertia = kv.number_or(p + "reflected_inertia", 0.0);
    Vec lim = kv.vector_or(p + "limits", Vec::Zero(2));
    if (lim.isZero()) lim << -1e9, 1e9;
    jp.limit_lo = lim[0];
    jp.limit_hi = lim[1];
  }

  const Vec zeros = Vec::Zero(n);
  cfg.friction.coulomb = kv.vector_or("friction.coulomb", zeros);
  cfg.friction.breakaway = kv.vector_or("friction.breakaway", zeros);
  cfg.friction.stribeck_vel = kv.vector_or("friction.stribeck_vel", Vec::Constant(n, 1.0));
  cfg.friction.shape = kv.vector_or("friction.shape", Vec::Constant(n, 2.0));
  cfg.friction.viscous = kv.vector_or("friction.viscous", zeros);
  cfg.friction.load_coulomb = kv.vector_or("friction.load_coulomb", zeros);
  cfg.friction.load_viscous = kv.vector_or("friction.load_viscous", zeros);
  if (cfg.friction_enabled()) {
    cfg.bristle = default_bristle(cfg.friction);
    cfg.bristle.stiffness = kv.vector_or("friction.sigma0", cfg.bristle.stiffness);
    cfg.bristle.damping = kv.vector_or("friction.sigma1", cfg.bristle.damping);
  }

  const int n_pads = static_cast<int>(kv.number_or("skin.n_pads", 0.0));
  require(n_pads >= 0, "skin.n_pads must be non-negative");
  cfg.pads.pads.resize(n_pads);
  for (int k = 0; k < n_pads; ++k) {
    const std::string p = "pad" + std::to_string(k + 1) + ".";
    Pad& pad = cfg.pads.pads[k];
    pad.id = k + 1;
    // Config files number links from 1; in memory links are 0-based.
    pad.link = static_cast<int>(kv.number(p + "link")) - 1;
    pad.center = kv.vector(p + "center", 3);
    pad.normal = kv.vector(p + "normal", 3);
    pad.area = kv.number_or(p + "area", 1e-3);
    pad.gain = kv.number_or(p + "gain", 1.0);
    pad.noise_std = kv.number_or(p + "noise_std", 0.0);
  }

  cfg.servo.kp = kv.vector_or("servo.kp", zeros);
  cfg.servo.kd = kv.vector_or("servo.kd", zeros);
  cfg.servo.ki = kv.vector_or("servo.ki", zeros);
  cfg.servo.tau_max = kv.vector_or("servo.tau_max", Vec::Constant(n, 50.0));
  cfg.servo.integral_limit = kv.vector_or("servo.integral_limit", Vec::Constant(n, 20.0));
  cfg.servo.integrator_gate = kv.number_or("servo.integrator_gate", cfg.servo.integrator_gate);
  cfg.servo.integral_slew = kv.number_or("servo.integral_slew", cfg.servo.integral_slew);

  cfg.plant.dt = kv.number_or("plant.dt", cfg.plant.dt);
  cfg.plant.skin_dt = kv.number_or("plant.skin_dt", cfg.plant.skin_dt);
  cfg.plant.current_noise_std = kv.number_or("plant.current_noise_std", cfg.plant.current_noise_std);
  cfg.plant.vel_filter_hz = kv.number_or("plant.vel_filter_hz", cfg.plant.vel_filter_hz);
  cfg.plant.acc_filter_hz = kv.number_or("plant.acc_filter_hz", cfg.plant.acc_filter_hz);

  EstimatorParams& est = cfg.estimator;
  est.static_threshold = kv.number_or("estimator.static_threshold", est.static_threshold);
  est.transition_window = static_cast<int>(kv.number_or("estimator.transition_window", est.transition_window));
  est.contact_threshold = kv.number_or("estimator.contact_threshold", est.contact_threshold);
  est.contact_hysteresis = kv.number_or("estimator.contact_hysteresis", est.contact_hysteresis);
  est.deadband_k = kv.number_or("estimator.deadband_k", est.deadband_k);
  est.debounce_time = kv.number_or("estimator.debounce_time", est.debounce_time);

  CompensatorParams& cp = cfg.compensator;
  cp.window = static_cast<int>(kv.number_or("compensator.window", cp.window));
  cp.channels = static_cast<int>(kv.number_or("compensator.channels", cp.channels));
  cp.layers = static_cast<int>(kv.number_or("compensator.layers", cp.layers));
  cp.kernel = static_cast<int>(kv.number_or("compensator.kernel", cp.kernel));
  cp.w_low = kv.number_or("compensator.w_low", cp.w_low);
  cp.w_high = kv.number_or("compensator.w_high", cp.w_high);
  cp.split_hz = kv.number_or("compensator.split_hz", cp.split_hz);
  cp.gate_threshold = kv.number_or("compensator.gate_threshold", cp.gate_threshold);
  if (kv.has("compensator.friction_channel")) {
    const std::string& mode = kv.raw("compensator.friction_channel");
    require(mode == "latched" || mode == "zeroed",
            "compensator.friction_channel must be 'latched' or 'zeroed'");
    cp.zeroed_channel = (mode == "zeroed");
  }
  cp.dynamic_downsample = static_cast<int>(kv.number_or("compensator.dynamic_downsample", cp.dynamic_downsample));
  cp.lr = kv.number_or("compensator.lr", cp.lr);
  cp.momentum = kv.number_or("compensator.momentum", cp.momentum);
  cp.batch = static_cast<int>(kv.number_or("compensator.batch", cp.batch));
  cp.epochs = static_cast<int>(kv.number_or("compensator.epochs", cp.epochs));

  cfg.control.mass = kv.number_or("control.mass", cfg.control.mass);
  cfg.control.damping = kv.number_or("control.damping", cfg.control.damping);
  cfg.control.v_limit = kv.number_or("control.v_limit", cfg.control.v_limit);

  cfg.scenario.rise_time = kv.number_or("scenario.rise_time", cfg.scenario.rise_time);

  for (const auto& [key, value] : kv.values) {
    require(kv.used.count(key) && kv.used[key], "unknown config key: '" + key + "'");
  }

  cfg.validate();
  return cfg;
}

SystemConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream body;
  body << in.rdbuf();
  return parse_config_text(body.str(), overrides);
}

}  // namespace tactorque
