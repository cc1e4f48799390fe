#include "tactorque/log.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "tactorque/errors.hpp"

namespace tactorque {
namespace {

void append_names(std::string& row, const char* stem, int count) {
  for (int j = 0; j < count; ++j) {
    row += ',';
    row += stem;
    row += '_';
    row += std::to_string(j + 1);
  }
}

void append_value(std::string& row, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, ",%.12g", v);
  row += buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

double parse_double(const std::string& s, const std::string& path) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw IoError(path + ": bad numeric field '" + s + "'");
  }
}

int header_key(const std::string& header, const char* key, const std::string& path) {
  const std::string token = std::string(key) + "=";
  const std::size_t at = header.find(token);
  if (at == std::string::npos) throw IoError(path + ": log header misses " + key);
  return std::stoi(header.substr(at + token.size()));
}

}  // namespace

RunLog::RunLog(int n_joints, int pads, int length) : n(n_joints), n_pads(pads) {
  require(n_joints > 0 && pads >= 0 && length > 0, "log dimensions must be positive");
  t.assign(length, 0.0);
  q = Mat::Zero(n, length);
  qd = Mat::Zero(n, length);
  qdd = Mat::Zero(n, length);
  current = Mat::Zero(n, length);
  tau_dyn = Mat::Zero(n, length);
  tau_fric = Mat::Zero(n, length);
  tau_res = Mat::Zero(n, length);
  tau_tcn = Mat::Zero(n, length);
  tau_ext_hat = Mat::Zero(n, length);
  v_cmd = Mat::Zero(n, length);
  fsm_mode.assign(length, 0);
  quality.assign(length, 0);
  pressures = Mat::Zero(n_pads, length);
  tau_fric_true = Mat::Zero(n, length);
  tau_ext_true = Mat::Zero(n, length);
  force_base = Mat::Zero(3, length);
  pad_id.assign(length, -1);
}

void RunLog::validate() const {
  const int len = length();
  require(n > 0 && len > 0, "log is empty");
  const Mat* joint_blocks[] = {&q,       &qd,      &qdd,         &current,
                               &tau_dyn, &tau_fric, &tau_res,    &tau_tcn,
                               &tau_ext_hat, &v_cmd, &tau_fric_true, &tau_ext_true};
  for (const Mat* m : joint_blocks)
    require(m->rows() == n && m->cols() == len, "log joint block shape mismatch");
  require(pressures.rows() == n_pads && pressures.cols() == len,
          "log pressure block shape mismatch");
  require(force_base.rows() == 3 && force_base.cols() == len,
          "log force block shape mismatch");
  require(static_cast<int>(fsm_mode.size()) == len &&
              static_cast<int>(quality.size()) == len &&
              static_cast<int>(pad_id.size()) == len,
          "log flag column length mismatch");
}

void save_log(const RunLog& log, const std::string& path) {
  log.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");

  out << "# tactorque log v1 joints=" << log.n << " pads=" << log.n_pads
      << " force_free=" << (log.force_free ? 1 : 0) << "\n";

  std::string row = "t";
  append_names(row, "q", log.n);
  append_names(row, "qd", log.n);
  append_names(row, "qdd", log.n);
  append_names(row, "i", log.n);
  append_names(row, "tau_dyn", log.n);
  append_names(row, "tau_fric", log.n);
  append_names(row, "tau_res", log.n);
  append_names(row, "tau_tcn", log.n);
  append_names(row, "tau_ext_hat", log.n);
  append_names(row, "v_cmd", log.n);
  row += ",fsm_mode,quality";
  append_names(row, "pad", log.n_pads);
  append_names(row, "tau_fric_true", log.n);
  append_names(row, "tau_ext_true", log.n);
  row += ",f_x,f_y,f_z,pad_id";
  out << row << "\n";

  const Mat* joint_blocks[] = {&log.q,       &log.qd,      &log.qdd,
                               &log.current, &log.tau_dyn, &log.tau_fric,
                               &log.tau_res, &log.tau_tcn, &log.tau_ext_hat,
                               &log.v_cmd};
  for (int k = 0; k < log.length(); ++k) {
    row.clear();
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", log.t[k]);
    row += buf;
    for (const Mat* m : joint_blocks)
      for (int j = 0; j < log.n; ++j) append_value(row, (*m)(j, k));
    row += ',';
    row += std::to_string(log.fsm_mode[k]);
    row += ',';
    row += std::to_string(log.quality[k]);
    for (int p = 0; p < log.n_pads; ++p) append_value(row, log.pressures(p, k));
    for (int j = 0; j < log.n; ++j) append_value(row, log.tau_fric_true(j, k));
    for (int j = 0; j < log.n; ++j) append_value(row, log.tau_ext_true(j, k));
    for (int a = 0; a < 3; ++a) append_value(row, log.force_base(a, k));
    row += ',';
    row += std::to_string(log.pad_id[k]);
    out << row << "\n";
  }
  if (!out) throw IoError("short write to " + path);
}

RunLog load_log(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);

  std::string header;
  if (!std::getline(in, header) || header.rfind("# tactorque log v", 0) != 0)
    throw IoError(path + ": not a tactorque log");
  if (header.rfind("# tactorque log v1 ", 0) != 0)
    throw IoError(path + ": unsupported log version");
  const int n = header_key(header, "joints", path);
  const int pads = header_key(header, "pads", path);
  const bool force_free = header_key(header, "force_free", path) != 0;

  std::string names;
  if (!std::getline(in, names)) throw IoError(path + ": missing column row");
  const int expected_cols = 1 + 12 * n + 2 + pads + 3 + 1;
  if (static_cast<int>(split_csv(names).size()) != expected_cols)
    throw IoError(path + ": column count does not match header dims");

  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_csv(line);
    if (static_cast<int>(fields.size()) != expected_cols)
      throw IoError(path + ": ragged row");
    std::vector<double> vals(fields.size());
    for (std::size_t i = 0; i < fields.size(); ++i)
      vals[i] = parse_double(fields[i], path);
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw IoError(path + ": log has no samples");

  RunLog log(n, pads, static_cast<int>(rows.size()));
  log.force_free = force_free;
  Mat* joint_blocks[] = {&log.q,       &log.qd,      &log.qdd,
                         &log.current, &log.tau_dyn, &log.tau_fric,
                         &log.tau_res, &log.tau_tcn, &log.tau_ext_hat,
                         &log.v_cmd};
  for (int k = 0; k < log.length(); ++k) {
    const std::vector<double>& r = rows[k];
    int at = 0;
    log.t[k] = r[at++];
    for (Mat* m : joint_blocks)
      for (int j = 0; j < n; ++j) (*m)(j, k) = r[at++];
    log.fsm_mode[k] = static_cast<int>(r[at++]);
    log.quality[k] = static_cast<int>(r[at++]);
    for (int p = 0; p < pads; ++p) log.pressures(p, k) = r[at++];
    for (int j = 0; j < n; ++j) log.tau_fric_true(j, k) = r[at++];
    for (int j = 0; j < n; ++j) log.tau_ext_true(j, k) = r[at++];
    for (int a = 0; a < 3; ++a) log.force_base(a, k) = r[at++];
    log.pad_id[k] = static_cast<int>(r[at++]);
  }
  return log;
}

}  // namespace tactorque
