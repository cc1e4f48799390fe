#include "tactorque/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "tactorque/errors.hpp"

namespace tactorque {

namespace {

double smoothstep(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

}  // namespace

ForceScript::ForceScript(std::vector<ForceEvent> events, double rise_time)
    : events_(std::move(events)), rise_time_(rise_time) {
  require(rise_time_ >= 0.0, "force script rise time must be non-negative");
  for (const ForceEvent& e : events_) {
    require(e.t_end > e.t_start, "force event must have t_end > t_start");
    require(e.t_start >= 0.0, "force event must start at t >= 0");
    require(e.area_fraction > 0.0 && e.area_fraction <= 1.0,
            "force event area fraction must be in (0, 1]");
  }
}

ForceScript ForceScript::parse_text(const std::string& text, double rise_time) {
  std::vector<ForceEvent> events;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream row(line);
    ForceEvent e;
    if (!(row >> e.t_start)) continue;  // blank line
    if (!(row >> e.t_end >> e.pad_id >> e.force.x() >> e.force.y() >> e.force.z() >>
          e.area_fraction))
      throw IoError("force script line " + std::to_string(lineno) +
                    ": expected 't_start t_end pad_id fx fy fz area_fraction'");
    double extra;
    if (row >> extra)
      throw IoError("force script line " + std::to_string(lineno) + ": trailing fields");
    events.push_back(e);
  }
  return ForceScript(std::move(events), rise_time);
}

ForceScript ForceScript::load(const std::string& path, double rise_time) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open force script: " + path);
  std::ostringstream body;
  body << in.rdbuf();
  return parse_text(body.str(), rise_time);
}

void ForceScript::validate(const PadLayout& pads) const {
  for (const ForceEvent& e : events_) {
    pads.index_of(e.pad_id);  // throws for ids the layout does not have
  }
  // Overlapping events on the same pad would make the scripted pressure
  // ambiguous; events on different pads may overlap freely.
  for (std::size_t i = 0; i < events_.size(); ++i) {
    for (std::size_t j = i + 1; j < events_.size(); ++j) {
      if (events_[i].pad_id != events_[j].pad_id) continue;
      const bool disjoint = events_[i].t_end <= events_[j].t_start ||
                            events_[j].t_end <= events_[i].t_start;
      require(disjoint, "force script has overlapping events on pad " +
                            std::to_string(events_[i].pad_id));
    }
  }
}

double ForceScript::end_time() const {
  double t = 0.0;
  for (const ForceEvent& e : events_) t = std::max(t, e.t_end);
  return t;
}

ForceScript::PadForce ForceScript::pad_state(double t, int pad_id) const {
  PadForce out;
  for (const ForceEvent& e : events_) {
    if (e.pad_id != pad_id) continue;
    if (t < e.t_start || t > e.t_end) continue;
    double env = 1.0;
    if (rise_time_ > 0.0) {
      env = smoothstep((t - e.t_start) / rise_time_) *
            smoothstep((e.t_end - t) / rise_time_);
    }
    out.force = env * e.force;
    out.area_fraction = e.area_fraction;
    break;
  }
  return out;
}

std::vector<const ForceEvent*> ForceScript::active(double t) const {
  std::vector<const ForceEvent*> out;
  for (const ForceEvent& e : events_) {
    if (t >= e.t_start && t <= e.t_end) out.push_back(&e);
  }
  return out;
}

}  // namespace tactorque
