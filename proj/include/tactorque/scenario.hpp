#pragma once

#include <string>
#include <vector>

#include "tactorque/dynamics.hpp"
#include "tactorque/skin.hpp"

namespace tactorque {

// One scripted contact: a force held on a pad over [t_start, t_end], expressed
// in the pad's contact frame (z is the outward normal, so pressing on the pad
// means fz < 0). The force ramps in and out with a smoothstep envelope.
struct ForceEvent {
  double t_start = 0.0;
  double t_end = 0.0;
  int pad_id = 0;
  Vec3 force = Vec3::Zero();  // pad frame, peak value
  double area_fraction = 1.0;
};

class ForceScript {
 public:
  ForceScript() = default;
  ForceScript(std::vector<ForceEvent> events, double rise_time);

  // Text format, one event per line:
  //   t_start t_end pad_id fx fy fz area_fraction
  static ForceScript parse_text(const std::string& text, double rise_time);
  static ForceScript load(const std::string& path, double rise_time);

  void validate(const PadLayout& pads) const;

  bool empty() const { return events_.empty(); }
  double end_time() const;
  const std::vector<ForceEvent>& events() const { return events_; }

  struct PadForce {
    Vec3 force = Vec3::Zero();  // pad frame, envelope applied
    double area_fraction = 1.0;
  };
  // State of one pad at time t. Zero force when no event covers t; at most one
  // event per pad can be active (enforced by validate). The peak force is the
  // scripted value; a smoothstep envelope shapes the first and last rise_time
  // seconds of the event.
  PadForce pad_state(double t, int pad_id) const;

  // Events covering time t.
  std::vector<const ForceEvent*> active(double t) const;

 private:
  std::vector<ForceEvent> events_;
  double rise_time_ = 0.2;
};

}  // namespace tactorque
