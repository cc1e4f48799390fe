#include "tactorque/skin.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "tactorque/errors.hpp"

namespace tactorque {

const Pad& PadLayout::by_id(int id) const {
  return pads[static_cast<size_t>(index_of(id))];
}

int PadLayout::index_of(int id) const {
  for (size_t i = 0; i < pads.size(); ++i) {
    if (pads[i].id == id) return static_cast<int>(i);
  }
  throw ContractError("unknown pad id " + std::to_string(id));
}

void PadLayout::validate(int n_links) const {
  require(!pads.empty(), "pad layout is empty");
  std::set<int> ids;
  for (const auto& p : pads) {
    const std::string tag = "pad " + std::to_string(p.id) + ": ";
    require(ids.insert(p.id).second, tag + "duplicate id");
    require(p.link >= 0 && p.link < n_links, tag + "link index out of range");
    require(std::abs(p.normal.norm() - 1.0) < 1e-9, tag + "normal must be unit");
    require(p.area > 0.0, tag + "area must be > 0");
    require(p.gain > 0.0, tag + "gain must be > 0");
    require(p.noise_std >= 0.0, tag + "noise must be >= 0");
    require(p.center.allFinite(), tag + "non-finite center");
  }
}

Mat3 frame_from_normal(const Vec3& normal) {
  require(std::abs(normal.norm() - 1.0) < 1e-9, "normal must be unit");
  Vec3 seed = Vec3::UnitX();
  if (std::abs(normal.dot(seed)) > 1.0 - 1e-6) seed = Vec3::UnitY();
  const Vec3 t1 = (seed - normal.dot(seed) * normal).normalized();
  const Vec3 t2 = normal.cross(t1);
  Mat3 r;
  r.col(0) = t1;
  r.col(1) = t2;
  r.col(2) = normal;
  return r;
}

double pad_pressure(const Pad& pad, const Vec3& force_pad_frame,
                    double area_fraction) {
  require(area_fraction > 0.0 && area_fraction <= 1.0,
          "area fraction must be in (0, 1]");
  const double compression = std::max(0.0, -force_pad_frame.z());
  return pad.gain * compression / (area_fraction * pad.area);
}

double pad_pressure(const Pad& pad, const Vec3& force_pad_frame,
                    double area_fraction, std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, pad.noise_std);
  return pad_pressure(pad, force_pad_frame, area_fraction) + noise(rng);
}

ContactDetector::ContactDetector(int n_pads, double threshold, double hysteresis)
    : threshold_(threshold), hysteresis_(hysteresis), active_(n_pads, 0) {
  require(n_pads > 0, "detector needs at least one pad");
  require(threshold > hysteresis && hysteresis >= 0.0,
          "need threshold > hysteresis >= 0");
}

std::vector<int> ContactDetector::update(const SkinFrameSample& frame) {
  require(frame.pressures.size() == static_cast<int>(active_.size()),
          "frame size mismatch");
  std::vector<int> onsets;
  for (size_t i = 0; i < active_.size(); ++i) {
    const double p = frame.pressures[static_cast<int>(i)];
    if (!active_[i] && p > threshold_) {
      active_[i] = 1;
      onsets.push_back(static_cast<int>(i));
    } else if (active_[i] && p < threshold_ - hysteresis_) {
      active_[i] = 0;
    }
  }
  return onsets;
}

bool ContactDetector::any() const {
  return std::any_of(active_.begin(), active_.end(),
                     [](std::uint8_t a) { return a != 0; });
}

ContactEstimate contact_point_estimate(const PadLayout& layout,
                                       const RobotModel& model, const Vec& q,
                                       const std::vector<int>& active,
                                       const Vec& pressures) {
  require(!active.empty(), "contact estimate needs at least one active pad");
  require(pressures.size() == layout.size(), "pressure vector size mismatch");

  const LinkFrames frames = chain_frames(model, q);
  Vec3 centroid = Vec3::Zero();
  Vec3 normal_sum = Vec3::Zero();
  double weight_sum = 0.0;
  int best = active.front();
  double best_p = -1.0;

  for (int idx : active) {
    require(idx >= 0 && idx < layout.size(), "active pad index out of range");
    const Pad& pad = layout.pads[static_cast<size_t>(idx)];
    const double w = std::max(pressures[idx], 0.0);
    const Vec3 center_base =
        frames.joint_origin[pad.link] + frames.orientation[pad.link] * pad.center;
    const Vec3 normal_base = frames.orientation[pad.link] * pad.normal;
    centroid += w * center_base;
    normal_sum += w * normal_base;
    weight_sum += w;
    if (pressures[idx] > best_p) {
      best_p = pressures[idx];
      best = idx;
    }
  }
  require(weight_sum > 0.0, "active pads carry no positive pressure");

  ContactEstimate est;
  est.pads = active;
  est.link = layout.pads[static_cast<size_t>(best)].link;
  est.frame.point = centroid / weight_sum;

  Vec3 normal = normal_sum;
  if (normal.norm() < 1e-6) {
    // Opposing pads cancel; fall back to the strongest pad's normal.
    const Pad& pad = layout.pads[static_cast<size_t>(best)];
    normal = frames.orientation[pad.link] * pad.normal;
  }
  est.frame.rotation = frame_from_normal(normal.normalized());
  est.frame.validate();
  return est;
}

}  // namespace tactorque
