#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "tactorque/dynamics.hpp"

namespace tactorque {

// One tactile pad, rigidly attached to a link.
struct Pad {
  int id = 0;
  int link = 0;              // 0-based link index
  Vec3 center = Vec3::Zero();  // link frame [m]
  Vec3 normal = Vec3::UnitZ(); // link frame, unit, pointing out of the surface
  double area = 1e-3;          // [m^2]
  double gain = 1.0;           // pressure units per Pa
  double noise_std = 0.0;      // pressure units
};

struct PadLayout {
  std::vector<Pad> pads;
  int size() const { return static_cast<int>(pads.size()); }
  const Pad& by_id(int id) const;
  int index_of(int id) const;
  void validate(int n_links) const;
};

// Pressures indexed by pad position in the layout.
struct SkinFrameSample {
  double t = 0.0;
  Vec pressures;
};

// Right-handed frame with `normal` as third column; tangents via Gram-Schmidt
// against x (falls back to y when the normal is nearly x).
Mat3 frame_from_normal(const Vec3& normal);

// Mean sensor reading for a force expressed in the pad contact frame
// (tangent, tangent, outward normal). Compression is the -z component;
// tension and tangential forces read zero.
double pad_pressure(const Pad& pad, const Vec3& force_pad_frame,
                    double area_fraction);
double pad_pressure(const Pad& pad, const Vec3& force_pad_frame,
                    double area_fraction, std::mt19937_64& rng);

// Threshold detector with release hysteresis, one flag per pad.
class ContactDetector {
 public:
  ContactDetector(int n_pads, double threshold, double hysteresis);

  // Consumes one frame; returns indices (layout positions) of pads that
  // became active on this frame.
  std::vector<int> update(const SkinFrameSample& frame);

  bool any() const;
  const std::vector<std::uint8_t>& active() const { return active_; }

 private:
  double threshold_;
  double hysteresis_;
  std::vector<std::uint8_t> active_;
};

struct ContactEstimate {
  ContactFrame frame;
  int link = 0;            // link of the strongest active pad
  std::vector<int> pads;   // active layout positions used
};

// Pressure-weighted centroid and normal over the active pads.
ContactEstimate contact_point_estimate(const PadLayout& layout,
                                       const RobotModel& model, const Vec& q,
                                       const std::vector<int>& active,
                                       const Vec& pressures);

}  // namespace tactorque
