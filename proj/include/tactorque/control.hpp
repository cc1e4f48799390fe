#pragma once

#include "tactorque/config.hpp"
#include "tactorque/dynamics.hpp"

namespace tactorque {

// One tick of the per-joint admittance M_a vdot + D_a v = tau, discretized
// implicitly: v = (M_a v_prev + dt tau) / (M_a + dt D_a), then clamped to
// +-v_limit. The implicit form is stable and overshoot-free for any positive
// M_a, D_a, dt.
Vec admittance_update(const ControlParams& params, const Vec& v_prev,
                      const Vec& tau_ext, double dt);

}  // namespace tactorque
