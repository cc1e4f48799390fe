#include "tactorque/control.hpp"

#include "tactorque/errors.hpp"

namespace tactorque {

Vec admittance_update(const ControlParams& params, const Vec& v_prev,
                      const Vec& tau_ext, double dt) {
  params.validate();
  require(dt > 0.0, "admittance dt must be positive");
  require(v_prev.size() == tau_ext.size(), "admittance input sizes differ");
  const Vec v = (params.mass * v_prev + dt * tau_ext) /
                (params.mass + dt * params.damping);
  return v.cwiseMax(-params.v_limit).cwiseMin(params.v_limit);
}

}  // namespace tactorque
