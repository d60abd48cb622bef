#include "pshape/auglag.hpp"

#include <stdexcept>

namespace pshape {

void check(const AugLagState& al) {
  if (!(al.rho_b > 0.0) || !(al.rho_c > 0.0)) throw std::invalid_argument("penalties must be > 0");
  if (!(al.rho_inc > 1.0)) throw std::invalid_argument("penalty growth factor must be > 1");
  if (!(al.tau_b > 0.0) || !(al.tau_c > 0.0)) throw std::invalid_argument("constraint tolerances must be > 0");
  if (!(al.step_size > 0.0)) throw std::invalid_argument("step size must be > 0");
}

Vec2 barycenter_residual(const Mesh& mesh, const AugLagState& al) {
  return barycenter(mesh) - al.target_b;
}

double volume_residual(const Mesh& mesh, const AugLagState& al) {
  return volume(mesh) - al.target_volume;
}

}  // namespace pshape
