#ifndef SCREENLAB_KERNELS_HPP
#define SCREENLAB_KERNELS_HPP

#include "field.hpp"

namespace screenlab {

/// Periodic Coulomb operator: the zero-mean periodic solution u of
/// -Laplace u = rho - mean(rho). Multiplies c_K by 1/|K|^2 and zeroes K = 0.
inline FourierField apply_vper(const FourierField& rho) {
  return apply_multiplier(rho, [](double q2) { return q2 > 0.0 ? 1.0 / q2 : 0.0; });
}

/// Supercell Coulomb operator 1/|q|^2. The q = 0 component is dropped, which
/// amounts to a uniform compensating background.
inline FourierField apply_vc(const FourierField& rho) {
  return apply_multiplier(rho, [](double q2) { return q2 > 0.0 ? 1.0 / q2 : 0.0; });
}

/// Kerker multiplier |q|^2 / (k2 + |q|^2).
inline double kerker_multiplier(double q2, double k2 = 1.0) { return q2 > 0.0 ? q2 / (k2 + q2) : 0.0; }

inline FourierField apply_kerker(const FourierField& f, double k2 = 1.0) {
  if (!(k2 > 0.0)) throw UsageError("Kerker screening constant must be positive");
  return apply_multiplier(f, [k2](double q2) { return kerker_multiplier(q2, k2); });
}

}  // namespace screenlab

#endif  // SCREENLAB_KERNELS_HPP
