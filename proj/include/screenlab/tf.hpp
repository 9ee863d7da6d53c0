#ifndef SCREENLAB_TF_HPP
#define SCREENLAB_TF_HPP

#include <cmath>

#include "errors.hpp"

namespace screenlab::tf {

/// Homogeneous-gas reference: G_TF(V) = (eps_F - V)_+^{3/2}.
struct TFModel {
  double fermi_level;

  explicit TFModel(double eps_f) : fermi_level(eps_f) {
    if (!(eps_f > 0.0)) throw UsageError("Thomas-Fermi model needs a positive Fermi level");
  }

  /// G_TF'(0) = -3/2 sqrt(eps_F).
  double chi0() const { return -1.5 * std::sqrt(fermi_level); }

  double g(double V) const {
    const double x = fermi_level - V;
    return x > 0.0 ? x * std::sqrt(x) : 0.0;
  }

  double g_derivative(double V) const {
    const double x = fermi_level - V;
    return x > 0.0 ? -1.5 * std::sqrt(x) : 0.0;
  }
};

inline double g_tf(double V, double eps_f) { return TFModel(eps_f).g(V); }

/// eps_TF^{-1}(q) = q^2 / (q^2 - chi0), in [0, 1).
inline double eps_tf_inv(double q, double chi0) {
  if (!(chi0 < 0.0)) throw UsageError("chi0 must be negative");
  const double q2 = q * q;
  return q2 / (q2 - chi0);
}

/// Q exp(-sqrt(-chi0) r) / r. Fourier partner of eps_tf_inv(q) Q / q^2 up to
/// the 4 pi of the real-space Coulomb kernel.
inline double yukawa(double r, double Q, double chi0) {
  if (!(r > 0.0)) throw UsageError("yukawa needs r > 0");
  if (chi0 > 0.0) throw UsageError("chi0 must be non-positive");
  return Q * std::exp(-std::sqrt(-chi0) * r) / r;
}

}  // namespace screenlab::tf

#endif  // SCREENLAB_TF_HPP
