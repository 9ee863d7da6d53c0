#ifndef SCREENLAB_TESTS_FIXTURES_HPP
#define SCREENLAB_TESTS_FIXTURES_HPP

#include <cmath>
#include <numbers>

#include <screenlab/defect.hpp>

namespace fixtures {

using namespace screenlab;

/// Quasi-one-dimensional reference crystal: a long axis of length 10 and two
/// thin transverse axes so short that the cutoff admits no transverse modes.
struct Needle {
  double a = 10.0;
  double b = 0.3;
  double ecut = 24.0;
  double E1 = std::pow(2.0 * std::numbers::pi / 10.0, 2);
  Lattice lattice = make_lattice(a, b);
  BasisPtr basis = build_basis(lattice, ecut);
  ThermalState state{2.0 * E1, 0.0, 1.0};
  FourierField W_nucl = FourierField::cosine(basis, Miller(1, 0, 0), -E1);
  double sigma = 0.25 * a;

  static Lattice make_lattice(double a, double b) {
    Mat3 m = Mat3::Zero();
    m(0, 0) = a;
    m(1, 1) = b;
    m(2, 2) = b;
    return Lattice(m);
  }

  static SCFConfig pristine_config() {
    SCFConfig c;
    c.alpha = 0.3;
    c.tol = 1e-11;
    c.max_iter = 500;
    return c;
  }

  Supercell supercell(int L) const { return make_supercell(W_nucl, state, {L, 1, 1}, pristine_config()); }
};

/// Same geometry with no nuclear potential (homogeneous gas).
inline Needle jellium_needle() {
  Needle n;
  n.W_nucl = FourierField(n.basis);
  return n;
}

/// Dilute simple cubic metal: base cell 150, 2x2x2 supercell (box D = 300),
/// basis holding |n| <= 5 harmonics of the box, kT = E_D / 2 with E_D = (2 pi / D)^2.
struct Dilute3D {
  double a = 150.0;
  int L = 2;
  double D = 300.0;
  double E_D = std::pow(2.0 * std::numbers::pi / 300.0, 2);
  double ecut = 0.5 * std::pow(5.0 * 2.0 * std::numbers::pi / 300.0, 2);
  Lattice lattice = Lattice::cubic(a);
  BasisPtr basis = build_basis(lattice, ecut);
  ThermalState state{0.5 * E_D, 0.0, 1.0};
  FourierField W_nucl = make_nucleus(basis, -0.2 * std::pow(2.0 * std::numbers::pi / 150.0, 2));
  double Q = 0.01;
  double sigma = 0.05 * D;

  static FourierField make_nucleus(const BasisPtr& b, double amp) {
    return FourierField::cosine(b, Miller(1, 0, 0), amp) + FourierField::cosine(b, Miller(0, 1, 0), amp) +
           FourierField::cosine(b, Miller(0, 0, 1), amp);
  }

  Supercell supercell() const { return make_supercell(W_nucl, state, {L, L, L}, Needle::pristine_config()); }
};

}  // namespace fixtures

#endif  // SCREENLAB_TESTS_FIXTURES_HPP
