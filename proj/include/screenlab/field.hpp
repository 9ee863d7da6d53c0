#ifndef SCREENLAB_FIELD_HPP
#define SCREENLAB_FIELD_HPP

#include <cmath>
#include <complex>
#include <random>

#include <Eigen/Dense>

#include "basis.hpp"
#include "errors.hpp"

namespace screenlab {

using cplx = std::complex<double>;

/// Periodic function f(x) = sum_G c_G exp(i G.x) stored on the density ball of
/// a PlaneWaveBasis. Coefficients are mean-normalised, c_G = (1/|Gamma|) int
/// exp(-i G.x) f(x) dx, so ||f||^2_{L^2_per} = |Gamma| sum |c_G|^2.
class FourierField {
 public:
  FourierField() = default;
  explicit FourierField(BasisPtr basis)
      : basis_(std::move(basis)), coeffs_(Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(basis_->density_size()))) {}
  FourierField(BasisPtr basis, Eigen::VectorXcd coeffs) : basis_(std::move(basis)), coeffs_(std::move(coeffs)) {
    if (coeffs_.size() != static_cast<Eigen::Index>(basis_->density_size()))
      throw UsageError("coefficient vector does not match the density basis");
  }

  static FourierField constant(const BasisPtr& basis, double value) {
    FourierField f(basis);
    f.coeffs_[0] = value;
    return f;
  }

  /// exp(i G.x) for a density-ball Miller index.
  static FourierField plane_wave(const BasisPtr& basis, const Miller& m, cplx amplitude = 1.0) {
    FourierField f(basis);
    const int idx = basis->find_density(m);
    if (idx < 0) throw UsageError("plane wave outside the density ball");
    f.coeffs_[idx] = amplitude;
    return f;
  }

  /// amplitude * cos(G.x).
  static FourierField cosine(const BasisPtr& basis, const Miller& m, double amplitude) {
    FourierField f = plane_wave(basis, m, 0.5 * amplitude);
    f.coeffs_[basis->find_density(-m)] += 0.5 * amplitude;
    return f;
  }

  /// Real field with independent uniform coefficients in [-scale, scale],
  /// restricted to |G|^2 <= norm2_cutoff (all of the ball if negative).
  template <class Rng>
  static FourierField random_real(const BasisPtr& basis, Rng& rng, double scale = 1.0, double norm2_cutoff = -1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    FourierField f(basis);
    const auto& n2 = basis->density_norm2();
    for (std::size_t i = 0; i < basis->density_size(); ++i) {
      const double re = u(rng);
      const double im = u(rng);
      if (norm2_cutoff >= 0.0 && n2[i] > norm2_cutoff) continue;
      f.coeffs_[i] = cplx(re, im);
    }
    f.symmetrize_real();
    return f;
  }

  const BasisPtr& basis() const { return basis_; }
  const PlaneWaveBasis& pw() const { return *basis_; }
  const Eigen::VectorXcd& coeffs() const { return coeffs_; }
  Eigen::VectorXcd& coeffs() { return coeffs_; }
  Eigen::Index size() const { return coeffs_.size(); }
  cplx operator[](Eigen::Index i) const { return coeffs_[i]; }
  cplx& operator[](Eigen::Index i) { return coeffs_[i]; }

  /// Mean value over the cell (the G = 0 coefficient; index 0 by ordering).
  double mean() const { return coeffs_[0].real(); }

  bool is_real(double tol = 1e-12) const {
    const double scale = std::max(1.0, coeffs_.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < coeffs_.size(); ++i) {
      if (std::abs(coeffs_[i] - std::conj(coeffs_[basis_->negated(i)])) > tol * scale) return false;
    }
    return true;
  }

  /// Projects onto real-valued functions: c_G <- (c_G + conj(c_{-G})) / 2.
  void symmetrize_real() {
    Eigen::VectorXcd out(coeffs_.size());
    for (Eigen::Index i = 0; i < coeffs_.size(); ++i)
      out[i] = 0.5 * (coeffs_[i] + std::conj(coeffs_[basis_->negated(i)]));
    coeffs_ = std::move(out);
  }

  FourierField& operator+=(const FourierField& o) {
    check_same(o);
    coeffs_ += o.coeffs_;
    return *this;
  }
  FourierField& operator-=(const FourierField& o) {
    check_same(o);
    coeffs_ -= o.coeffs_;
    return *this;
  }
  FourierField& operator*=(double s) {
    coeffs_ *= s;
    return *this;
  }

  friend FourierField operator+(FourierField a, const FourierField& b) { return a += b; }
  friend FourierField operator-(FourierField a, const FourierField& b) { return a -= b; }
  friend FourierField operator*(double s, FourierField a) { return a *= s; }
  friend FourierField operator*(FourierField a, double s) { return a *= s; }

  void check_same(const FourierField& o) const {
    if (basis_ != o.basis_) throw UsageError("fields live on different bases");
  }

 private:
  BasisPtr basis_;
  Eigen::VectorXcd coeffs_;
};

/// L^2_per inner product <a, b> = |Gamma| sum conj(a_G) b_G.
inline cplx inner(const FourierField& a, const FourierField& b) {
  a.check_same(b);
  return a.pw().cell_volume() * a.coeffs().dot(b.coeffs());
}

inline double norm(const FourierField& f) {
  return std::sqrt(f.pw().cell_volume()) * f.coeffs().norm();
}

/// Applies a radial Fourier multiplier m(|G|^2) coefficient-wise.
template <class Multiplier>
FourierField apply_multiplier(const FourierField& f, Multiplier&& m) {
  FourierField out(f.basis());
  const auto& n2 = f.pw().density_norm2();
  for (Eigen::Index i = 0; i < f.size(); ++i) out[i] = m(n2[i]) * f[i];
  return out;
}

}  // namespace screenlab

#endif  // SCREENLAB_FIELD_HPP
