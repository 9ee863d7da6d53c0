#ifndef SCREENLAB_BASIS_HPP
#define SCREENLAB_BASIS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <numbers>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "lattice.hpp"

namespace screenlab {

namespace detail {

/// Dense Miller-index -> position table over a symmetric box.
class MillerTable {
 public:
  MillerTable() = default;
  MillerTable(const std::array<int, 3>& half_extent, const std::vector<Miller>& vectors) : half_(half_extent) {
    for (int i = 0; i < 3; ++i) span_[i] = 2 * half_[i] + 1;
    table_.assign(static_cast<std::size_t>(span_[0]) * span_[1] * span_[2], -1);
    for (std::size_t n = 0; n < vectors.size(); ++n) table_[slot(vectors[n])] = static_cast<int>(n);
  }

  int find(const Miller& m) const {
    for (int i = 0; i < 3; ++i)
      if (std::abs(m[i]) > half_[i]) return -1;
    return table_[slot(m)];
  }

 private:
  std::size_t slot(const Miller& m) const {
    return (static_cast<std::size_t>(m[0] + half_[0]) * span_[1] + (m[1] + half_[1])) * span_[2] + (m[2] + half_[2]);
  }

  std::array<int, 3> half_{};
  std::array<int, 3> span_{};
  std::vector<int> table_;
};

/// All Miller triples with |sum m_i b_i|^2 <= bound, sorted by |K|^2 then
/// lexicographically.
inline std::vector<Miller> enumerate_ball(const Lattice& lattice, double norm2_bound, std::array<int, 3>& half_extent) {
  const double kmax = std::sqrt(norm2_bound);
  const Mat3& a = lattice.cell_vectors();
  for (int i = 0; i < 3; ++i) {
    // m_i = a_i . K / 2 pi, so |m_i| <= |a_i| |K| / 2 pi.
    half_extent[i] = static_cast<int>(std::floor(a.col(i).norm() * kmax / (2.0 * std::numbers::pi) + 1e-9));
  }
  std::vector<std::tuple<double, int, int, int>> found;
  const double bound = norm2_bound * (1.0 + 1e-12);
  for (int i = -half_extent[0]; i <= half_extent[0]; ++i)
    for (int j = -half_extent[1]; j <= half_extent[1]; ++j)
      for (int l = -half_extent[2]; l <= half_extent[2]; ++l) {
        const double n2 = lattice.reciprocal_cartesian(Miller(i, j, l)).squaredNorm();
        if (n2 <= bound) found.emplace_back(n2, i, j, l);
      }
  std::sort(found.begin(), found.end());
  std::vector<Miller> out;
  out.reserve(found.size());
  for (const auto& [n2, i, j, l] : found) out.emplace_back(i, j, l);
  return out;
}

inline int next_fft_size(int n) {
  for (;; ++n) {
    int m = n;
    for (int p : {2, 3, 5})
      while (m % p == 0) m /= p;
    if (m == 1) return n;
  }
}

}  // namespace detail

/// Plane-wave discretisation of L^2_per.
///
/// Orbitals are expanded on the ball |K|^2/2 <= ecut ("gvectors"). Potentials
/// and densities live on the ball of twice that radius ("density_gvectors"),
/// which contains every difference K - K' of orbital vectors, so fibre
/// Hamiltonians and densities are assembled without truncation.
class PlaneWaveBasis {
 public:
  PlaneWaveBasis(const Lattice& lattice, double ecut) : lattice_(lattice), ecut_(ecut) {
    if (!(ecut > 0.0)) throw UsageError("ecut must be positive");
    std::array<int, 3> orbital_half{};
    gvectors_ = detail::enumerate_ball(lattice_, 2.0 * ecut_, orbital_half);
    density_gvectors_ = detail::enumerate_ball(lattice_, 8.0 * ecut_, density_half_);
    orbital_table_ = detail::MillerTable(orbital_half, gvectors_);
    density_table_ = detail::MillerTable(density_half_, density_gvectors_);
    for (int i = 0; i < 3; ++i) grid_dims_[i] = detail::next_fft_size(2 * density_half_[i] + 1);

    density_norm2_.resize(density_gvectors_.size());
    negation_.resize(density_gvectors_.size());
    for (std::size_t n = 0; n < density_gvectors_.size(); ++n) {
      density_norm2_[n] = lattice_.reciprocal_cartesian(density_gvectors_[n]).squaredNorm();
      negation_[n] = density_table_.find(-density_gvectors_[n]);
    }
    const auto npw = static_cast<Eigen::Index>(gvectors_.size());
    difference_.resize(npw, npw);
    for (Eigen::Index j = 0; j < npw; ++j)
      for (Eigen::Index i = 0; i < npw; ++i) difference_(i, j) = density_table_.find(gvectors_[i] - gvectors_[j]);
    orbital_in_density_.resize(gvectors_.size());
    for (std::size_t n = 0; n < gvectors_.size(); ++n) orbital_in_density_[n] = density_table_.find(gvectors_[n]);
  }

  const Lattice& lattice() const { return lattice_; }
  double ecut() const { return ecut_; }
  double cell_volume() const { return lattice_.cell_volume(); }

  const std::vector<Miller>& gvectors() const { return gvectors_; }
  std::size_t size() const { return gvectors_.size(); }

  const std::vector<Miller>& density_gvectors() const { return density_gvectors_; }
  std::size_t density_size() const { return density_gvectors_.size(); }
  /// |G|^2 of each density vector (Cartesian).
  const std::vector<double>& density_norm2() const { return density_norm2_; }
  /// Index of -G in the density list.
  int negated(std::size_t density_index) const { return negation_[density_index]; }

  const std::array<int, 3>& grid_dims() const { return grid_dims_; }
  /// Largest |m_i| over the density ball, per axis.
  const std::array<int, 3>& density_half_extent() const { return density_half_; }

  int find_orbital(const Miller& m) const { return orbital_table_.find(m); }
  int find_density(const Miller& m) const { return density_table_.find(m); }

  /// Density index of gvectors()[i] - gvectors()[j].
  int difference_index(Eigen::Index i, Eigen::Index j) const { return difference_(i, j); }
  const Eigen::MatrixXi& difference_table() const { return difference_; }
  int orbital_to_density(std::size_t i) const { return orbital_in_density_[i]; }

 private:
  Lattice lattice_;
  double ecut_;
  std::vector<Miller> gvectors_;
  std::vector<Miller> density_gvectors_;
  std::array<int, 3> density_half_{};
  std::array<int, 3> grid_dims_{};
  detail::MillerTable orbital_table_;
  detail::MillerTable density_table_;
  std::vector<double> density_norm2_;
  std::vector<int> negation_;
  Eigen::MatrixXi difference_;
  std::vector<int> orbital_in_density_;
};

using BasisPtr = std::shared_ptr<const PlaneWaveBasis>;

inline BasisPtr build_basis(const Lattice& lattice, double ecut) {
  return std::make_shared<const PlaneWaveBasis>(lattice, ecut);
}

}  // namespace screenlab

#endif  // SCREENLAB_BASIS_HPP
