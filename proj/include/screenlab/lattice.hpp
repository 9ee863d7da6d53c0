#ifndef SCREENLAB_LATTICE_HPP
#define SCREENLAB_LATTICE_HPP

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace screenlab {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Miller = Eigen::Vector3i;

/// Bravais lattice in atomic units. Columns of cell_vectors are the lattice
/// vectors a_i; columns of reciprocal_vectors are b_j with a_i . b_j = 2 pi delta_ij.
class Lattice {
 public:
  explicit Lattice(const Mat3& cell_vectors) : cell_(cell_vectors) {
    const double scale = cell_.colwise().norm().prod();
    const double det = cell_.determinant();
    if (!std::isfinite(det) || scale == 0.0 || std::abs(det) <= 1e-12 * scale) {
      throw GeometryError("lattice vectors are linearly dependent (cell volume " + std::to_string(det) + ")");
    }
    volume_ = std::abs(det);
    recip_ = 2.0 * std::numbers::pi * cell_.inverse().transpose();
  }

  static Lattice cubic(double a) { return Lattice(a * Mat3::Identity()); }

  const Mat3& cell_vectors() const { return cell_; }
  const Mat3& reciprocal_vectors() const { return recip_; }
  double cell_volume() const { return volume_; }

  /// Cartesian wavevector of integer or fractional reciprocal coordinates.
  Vec3 reciprocal_cartesian(const Vec3& frac) const { return recip_ * frac; }
  Vec3 reciprocal_cartesian(const Miller& m) const { return recip_ * m.cast<double>(); }
  Vec3 cartesian(const Vec3& frac) const { return cell_ * frac; }

  Lattice supercell(const std::array<int, 3>& repeat) const {
    Mat3 a = cell_;
    for (int i = 0; i < 3; ++i) {
      if (repeat[i] < 1) throw GeometryError("supercell repeat must be positive");
      a.col(i) *= repeat[i];
    }
    return Lattice(a);
  }

  /// Length of the shortest lattice vector among the three cell vectors.
  double min_cell_length() const { return cell_.colwise().norm().minCoeff(); }

  bool operator==(const Lattice& other) const { return cell_ == other.cell_; }

 private:
  Mat3 cell_;
  Mat3 recip_;
  double volume_ = 0.0;
};

struct KPoint {
  Vec3 frac;  // reduced coordinates in units of the reciprocal vectors
  double weight;
};

/// Uniform Monkhorst-Pack-style sampling of the Brillouin zone with equal
/// weights. Reduced coordinates are folded to [-1/2, 1/2) so the fixed
/// G-vector ball stays centred on the fibre wavevector.
class KPointMesh {
 public:
  KPointMesh(const Lattice& lattice, const std::array<int, 3>& dims, const Vec3& shifts = Vec3::Zero())
      : lattice_(lattice), dims_(dims), shifts_(shifts) {
    for (int d : dims_) {
      if (d < 1) throw UsageError("k-point grid dimensions must be positive");
    }
    for (int i = 0; i < 3; ++i) {
      if (shifts_[i] < 0.0 || shifts_[i] >= 1.0) throw UsageError("k-point shifts must lie in [0,1)");
    }
    const int total = dims_[0] * dims_[1] * dims_[2];
    points_.reserve(total);
    for (int i = 0; i < dims_[0]; ++i)
      for (int j = 0; j < dims_[1]; ++j)
        for (int l = 0; l < dims_[2]; ++l) {
          Vec3 f((i + shifts_[0]) / dims_[0], (j + shifts_[1]) / dims_[1], (l + shifts_[2]) / dims_[2]);
          for (int c = 0; c < 3; ++c) f[c] -= std::floor(f[c] + 0.5);
          points_.push_back({f, 1.0 / total});
        }
  }

  static KPointMesh gamma(const Lattice& lattice) { return KPointMesh(lattice, {1, 1, 1}); }

  const Lattice& lattice() const { return lattice_; }
  const std::array<int, 3>& dims() const { return dims_; }
  const Vec3& shifts() const { return shifts_; }
  const std::vector<KPoint>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  Vec3 cartesian(std::size_t i) const { return lattice_.reciprocal_cartesian(points_[i].frac); }

 private:
  Lattice lattice_;
  std::array<int, 3> dims_;
  Vec3 shifts_;
  std::vector<KPoint> points_;
};

}  // namespace screenlab

#endif  // SCREENLAB_LATTICE_HPP
