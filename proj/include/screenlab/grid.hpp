#ifndef SCREENLAB_GRID_HPP
#define SCREENLAB_GRID_HPP

#include <array>
#include <complex>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "field.hpp"

namespace screenlab {

/// Samples of a periodic function at the nodes x = sum_i (n_i / N_i) a_i,
/// stored row-major with the first axis slowest.
struct GridSamples {
  std::array<int, 3> dims{};
  std::vector<cplx> values;

  std::size_t index(int i, int j, int l) const {
    return (static_cast<std::size_t>(i) * dims[1] + j) * dims[2] + l;
  }
  std::size_t total() const { return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]; }
  Vec3 fractional(int i, int j, int l) const {
    return {static_cast<double>(i) / dims[0], static_cast<double>(j) / dims[1], static_cast<double>(l) / dims[2]};
  }
};

namespace detail {

inline int wrap(int m, int n) { return ((m % n) + n) % n; }

/// Unnormalised 3-D DFT, exp(-i...) when forward, exp(+i...) otherwise.
inline void fft3d(std::vector<cplx>& data, const std::array<int, 3>& dims, bool forward) {
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::Unscaled);
  const std::array<std::size_t, 3> stride{static_cast<std::size_t>(dims[1]) * dims[2], static_cast<std::size_t>(dims[2]), 1};
  for (int axis = 0; axis < 3; ++axis) {
    const int n = dims[axis];
    if (n == 1) continue;
    std::vector<cplx> line(n), out(n);
    const int o1 = (axis + 1) % 3, o2 = (axis + 2) % 3;
    for (int a = 0; a < dims[o1]; ++a)
      for (int b = 0; b < dims[o2]; ++b) {
        const std::size_t base = a * stride[o1] + b * stride[o2];
        for (int t = 0; t < n; ++t) line[t] = data[base + t * stride[axis]];
        if (forward)
          fft.fwd(out, line);
        else
          fft.inv(out, line);
        for (int t = 0; t < n; ++t) data[base + t * stride[axis]] = out[t];
      }
  }
}

inline void check_grid(const PlaneWaveBasis& basis, const std::array<int, 3>& dims) {
  const auto& half = basis.density_half_extent();
  for (int i = 0; i < 3; ++i)
    if (dims[i] < 2 * half[i] + 1) throw UsageError("grid too coarse for the density ball (aliasing)");
}

}  // namespace detail

/// Evaluates f on a grid; dims defaults to the basis grid.
inline GridSamples to_grid(const FourierField& f, std::array<int, 3> dims = {0, 0, 0}) {
  const PlaneWaveBasis& basis = f.pw();
  if (dims[0] == 0) dims = basis.grid_dims();
  detail::check_grid(basis, dims);
  GridSamples g{dims, std::vector<cplx>(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2])};
  const auto& gv = basis.density_gvectors();
  for (std::size_t n = 0; n < gv.size(); ++n) {
    const Miller& m = gv[n];
    g.values[g.index(detail::wrap(m[0], dims[0]), detail::wrap(m[1], dims[1]), detail::wrap(m[2], dims[2]))] +=
        f[static_cast<Eigen::Index>(n)];
  }
  detail::fft3d(g.values, dims, false);
  return g;
}

/// Projects grid samples onto the density ball of `basis`.
inline FourierField from_grid(const GridSamples& samples, const BasisPtr& basis) {
  detail::check_grid(*basis, samples.dims);
  std::vector<cplx> data = samples.values;
  if (data.size() != samples.total()) throw UsageError("grid sample count does not match its dimensions");
  detail::fft3d(data, samples.dims, true);
  const double scale = 1.0 / static_cast<double>(samples.total());
  FourierField f(basis);
  const auto& gv = basis->density_gvectors();
  for (std::size_t n = 0; n < gv.size(); ++n) {
    const Miller& m = gv[n];
    f[static_cast<Eigen::Index>(n)] =
        scale * data[samples.index(detail::wrap(m[0], samples.dims[0]), detail::wrap(m[1], samples.dims[1]),
                                   detail::wrap(m[2], samples.dims[2]))];
  }
  return f;
}

/// Real parts of the samples.
inline std::vector<double> real_part(const GridSamples& g) {
  std::vector<double> out(g.values.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = g.values[i].real();
  return out;
}

}  // namespace screenlab

#endif  // SCREENLAB_GRID_HPP
