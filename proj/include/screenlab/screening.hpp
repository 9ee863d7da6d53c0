#ifndef SCREENLAB_SCREENING_HPP
#define SCREENLAB_SCREENING_HPP

#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"

namespace screenlab {

struct ScreeningOptions {
  int bins = 64;
  int refine = 2;  // grid refinement over the basis grid when sampling a field
  double window_lo = 0.15;  // fit window, fractions of the shortest cell length
  double window_hi = 0.4;
};

struct ScreeningBin {
  double r = 0.0;            // mean radius of the samples in the shell
  double V_avg = 0.0;        // signed shell average
  double coulomb_ref = 0.0;  // Q / (4 pi r)
  double ratio = 0.0;        // V_avg / coulomb_ref
  std::size_t count = 0;
};

struct YukawaFit {
  double amplitude = 0.0;   // effective charge Q' in Q' exp(-k r) / (4 pi r)
  double decay_rate = 0.0;  // k
  double residual = 0.0;    // rms misfit of log(r V)
  int bins_used = 0;
};

struct ScreeningReport {
  double Q = 0.0;
  double box_length = 0.0;
  double window_lo = 0.0;  // absolute radii
  double window_hi = 0.0;
  std::vector<ScreeningBin> bins;
  YukawaFit fit;

  /// Non-empty bins whose mean radius lies in the fit window.
  std::vector<ScreeningBin> window() const {
    std::vector<ScreeningBin> out;
    for (const auto& b : bins)
      if (b.count > 0 && b.r >= window_lo && b.r <= window_hi) out.push_back(b);
    return out;
  }

  bool ratio_decreasing_in_window() const {
    const auto w = window();
    for (std::size_t i = 1; i < w.size(); ++i)
      if (!(w[i].ratio < w[i - 1].ratio)) return false;
    return w.size() >= 2;
  }

  /// Ratio at radius r by linear interpolation between bin centres.
  double ratio_at(double r) const {
    const ScreeningBin* prev = nullptr;
    for (const auto& b : bins) {
      if (b.count == 0) continue;
      if (b.r >= r) {
        if (!prev) return b.ratio;
        const double t = (r - prev->r) / (b.r - prev->r);
        return prev->ratio + t * (b.ratio - prev->ratio);
      }
      prev = &b;
    }
    if (!prev) throw AnalysisError("empty screening profile");
    return prev->ratio;
  }
};

namespace detail {

/// Least-squares line through log(r V) on the window bins with V > 0.
inline YukawaFit fit_yukawa(const std::vector<ScreeningBin>& window) {
  std::vector<double> xs, ys;
  for (const auto& b : window)
    if (b.V_avg > 0.0) {
      xs.push_back(b.r);
      ys.push_back(std::log(b.r * b.V_avg));
    }
  if (xs.size() < 5) {
    throw AnalysisError("Yukawa fit window holds " + std::to_string(xs.size()) +
                        " bins with positive potential; at least 5 are needed");
  }
  const double n = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double intercept = (sy - slope * sx) / n;
  double ss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) ss += std::pow(ys[i] - intercept - slope * xs[i], 2);
  YukawaFit fit;
  fit.decay_rate = -slope;
  fit.amplitude = 4.0 * std::numbers::pi * std::exp(intercept);
  fit.residual = std::sqrt(ss / n);
  fit.bins_used = static_cast<int>(xs.size());
  return fit;
}

}  // namespace detail

/// Shell-averages real samples around `center` (Cartesian) using minimum-image
/// distances, compares against the bare Coulomb potential Q/(4 pi r) and fits
/// a Yukawa decay on the window.
inline ScreeningReport screening_from_samples(const Lattice& cell, const std::array<int, 3>& dims,
                                              const std::vector<double>& values, const Vec3& center, double Q,
                                              const ScreeningOptions& opt = {}) {
  const std::size_t total = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  if (values.size() != total) throw UsageError("sample count does not match the grid");
  if (opt.bins < 1 || !(opt.window_lo < opt.window_hi)) throw UsageError("invalid screening options");
  if (Q == 0.0) throw AnalysisError("screening analysis needs a nonzero defect charge");

  ScreeningReport rep;
  rep.Q = Q;
  rep.box_length = cell.min_cell_length();
  rep.window_lo = opt.window_lo * rep.box_length;
  rep.window_hi = opt.window_hi * rep.box_length;
  const double rmax = 0.5 * rep.box_length;
  const double width = rmax / opt.bins;

  std::vector<double> sum_r(opt.bins, 0.0), sum_v(opt.bins, 0.0);
  std::vector<std::size_t> count(opt.bins, 0);
  const Vec3 c_frac = cell.cell_vectors().inverse() * center;
  GridSamples layout{dims, {}};
  for (int i = 0; i < dims[0]; ++i)
    for (int j = 0; j < dims[1]; ++j)
      for (int l = 0; l < dims[2]; ++l) {
        Vec3 d = layout.fractional(i, j, l) - c_frac;
        for (int a = 0; a < 3; ++a) d[a] -= std::round(d[a]);
        double r = std::numeric_limits<double>::infinity();
        for (int a = -1; a <= 1; ++a)
          for (int b = -1; b <= 1; ++b)
            for (int e = -1; e <= 1; ++e) r = std::min(r, cell.cartesian(d + Vec3(a, b, e)).norm());
        if (r <= 0.0 || r > rmax) continue;
        const int bin = std::min(opt.bins - 1, static_cast<int>(r / width));
        sum_r[bin] += r;
        sum_v[bin] += values[layout.index(i, j, l)];
        ++count[bin];
      }
  for (int b = 0; b < opt.bins; ++b) {
    ScreeningBin bin;
    bin.count = count[b];
    if (count[b] > 0) {
      bin.r = sum_r[b] / count[b];
      bin.V_avg = sum_v[b] / count[b];
      bin.coulomb_ref = Q / (4.0 * std::numbers::pi * bin.r);
      bin.ratio = bin.V_avg / bin.coulomb_ref;
    }
    rep.bins.push_back(bin);
  }
  rep.fit = detail::fit_yukawa(rep.window());
  return rep;
}

/// Samples a converged total potential on a refined grid and analyses it.
inline ScreeningReport screening_analysis(const FourierField& V, const Vec3& center, double Q,
                                          const ScreeningOptions& opt = {}) {
  if (opt.refine < 1) throw UsageError("grid refinement must be at least 1");
  std::array<int, 3> dims = V.pw().grid_dims();
  for (int& d : dims) d *= opt.refine;
  return screening_from_samples(V.pw().lattice(), dims, real_part(to_grid(V, dims)), center, Q, opt);
}

inline void write_screening_csv(std::ostream& os, const ScreeningReport& rep) {
  os << "r,V_avg,coulomb_ref,ratio\n";
  os.precision(17);
  for (const auto& b : rep.bins)
    if (b.count > 0) os << b.r << ',' << b.V_avg << ',' << b.coulomb_ref << ',' << b.ratio << '\n';
}

}  // namespace screenlab

#endif  // SCREENLAB_SCREENING_HPP
