#ifndef SCREENLAB_SCF_HPP
#define SCREENLAB_SCF_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "bands.hpp"
#include "kernels.hpp"
#include "response.hpp"

namespace screenlab {

/// Fourier-space preconditioner applied to the residual before damping.
struct Preconditioner {
  enum class Kind { identity, kerker, custom };
  Kind kind = Kind::identity;
  double k2 = 1.0;
  std::function<double(double)> multiplier;  // of |q|^2, for Kind::custom

  static Preconditioner identity() { return {}; }
  static Preconditioner kerker(double k2 = 1.0) { return {Kind::kerker, k2, {}}; }
  static Preconditioner custom(std::function<double(double)> m) { return {Kind::custom, 1.0, std::move(m)}; }

  FourierField apply(const FourierField& r) const {
    switch (kind) {
      case Kind::identity:
        return r;
      case Kind::kerker:
        return apply_kerker(r, k2);
      case Kind::custom:
        return apply_multiplier(r, multiplier);
    }
    return r;
  }
};

struct SCFConfig {
  double alpha = 0.5;
  int max_iter = 100;
  double tol = 1e-8;
  Preconditioner preconditioner;
  bool trace_free_energy = false;
  /// Residual growth over the initial residual that counts as divergence.
  double divergence_factor = 1e6;
  /// When false a divergence is recorded in the trace instead of thrown.
  bool throw_on_divergence = true;

  void validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw UsageError("damping alpha must lie in (0, 1]");
    if (!(tol > 0.0)) throw UsageError("SCF tolerance must be positive");
    if (max_iter < 1) throw UsageError("max_iter must be at least 1");
  }
};

struct SCFStep {
  int iteration = 0;
  double residual = 0.0;
  double preconditioned_residual = 0.0;
  double fermi_level = std::numeric_limits<double>::quiet_NaN();
  double free_energy = std::numeric_limits<double>::quiet_NaN();
};

struct SCFTrace {
  std::vector<SCFStep> steps;
  bool converged = false;
  bool diverged = false;
  int iterations = 0;
  double observed_rate = std::numeric_limits<double>::quiet_NaN();
  /// |q| of the largest residual coefficient at the last recorded step.
  double dominant_q = 0.0;

  std::vector<double> residuals() const {
    std::vector<double> r;
    for (const auto& s : steps) r.push_back(s.residual);
    return r;
  }
};

/// Median ratio of successive residuals over the last `window` steps.
inline double observed_rate(const std::vector<double>& residuals, std::size_t window = 10) {
  if (residuals.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t start = residuals.size() > window + 1 ? residuals.size() - window - 1 : 0;
  std::vector<double> ratios;
  for (std::size_t i = start + 1; i < residuals.size(); ++i)
    if (residuals[i - 1] > 0.0) ratios.push_back(residuals[i] / residuals[i - 1]);
  if (ratios.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(ratios.begin(), ratios.end());
  const std::size_t n = ratios.size();
  return n % 2 ? ratios[n / 2] : 0.5 * (ratios[n / 2 - 1] + ratios[n / 2]);
}

/// Value of the fixed-point map plus optional diagnostics for the trace.
struct MapEvaluation {
  FourierField value;
  double fermi_level = std::numeric_limits<double>::quiet_NaN();
  double free_energy = std::numeric_limits<double>::quiet_NaN();
};

using FixedPointMap = std::function<MapEvaluation(const FourierField&)>;

inline double dominant_mode_q(const FourierField& r) {
  Eigen::Index idx = 0;
  r.coeffs().cwiseAbs().maxCoeff(&idx);
  return std::sqrt(r.pw().density_norm2()[static_cast<std::size_t>(idx)]);
}

struct FixedPointResult {
  FourierField solution;
  SCFTrace trace;
};

/// x_{n+1} = x_n + alpha P (M(x_n) - x_n) until ||M(x) - x||_{L^2} <= tol.
inline FixedPointResult run_fixed_point(const FixedPointMap& map, const FourierField& x0, const SCFConfig& config) {
  config.validate();
  FourierField x = x0;
  SCFTrace trace;
  double initial = -1.0;
  for (int iter = 0; iter < config.max_iter; ++iter) {
    MapEvaluation eval = map(x);
    FourierField r = eval.value - x;
    const FourierField pr = config.preconditioner.apply(r);
    SCFStep step{iter, norm(r), norm(pr), eval.fermi_level, eval.free_energy};
    if (!std::isfinite(step.residual)) {
      trace.diverged = true;
      trace.steps.push_back(step);
      break;
    }
    trace.steps.push_back(step);
    trace.iterations = iter;
    trace.dominant_q = dominant_mode_q(r);
    if (initial < 0.0) initial = step.residual;
    if (step.residual <= config.tol) {
      trace.converged = true;
      break;
    }
    if (step.residual > config.divergence_factor * initial) {
      trace.diverged = true;
      break;
    }
    x += config.alpha * pr;
  }
  trace.observed_rate = observed_rate(trace.residuals());
  if (trace.diverged && config.throw_on_divergence) {
    throw DivergenceError("fixed-point iteration diverged at iteration " + std::to_string(trace.iterations) +
                              "; dominant residual mode |q| = " + std::to_string(trace.dominant_q),
                          trace.iterations, trace.dominant_q);
  }
  return {std::move(x), std::move(trace)};
}

/// Self-consistent map W -> W_nucl + v_per F(W) of the periodic model.
inline FixedPointMap periodic_scf_map(const FourierField& W_nucl, const ThermalState& state, const KPointMesh& kmesh,
                                      int nbands = 0, bool with_free_energy = false) {
  return [W_nucl, state, kmesh, nbands, with_free_energy](const FourierField& W) {
    const BandSolution bands = diagonalize(W, kmesh, nbands);
    const double mu = solve_fermi_level(bands, state.n_el, state.temperature);
    MapEvaluation out{W_nucl + apply_vper(density_from_bands(bands, mu, state.temperature))};
    out.fermi_level = mu;
    if (with_free_energy) out.free_energy = free_energy(bands, mu, state.temperature);
    return out;
  };
}

/// Damped iteration W <- W + alpha (W_nucl + v_per F(W) - W), started from W_nucl.
inline FixedPointResult scf_periodic(const FourierField& W_nucl, const SCFConfig& config, const ThermalState& state,
                                     const KPointMesh& kmesh, int nbands = 0,
                                     const std::optional<FourierField>& initial = std::nullopt) {
  state.validate();
  if (!W_nucl.is_real()) throw UsageError("nuclear potential must be real-valued");
  return run_fixed_point(periodic_scf_map(W_nucl, state, kmesh, nbands, config.trace_free_energy),
                         initial ? *initial : W_nucl, config);
}

using LinearMap = std::function<FourierField(const FourierField&)>;

struct SpectralRadiusEstimate {
  double value = 0.0;
  /// |difference| of the last two estimates, or half the interval width when
  /// the iteration stagnated.
  double uncertainty = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool converged = false;
  int iterations = 0;
};

/// Power iteration for r(J). Uses two-step norm ratios sqrt(|J^2 v|/|v|),
/// which also converge when the dominant eigenvalues come in a +/- pair.
inline SpectralRadiusEstimate estimate_spectral_radius(const LinearMap& jvp, const FourierField& seed, int iters = 200,
                                                       double rel_tol = 1e-9) {
  const double n0 = norm(seed);
  if (!(n0 > 0.0)) throw UsageError("power iteration seed must be nonzero");
  FourierField v = (1.0 / n0) * seed;
  std::vector<double> history;
  SpectralRadiusEstimate est;
  for (int it = 1; it <= iters; ++it) {
    FourierField w = jvp(jvp(v));
    const double nw = norm(w);
    const double value = std::sqrt(nw);
    history.push_back(value);
    est.iterations = it;
    if (nw == 0.0) {
      est.value = 0.0;
      est.converged = true;
      return est;
    }
    v = (1.0 / nw) * w;
    if (history.size() >= 2) {
      const double prev = history[history.size() - 2];
      if (std::abs(value - prev) <= rel_tol * value) {
        est.value = value;
        est.uncertainty = std::abs(value - prev);
        est.lower = est.upper = value;
        est.converged = true;
        return est;
      }
    }
  }
  const std::size_t tail = std::min<std::size_t>(10, history.size());
  const auto [lo, hi] = std::minmax_element(history.end() - static_cast<std::ptrdiff_t>(tail), history.end());
  est.lower = *lo;
  est.upper = *hi;
  est.value = history.back();
  est.uncertainty = 0.5 * (*hi - *lo);
  return est;
}

/// Analytic Jacobian of the damped periodic map at W:
/// J_alpha v = (1 - alpha) v + alpha v_per F'(W) v, with the neutral F'.
inline LinearMap periodic_jacobian(const LinearResponse& response, double alpha) {
  return [&response, alpha](const FourierField& v) {
    return (1.0 - alpha) * v + alpha * apply_vper(response.apply_neutral(v));
  };
}

/// Central finite-difference Jacobian of the damped map x -> x + alpha P (M(x) - x).
inline LinearMap finite_difference_jacobian(const FixedPointMap& map, const FourierField& x, double alpha,
                                            const Preconditioner& precond = Preconditioner::identity(),
                                            double step = 1e-5) {
  return [map, x, alpha, precond, step](const FourierField& v) {
    const double nv = norm(v);
    if (nv == 0.0) return FourierField(v.basis());
    const double h = step / nv;
    const FourierField xp = x + h * v;
    const FourierField xm = x - h * v;
    const FourierField dm = (1.0 / (2.0 * h)) * (map(xp).value - map(xm).value);
    return v + alpha * precond.apply(dm - v);
  };
}

/// Largest alpha in (0, 1] with r(J_alpha) < 1, by halving from alpha = 1 and
/// then bisecting until the bracket ratio is below 1 + rel_width.
template <class RadiusAt>
double sweep_alpha0(RadiusAt&& radius_at, double rel_width = 0.1) {
  double hi = 1.0;
  if (radius_at(hi) < 1.0) return hi;
  double lo = hi;
  do {
    hi = lo;
    lo *= 0.5;
    if (lo < 1e-8) throw NumericalError("no stable damping parameter found above 1e-8");
  } while (radius_at(lo) >= 1.0);
  while (hi / lo > 1.0 + rel_width) {
    const double mid = std::sqrt(lo * hi);
    (radius_at(mid) < 1.0 ? lo : hi) = mid;
  }
  return lo;
}

/// iteration,residual,fermi_level,free_energy
inline void write_trace_csv(std::ostream& os, const SCFTrace& trace) {
  os << "iteration,residual,fermi_level,free_energy\n";
  os.precision(17);
  for (const auto& s : trace.steps) {
    os << s.iteration << ',' << s.residual << ',' << s.fermi_level << ',' << s.free_energy << '\n';
  }
}

}  // namespace screenlab

#endif  // SCREENLAB_SCF_HPP
