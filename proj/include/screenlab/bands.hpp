#ifndef SCREENLAB_BANDS_HPP
#define SCREENLAB_BANDS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "field.hpp"
#include "parallel.hpp"

namespace screenlab {

/// Occupations below this are treated as zero when truncating bands.
inline constexpr double occupation_floor = 1e-14;

/// Temperature k_B T, Fermi level and electrons per cell, all in hartree /
/// electron units.
struct ThermalState {
  double temperature = 0.0;
  double fermi_level = 0.0;
  double n_el = 0.0;

  void validate() const {
    if (!(temperature > 0.0)) throw UsageError("temperature must be strictly positive");
  }
};

/// 1 / (1 + exp((eps - mu)/kT)), without overflow for large |eps - mu|.
inline double fermi_dirac(double eps, double mu, double kT) {
  const double x = (eps - mu) / kT;
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(x));
}

/// d f / d eps = -f (1 - f) / kT.
inline double fermi_dirac_derivative(double eps, double mu, double kT) {
  const double e = std::exp(-std::abs(eps - mu) / kT);
  return -e / ((1.0 + e) * (1.0 + e) * kT);
}

/// f ln f + (1 - f) ln(1 - f), extended by 0 at f in {0, 1}.
inline double occupation_entropy(double f) {
  double s = 0.0;
  if (f > 0.0) s += f * std::log(f);
  if (f < 1.0) s += (1.0 - f) * std::log1p(-f);
  return s;
}

/// Fibre Hamiltonian H_k = (-i grad + k)^2 + W in the orthonormal plane-wave
/// basis exp(i K.x)/sqrt|Gamma|: M_{K,K'} = |k+K|^2 delta_{KK'} + c_{K-K'}(W).
inline Eigen::MatrixXcd assemble_fiber(const Vec3& k_frac, const FourierField& W) {
  if (!W.is_real(1e-10)) throw UsageError("fibre potential must be real-valued");
  const PlaneWaveBasis& basis = W.pw();
  const auto npw = static_cast<Eigen::Index>(basis.size());
  const Eigen::MatrixXi& diff = basis.difference_table();
  Eigen::MatrixXcd h(npw, npw);
  for (Eigen::Index j = 0; j < npw; ++j)
    for (Eigen::Index i = 0; i < npw; ++i) h(i, j) = W[diff(i, j)];
  const Vec3 k = basis.lattice().reciprocal_cartesian(k_frac);
  for (Eigen::Index i = 0; i < npw; ++i) {
    h(i, i) += (k + basis.lattice().reciprocal_cartesian(basis.gvectors()[i])).squaredNorm();
  }
  // Exact Hermitian symmetrisation removes the rounding-level asymmetry of W.
  return 0.5 * (h + h.adjoint());
}

/// Eigenpairs of H_k for a list of fibres. eigenvectors[k] has one column per
/// retained band, coefficients in the orthonormal plane-wave basis.
struct BandSolution {
  BasisPtr basis;
  std::vector<KPoint> kpoints;
  int nbands = 0;
  std::vector<Eigen::VectorXd> eigenvalues;
  std::vector<Eigen::MatrixXcd> eigenvectors;

  std::size_t nk() const { return kpoints.size(); }
  double lowest() const {
    double e = std::numeric_limits<double>::infinity();
    for (const auto& ev : eigenvalues) e = std::min(e, ev[0]);
    return e;
  }
  double highest() const {
    double e = -std::numeric_limits<double>::infinity();
    for (const auto& ev : eigenvalues) e = std::max(e, ev[ev.size() - 1]);
    return e;
  }
  /// Smallest top-band energy over fibres; occupations must be negligible there.
  double lowest_top_band() const {
    double e = std::numeric_limits<double>::infinity();
    for (const auto& ev : eigenvalues) e = std::min(e, ev[ev.size() - 1]);
    return e;
  }
};

/// Diagonalises H_k at each point; nbands <= 0 keeps every band.
inline BandSolution diagonalize(const FourierField& W, const std::vector<KPoint>& kpoints, int nbands = 0) {
  const PlaneWaveBasis& basis = W.pw();
  const int npw = static_cast<int>(basis.size());
  if (nbands <= 0) nbands = npw;
  if (nbands > npw) throw UsageError("nbands exceeds the basis size (" + std::to_string(npw) + ")");
  if (!W.is_real(1e-10)) throw UsageError("fibre potential must be real-valued");

  BandSolution out;
  out.basis = W.basis();
  out.kpoints = kpoints;
  out.nbands = nbands;
  out.eigenvalues.resize(kpoints.size());
  out.eigenvectors.resize(kpoints.size());
  parallel_for(kpoints.size(), [&](std::size_t ik) {
    const Eigen::MatrixXcd h = assemble_fiber(kpoints[ik].frac, W);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(h);
    if (solver.info() != Eigen::Success) {
      throw NumericalError("Hermitian eigensolver failed at k-point " + std::to_string(ik));
    }
    out.eigenvalues[ik] = solver.eigenvalues().head(nbands);
    out.eigenvectors[ik] = solver.eigenvectors().leftCols(nbands);
  });
  return out;
}

inline BandSolution diagonalize(const FourierField& W, const KPointMesh& kmesh, int nbands = 0) {
  return diagonalize(W, kmesh.points(), nbands);
}

/// N(mu) = sum_k w_k sum_n f(eps_nk).
inline double electron_count(const BandSolution& bands, double mu, double kT) {
  double total = 0.0;
  for (std::size_t ik = 0; ik < bands.nk(); ++ik) {
    double s = 0.0;
    for (double e : bands.eigenvalues[ik]) s += fermi_dirac(e, mu, kT);
    total += bands.kpoints[ik].weight * s;
  }
  return total;
}

/// dN/dmu = -sum_k w_k sum_n f'(eps_nk) > 0.
inline double electron_count_derivative(const BandSolution& bands, double mu, double kT) {
  double total = 0.0;
  for (std::size_t ik = 0; ik < bands.nk(); ++ik) {
    double s = 0.0;
    for (double e : bands.eigenvalues[ik]) s -= fermi_dirac_derivative(e, mu, kT);
    total += bands.kpoints[ik].weight * s;
  }
  return total;
}

/// Throws if the highest retained band still carries occupation above the floor.
inline void check_occupation_floor(const BandSolution& bands, double mu, double kT) {
  for (std::size_t ik = 0; ik < bands.nk(); ++ik) {
    const auto& ev = bands.eigenvalues[ik];
    const double f = fermi_dirac(ev[ev.size() - 1], mu, kT);
    if (f >= occupation_floor) {
      throw NumericalError("top retained band at k-point " + std::to_string(ik) + " has occupation " +
                           std::to_string(f) + "; increase nbands or ecut");
    }
  }
}

/// Fermi level with N(mu) = n_el: bisection until the bracket is narrower than
/// kT, then Newton steps safeguarded by the bracket. The occupation floor of
/// the top band is enforced unless `check_floor` is false.
inline double solve_fermi_level(const BandSolution& bands, double n_el, double kT, bool check_floor = true) {
  if (!(n_el > 0.0)) throw UsageError("electron count must be positive");
  if (!(kT > 0.0)) throw UsageError("temperature must be strictly positive");
  double lo = bands.lowest() - 50.0 * kT;
  double hi = bands.highest() + 50.0 * kT;
  if (!(electron_count(bands, lo, kT) < n_el && electron_count(bands, hi, kT) > n_el)) {
    throw NumericalError("Fermi level not bracketed in [eps_min - 50kT, eps_max + 50kT]; nbands too small for n_el = " +
                         std::to_string(n_el));
  }
  const double tol = 1e-10 * n_el;
  while (hi - lo > kT) {
    const double mid = 0.5 * (lo + hi);
    (electron_count(bands, mid, kT) < n_el ? lo : hi) = mid;
  }
  double mu = 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    const double resid = electron_count(bands, mu, kT) - n_el;
    if (std::abs(resid) <= tol) {
      if (check_floor) check_occupation_floor(bands, mu, kT);
      return mu;
    }
    (resid < 0.0 ? lo : hi) = mu;
    const double slope = electron_count_derivative(bands, mu, kT);
    double next = slope > 0.0 ? mu - resid / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == mu) break;
    mu = next;
  }
  if (std::abs(electron_count(bands, mu, kT) - n_el) > tol)
    throw NumericalError("Fermi level iteration did not reach the requested accuracy");
  if (check_floor) check_occupation_floor(bands, mu, kT);
  return mu;
}

/// rho = sum_k w_k sum_n f_nk |u_nk|^2 with u normalised in L^2_per.
inline FourierField density_from_bands(const BandSolution& bands, double mu, double kT) {
  const PlaneWaveBasis& basis = *bands.basis;
  const auto nd = static_cast<Eigen::Index>(basis.density_size());
  const Eigen::MatrixXi& diff = basis.difference_table();
  std::vector<Eigen::VectorXcd> partial(bands.nk());
  parallel_for(bands.nk(), [&](std::size_t ik) {
    const auto& ev = bands.eigenvalues[ik];
    const auto& vecs = bands.eigenvectors[ik];
    std::vector<Eigen::Index> occ;
    std::vector<double> f;
    for (Eigen::Index n = 0; n < ev.size(); ++n) {
      const double fn = fermi_dirac(ev[n], mu, kT);
      if (fn > 1e-30) {
        occ.push_back(n);
        f.push_back(fn);
      }
    }
    Eigen::MatrixXcd scaled(vecs.rows(), static_cast<Eigen::Index>(occ.size()));
    Eigen::MatrixXcd plain(vecs.rows(), static_cast<Eigen::Index>(occ.size()));
    for (std::size_t c = 0; c < occ.size(); ++c) {
      plain.col(static_cast<Eigen::Index>(c)) = vecs.col(occ[c]);
      scaled.col(static_cast<Eigen::Index>(c)) = f[c] * vecs.col(occ[c]);
    }
    const Eigen::MatrixXcd gamma = scaled * plain.adjoint();
    Eigen::VectorXcd rho = Eigen::VectorXcd::Zero(nd);
    for (Eigen::Index j = 0; j < gamma.cols(); ++j)
      for (Eigen::Index i = 0; i < gamma.rows(); ++i) rho[diff(i, j)] += gamma(i, j);
    partial[ik] = std::move(rho);
  });
  FourierField rho(bands.basis);
  for (std::size_t ik = 0; ik < bands.nk(); ++ik) rho.coeffs() += bands.kpoints[ik].weight * partial[ik];
  rho.coeffs() /= basis.cell_volume();
  rho.symmetrize_real();
  return rho;
}

/// F_mu(W): density of f_mu(-Laplace + W) at a prescribed Fermi level.
inline FourierField density_fixed_mu(const FourierField& W, double mu, const ThermalState& state,
                                     const KPointMesh& kmesh, int nbands = 0) {
  state.validate();
  const BandSolution bands = diagonalize(W, kmesh, nbands);
  check_occupation_floor(bands, mu, state.temperature);
  return density_from_bands(bands, mu, state.temperature);
}

struct NeutralDensity {
  FourierField density;
  double fermi_level;
};

/// F(W) = F_{mu(W)}(W) with mu(W) fixed by charge neutrality.
inline NeutralDensity density_selfconsistent_mu(const FourierField& W, const ThermalState& state,
                                                const KPointMesh& kmesh, int nbands = 0) {
  state.validate();
  const BandSolution bands = diagonalize(W, kmesh, nbands);
  const double mu = solve_fermi_level(bands, state.n_el, state.temperature);
  return {density_from_bands(bands, mu, state.temperature), mu};
}

/// Free energy per cell of gamma* = f_mu(H):
/// sum_k w_k sum_n [(eps - mu) f + kT (f ln f + (1-f) ln(1-f))].
inline double free_energy(const BandSolution& bands, double mu, double kT) {
  double total = 0.0;
  for (std::size_t ik = 0; ik < bands.nk(); ++ik) {
    double s = 0.0;
    for (double e : bands.eigenvalues[ik]) {
      const double f = fermi_dirac(e, mu, kT);
      s += (e - mu) * f + kT * occupation_entropy(f);
    }
    total += bands.kpoints[ik].weight * s;
  }
  return total;
}

inline double free_energy(const BandSolution& bands, const ThermalState& state) {
  state.validate();
  return free_energy(bands, state.fermi_level, state.temperature);
}

}  // namespace screenlab

#endif  // SCREENLAB_BANDS_HPP
