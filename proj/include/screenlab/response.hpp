#ifndef SCREENLAB_RESPONSE_HPP
#define SCREENLAB_RESPONSE_HPP

#include <cmath>
#include <vector>

#include <Eigen/Cholesky>

#include "bands.hpp"
#include "kernels.hpp"

namespace screenlab {

/// (f(e1) - f(e2)) / (e1 - e2), replaced by f' at the mean energy when the
/// two levels are closer than 1e-8 max(1, |e1|).
inline double divided_difference(double e1, double e2, double mu, double kT) {
  if (std::abs(e1 - e2) < 1e-8 * std::max(1.0, std::abs(e1))) {
    return fermi_dirac_derivative(0.5 * (e1 + e2), mu, kT);
  }
  return (fermi_dirac(e1, mu, kT) - fermi_dirac(e2, mu, kT)) / (e1 - e2);
}

/// Occupations and divided differences of one band solution at a fixed
/// Fermi level. Pairs whose occupations are both below occupation_floor carry
/// a zero weight.
struct SumOverStatesKernel {
  std::vector<Eigen::VectorXd> occupations;
  std::vector<Eigen::MatrixXd> divided_diffs;
};

inline SumOverStatesKernel make_sos_kernel(const BandSolution& bands, double mu, double kT) {
  SumOverStatesKernel out;
  out.occupations.resize(bands.nk());
  out.divided_diffs.resize(bands.nk());
  for (std::size_t ik = 0; ik < bands.nk(); ++ik) {
    const auto& ev = bands.eigenvalues[ik];
    const Eigen::Index nb = ev.size();
    Eigen::VectorXd f(nb);
    for (Eigen::Index n = 0; n < nb; ++n) f[n] = fermi_dirac(ev[n], mu, kT);
    Eigen::MatrixXd d(nb, nb);
    for (Eigen::Index m = 0; m < nb; ++m)
      for (Eigen::Index n = 0; n < nb; ++n) {
        d(n, m) = (f[n] < occupation_floor && f[m] < occupation_floor) ? 0.0 : divided_difference(ev[n], ev[m], mu, kT);
      }
    out.occupations[ik] = std::move(f);
    out.divided_diffs[ik] = std::move(d);
  }
  return out;
}

namespace detail {

/// Matrix of multiplication by dW in the orthonormal orbital basis.
inline Eigen::MatrixXcd potential_matrix(const FourierField& dW) {
  const Eigen::MatrixXi& diff = dW.pw().difference_table();
  Eigen::MatrixXcd a(diff.rows(), diff.cols());
  for (Eigen::Index j = 0; j < diff.cols(); ++j)
    for (Eigen::Index i = 0; i < diff.rows(); ++i) a(i, j) = dW[diff(i, j)];
  return a;
}

/// Density coefficients of the one-body operator with orbital-basis matrix gamma.
inline void scatter_density(const Eigen::MatrixXcd& gamma, const Eigen::MatrixXi& diff, Eigen::VectorXcd& rho) {
  for (Eigen::Index j = 0; j < gamma.cols(); ++j)
    for (Eigen::Index i = 0; i < gamma.rows(); ++i) rho[diff(i, j)] += gamma(i, j);
}

}  // namespace detail

/// Derivatives of the potential-to-density maps at a fixed potential W.
///
/// F'_mu(W) dW = sum_k w_k sum_{n,m} D_nm <u_n, dW u_m> u_n conj(u_m) where D
/// holds the divided differences of the Fermi-Dirac occupations. The
/// neutral derivative F'(W) removes the Fermi-level shift that keeps the
/// electron count fixed.
class LinearResponse {
 public:
  LinearResponse(const FourierField& W, const ThermalState& state, const KPointMesh& kmesh, int nbands = 0)
      : state_(state), bands_(diagonalize(W, kmesh, nbands)) {
    state_.validate();
    kernel_ = make_sos_kernel(bands_, state_.fermi_level, state_.temperature);
    const FourierField e = FourierField::constant(bands_.basis, 1.0);
    fprime_e_ = apply_fixed_mu(e);
    e_fprime_e_ = inner(e, fprime_e_).real();
  }

  const BandSolution& bands() const { return bands_; }
  const SumOverStatesKernel& kernel() const { return kernel_; }
  const ThermalState& state() const { return state_; }

  FourierField apply_fixed_mu(const FourierField& dW) const {
    if (dW.basis() != bands_.basis) throw UsageError("perturbation lives on a different basis");
    const PlaneWaveBasis& basis = *bands_.basis;
    const Eigen::MatrixXcd a = detail::potential_matrix(dW);
    std::vector<Eigen::VectorXcd> partial(bands_.nk());
    parallel_for(bands_.nk(), [&](std::size_t ik) {
      const Eigen::MatrixXcd& v = bands_.eigenvectors[ik];
      const Eigen::MatrixXcd m = v.adjoint() * a * v;
      const Eigen::MatrixXcd p = kernel_.divided_diffs[ik].cast<cplx>().cwiseProduct(m);
      const Eigen::MatrixXcd gamma = v * p * v.adjoint();
      Eigen::VectorXcd rho = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(basis.density_size()));
      detail::scatter_density(gamma, basis.difference_table(), rho);
      partial[ik] = std::move(rho);
    });
    FourierField out(bands_.basis);
    for (std::size_t ik = 0; ik < bands_.nk(); ++ik) out.coeffs() += bands_.kpoints[ik].weight * partial[ik];
    out.coeffs() /= basis.cell_volume();
    if (dW.is_real()) out.symmetrize_real();
    return out;
  }

  /// F'_mu(W) e for the constant function e = 1.
  const FourierField& response_to_constant() const { return fprime_e_; }
  /// <e, F'_mu(W) e> = -dN/dmu, strictly negative at T > 0.
  double constant_response() const { return e_fprime_e_; }

  FourierField apply_neutral(const FourierField& dW) const {
    if (std::abs(e_fprime_e_) < 1e-14) throw NumericalError("<e, F'e> vanishes; neutral derivative undefined");
    FourierField out = apply_fixed_mu(dW);
    const cplx coef = inner(fprime_e_, dW) / e_fprime_e_;
    out.coeffs() -= coef * fprime_e_.coeffs();
    return out;
  }

 private:
  ThermalState state_;
  BandSolution bands_;
  SumOverStatesKernel kernel_;
  FourierField fprime_e_;
  double e_fprime_e_ = 0.0;
};

inline FourierField apply_fprime_fixed_mu(const FourierField& W, const FourierField& dW, const ThermalState& state,
                                          const KPointMesh& kmesh, int nbands = 0) {
  return LinearResponse(W, state, kmesh, nbands).apply_fixed_mu(dW);
}

/// Neutral derivative; state.fermi_level must be the self-consistent level of W.
inline FourierField apply_fprime_neutral(const FourierField& W, const FourierField& dW, const ThermalState& state,
                                         const KPointMesh& kmesh, int nbands = 0) {
  return LinearResponse(W, state, kmesh, nbands).apply_neutral(dW);
}

/// Which reciprocal vectors index the rows of a chi0 fibre.
enum class ResponseBasis { density, orbital };

/// Fibre chi_{0,q} of the independent-particle susceptibility in the
/// orthonormal basis exp(i (q+G).x)/sqrt|Gamma|.
struct Chi0Fiber {
  Vec3 q_frac = Vec3::Zero();
  BasisPtr basis;
  ResponseBasis which = ResponseBasis::density;
  std::vector<int> density_index;  // density-ball position of each row's G
  std::vector<double> qg_norm2;    // |q + G|^2
  Eigen::MatrixXcd matrix;

  Eigen::Index size() const { return matrix.rows(); }
  bool is_gamma() const { return q_frac.isZero(0.0); }
  /// Row of G = 0 when q = 0, else -1.
  Eigen::Index zero_row() const {
    if (!is_gamma()) return -1;
    for (std::size_t i = 0; i < qg_norm2.size(); ++i)
      if (qg_norm2[i] == 0.0) return static_cast<Eigen::Index>(i);
    return -1;
  }

  /// Coefficients of a density-ball field on the rows of this fibre, in the
  /// orthonormal normalisation (sqrt|Gamma| c_G).
  Eigen::VectorXcd restrict(const FourierField& f) const {
    Eigen::VectorXcd out(size());
    const double s = std::sqrt(basis->cell_volume());
    for (Eigen::Index i = 0; i < size(); ++i) out[i] = s * f[density_index[static_cast<std::size_t>(i)]];
    return out;
  }
  FourierField extend(const Eigen::VectorXcd& v) const {
    FourierField f(basis);
    const double s = 1.0 / std::sqrt(basis->cell_volume());
    for (Eigen::Index i = 0; i < size(); ++i) f[density_index[static_cast<std::size_t>(i)]] = s * v[i];
    return f;
  }
};

/// Adler-Wiser sum over states
/// <W1, chi_q W2> = sum_k w_k sum_{n,m} (f_{n,k+q} - f_{m,k}) / (eps_{n,k+q} - eps_{m,k})
///                  <W1 u_mk, u_n,k+q> <u_n,k+q, W2 u_mk>,
/// with the k+q fibres diagonalised directly.
inline Chi0Fiber chi0_fiber(const Vec3& q_frac, const FourierField& W, const ThermalState& state,
                            const KPointMesh& kmesh, int nbands = 0, ResponseBasis which = ResponseBasis::density) {
  state.validate();
  const BasisPtr& basis = W.basis();
  const double mu = state.fermi_level;
  const double kT = state.temperature;

  Chi0Fiber fiber;
  fiber.q_frac = q_frac;
  fiber.basis = basis;
  fiber.which = which;
  std::vector<Miller> rows;
  if (which == ResponseBasis::density) {
    rows = basis->density_gvectors();
  } else {
    rows = basis->gvectors();
  }
  const Vec3 q = basis->lattice().reciprocal_cartesian(q_frac);
  for (const Miller& g : rows) {
    fiber.density_index.push_back(basis->find_density(g));
    fiber.qg_norm2.push_back((q + basis->lattice().reciprocal_cartesian(g)).squaredNorm());
  }
  const auto ng = static_cast<Eigen::Index>(rows.size());

  const BandSolution at_k = diagonalize(W, kmesh, nbands);
  std::vector<KPoint> shifted = kmesh.points();
  for (auto& kp : shifted) kp.frac += q_frac;
  const BandSolution at_kq = q_frac.isZero(0.0) ? at_k : diagonalize(W, shifted, nbands);

  // Orbital index pairs (K, K+G) per row.
  std::vector<std::vector<std::pair<int, int>>> shifts(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t k = 0; k < basis->size(); ++k) {
      const int kg = basis->find_orbital(basis->gvectors()[k] + rows[r]);
      if (kg >= 0) shifts[r].emplace_back(static_cast<int>(k), kg);
    }

  const double inv_sqrt_vol = 1.0 / std::sqrt(basis->cell_volume());
  std::vector<Eigen::MatrixXcd> partial(kmesh.size());
  parallel_for(kmesh.size(), [&](std::size_t ik) {
    const Eigen::MatrixXcd& v = at_k.eigenvectors[ik];    // states m at k
    const Eigen::MatrixXcd& w = at_kq.eigenvectors[ik];   // states n at k+q
    const Eigen::VectorXd& em = at_k.eigenvalues[ik];
    const Eigen::VectorXd& en = at_kq.eigenvalues[ik];
    std::vector<int> occ_m, empty_m, occ_n;
    for (Eigen::Index m = 0; m < em.size(); ++m)
      (fermi_dirac(em[m], mu, kT) >= occupation_floor ? occ_m : empty_m).push_back(static_cast<int>(m));
    for (Eigen::Index n = 0; n < en.size(); ++n)
      if (fermi_dirac(en[n], mu, kT) >= occupation_floor) occ_n.push_back(static_cast<int>(n));

    // Pair list: every n against occupied m, then occupied n against empty m.
    std::vector<std::pair<int, int>> pairs;
    for (int m : occ_m)
      for (Eigen::Index n = 0; n < en.size(); ++n) pairs.emplace_back(static_cast<int>(n), m);
    for (int m : empty_m)
      for (int n : occ_n) pairs.emplace_back(n, m);
    const auto np = static_cast<Eigen::Index>(pairs.size());
    Eigen::VectorXd d(np);
    for (Eigen::Index p = 0; p < np; ++p) d[p] = divided_difference(en[pairs[p].first], em[pairs[p].second], mu, kT);

    auto gather_cols = [](const Eigen::MatrixXcd& src, const std::vector<int>& cols) {
      Eigen::MatrixXcd out(src.rows(), static_cast<Eigen::Index>(cols.size()));
      for (std::size_t c = 0; c < cols.size(); ++c) out.col(static_cast<Eigen::Index>(c)) = src.col(cols[c]);
      return out;
    };
    const Eigen::MatrixXcd v_occ = gather_cols(v, occ_m);
    const Eigen::MatrixXcd v_empty = gather_cols(v, empty_m);
    const Eigen::MatrixXcd w_occ = gather_cols(w, occ_n);
    const Eigen::Index first_block = w.cols() * v_occ.cols();

    Eigen::MatrixXcd r = Eigen::MatrixXcd::Zero(np, ng);
    for (Eigen::Index g = 0; g < ng; ++g) {
      const auto& sh = shifts[static_cast<std::size_t>(g)];
      if (sh.empty()) continue;
      const auto ns = static_cast<Eigen::Index>(sh.size());
      Eigen::MatrixXcd wg(ns, w.cols()), wg_occ(ns, w_occ.cols()), vg_occ(ns, v_occ.cols()), vg_empty(ns, v_empty.cols());
      for (Eigen::Index s = 0; s < ns; ++s) {
        const auto [k, kg] = sh[static_cast<std::size_t>(s)];
        wg.row(s) = w.row(kg);
        wg_occ.row(s) = w_occ.row(kg);
        vg_occ.row(s) = v_occ.row(k);
        vg_empty.row(s) = v_empty.row(k);
      }
      // rho^G_nm = <u_n,k+q, e_G u_mk>, laid out in pair order (column-major blocks).
      const Eigen::MatrixXcd block1 = inv_sqrt_vol * (wg.adjoint() * vg_occ);
      const Eigen::MatrixXcd block2 = inv_sqrt_vol * (wg_occ.adjoint() * vg_empty);
      r.col(g).head(first_block) = block1.reshaped();
      r.col(g).tail(np - first_block) = block2.reshaped();
    }
    const Eigen::MatrixXcd dr = d.cast<cplx>().asDiagonal() * r;
    partial[ik] = r.adjoint() * dr;
  });
  fiber.matrix = Eigen::MatrixXcd::Zero(ng, ng);
  for (std::size_t ik = 0; ik < kmesh.size(); ++ik) fiber.matrix += kmesh.points()[ik].weight * partial[ik];
  return fiber;
}

/// -chi_q + v_{c,q}^{-1}, the Hermitian operator whose inverse gives the
/// dielectric response. At q = 0 the G = 0 row and column are removed.
inline Eigen::MatrixXcd dielectric_matrix(const Chi0Fiber& fiber) {
  Eigen::MatrixXcd a = -fiber.matrix;
  for (Eigen::Index i = 0; i < a.rows(); ++i) a(i, i) += fiber.qg_norm2[static_cast<std::size_t>(i)];
  const Eigen::Index z = fiber.zero_row();
  if (z < 0) return a;
  Eigen::MatrixXcd reduced(a.rows() - 1, a.cols() - 1);
  for (Eigen::Index j = 0, jj = 0; j < a.cols(); ++j) {
    if (j == z) continue;
    for (Eigen::Index i = 0, ii = 0; i < a.rows(); ++i) {
      if (i == z) continue;
      reduced(ii++, jj) = a(i, j);
    }
    ++jj;
  }
  return reduced;
}

/// u = eps_q^{-1} rhs, i.e. (-chi_q + v_{c,q}^{-1}) u = v_{c,q}^{-1} rhs, through a
/// Cholesky factorisation. At q = 0 the constant mode is passed through
/// unchanged (v_c drops it) and the solve runs on the zero-mean subspace.
inline Eigen::VectorXcd dielectric_solve(const Chi0Fiber& fiber, const Eigen::VectorXcd& rhs) {
  if (rhs.size() != fiber.size()) throw UsageError("right-hand side does not match the fibre");
  const Eigen::Index z = fiber.zero_row();
  const Eigen::MatrixXcd a = dielectric_matrix(fiber);
  Eigen::VectorXcd b(a.rows());
  for (Eigen::Index i = 0, ii = 0; i < rhs.size(); ++i) {
    if (i == z) continue;
    b[ii] = fiber.qg_norm2[static_cast<std::size_t>(i)] * rhs[i];
    if (z >= 0) b[ii] += fiber.matrix(i, z) * rhs[z];
    ++ii;
  }
  Eigen::LLT<Eigen::MatrixXcd> llt(a);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("dielectric operator -chi0 + v_c^{-1} is not positive definite");
  }
  const Eigen::VectorXcd x = llt.solve(b);
  const double resid = (a * x - b).norm();
  if (resid > 1e-10 * std::max(b.norm(), 1e-300)) {
    throw NumericalError("dielectric solve residual " + std::to_string(resid) + " above tolerance");
  }
  Eigen::VectorXcd u(rhs.size());
  for (Eigen::Index i = 0, ii = 0; i < rhs.size(); ++i) u[i] = (i == z) ? rhs[i] : x[ii++];
  return u;
}

inline FourierField dielectric_solve(const Chi0Fiber& fiber, const FourierField& rhs) {
  return fiber.extend(dielectric_solve(fiber, fiber.restrict(rhs)));
}

/// Kerker-preconditioned dielectric operator K (1 - v_c chi_q) v, mode by mode.
inline Eigen::VectorXcd keps_apply(const Chi0Fiber& fiber, const Eigen::VectorXcd& v, double k2 = 1.0) {
  if (v.size() != fiber.size()) throw UsageError("vector does not match the fibre");
  const Eigen::VectorXcd chi_v = fiber.matrix * v;
  Eigen::VectorXcd out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double g2 = fiber.qg_norm2[static_cast<std::size_t>(i)];
    out[i] = g2 > 0.0 ? kerker_multiplier(g2, k2) * (v[i] - chi_v[i] / g2) : cplx(0.0);
  }
  return out;
}

/// Dense matrix of K eps on one fibre.
inline Eigen::MatrixXcd keps_matrix(const Chi0Fiber& fiber, double k2 = 1.0) {
  Eigen::MatrixXcd out(fiber.size(), fiber.size());
  for (Eigen::Index j = 0; j < fiber.size(); ++j) out.col(j) = keps_apply(fiber, Eigen::VectorXcd::Unit(fiber.size(), j), k2);
  return out;
}

}  // namespace screenlab

#endif  // SCREENLAB_RESPONSE_HPP
