#ifndef SCREENLAB_DEFECT_HPP
#define SCREENLAB_DEFECT_HPP

#include <array>
#include <cmath>
#include <functional>
#include <ostream>
#include <vector>

#include "parallel.hpp"
#include "response.hpp"
#include "scf.hpp"

namespace screenlab {

/// Periodic crystal solved once on its unit cell.
struct PristineCrystal {
  FourierField W_nucl;
  FourierField W_per;
  ThermalState state;  // fermi_level is the self-consistent eps_F
  std::array<int, 3> kgrid{1, 1, 1};
  SCFTrace trace;

  const BasisPtr& basis() const { return W_per.basis(); }
};

/// Self-consistent periodic potential and Fermi level on an unshifted k-grid.
inline PristineCrystal solve_pristine(const FourierField& W_nucl, const ThermalState& state,
                                      const std::array<int, 3>& kgrid, const SCFConfig& config) {
  const KPointMesh mesh(W_nucl.pw().lattice(), kgrid);
  auto [W, trace] = scf_periodic(W_nucl, config, state, mesh);
  if (!trace.converged) throw NumericalError("pristine periodic SCF did not converge");
  ThermalState solved = state;
  solved.fermi_level = density_selfconsistent_mu(W, state, mesh).fermi_level;
  return {W_nucl, std::move(W), solved, kgrid, std::move(trace)};
}

/// Copies a unit-cell field onto a supercell basis: G = sum m_i b_i maps to the
/// supercell Miller index (m_i r_i).
inline FourierField embed(const FourierField& f, const BasisPtr& target, const std::array<int, 3>& repeat) {
  FourierField out(target);
  const auto& gv = f.pw().density_gvectors();
  for (std::size_t n = 0; n < gv.size(); ++n) {
    const cplx c = f[static_cast<Eigen::Index>(n)];
    const Miller m(gv[n][0] * repeat[0], gv[n][1] * repeat[1], gv[n][2] * repeat[2]);
    const int idx = target->find_density(m);
    if (idx < 0) {
      if (c != 0.0) throw GeometryError("supercell density ball does not contain the unit-cell ball");
      continue;
    }
    out[idx] = c;
  }
  return out;
}

/// Periodic crystal replicated on an r_1 x r_2 x r_3 supercell with Gamma-only
/// sampling. The pristine density F_{eps_F}(W_per) is cached so that
/// G(V) = F_{eps_F}(W_per + V) - F_{eps_F}(W_per) vanishes exactly at V = 0.
class Supercell {
 public:
  Supercell(const PristineCrystal& crystal, const std::array<int, 3>& repeat, int nbands = 0)
      : base_(crystal.basis()->lattice()),
        repeat_(repeat),
        basis_(build_basis(base_.supercell(repeat), crystal.basis()->ecut())),
        mesh_(KPointMesh::gamma(basis_->lattice())),
        state_(crystal.state),
        nbands_(nbands) {
    W_per_ = embed(crystal.W_per, basis_, repeat_);
    const BandSolution bands = diagonalize(W_per_, mesh_, nbands_);
    check_occupation_floor(bands, state_.fermi_level, state_.temperature);
    rho0_ = density_from_bands(bands, state_.fermi_level, state_.temperature);
  }

  const Lattice& base_lattice() const { return base_; }
  const std::array<int, 3>& repeat() const { return repeat_; }
  const BasisPtr& basis() const { return basis_; }
  const KPointMesh& mesh() const { return mesh_; }
  const FourierField& W_per() const { return W_per_; }
  const ThermalState& state() const { return state_; }
  const FourierField& pristine_density() const { return rho0_; }
  int nbands() const { return nbands_; }

  /// F'_{eps_F}(W_per) on the supercell, i.e. dG/dV at V = 0.
  LinearResponse response() const { return LinearResponse(W_per_, state_, mesh_, nbands_); }

  /// Gamma fibre of chi_0 on the supercell density ball.
  Chi0Fiber chi0() const { return chi0_fiber(Vec3::Zero(), W_per_, state_, mesh_, nbands_, ResponseBasis::density); }

 private:
  Lattice base_;
  std::array<int, 3> repeat_;
  BasisPtr basis_;
  KPointMesh mesh_;
  ThermalState state_;
  int nbands_;
  FourierField W_per_;
  FourierField rho0_;
};

/// Solves the pristine crystal on the k-grid equivalent to Gamma sampling of
/// the requested supercell, then builds the supercell.
inline Supercell make_supercell(const FourierField& W_nucl, const ThermalState& state,
                                const std::array<int, 3>& repeat, const SCFConfig& config) {
  return Supercell(solve_pristine(W_nucl, state, repeat, config), repeat);
}

/// Defect potential on a supercell basis.
struct DefectPotential {
  enum class Kind { point_charge, explicit_field };
  Kind kind = Kind::explicit_field;
  double Q = 0.0;
  double sigma = 0.0;
  Vec3 center = Vec3::Zero();  // Cartesian
  FourierField field;

  /// Gaussian-smeared charge: c_q = Q exp(-sigma^2 q^2 / 2) exp(-i q.x0) / (|Omega| q^2),
  /// q != 0. Its real-space form is Q/(4 pi |x - x0|) away from the core,
  /// minus the cell mean.
  static DefectPotential point_charge(const BasisPtr& basis, double Q, double sigma, const Vec3& center = Vec3::Zero()) {
    if (!(sigma >= 0.0)) throw UsageError("point-charge width must be non-negative");
    DefectPotential d;
    d.kind = Kind::point_charge;
    d.Q = Q;
    d.sigma = sigma;
    d.center = center;
    d.field = FourierField(basis);
    const auto& gv = basis->density_gvectors();
    const auto& n2 = basis->density_norm2();
    const double inv_vol = 1.0 / basis->cell_volume();
    for (std::size_t i = 0; i < gv.size(); ++i) {
      if (n2[i] == 0.0) continue;
      const Vec3 q = basis->lattice().reciprocal_cartesian(gv[i]);
      d.field[static_cast<Eigen::Index>(i)] =
          Q * inv_vol * std::exp(-0.5 * sigma * sigma * n2[i]) / n2[i] * std::exp(cplx(0.0, -q.dot(center)));
    }
    return d;
  }

  static DefectPotential from_field(FourierField f) {
    if (!f.is_real()) throw UsageError("defect potential must be real-valued");
    DefectPotential d;
    d.field = std::move(f);
    return d;
  }
};

/// G(V) = F_{eps_F}(W_per + V) - F_{eps_F}(W_per) at the frozen pristine Fermi level.
inline FourierField g_defect(const FourierField& V, const Supercell& sc) {
  if (V.basis() != sc.basis()) throw UsageError("potential does not live on the supercell basis");
  const BandSolution bands = diagonalize(sc.W_per() + V, sc.mesh(), sc.nbands());
  check_occupation_floor(bands, sc.state().fermi_level, sc.state().temperature);
  return density_from_bands(bands, sc.state().fermi_level, sc.state().temperature) - sc.pristine_density();
}

inline FixedPointMap defect_map(const FourierField& V_def, const Supercell& sc) {
  return [V_def, &sc](const FourierField& V) { return MapEvaluation{V_def + apply_vc(g_defect(V, sc))}; };
}

/// V <- V + alpha P (V_def + v_c G(V) - V), started from V = 0. The q = 0
/// component of V_def is dropped, like that of v_c.
inline FixedPointResult scf_defect(const FourierField& V_def, const Supercell& sc, const SCFConfig& config) {
  if (!V_def.is_real()) throw UsageError("defect potential must be real-valued");
  FourierField source = V_def;
  source[0] = 0.0;
  return run_fixed_point(defect_map(source, sc), FourierField(sc.basis()), config);
}

/// Jacobian at V = 0 of the damped defect iteration:
/// J v = v + alpha P (v_c chi_0 v - v).
inline LinearMap defect_jacobian(const LinearResponse& response, double alpha, const Preconditioner& precond) {
  return [&response, alpha, precond](const FourierField& v) {
    return v + alpha * precond.apply(apply_vc(response.apply_fixed_mu(v)) - v);
  };
}

struct SloshingOptions {
  double Q = 0.01;
  double sigma = 0.5;
  int stability_iters = 30;
  double alpha_rel_width = 0.02;
  double kerker_alpha = 0.5;
  double kerker_k2 = 1.0;
  double tol_rel = 1e-8;  // Kerker stopping tolerance relative to ||V_def||
  int max_iter = 500;
};

struct SloshingRow {
  int L = 0;
  double alpha_max = 0.0;
  int kerker_iters = 0;
  bool kerker_converged = false;
  /// |q| of the dominant residual mode of the plain iteration just above alpha_max.
  double unstable_q = 0.0;
};

/// Plain damped iteration counts as stable when after `iters` steps the
/// residual is below both the initial residual and the residual ten steps
/// earlier (or the iteration converged outright).
inline bool plain_iteration_stable(const FourierField& V_def, const Supercell& sc, double alpha, int iters,
                                   double* dominant_q = nullptr) {
  SCFConfig cfg;
  cfg.alpha = alpha;
  cfg.max_iter = iters + 1;
  cfg.tol = 1e-14 * std::max(norm(V_def), 1e-300);
  cfg.throw_on_divergence = false;
  const auto [V, trace] = scf_defect(V_def, sc, cfg);
  if (dominant_q) *dominant_q = trace.dominant_q;
  if (trace.converged) return true;
  if (trace.diverged) return false;
  const auto r = trace.residuals();
  const std::size_t n = r.size() - 1;
  return r[n] < r[0] && r[n] <= r[n >= 10 ? n - 10 : 0];
}

/// Largest stable alpha in (0, 1]: halving from 1, then geometric bisection to
/// the requested relative width.
inline double largest_stable_alpha(const FourierField& V_def, const Supercell& sc, const SloshingOptions& opt,
                                   double* unstable_q = nullptr) {
  double q = 0.0;
  if (plain_iteration_stable(V_def, sc, 1.0, opt.stability_iters)) return 1.0;
  double hi = 1.0, lo = 0.5;
  while (!plain_iteration_stable(V_def, sc, lo, opt.stability_iters)) {
    hi = lo;
    lo *= 0.5;
    if (lo < 1e-8) throw NumericalError("no stable damping found for the plain defect iteration");
  }
  while (hi / lo > 1.0 + opt.alpha_rel_width) {
    const double mid = std::sqrt(lo * hi);
    (plain_iteration_stable(V_def, sc, mid, opt.stability_iters) ? lo : hi) = mid;
  }
  plain_iteration_stable(V_def, sc, hi, opt.stability_iters, &q);
  if (unstable_q) *unstable_q = q;
  return lo;
}

/// For each supercell size: largest stable plain alpha and the Kerker iteration
/// count at fixed alpha. Divergences are data, not errors.
inline std::vector<SloshingRow> sloshing_benchmark(const std::vector<int>& Ls,
                                                   const std::function<Supercell(int)>& supercell_for,
                                                   const SloshingOptions& opt) {
  std::vector<SloshingRow> rows(Ls.size());
  parallel_for(Ls.size(), [&](std::size_t i) {
    const Supercell sc = supercell_for(Ls[i]);
    const FourierField V_def = DefectPotential::point_charge(sc.basis(), opt.Q, opt.sigma).field;
    SloshingRow row;
    row.L = Ls[i];
    row.alpha_max = largest_stable_alpha(V_def, sc, opt, &row.unstable_q);
    SCFConfig cfg;
    cfg.alpha = opt.kerker_alpha;
    cfg.preconditioner = Preconditioner::kerker(opt.kerker_k2);
    cfg.tol = opt.tol_rel * norm(V_def);
    cfg.max_iter = opt.max_iter;
    cfg.throw_on_divergence = false;
    const auto [V, trace] = scf_defect(V_def, sc, cfg);
    row.kerker_iters = trace.iterations;
    row.kerker_converged = trace.converged;
    rows[i] = row;
  });
  return rows;
}

inline void write_sloshing_csv(std::ostream& os, const std::vector<SloshingRow>& rows) {
  os << "L,alpha_max,kerker_iters,alpha_max_L2,kerker_converged,unstable_q\n";
  os.precision(17);
  for (const auto& r : rows)
    os << r.L << ',' << r.alpha_max << ',' << r.kerker_iters << ',' << r.alpha_max * r.L * r.L << ','
       << (r.kerker_converged ? 1 : 0) << ',' << r.unstable_q << '\n';
}

struct LinearResponseRow {
  double t = 0.0;
  double remainder = 0.0;   // ||V(t V_def) - t eps^-1 V_def|| / t^2
  double norm_ratio = 0.0;  // ||V(t V_def)|| / (t ||eps^-1 V_def||)
  int iterations = 0;
};

/// Compares the nonlinear defect solution with its linearisation eps^{-1} V_def
/// at each scale t. The SCF tolerance is config.tol * t^2 so that solver error
/// stays below the quadratic remainder.
inline std::vector<LinearResponseRow> linear_response_check(const FourierField& V_def, const Supercell& sc,
                                                            const std::vector<double>& scales,
                                                            const SCFConfig& config) {
  std::vector<LinearResponseRow> rows;
  const double n0 = norm(V_def);
  FourierField linear(sc.basis());
  if (n0 > 0.0) linear = dielectric_solve(sc.chi0(), V_def);
  const double nl = norm(linear);
  for (double t : scales) {
    LinearResponseRow row;
    row.t = t;
    if (n0 > 0.0) {
      SCFConfig cfg = config;
      cfg.tol = config.tol * t * t;
      const auto [V, trace] = scf_defect(t * V_def, sc, cfg);
      if (!trace.converged)
        throw DivergenceError("defect SCF did not converge at scale t = " + std::to_string(t), trace.iterations,
                              trace.dominant_q);
      row.remainder = norm(V - t * linear) / (t * t);
      row.norm_ratio = norm(V) / (t * nl);
      row.iterations = trace.iterations;
    }
    rows.push_back(row);
  }
  return rows;
}

inline void write_linear_response_csv(std::ostream& os, const std::vector<LinearResponseRow>& rows) {
  os << "t,remainder,norm_ratio,iterations\n";
  os.precision(17);
  for (const auto& r : rows) os << r.t << ',' << r.remainder << ',' << r.norm_ratio << ',' << r.iterations << '\n';
}

}  // namespace screenlab

#endif  // SCREENLAB_DEFECT_HPP
