#ifndef SCREENLAB_RUN_HPP
#define SCREENLAB_RUN_HPP

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include <json.hpp>

#include "config.hpp"
#include "defect.hpp"
#include "screening.hpp"
#include "tf.hpp"

namespace screenlab {

enum ExitCode : int { exit_ok = 0, exit_config = 2, exit_numerical = 3, exit_divergence = 4 };

/// Nuclear potential of a run: sum of cosine modes and periodised Gaussian wells.
inline FourierField nuclear_potential(const RunConfig& c, const BasisPtr& basis) {
  FourierField W(basis);
  for (const auto& m : c.cosines) {
    if (basis->find_density(m.miller) < 0) throw UsageError("nucleus.cosine mode lies outside the density ball");
    W += FourierField::cosine(basis, m.miller, m.amplitude);
  }
  const auto& gv = basis->density_gvectors();
  const double omega = basis->cell_volume();
  for (const auto& w : c.wells) {
    const double pref = w.amplitude * std::pow(2.0 * std::numbers::pi * w.width * w.width, 1.5) / omega;
    for (std::size_t n = 0; n < gv.size(); ++n) {
      const double g2 = basis->lattice().reciprocal_cartesian(gv[n]).squaredNorm();
      const double phase = -2.0 * std::numbers::pi * gv[n].cast<double>().dot(w.center);
      W[static_cast<Eigen::Index>(n)] += pref * std::exp(-0.5 * w.width * w.width * g2) * std::polar(1.0, phase);
    }
  }
  return W;
}

namespace detail {

using json = nlohmann::ordered_json;

class Artifacts {
 public:
  Artifacts(const RunConfig& c, std::filesystem::path dir)
      : c_(c), dir_(std::move(dir)), hash_(config_hash(c)), effective_(effective_config(c)) {
    std::filesystem::create_directories(dir_);
    summary_["config_hash"] = hash_;
    summary_["scenario"] = c.scenario;
    summary_["effective_config"] = effective_;
  }

  json& summary() { return summary_; }
  const std::string& hash() const { return hash_; }

  /// Opens `<scenario><suffix>.csv` with the hash comment header written.
  std::ofstream csv(const std::string& suffix = "") {
    std::ofstream os(dir_ / (c_.scenario + suffix + ".csv"));
    if (!os) throw std::runtime_error("cannot write to " + dir_.string());
    os << "# screenlab scenario=" << c_.scenario << " config_hash=" << hash_ << '\n';
    return os;
  }

  void finish() {
    std::ofstream cfg(dir_ / (c_.scenario + ".effective.cfg"));
    cfg << "# screenlab config_hash=" << hash_ << '\n' << effective_;
    std::ofstream js(dir_ / (c_.scenario + ".json"));
    js << summary_.dump(2) << '\n';
  }

 private:
  const RunConfig& c_;
  std::filesystem::path dir_;
  std::string hash_;
  std::string effective_;
  json summary_;
};

inline SCFConfig pristine_config(const RunConfig& c) {
  SCFConfig s;
  s.alpha = c.pristine_alpha;
  s.tol = c.pristine_tol;
  s.max_iter = c.pristine_max_iter;
  return s;
}

inline ThermalState thermal_state(const RunConfig& c) { return {c.temperature, 0.0, c.n_el}; }

inline Preconditioner preconditioner(const RunConfig& c, double measured_k2) {
  if (c.preconditioner == "identity") return Preconditioner::identity();
  return Preconditioner::kerker(c.k2 ? *c.k2 : measured_k2);
}

inline SCFConfig run_scf_config(const RunConfig& c, double measured_k2) {
  SCFConfig s;
  s.alpha = c.alpha;
  s.tol = c.tol;
  s.max_iter = c.max_iter;
  s.preconditioner = preconditioner(c, measured_k2);
  s.throw_on_divergence = false;
  return s;
}

inline json trace_json(const SCFTrace& t) {
  json j;
  j["converged"] = t.converged;
  j["diverged"] = t.diverged;
  j["iterations"] = t.iterations;
  j["final_residual"] = t.steps.empty() ? 0.0 : t.steps.back().residual;
  j["observed_rate"] = t.observed_rate;
  j["dominant_q"] = t.dominant_q;
  return j;
}

inline Supercell build_supercell(const RunConfig& c, const std::array<int, 3>& repeat) {
  const auto basis = build_basis(c.lattice(), c.ecut);
  return make_supercell(nuclear_potential(c, basis), thermal_state(c), repeat, pristine_config(c));
}

inline double supercell_k2(const Supercell& sc) { return -sc.response().response_to_constant().mean(); }

inline FourierField defect_field(const RunConfig& c, const Supercell& sc) {
  const Vec3 x0 = sc.basis()->lattice().cartesian(c.center);
  return DefectPotential::point_charge(sc.basis(), *c.Q, c.defect_sigma(), x0).field;
}

inline int status_of(const SCFTrace& t) { return t.converged ? exit_ok : exit_divergence; }

inline std::string yes_no(bool b) { return b ? "yes" : "no"; }

inline int run_scf_periodic(const RunConfig& c, Artifacts& art, std::ostream& log) {
  const auto basis = build_basis(c.lattice(), c.ecut);
  const FourierField W_nucl = nuclear_potential(c, basis);
  const KPointMesh mesh(basis->lattice(), c.kgrid);
  const ThermalState state = thermal_state(c);
  double k2 = 1.0;
  if (c.preconditioner == "kerker" && !c.k2) {
    ThermalState st = state;
    st.fermi_level = density_selfconsistent_mu(W_nucl, state, mesh, c.nbands).fermi_level;
    k2 = -LinearResponse(W_nucl, st, mesh, c.nbands).response_to_constant().mean();
  }
  SCFConfig cfg = run_scf_config(c, k2);
  cfg.trace_free_energy = true;
  const auto [W, trace] = scf_periodic(W_nucl, cfg, state, mesh, c.nbands);
  auto os = art.csv();
  write_trace_csv(os, trace);
  const auto dens = density_selfconsistent_mu(W, state, mesh, c.nbands);
  auto& s = art.summary();
  s["trace"] = trace_json(trace);
  s["fermi_level"] = dens.fermi_level;
  s["electrons_per_cell"] = dens.density.mean() * basis->cell_volume();
  s["free_energy"] = trace.steps.empty() ? 0.0 : trace.steps.back().free_energy;
  log << "scf-periodic: converged=" << yes_no(trace.converged) << " iterations=" << trace.iterations
      << " fermi_level=" << fmt(dens.fermi_level) << '\n';
  return status_of(trace);
}

inline int run_chi0(const RunConfig& c, Artifacts& art, std::ostream& log) {
  const auto basis = build_basis(c.lattice(), c.ecut);
  const FourierField W_nucl = nuclear_potential(c, basis);
  const KPointMesh mesh(basis->lattice(), c.kgrid);
  ThermalState state = thermal_state(c);
  const auto [W, trace] = scf_periodic(W_nucl, run_scf_config(c, 1.0), state, mesh, c.nbands);
  if (!trace.converged) {
    art.summary()["trace"] = trace_json(trace);
    log << "chi0: periodic SCF did not converge\n";
    return exit_divergence;
  }
  state.fermi_level = density_selfconsistent_mu(W, state, mesh, c.nbands).fermi_level;
  const Chi0Fiber fiber = chi0_fiber(c.q, W, state, mesh, c.nbands);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> chi_eig(fiber.matrix, Eigen::EigenvaluesOnly);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eps_eig(dielectric_matrix(fiber), Eigen::EigenvaluesOnly);
  {
    auto os = art.csv();
    os << "index,chi0_eigenvalue,dielectric_eigenvalue\n";
    os.precision(17);
    for (Eigen::Index i = 0; i < fiber.size(); ++i) {
      os << i << ',' << chi_eig.eigenvalues()[i] << ',';
      if (i < eps_eig.eigenvalues().size()) os << eps_eig.eigenvalues()[i];
      os << '\n';
    }
  }
  if (c.dump_matrix) {
    auto os = art.csv("_matrix");
    os << "row,col,re,im\n";
    os.precision(17);
    for (Eigen::Index j = 0; j < fiber.size(); ++j)
      for (Eigen::Index i = 0; i < fiber.size(); ++i)
        os << i << ',' << j << ',' << fiber.matrix(i, j).real() << ',' << fiber.matrix(i, j).imag() << '\n';
  }
  std::mt19937_64 rng(c.seed);
  std::normal_distribution<double> normal;
  double max_rq = -std::numeric_limits<double>::infinity();
  for (int p = 0; p < c.probes; ++p) {
    Eigen::VectorXcd v(fiber.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = cplx(normal(rng), normal(rng));
    max_rq = std::max(max_rq, v.dot(fiber.matrix * v).real() / v.squaredNorm());
  }
  auto& s = art.summary();
  s["fermi_level"] = state.fermi_level;
  s["fiber_size"] = fiber.size();
  s["hermiticity_error"] = (fiber.matrix - fiber.matrix.adjoint()).norm();
  s["chi0_max_eigenvalue"] = chi_eig.eigenvalues().maxCoeff();
  s["dielectric_min_eigenvalue"] = eps_eig.eigenvalues().minCoeff();
  s["max_rayleigh_quotient"] = c.probes > 0 ? max_rq : 0.0;
  log << "chi0: fiber size " << fiber.size() << " chi0_max_eigenvalue=" << fmt(chi_eig.eigenvalues().maxCoeff())
      << " dielectric_min_eigenvalue=" << fmt(eps_eig.eigenvalues().minCoeff()) << '\n';
  return exit_ok;
}

inline int run_scf_defect(const RunConfig& c, Artifacts& art, std::ostream& log, bool screen) {
  const Supercell sc = build_supercell(c, c.repeat);
  const double k2 = c.preconditioner == "kerker" && !c.k2 ? supercell_k2(sc) : 1.0;
  const FourierField V_def = defect_field(c, sc);
  SCFConfig cfg = run_scf_config(c, k2);
  if (c.tol_relative) cfg.tol *= norm(V_def);
  const auto [V, trace] = scf_defect(V_def, sc, cfg);
  {
    auto os = art.csv(screen ? "_trace" : "");
    write_trace_csv(os, trace);
  }
  auto& s = art.summary();
  s["trace"] = trace_json(trace);
  s["kerker_k2"] = c.preconditioner == "kerker" ? (c.k2 ? *c.k2 : k2) : 0.0;
  s["fermi_level"] = sc.state().fermi_level;
  s["induced_charge"] = g_defect(V, sc).mean() * sc.basis()->cell_volume();
  s["potential_norm"] = norm(V);
  if (!screen) {
    log << "scf-defect: converged=" << yes_no(trace.converged) << " iterations=" << trace.iterations
        << " induced_charge=" << fmt(s["induced_charge"].get<double>()) << '\n';
    return status_of(trace);
  }
  if (!trace.converged) {
    log << "screen: defect SCF did not converge after " << trace.iterations << " iterations\n";
    return exit_divergence;
  }
  ScreeningOptions opt;
  opt.bins = c.bins;
  opt.refine = c.refine;
  opt.window_lo = c.window_lo;
  opt.window_hi = c.window_hi;
  const Vec3 x0 = sc.basis()->lattice().cartesian(c.center);
  const ScreeningReport rep = screening_analysis(V, x0, *c.Q, opt);
  {
    auto os = art.csv();
    write_screening_csv(os, rep);
  }
  s["box_length"] = rep.box_length;
  s["ratio_decreasing_in_window"] = rep.ratio_decreasing_in_window();
  s["ratio_at_0.4L"] = rep.ratio_at(0.4 * rep.box_length);
  s["fit_decay_rate"] = rep.fit.decay_rate;
  s["fit_amplitude"] = rep.fit.amplitude;
  s["fit_bins"] = rep.fit.bins_used;
  s["tf_decay_rate"] = k2 > 0.0 ? std::sqrt(k2) : 0.0;
  log << "screen: converged=yes iterations=" << trace.iterations
      << " ratio_at_0.4L=" << fmt(s["ratio_at_0.4L"].get<double>()) << " fit_decay_rate=" << fmt(rep.fit.decay_rate)
      << '\n';
  return exit_ok;
}

inline int run_sloshing(const RunConfig& c, Artifacts& art, std::ostream& log) {
  auto repeat_for = [&](int L) {
    std::array<int, 3> r{};
    for (int a = 0; a < 3; ++a) r[a] = c.sloshing_axes[a] ? L : 1;
    return r;
  };
  SloshingOptions opt;
  opt.Q = *c.Q;
  opt.sigma = c.defect_sigma();
  opt.stability_iters = c.stability_iters;
  opt.alpha_rel_width = c.alpha_rel_width;
  opt.kerker_alpha = c.kerker_alpha;
  opt.tol_rel = c.tol_rel;
  opt.max_iter = c.max_iter;
  opt.kerker_k2 = c.k2 ? *c.k2 : supercell_k2(build_supercell(c, repeat_for(1)));
  const auto rows = sloshing_benchmark(c.Ls, [&](int L) { return build_supercell(c, repeat_for(L)); }, opt);
  {
    auto os = art.csv();
    write_sloshing_csv(os, rows);
  }
  auto& s = art.summary();
  s["kerker_k2"] = opt.kerker_k2;
  json arr = json::array();
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  int kmin = std::numeric_limits<int>::max(), kmax = 0;
  for (const auto& r : rows) {
    arr.push_back({{"L", r.L},
                   {"alpha_max", r.alpha_max},
                   {"alpha_max_L2", r.alpha_max * r.L * r.L},
                   {"kerker_iters", r.kerker_iters},
                   {"kerker_converged", r.kerker_converged},
                   {"unstable_q", r.unstable_q}});
    lo = std::min(lo, r.alpha_max * r.L * r.L);
    hi = std::max(hi, r.alpha_max * r.L * r.L);
    kmin = std::min(kmin, r.kerker_iters);
    kmax = std::max(kmax, r.kerker_iters);
  }
  s["rows"] = arr;
  s["alpha_L2_spread"] = hi / lo;
  s["kerker_iteration_spread"] = static_cast<double>(kmax - kmin) / kmin;
  log << "sloshing-bench: " << rows.size() << " sizes, alpha_max*L^2 max/min=" << fmt(hi / lo)
      << " kerker iterations " << kmin << ".." << kmax << '\n';
  return exit_ok;
}

inline int run_linear_response(const RunConfig& c, Artifacts& art, std::ostream& log) {
  const Supercell sc = build_supercell(c, c.repeat);
  const double k2 = c.preconditioner == "kerker" && !c.k2 ? supercell_k2(sc) : 1.0;
  SCFConfig cfg = run_scf_config(c, k2);
  cfg.throw_on_divergence = true;
  const FourierField V_def = defect_field(c, sc);
  if (c.tol_relative) cfg.tol *= norm(V_def);
  const auto rows = linear_response_check(V_def, sc, c.scales, cfg);
  {
    auto os = art.csv();
    write_linear_response_csv(os, rows);
  }
  json ratios = json::array();
  for (std::size_t i = 1; i < rows.size(); ++i) ratios.push_back(rows[i - 1].remainder / rows[i].remainder);
  auto& s = art.summary();
  s["remainder_ratios"] = ratios;
  s["final_norm_ratio"] = rows.empty() ? 0.0 : rows.back().norm_ratio;
  log << "linear-response: " << rows.size() << " scales, remainder ratios " << ratios.dump() << '\n';
  return exit_ok;
}

inline int run_tf_reference(const RunConfig& c, Artifacts& art, std::ostream& log) {
  const tf::TFModel model(c.eps_f);
  const double chi0 = model.chi0();
  {
    auto os = art.csv("_dielectric");
    os << "q,eps_inv\n";
    os.precision(17);
    for (int i = 0; i < c.points; ++i) {
      const double q = c.q_max * i / (c.points - 1);
      os << q << ',' << tf::eps_tf_inv(q, chi0) << '\n';
    }
  }
  {
    auto os = art.csv("_yukawa");
    os << "r,yukawa\n";
    os.precision(17);
    for (int i = 0; i < c.points; ++i) {
      const double r = c.r_min + (c.r_max - c.r_min) * i / (c.points - 1);
      os << r << ',' << tf::yukawa(r, 1.0, chi0) << '\n';
    }
  }
  auto& s = art.summary();
  s["chi0"] = chi0;
  s["decay_rate"] = std::sqrt(-chi0);
  log << "tf-reference: chi0=" << fmt(chi0) << " decay_rate=" << fmt(std::sqrt(-chi0)) << '\n';
  return exit_ok;
}

}  // namespace detail

/// Executes one scenario, writing `<scenario>*.csv`, `<scenario>.json` and the
/// effective config into `out_dir`. Returns an ExitCode.
inline int run(const RunConfig& c, const std::filesystem::path& out_dir, std::ostream& log = std::cout,
               std::ostream& err = std::cerr) {
  std::optional<detail::Artifacts> art;
  auto fail = [&](int code, const std::string& kind, const std::string& what) {
    err << "screenlab " << c.scenario << ": " << kind << ": " << what << '\n';
    if (art) {
      art->summary()["error"] = what;
      art->summary()["exit_code"] = code;
      art->finish();
    }
    return code;
  };
  try {
    art.emplace(c, out_dir);
    int status = exit_ok;
    if (c.scenario == "scf-periodic") status = detail::run_scf_periodic(c, *art, log);
    else if (c.scenario == "chi0") status = detail::run_chi0(c, *art, log);
    else if (c.scenario == "scf-defect") status = detail::run_scf_defect(c, *art, log, false);
    else if (c.scenario == "screen") status = detail::run_scf_defect(c, *art, log, true);
    else if (c.scenario == "sloshing-bench") status = detail::run_sloshing(c, *art, log);
    else if (c.scenario == "linear-response") status = detail::run_linear_response(c, *art, log);
    else if (c.scenario == "tf-reference") status = detail::run_tf_reference(c, *art, log);
    else throw ConfigError("unknown scenario " + c.scenario, 0);
    art->summary()["exit_code"] = status;
    art->finish();
    return status;
  } catch (const ConfigError& e) {
    return fail(exit_config, "config error", e.what());
  } catch (const UsageError& e) {
    return fail(exit_config, "config error", e.what());
  } catch (const GeometryError& e) {
    return fail(exit_config, "config error", e.what());
  } catch (const DivergenceError& e) {
    return fail(exit_divergence, "diverged", e.what());
  } catch (const Error& e) {
    return fail(exit_numerical, "numerical error", e.what());
  } catch (const std::exception& e) {
    return fail(exit_numerical, "error", e.what());
  }
}

}  // namespace screenlab

#endif  // SCREENLAB_RUN_HPP
