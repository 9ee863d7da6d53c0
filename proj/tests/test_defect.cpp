#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>

#include <screenlab/defect.hpp>
#include <screenlab/tf.hpp>

#include "fixtures.hpp"

using namespace screenlab;
using Catch::Approx;

namespace {

const fixtures::Needle& needle() {
  static const fixtures::Needle n;
  return n;
}

const Supercell& needle_sc(int L) {
  static const Supercell s1 = needle().supercell(1);
  static const Supercell s2 = needle().supercell(2);
  return L == 1 ? s1 : s2;
}

double max_imag(const FourierField& f) { return f.coeffs().imag().cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("supercell embedding", "[defect]") {
  const Supercell& sc = needle_sc(2);
  CHECK(sc.basis()->cell_volume() == Approx(2.0 * needle().lattice.cell_volume()));
  const auto& gv = sc.basis()->density_gvectors();
  for (std::size_t i = 0; i < gv.size(); ++i)
    if (gv[i][0] % 2 != 0) CHECK(std::abs(sc.W_per()[static_cast<Eigen::Index>(i)]) <= 1e-14);
  CHECK(sc.W_per().is_real());
  CHECK(norm(sc.W_per()) > 0.0);
  // Gamma sampling of the supercell reproduces the unit-cell density on the 2-point mesh
  CHECK(sc.pristine_density().mean() * sc.basis()->cell_volume() == Approx(2.0).epsilon(1e-6));
}

TEST_CASE("point-charge coefficients", "[defect]") {
  const Supercell& sc = needle_sc(1);
  const double Q = 0.3, sigma = 0.7;
  const Vec3 x0(1.2, 0.0, 0.0);
  const auto d = DefectPotential::point_charge(sc.basis(), Q, sigma, x0);
  CHECK(d.field[0] == 0.0);
  CHECK(d.field.is_real());
  const auto& gv = sc.basis()->density_gvectors();
  for (std::size_t i = 1; i < gv.size(); ++i) {
    const Vec3 q = sc.basis()->lattice().reciprocal_cartesian(gv[i]);
    const cplx expected = Q * std::exp(-0.5 * sigma * sigma * q.squaredNorm()) / q.squaredNorm() /
                          sc.basis()->cell_volume() * std::exp(cplx(0.0, -q.dot(x0)));
    CHECK(std::abs(d.field[static_cast<Eigen::Index>(i)] - expected) < 1e-15);
  }
  CHECK_THROWS_AS(DefectPotential::point_charge(sc.basis(), Q, -1.0), UsageError);
  CHECK_THROWS_AS(DefectPotential::from_field(FourierField::plane_wave(sc.basis(), Miller(1, 0, 0))), UsageError);
}

TEST_CASE("renormalised density map", "[defect]") {
  const Supercell& sc = needle_sc(2);

  SECTION("G(0) = 0 exactly") { CHECK(g_defect(FourierField(sc.basis()), sc).coeffs().norm() == 0.0); }

  SECTION("parity") {
    const auto V = DefectPotential::point_charge(sc.basis(), 0.05, needle().sigma).field;
    CHECK(max_imag(V) < 1e-16);
    CHECK(max_imag(g_defect(V, sc)) < 1e-10);
  }

  SECTION("attractive wells gather electrons, repulsive ones expel them") {
    const auto attract = DefectPotential::point_charge(sc.basis(), -0.05, needle().sigma).field;
    const auto repel = DefectPotential::point_charge(sc.basis(), 0.05, needle().sigma).field;
    CHECK(g_defect(attract, sc).mean() > 0.0);
    // density change at the defect site
    CHECK(g_defect(attract, sc).coeffs().sum().real() > 0.0);
    CHECK(g_defect(repel, sc).coeffs().sum().real() < 0.0);
  }

  SECTION("derivative at zero is the Gamma chi0 fibre") {
    std::mt19937_64 rng(5);
    const auto v = FourierField::random_real(sc.basis(), rng, 1e-2);
    const double t = 1e-3;
    const auto fd = (1.0 / (2.0 * t)) * (g_defect(t * v, sc) - g_defect(-1.0 * t * v, sc));
    const auto fiber = sc.chi0();
    const auto analytic = fiber.extend(fiber.matrix * fiber.restrict(v));
    CHECK(norm(fd - analytic) <= 1e-6 * norm(analytic));
  }
}

TEST_CASE("defect SCF", "[defect]") {
  const Supercell& sc = needle_sc(2);
  const auto lr = sc.response();
  const double k2 = -lr.response_to_constant().mean();
  const auto V_def = DefectPotential::point_charge(sc.basis(), 0.01, needle().sigma).field;

  SECTION("no defect") {
    SCFConfig cfg;
    const auto [V, trace] = scf_defect(FourierField(sc.basis()), sc, cfg);
    CHECK(trace.converged);
    CHECK(trace.iterations <= 1);
    CHECK(norm(V) == 0.0);
  }

  SECTION("Kerker converges; symmetric defect gives symmetric potential") {
    SCFConfig cfg;
    cfg.alpha = 0.5;
    cfg.preconditioner = Preconditioner::kerker(k2);
    cfg.tol = 1e-10 * norm(V_def);
    const auto [V, trace] = scf_defect(V_def, sc, cfg);
    REQUIRE(trace.converged);
    CHECK(max_imag(V) <= 1e-9 * norm(V));
    CHECK(norm(V_def + apply_vc(g_defect(V, sc)) - V) <= cfg.tol);
    // a constant offset in the source is invisible
    const auto [V2, trace2] = scf_defect(V_def + FourierField::constant(sc.basis(), 0.3), sc, cfg);
    CHECK((V2.coeffs() - V.coeffs()).norm() == 0.0);
  }

  SECTION("plain iteration sloshes at large alpha") {
    // the unstable mode saturates into a bounded oscillation, so divergence
    // shows as non-convergence rather than blow-up
    SCFConfig cfg;
    cfg.alpha = 0.9;
    cfg.max_iter = 400;
    cfg.tol = 1e-8 * norm(V_def);
    const auto [V, trace] = scf_defect(V_def, sc, cfg);
    CHECK_FALSE(trace.converged);
    CHECK(trace.residuals().back() > 1e3 * cfg.tol);
    const double qmin = 2.0 * std::numbers::pi / (2.0 * needle().a);
    CHECK(trace.dominant_q == Approx(qmin).epsilon(1e-12));
  }

  SECTION("Jacobian spectral radii") {
    std::mt19937_64 rng(6);
    const auto seed = FourierField::random_real(sc.basis(), rng);
    const auto kerker = estimate_spectral_radius(defect_jacobian(lr, 0.5, Preconditioner::kerker(k2)), seed);
    CHECK(kerker.value < 1.0);
    const auto plain_hi = estimate_spectral_radius(defect_jacobian(lr, 0.9, Preconditioner::identity()), seed);
    CHECK(plain_hi.value > 1.0);
    const auto plain_lo = estimate_spectral_radius(defect_jacobian(lr, 0.1, Preconditioner::identity()), seed);
    CHECK(plain_lo.value < 1.0);
  }
}

TEST_CASE("sloshing benchmark table", "[defect]") {
  SloshingOptions opt;
  opt.sigma = needle().sigma;
  opt.kerker_k2 = -needle_sc(1).response().response_to_constant().mean();
  const auto rows = sloshing_benchmark({1, 2}, [](int L) { return needle_sc(L); }, opt);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].L == 1);
  CHECK(rows[1].L == 2);
  CHECK(rows[1].alpha_max < rows[0].alpha_max);
  CHECK(rows[0].kerker_converged);
  CHECK(rows[1].kerker_converged);
  std::ostringstream csv;
  write_sloshing_csv(csv, rows);
  CHECK(csv.str().rfind("L,alpha_max,kerker_iters", 0) == 0);
}

TEST_CASE("linear response check", "[defect]") {
  const Supercell& sc = needle_sc(1);
  SCFConfig cfg;
  cfg.alpha = 0.5;
  cfg.preconditioner = Preconditioner::kerker(-sc.response().response_to_constant().mean());
  cfg.tol = 1e-10;
  cfg.max_iter = 500;
  const auto zero = linear_response_check(FourierField(sc.basis()), sc, {1.0, 0.5}, cfg);
  for (const auto& r : zero) {
    CHECK(r.remainder == 0.0);
    CHECK(r.norm_ratio == 0.0);
  }
  const auto V_def = DefectPotential::point_charge(sc.basis(), 1.0, needle().sigma).field;
  const auto rows = linear_response_check(V_def, sc, {0.2, 0.1, 0.05}, cfg);
  REQUIRE(rows.size() == 3);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double ratio = rows[i - 1].remainder / rows[i].remainder;
    CHECK(ratio >= 0.5);
    CHECK(ratio <= 2.0);
  }
  CHECK(rows.back().norm_ratio == Approx(1.0).epsilon(0.05));
}

TEST_CASE("homogeneous gas matches the Thomas-Fermi dielectric function", "[defect][tf]") {
  const auto gas = fixtures::jellium_needle();
  const Supercell sc = gas.supercell(2);
  const auto fiber = sc.chi0();
  const double chi0 = fiber.matrix(0, 0).real() / 1.0;  // constant mode, orthonormal basis
  CHECK(chi0 < 0.0);
  const auto V_def = DefectPotential::point_charge(sc.basis(), 1.0, gas.sigma).field;
  const auto screened = dielectric_solve(fiber, V_def);
  const Miller m(1, 0, 0);
  const int idx = sc.basis()->find_density(m);
  const double q = sc.basis()->lattice().reciprocal_cartesian(m).norm();
  const double measured = (screened[idx] / V_def[idx]).real();
  CHECK(measured == Approx(tf::eps_tf_inv(q, chi0)).epsilon(0.15));
}
