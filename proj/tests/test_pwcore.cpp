#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include <screenlab/grid.hpp>
#include <screenlab/kernels.hpp>

using namespace screenlab;
using Catch::Approx;

namespace {
constexpr double pi = std::numbers::pi;

Lattice skewed() {
  Mat3 a;
  a << 5.0, 0.7, 0.3,
       0.0, 4.5, 0.4,
       0.0, 0.0, 6.0;
  return Lattice(a);
}
}  // namespace

TEST_CASE("lattice reciprocal duality", "[lattice]") {
  const Lattice lat = skewed();
  const Mat3 prod = lat.cell_vectors().transpose() * lat.reciprocal_vectors();
  CHECK((prod - 2.0 * pi * Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12 * 2.0 * pi);
  CHECK(lat.cell_volume() == Approx(5.0 * 4.5 * 6.0).epsilon(1e-14));
}

TEST_CASE("degenerate lattice is rejected", "[lattice]") {
  Mat3 a;
  a << 1, 2, 3,
       1, 2, 3,
       0, 0, 1;
  CHECK_THROWS_AS(Lattice(a), GeometryError);
  CHECK_THROWS_AS(Lattice(Mat3::Zero()), GeometryError);
}

TEST_CASE("k-point mesh weights and folding", "[lattice]") {
  const Lattice lat = Lattice::cubic(3.0);
  const KPointMesh mesh(lat, {3, 2, 4}, Vec3(0.5, 0.0, 0.25));
  double total = 0.0;
  for (const auto& k : mesh.points()) {
    total += k.weight;
    for (int i = 0; i < 3; ++i) {
      CHECK(k.frac[i] >= -0.5);
      CHECK(k.frac[i] < 0.5);
    }
  }
  CHECK(mesh.size() == 24);
  CHECK(std::abs(total - 1.0) < 1e-14);
  CHECK_THROWS_AS(KPointMesh(lat, {2, 2, 2}, Vec3(1.0, 0.0, 0.0)), UsageError);
  CHECK_THROWS_AS(KPointMesh(lat, {0, 2, 2}), UsageError);
}

TEST_CASE("basis enumeration on the 2 pi cube", "[basis]") {
  const Lattice lat = Lattice::cubic(2.0 * pi);
  CHECK(build_basis(lat, 0.5)->size() == 7);
  CHECK(build_basis(lat, 0.4)->size() == 1);
  CHECK_THROWS_AS(build_basis(lat, 0.0), UsageError);
}

TEST_CASE("basis invariants", "[basis]") {
  const auto basis = build_basis(skewed(), 3.0);
  const auto& g = basis->gvectors();
  int zeros = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i].isZero()) ++zeros;
    CHECK(basis->find_orbital(-g[i]) >= 0);
    CHECK(basis->lattice().reciprocal_cartesian(g[i]).squaredNorm() / 2.0 <= 3.0 * (1 + 1e-12));
  }
  CHECK(zeros == 1);
  CHECK(g.front().isZero());
  for (std::size_t i = 1; i < g.size(); ++i) {
    const double a = basis->lattice().reciprocal_cartesian(g[i - 1]).squaredNorm();
    const double b = basis->lattice().reciprocal_cartesian(g[i]).squaredNorm();
    CHECK(a <= b * (1 + 1e-12));
  }
  // every orbital difference is a density vector and fits the grid
  const auto& diff = basis->difference_table();
  CHECK(diff.minCoeff() >= 0);
  for (int i = 0; i < 3; ++i) CHECK(basis->grid_dims()[i] >= 2 * basis->density_half_extent()[i] + 1);
}

TEST_CASE("grid transforms", "[grid]") {
  const auto basis = build_basis(skewed(), 2.0);

  SECTION("constant") {
    const auto g = to_grid(FourierField::constant(basis, 3.0));
    for (const auto& v : g.values) CHECK(std::abs(v - cplx(3.0)) < 1e-13);
  }

  SECTION("single plane wave") {
    const Miller m(1, -1, 2);
    const auto g = to_grid(FourierField::plane_wave(basis, m));
    const Vec3 k = basis->lattice().reciprocal_cartesian(m);
    double err = 0.0;
    for (int i = 0; i < g.dims[0]; ++i)
      for (int j = 0; j < g.dims[1]; ++j)
        for (int l = 0; l < g.dims[2]; ++l) {
          const Vec3 x = basis->lattice().cartesian(g.fractional(i, j, l));
          err = std::max(err, std::abs(g.values[g.index(i, j, l)] - std::exp(cplx(0.0, k.dot(x)))));
        }
    CHECK(err < 1e-12);
  }

  SECTION("round trip and Parseval") {
    std::mt19937_64 rng(7);
    const auto f = FourierField::random_real(basis, rng);
    const auto h = FourierField::random_real(basis, rng);
    const auto back = from_grid(to_grid(f), basis);
    CHECK((back.coeffs() - f.coeffs()).cwiseAbs().maxCoeff() < 1e-12);

    const auto gf = to_grid(f);
    const auto gh = to_grid(h);
    cplx grid_inner = 0.0;
    for (std::size_t n = 0; n < gf.total(); ++n) grid_inner += std::conj(gf.values[n]) * gh.values[n];
    grid_inner *= basis->cell_volume() / static_cast<double>(gf.total());
    CHECK(std::abs(grid_inner - inner(f, h)) < 1e-12 * std::abs(inner(f, h)) + 1e-12);
  }

  SECTION("grid products equal Fourier convolution") {
    // two fields supported on the orbital ball multiply exactly on the grid
    std::mt19937_64 rng(11);
    const double cut = 2.0 * basis->ecut();
    const auto f = FourierField::random_real(basis, rng, 1.0, cut);
    const auto h = FourierField::random_real(basis, rng, 1.0, cut);
    auto gf = to_grid(f);
    const auto gh = to_grid(h);
    for (std::size_t n = 0; n < gf.total(); ++n) gf.values[n] *= gh.values[n];
    const auto prod = from_grid(gf, basis);
    FourierField conv(basis);
    const auto& dg = basis->density_gvectors();
    for (std::size_t a = 0; a < dg.size(); ++a) {
      if (f[a] == 0.0) continue;
      for (std::size_t b = 0; b < dg.size(); ++b) {
        if (h[b] == 0.0) continue;
        const int c = basis->find_density(dg[a] + dg[b]);
        REQUIRE(c >= 0);
        conv[c] += f[a] * h[b];
      }
    }
    CHECK((prod.coeffs() - conv.coeffs()).cwiseAbs().maxCoeff() < 1e-12);
  }

  SECTION("coarse grid is rejected") {
    CHECK_THROWS_AS(to_grid(FourierField(basis), {3, 3, 3}), UsageError);
  }
}

TEST_CASE("fields on different bases do not mix", "[field]") {
  const auto a = build_basis(Lattice::cubic(4.0), 2.0);
  const auto b = build_basis(Lattice::cubic(4.0), 2.0);
  CHECK_THROWS_AS(FourierField(a) + FourierField(b), UsageError);
}

TEST_CASE("Coulomb kernels", "[kernels]") {
  const Lattice lat = Lattice::cubic(2.0 * pi);
  const auto basis = build_basis(lat, 4.0);

  SECTION("v_per") {
    CHECK(apply_vper(FourierField::constant(basis, 2.5)).coeffs().norm() == 0.0);
    const auto c = FourierField::cosine(basis, Miller(1, 0, 0), 1.0);
    CHECK((apply_vper(c).coeffs() - c.coeffs()).norm() < 1e-15);
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 10; ++trial) {
      const auto rho = FourierField::random_real(basis, rng);
      CHECK(inner(rho, apply_vper(rho)).real() >= 0.0);
    }
  }

  SECTION("v_c") {
    const auto pw = FourierField::plane_wave(basis, Miller(2, 0, 0), 1.0);
    CHECK(std::abs(apply_vc(pw)[basis->find_density(Miller(2, 0, 0))] - 0.25) < 1e-15);
    CHECK(apply_vc(FourierField::constant(basis, 1.0)).coeffs().norm() == 0.0);
    for (int L : {1, 2, 3, 4}) {
      const auto sc = build_basis(Lattice::cubic(2.0 * pi).supercell({L, L, L}), 0.2);
      const auto smallest = FourierField::plane_wave(sc, Miller(1, 0, 0));
      const cplx m = apply_vc(smallest)[sc->find_density(Miller(1, 0, 0))];
      CHECK(m.real() == Approx(L * L * 4.0 * pi * pi / (4.0 * pi * pi)).epsilon(1e-14));
    }
  }

  SECTION("Kerker multiplier") {
    CHECK(kerker_multiplier(1.0) == 0.5);
    CHECK(kerker_multiplier(0.0) == 0.0);
    CHECK(kerker_multiplier(100.0) == Approx(100.0 / 101.0).epsilon(1e-15));
    CHECK(kerker_multiplier(1.0, 3.0) == Approx(0.25).epsilon(1e-15));
    CHECK_THROWS_AS(apply_kerker(FourierField(basis), 0.0), UsageError);
  }

  SECTION("diagonal action and K v_c = (1 - Laplace)^-1") {
    std::mt19937_64 rng(5);
    const auto f = FourierField::random_real(basis, rng);
    const auto kv = apply_kerker(apply_vc(f));
    const auto& n2 = basis->density_norm2();
    for (Eigen::Index i = 1; i < f.size(); ++i) CHECK(std::abs(kv[i] - f[i] / (1.0 + n2[i])) < 1e-14);
    CHECK(kv[0] == 0.0);

    const Miller m(1, 2, 0);
    const auto pw = FourierField::plane_wave(basis, m, cplx(0.3, -0.2));
    for (const auto& out : {apply_vper(pw), apply_vc(pw), apply_kerker(pw)}) {
      const int idx = basis->find_density(m);
      Eigen::VectorXcd rest = out.coeffs();
      rest[idx] = 0.0;
      CHECK(rest.norm() == 0.0);
    }
  }
}
