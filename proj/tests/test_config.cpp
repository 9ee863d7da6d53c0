#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>
#include <screenlab/run.hpp>

using namespace screenlab;
using Catch::Matchers::ContainsSubstring;

namespace {

const std::string minimal = R"(
[lattice]
a = 5
[basis]
ecut = 2
[electrons]
n_el = 2
temperature = 0.05
)";

int error_line(const std::string& text, const std::string& scenario = "scf-periodic") {
  try {
    parse_config(text, scenario);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("defaults of a minimal periodic config", "[config]") {
  const auto c = parse_config(minimal, "scf-periodic");
  CHECK(c.scenario == "scf-periodic");
  CHECK(c.alpha == 0.5);
  CHECK(c.tol == 1e-8);
  CHECK(c.preconditioner == "identity");
  CHECK(c.k2 == 1.0);
  CHECK(c.kgrid == std::array<int, 3>{1, 1, 1});
  CHECK(c.lattice().cell_volume() == Catch::Approx(125.0));
  CHECK(c.defect_sigma() == 1.25);
}

TEST_CASE("parse errors name their line", "[config]") {
  CHECK(error_line(minimal + "foo = 1\n") == 9);
  CHECK(error_line(minimal + "[scf]\nfoo = 1\n") == 10);
  CHECK(error_line(minimal + "[scf]\nalpha = fast\n") == 10);
  CHECK(error_line(minimal + "[scf]\nalpha = 0.1\nalpha = 0.2\n") == 11);
  CHECK(error_line(minimal + "[basis\n") == 9);
  CHECK(error_line(minimal + "[basis]\nkgrid = 2 2\n") == 10);
  CHECK(error_line(minimal + "[scf]\npreconditioner = anderson\n") == 10);
  CHECK(error_line(minimal + "[scf]\nalpha = 1.5\n") == 10);
  CHECK(error_line(minimal + "just text\n") == 9);
  try {
    parse_config(minimal + "foo = 1\n", "scf-periodic");
    FAIL("expected a parse error");
  } catch (const ConfigError& e) {
    CHECK_THAT(std::string(e.what()), ContainsSubstring("line 9") && ContainsSubstring("unknown key electrons.foo"));
  }
}

TEST_CASE("required keys", "[config]") {
  try {
    parse_config(minimal, "scf-defect");
    FAIL("expected a parse error");
  } catch (const ConfigError& e) {
    CHECK_THAT(std::string(e.what()), ContainsSubstring("defect.Q required"));
  }
  CHECK_THROWS_AS(parse_config("[lattice]\na = 5\n[electrons]\nn_el = 1\ntemperature = 0.1\n", "chi0"), ConfigError);
  CHECK_THROWS_AS(parse_config(minimal), ConfigError);  // no scenario
  CHECK_THROWS_AS(parse_config(minimal, "relax"), ConfigError);
  CHECK_THROWS_AS(parse_config(minimal + "[lattice]\nvectors = 1 0 0 0 1 0 0 0 1\n", "scf-periodic"), ConfigError);
  CHECK_THROWS_AS(parse_config("[lattice]\nvectors = 1 0 0 2 0 0 0 0 1\n[basis]\necut = 1\n[electrons]\nn_el = 1\n"
                               "temperature = 0.1\n",
                               "scf-periodic"),
                  ConfigError);
  CHECK_THROWS_AS(parse_config(minimal + "[run]\nscenario = chi0\n", "scf-periodic"), ConfigError);
  CHECK_NOTHROW(parse_config("[tf]\neps_f = 2\n", "tf-reference"));
  CHECK_THROWS_AS(parse_config("[tf]\neps_f = -2\n", "tf-reference"), ConfigError);
}

TEST_CASE("structured values", "[config]") {
  const auto c = parse_config(minimal + R"(
[run]
scenario = sloshing-bench
seed = 42
[nucleus]
cosine = 1 0 0 -0.3   # first mode
cosine = 0 1 0 -0.1
gaussian = 0.5 0.5 0.5 -1 0.7
[defect]
Q = -0.5
[scf]
k2 = auto
preconditioner = kerker
[sloshing]
L = 1 2 3
axes = 1 0 0
)");
  CHECK(c.scenario == "sloshing-bench");
  CHECK(c.seed == 42);
  REQUIRE(c.cosines.size() == 2);
  CHECK(c.cosines[1].miller == Miller(0, 1, 0));
  CHECK(c.cosines[0].amplitude == -0.3);
  REQUIRE(c.wells.size() == 1);
  CHECK(c.wells[0].width == 0.7);
  CHECK(c.Q == -0.5);
  CHECK_FALSE(c.k2.has_value());
  CHECK(c.Ls == std::vector<int>{1, 2, 3});
  CHECK(c.sloshing_axes == std::array<int, 3>{1, 0, 0});

  const auto v = parse_config("[lattice]\nvectors = 2 0 0  1 3 0  0 0 4\n[basis]\necut = 1\n[electrons]\nn_el = 1\n"
                              "temperature = 0.1\n",
                              "scf-periodic");
  CHECK(v.lattice().cell_vectors().col(1) == Vec3(1, 3, 0));
  CHECK(v.lattice().cell_volume() == Catch::Approx(24.0));
}

TEST_CASE("effective config round-trips and hashes", "[config]") {
  const auto a = parse_config(minimal + "[scf]\nalpha = 0.3\n[nucleus]\ncosine = 1 1 0 -0.2\n", "scf-periodic");
  const std::string text = effective_config(a);
  CHECK_THAT(text, ContainsSubstring("tol = 1e-08") && ContainsSubstring("alpha = 0.3\n"));
  const auto b = parse_config(text, "scf-periodic");
  CHECK(effective_config(b) == text);
  CHECK(config_hash(a) == config_hash(b));
  const auto d = parse_config(minimal + "[scf]\nalpha = 0.31\n", "scf-periodic");
  CHECK(config_hash(a) != config_hash(d));
  CHECK(config_hash(a).size() == 16);
  CHECK(fnv1a("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cull);
}

TEST_CASE("nuclear potential from modes and wells", "[config]") {
  const auto c = parse_config(minimal + "[nucleus]\ncosine = 1 0 0 -0.3\ngaussian = 0 0 0 -1 0.8\n", "scf-periodic");
  const auto basis = build_basis(c.lattice(), c.ecut);
  const auto W = nuclear_potential(c, basis);
  CHECK(W.is_real());
  // real-space value at the well centre: -0.3 * 2 (cosine) + periodised Gaussian
  const auto grid = real_part(to_grid(W));
  CHECK(grid[0] < -0.6);
  // mean of the Gaussian well is amplitude (2 pi w^2)^{3/2} / volume
  CHECK(W.mean() == Catch::Approx(-std::pow(2 * std::numbers::pi * 0.64, 1.5) / 125.0));
}

TEST_CASE("run writes hashed artifacts", "[config][run]") {
  const auto dir = std::filesystem::temp_directory_path() / "screenlab_test_config";
  std::filesystem::remove_all(dir);
  const auto c = parse_config("[tf]\npoints = 5\n", "tf-reference");
  std::ostringstream log, err;
  CHECK(run(c, dir, log, err) == exit_ok);
  CHECK_THAT(log.str(), ContainsSubstring("tf-reference: chi0=-1.5"));
  const std::string header = "# screenlab scenario=tf-reference config_hash=" + config_hash(c) + "\n";
  for (const char* name : {"tf-reference_dielectric.csv", "tf-reference_yukawa.csv"}) {
    const std::string csv = slurp(dir / name);
    CHECK(csv.rfind(header, 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
  }
  const auto j = nlohmann::json::parse(slurp(dir / "tf-reference.json"));
  CHECK(j["config_hash"] == config_hash(c));
  CHECK(j["exit_code"] == 0);
  CHECK(slurp(dir / "tf-reference.json").find("{\n  \"config_hash\"") == 0);

  const auto u = parse_config(minimal + "[scf]\nmax_iter = 2\n", "scf-periodic");
  CHECK(run(u, dir, log, err) == exit_ok);  // uniform gas converges at once
  const auto div = parse_config(minimal + "[nucleus]\ncosine = 1 0 0 -0.5\n[scf]\nmax_iter = 2\n", "scf-periodic");
  CHECK(run(div, dir, log, err) == exit_divergence);
  const auto bad = parse_config(minimal + "[nucleus]\ncosine = 9 0 0 -0.5\n", "scf-periodic");
  CHECK(run(bad, dir, log, err) == exit_config);
  CHECK_THAT(err.str(), ContainsSubstring("screenlab scf-periodic: config error"));
  std::filesystem::remove_all(dir);
}
