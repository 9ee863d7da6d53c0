#ifndef SCREENLAB_CONFIG_HPP
#define SCREENLAB_CONFIG_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "errors.hpp"
#include "lattice.hpp"

namespace screenlab {

inline const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{"scf-periodic", "scf-defect",   "chi0",           "screen",
                                              "sloshing-bench", "tf-reference", "linear-response"};
  return names;
}

struct CosineMode {
  Miller miller = Miller::Zero();
  double amplitude = 0.0;
};

/// Periodised Gaussian amplitude * exp(-|x - x0|^2 / (2 width^2)).
struct GaussianWell {
  Vec3 center = Vec3::Zero();  // fractional
  double amplitude = 0.0;
  double width = 0.0;
};

struct RunConfig {
  std::string scenario;
  std::uint64_t seed = 0;

  // [lattice]: either a cubic constant or three cell vectors (rows)
  std::optional<double> cubic_a;
  std::optional<Mat3> vectors;

  // [basis]
  double ecut = 0.0;
  std::array<int, 3> kgrid{1, 1, 1};
  int nbands = 0;

  // [electrons]
  double temperature = 0.0;
  double n_el = 0.0;

  // [nucleus]
  std::vector<CosineMode> cosines;
  std::vector<GaussianWell> wells;

  // [defect]
  std::optional<double> Q;
  std::optional<double> sigma;  // default 0.25 * shortest cell length
  Vec3 center = Vec3::Zero();   // fractional, supercell
  std::array<int, 3> repeat{1, 1, 1};

  // [scf]
  double alpha = 0.5;
  double tol = 1e-8;
  bool tol_relative = false;  // defect scenarios: tol scales with ||V_def||
  int max_iter = 100;
  std::string preconditioner = "identity";
  std::optional<double> k2 = 1.0;  // nullopt: measured from the pristine response
  double pristine_alpha = 0.3;
  double pristine_tol = 1e-11;
  int pristine_max_iter = 500;

  // [sloshing]
  std::vector<int> Ls{1, 2, 3, 4};
  std::array<int, 3> sloshing_axes{1, 1, 1};
  int stability_iters = 30;
  double alpha_rel_width = 0.02;
  double kerker_alpha = 0.5;
  double tol_rel = 1e-8;

  // [linear_response]
  std::vector<double> scales{1.0, 0.5, 0.25};

  // [chi0]
  Vec3 q = Vec3::Zero();  // fractional
  int probes = 20;
  bool dump_matrix = false;

  // [screening]
  int bins = 64;
  int refine = 2;
  double window_lo = 0.15;
  double window_hi = 0.4;

  // [tf]
  double eps_f = 1.0;
  double q_max = 10.0;
  double r_min = 0.1;
  double r_max = 5.0;
  int points = 100;

  Lattice lattice() const { return Lattice(vectors ? *vectors : *cubic_a * Mat3::Identity()); }
  double defect_sigma() const { return sigma ? *sigma : 0.25 * lattice().min_cell_length(); }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_words(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

inline double to_double(const std::string& w, const std::string& key, int line) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(w, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != w.size() || w.empty() || !std::isfinite(v))
    throw ConfigError("type mismatch: " + key + " expects a number, got '" + w + "'", line);
  return v;
}

inline long long to_integer(const std::string& w, const std::string& key, int line) {
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(w, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != w.size() || w.empty())
    throw ConfigError("type mismatch: " + key + " expects an integer, got '" + w + "'", line);
  return v;
}

inline std::vector<double> doubles(const std::string& value, const std::string& key, int line,
                                   std::size_t count = 0) {
  std::vector<double> out;
  for (const auto& w : split_words(value)) out.push_back(to_double(w, key, line));
  if ((count > 0 && out.size() != count) || out.empty())
    throw ConfigError("type mismatch: " + key + " expects " + (count ? std::to_string(count) : "at least one") +
                          " number(s)", line);
  return out;
}

inline std::vector<int> integers(const std::string& value, const std::string& key, int line,
                                 std::size_t count = 0) {
  std::vector<int> out;
  for (const auto& w : split_words(value)) out.push_back(static_cast<int>(to_integer(w, key, line)));
  if ((count > 0 && out.size() != count) || out.empty())
    throw ConfigError("type mismatch: " + key + " expects " + (count ? std::to_string(count) : "at least one") +
                          " integer(s)", line);
  return out;
}

inline bool boolean(const std::string& value, const std::string& key, int line) {
  if (value == "true" || value == "yes" || value == "1") return true;
  if (value == "false" || value == "no" || value == "0") return false;
  throw ConfigError("type mismatch: " + key + " expects true or false, got '" + value + "'", line);
}

/// Shortest of 15 or 17 significant digits that reads back exactly.
inline std::string fmt(double v) {
  for (int p : {15, 17}) {
    std::ostringstream os;
    os << std::setprecision(p) << v;
    if (p == 17 || std::stod(os.str()) == v) return os.str();
  }
  return {};
}

template <class Seq>
std::string join(const Seq& s) {
  std::string out;
  for (const auto& v : s) {
    if (!out.empty()) out += ' ';
    if constexpr (std::is_floating_point_v<std::decay_t<decltype(v)>>)
      out += fmt(v);
    else
      out += std::to_string(v);
  }
  return out;
}

inline std::array<int, 3> positive3(const std::vector<int>& v, const std::string& key, int line) {
  for (int x : v)
    if (x < 1) throw ConfigError(key + " entries must be positive", line);
  return {v[0], v[1], v[2]};
}

}  // namespace detail

/// Parses line-based `key = value` text with `[section]` headers. Comments
/// start with '#'. `nucleus.cosine` and `nucleus.gaussian` may repeat; every
/// other key may appear once. A non-empty `scenario` overrides `run.scenario`.
inline RunConfig parse_config(const std::string& text, const std::string& scenario = "") {
  using namespace detail;
  RunConfig c;
  std::string section;
  std::set<std::string> seen;
  std::map<std::string, int> line_of;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(raw.substr(0, raw.find('#')));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError("malformed section header '" + s + "'", line);
      section = trim(s.substr(1, s.size() - 2));
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value, got '" + s + "'", line);
    const std::string name = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    const std::string key = section.empty() ? name : section + "." + name;
    if (value.empty()) throw ConfigError("missing value for " + key, line);
    const bool repeatable = key == "nucleus.cosine" || key == "nucleus.gaussian";
    if (!repeatable && !seen.insert(key).second) throw ConfigError("duplicate key " + key, line);
    line_of[key] = line;

    auto num = [&] { return to_double(value, key, line); };
    auto integer = [&] { return static_cast<int>(to_integer(value, key, line)); };

    if (key == "run.scenario") c.scenario = value;
    else if (key == "run.seed") {
      const long long v = to_integer(value, key, line);
      if (v < 0) throw ConfigError("run.seed must be non-negative", line);
      c.seed = static_cast<std::uint64_t>(v);
    } else if (key == "lattice.a") c.cubic_a = num();
    else if (key == "lattice.vectors") {
      const auto v = doubles(value, key, line, 9);
      Mat3 m;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m(j, i) = v[static_cast<std::size_t>(3 * i + j)];  // row i is a_i
      c.vectors = m;
    } else if (key == "basis.ecut") c.ecut = num();
    else if (key == "basis.kgrid") c.kgrid = positive3(integers(value, key, line, 3), key, line);
    else if (key == "basis.nbands") c.nbands = integer();
    else if (key == "electrons.temperature") c.temperature = num();
    else if (key == "electrons.n_el") c.n_el = num();
    else if (key == "nucleus.cosine") {
      const auto w = split_words(value);
      if (w.size() != 4) throw ConfigError("type mismatch: nucleus.cosine expects h k l amplitude", line);
      CosineMode m;
      for (int i = 0; i < 3; ++i) m.miller[i] = static_cast<int>(to_integer(w[static_cast<std::size_t>(i)], key, line));
      m.amplitude = to_double(w[3], key, line);
      if (m.miller.isZero()) throw ConfigError("nucleus.cosine needs a nonzero Miller index", line);
      c.cosines.push_back(m);
    } else if (key == "nucleus.gaussian") {
      const auto v = doubles(value, key, line, 5);
      if (!(v[4] > 0.0)) throw ConfigError("nucleus.gaussian width must be positive", line);
      c.wells.push_back({Vec3(v[0], v[1], v[2]), v[3], v[4]});
    } else if (key == "defect.Q") c.Q = num();
    else if (key == "defect.sigma") c.sigma = num();
    else if (key == "defect.center") {
      const auto v = doubles(value, key, line, 3);
      c.center = Vec3(v[0], v[1], v[2]);
    } else if (key == "defect.repeat") c.repeat = positive3(integers(value, key, line, 3), key, line);
    else if (key == "scf.alpha") c.alpha = num();
    else if (key == "scf.tol") c.tol = num();
    else if (key == "scf.tol_relative") c.tol_relative = boolean(value, key, line);
    else if (key == "scf.max_iter") c.max_iter = integer();
    else if (key == "scf.preconditioner") c.preconditioner = value;
    else if (key == "scf.k2") c.k2 = value == "auto" ? std::nullopt : std::optional<double>(num());
    else if (key == "scf.pristine_alpha") c.pristine_alpha = num();
    else if (key == "scf.pristine_tol") c.pristine_tol = num();
    else if (key == "scf.pristine_max_iter") c.pristine_max_iter = integer();
    else if (key == "sloshing.L") c.Ls = integers(value, key, line);
    else if (key == "sloshing.axes") {
      const auto v = integers(value, key, line, 3);
      for (int x : v)
        if (x != 0 && x != 1) throw ConfigError("sloshing.axes entries must be 0 or 1", line);
      c.sloshing_axes = {v[0], v[1], v[2]};
    } else if (key == "sloshing.stability_iters") c.stability_iters = integer();
    else if (key == "sloshing.alpha_rel_width") c.alpha_rel_width = num();
    else if (key == "sloshing.kerker_alpha") c.kerker_alpha = num();
    else if (key == "sloshing.tol_rel") c.tol_rel = num();
    else if (key == "linear_response.t") c.scales = doubles(value, key, line);
    else if (key == "chi0.q") {
      const auto v = doubles(value, key, line, 3);
      c.q = Vec3(v[0], v[1], v[2]);
    } else if (key == "chi0.probes") c.probes = integer();
    else if (key == "chi0.dump_matrix") c.dump_matrix = boolean(value, key, line);
    else if (key == "screening.bins") c.bins = integer();
    else if (key == "screening.refine") c.refine = integer();
    else if (key == "screening.window_lo") c.window_lo = num();
    else if (key == "screening.window_hi") c.window_hi = num();
    else if (key == "tf.eps_f") c.eps_f = num();
    else if (key == "tf.q_max") c.q_max = num();
    else if (key == "tf.r_min") c.r_min = num();
    else if (key == "tf.r_max") c.r_max = num();
    else if (key == "tf.points") c.points = integer();
    else throw ConfigError("unknown key " + key, line);
  }

  auto at = [&](const std::string& key) { return line_of.count(key) ? line_of[key] : 0; };
  auto require_positive = [&](double v, const std::string& key) {
    if (!(v > 0.0)) throw ConfigError(key + " must be positive", at(key));
  };

  if (!scenario.empty()) {
    if (!c.scenario.empty() && c.scenario != scenario)
      throw ConfigError("run.scenario = " + c.scenario + " conflicts with requested scenario " + scenario,
                        at("run.scenario"));
    c.scenario = scenario;
  }
  if (c.scenario.empty()) throw ConfigError("run.scenario required", 0);
  bool known = false;
  for (const auto& n : scenario_names()) known = known || n == c.scenario;
  if (!known) throw ConfigError("unknown scenario " + c.scenario, at("run.scenario"));

  if (c.scenario == "tf-reference") {
    require_positive(c.eps_f, "tf.eps_f");
    require_positive(c.q_max, "tf.q_max");
    require_positive(c.r_min, "tf.r_min");
    if (!(c.r_max > c.r_min)) throw ConfigError("tf.r_max must exceed tf.r_min", at("tf.r_max"));
    if (c.points < 2) throw ConfigError("tf.points must be at least 2", at("tf.points"));
    return c;
  }

  if (c.cubic_a && c.vectors) throw ConfigError("give either lattice.a or lattice.vectors, not both", at("lattice.vectors"));
  if (!c.cubic_a && !c.vectors) throw ConfigError("lattice.a or lattice.vectors required", 0);
  if (c.cubic_a) require_positive(*c.cubic_a, "lattice.a");
  try {
    (void)c.lattice();
  } catch (const GeometryError& e) {
    throw ConfigError(e.what(), at("lattice.vectors"));
  }
  if (!line_of.count("basis.ecut")) throw ConfigError("basis.ecut required", 0);
  require_positive(c.ecut, "basis.ecut");
  if (!line_of.count("electrons.temperature")) throw ConfigError("electrons.temperature required", 0);
  require_positive(c.temperature, "electrons.temperature");
  if (!line_of.count("electrons.n_el")) throw ConfigError("electrons.n_el required", 0);
  require_positive(c.n_el, "electrons.n_el");
  if (c.nbands < 0) throw ConfigError("basis.nbands must be non-negative", at("basis.nbands"));

  if (!(c.alpha > 0.0 && c.alpha <= 1.0)) throw ConfigError("scf.alpha must lie in (0, 1]", at("scf.alpha"));
  require_positive(c.tol, "scf.tol");
  if (c.max_iter < 1) throw ConfigError("scf.max_iter must be positive", at("scf.max_iter"));
  if (c.preconditioner != "identity" && c.preconditioner != "kerker")
    throw ConfigError("scf.preconditioner must be identity or kerker", at("scf.preconditioner"));
  if (c.k2) require_positive(*c.k2, "scf.k2");
  if (!(c.pristine_alpha > 0.0 && c.pristine_alpha <= 1.0))
    throw ConfigError("scf.pristine_alpha must lie in (0, 1]", at("scf.pristine_alpha"));
  require_positive(c.pristine_tol, "scf.pristine_tol");
  if (c.pristine_max_iter < 1) throw ConfigError("scf.pristine_max_iter must be positive", at("scf.pristine_max_iter"));

  const bool defect = c.scenario == "scf-defect" || c.scenario == "screen" || c.scenario == "sloshing-bench" ||
                      c.scenario == "linear-response";
  if (defect) {
    if (!c.Q) throw ConfigError("defect.Q required", 0);
    if (c.sigma && !(*c.sigma >= 0.0)) throw ConfigError("defect.sigma must be non-negative", at("defect.sigma"));
  }
  if (c.scenario == "sloshing-bench") {
    for (int L : c.Ls)
      if (L < 1) throw ConfigError("sloshing.L entries must be positive", at("sloshing.L"));
    if (c.stability_iters < 11) throw ConfigError("sloshing.stability_iters must be at least 11", at("sloshing.stability_iters"));
    require_positive(c.alpha_rel_width, "sloshing.alpha_rel_width");
    if (!(c.kerker_alpha > 0.0 && c.kerker_alpha <= 1.0))
      throw ConfigError("sloshing.kerker_alpha must lie in (0, 1]", at("sloshing.kerker_alpha"));
    require_positive(c.tol_rel, "sloshing.tol_rel");
  }
  if (c.scenario == "linear-response")
    for (double t : c.scales) require_positive(t, "linear_response.t");
  if (c.scenario == "chi0" && c.probes < 0) throw ConfigError("chi0.probes must be non-negative", at("chi0.probes"));
  if (c.scenario == "screen") {
    if (c.bins < 1) throw ConfigError("screening.bins must be positive", at("screening.bins"));
    if (c.refine < 1) throw ConfigError("screening.refine must be positive", at("screening.refine"));
    if (!(c.window_lo > 0.0 && c.window_lo < c.window_hi && c.window_hi <= 0.5))
      throw ConfigError("screening window must satisfy 0 < window_lo < window_hi <= 0.5", at("screening.window_hi"));
  }
  return c;
}

/// Canonical `key = value` listing with every default expanded. Two configs
/// with the same effective content give the same text.
inline std::string effective_config(const RunConfig& c) {
  using detail::fmt;
  using detail::join;
  std::ostringstream os;
  os << "[run]\nscenario = " << c.scenario << "\nseed = " << c.seed << "\n";
  if (c.scenario == "tf-reference") {
    os << "[tf]\neps_f = " << fmt(c.eps_f) << "\nq_max = " << fmt(c.q_max) << "\nr_min = " << fmt(c.r_min)
       << "\nr_max = " << fmt(c.r_max) << "\npoints = " << c.points << "\n";
    return os.str();
  }
  os << "[lattice]\n";
  if (c.cubic_a) {
    os << "a = " << fmt(*c.cubic_a) << "\n";
  } else {
    std::vector<double> v;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) v.push_back((*c.vectors)(j, i));
    os << "vectors = " << join(v) << "\n";
  }
  os << "[basis]\necut = " << fmt(c.ecut) << "\nkgrid = " << join(c.kgrid) << "\nnbands = " << c.nbands << "\n";
  os << "[electrons]\ntemperature = " << fmt(c.temperature) << "\nn_el = " << fmt(c.n_el) << "\n";
  os << "[nucleus]\n";
  for (const auto& m : c.cosines)
    os << "cosine = " << m.miller[0] << ' ' << m.miller[1] << ' ' << m.miller[2] << ' ' << fmt(m.amplitude) << "\n";
  for (const auto& w : c.wells)
    os << "gaussian = " << fmt(w.center[0]) << ' ' << fmt(w.center[1]) << ' ' << fmt(w.center[2]) << ' '
       << fmt(w.amplitude) << ' ' << fmt(w.width) << "\n";
  os << "[scf]\nalpha = " << fmt(c.alpha) << "\ntol = " << fmt(c.tol)
     << "\ntol_relative = " << (c.tol_relative ? "true" : "false") << "\nmax_iter = " << c.max_iter
     << "\npreconditioner = " << c.preconditioner << "\nk2 = " << (c.k2 ? fmt(*c.k2) : "auto")
     << "\npristine_alpha = " << fmt(c.pristine_alpha) << "\npristine_tol = " << fmt(c.pristine_tol)
     << "\npristine_max_iter = " << c.pristine_max_iter << "\n";
  if (c.Q) {
    os << "[defect]\nQ = " << fmt(*c.Q) << "\nsigma = " << fmt(c.defect_sigma()) << "\ncenter = "
       << join(std::vector<double>{c.center[0], c.center[1], c.center[2]}) << "\nrepeat = " << join(c.repeat) << "\n";
  }
  if (c.scenario == "sloshing-bench") {
    os << "[sloshing]\nL = " << join(c.Ls) << "\naxes = " << join(c.sloshing_axes)
       << "\nstability_iters = " << c.stability_iters << "\nalpha_rel_width = " << fmt(c.alpha_rel_width)
       << "\nkerker_alpha = " << fmt(c.kerker_alpha) << "\ntol_rel = " << fmt(c.tol_rel) << "\n";
  }
  if (c.scenario == "linear-response") os << "[linear_response]\nt = " << join(c.scales) << "\n";
  if (c.scenario == "chi0") {
    os << "[chi0]\nq = " << join(std::vector<double>{c.q[0], c.q[1], c.q[2]}) << "\nprobes = " << c.probes
       << "\ndump_matrix = " << (c.dump_matrix ? "true" : "false") << "\n";
  }
  if (c.scenario == "screen") {
    os << "[screening]\nbins = " << c.bins << "\nrefine = " << c.refine << "\nwindow_lo = " << fmt(c.window_lo)
       << "\nwindow_hi = " << fmt(c.window_hi) << "\n";
  }
  return os.str();
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string config_hash(const RunConfig& c) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(effective_config(c));
  return os.str();
}

}  // namespace screenlab

#endif  // SCREENLAB_CONFIG_HPP
