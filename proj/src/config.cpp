#include "hfw/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <json.hpp>

namespace hfw {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_real(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError(key + ": '" + text + "' is not a real number");
  }
  if (!std::isfinite(v)) throw ConfigError(key + ": value must be finite");
  return v;
}

long parse_integer(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  long v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError(key + ": '" + text + "' is not an integer");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1") return true;
  if (t == "false" || t == "0") return false;
  throw ConfigError(key + ": '" + text + "' is not a boolean (true/false)");
}

std::string format_list(const std::vector<double>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_real(v[i]);
  return s;
}

struct Field {
  SchemaEntry doc;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

Field real_field(std::string key, double RunConfig::*m, std::string desc) {
  Field f;
  f.doc = {key, "real", format_real(RunConfig{}.*m), std::move(desc)};
  f.set = [m, key](RunConfig& c, const std::string& v) { c.*m = parse_real(key, v); };
  f.get = [m](const RunConfig& c) { return format_real(c.*m); };
  return f;
}

Field int_field(std::string key, int RunConfig::*m, std::string desc) {
  Field f;
  f.doc = {key, "int", std::to_string(RunConfig{}.*m), std::move(desc)};
  f.set = [m, key](RunConfig& c, const std::string& v) {
    long x = parse_integer(key, v);
    if (x < -1000000000L || x > 1000000000L) throw ConfigError(key + ": out of range");
    c.*m = static_cast<int>(x);
  };
  f.get = [m](const RunConfig& c) { return std::to_string(c.*m); };
  return f;
}

Field bool_field(std::string key, bool RunConfig::*m, std::string desc) {
  Field f;
  f.doc = {key, "bool", RunConfig{}.*m ? "true" : "false", std::move(desc)};
  f.set = [m, key](RunConfig& c, const std::string& v) { c.*m = parse_bool(key, v); };
  f.get = [m](const RunConfig& c) { return std::string(c.*m ? "true" : "false"); };
  return f;
}

Field string_field(std::string key, std::string RunConfig::*m, std::string desc) {
  Field f;
  f.doc = {key, "string", RunConfig{}.*m, std::move(desc)};
  f.set = [m](RunConfig& c, const std::string& v) { c.*m = trim(v); };
  f.get = [m](const RunConfig& c) { return c.*m; };
  return f;
}

Field list_field(std::string key, std::vector<double> RunConfig::*m, std::string desc) {
  Field f;
  f.doc = {key, "list", format_list(RunConfig{}.*m), std::move(desc)};
  f.set = [m, key](RunConfig& c, const std::string& v) {
    try {
      c.*m = parse_real_list(v);
    } catch (const ConfigError& e) {
      throw ConfigError(key + ": " + e.what());
    }
  };
  f.get = [m](const RunConfig& c) { return format_list(c.*m); };
  return f;
}

Field seed_field() {
  Field f;
  f.doc = {"seed", "int", "0", "seed of every random draw, in [0, 2^32)"};
  f.set = [](RunConfig& c, const std::string& v) {
    long s = parse_integer("seed", v);
    if (s < 0 || s > 4294967295L) throw ConfigError("seed must be in [0, 2^32)");
    c.seed = static_cast<unsigned>(s);
  };
  f.get = [](const RunConfig& c) { return std::to_string(c.seed); };
  return f;
}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      string_field("system.name", &RunConfig::system_name, "reaction system: lambda_omega or brusselator"),
      real_field("system.omega0", &RunConfig::omega0, "lambda-omega: omega(r) = omega0 + omega1 r^2"),
      real_field("system.omega1", &RunConfig::omega1, "lambda-omega amplitude-frequency coupling"),
      real_field("system.a", &RunConfig::brusselator_a, "Brusselator parameter a"),
      real_field("system.b", &RunConfig::brusselator_b, "Brusselator parameter b"),
      int_field("grid.n_theta", &RunConfig::n_theta, "collocation points per period (even, >= 8)"),
      real_field("profile.k", &RunConfig::profile_k,
                 "wavenumber of the single wave train used by profile, stability, evans, symmetrizer"),
      real_field("family.kmin", &RunConfig::family_kmin, "lower end of the continued family"),
      real_field("family.kmax", &RunConfig::family_kmax, "upper end of the continued family"),
      int_field("family.steps", &RunConfig::family_steps, "continuation steps"),
      real_field("stability.xi_max", &RunConfig::stability_xi_max, "Bloch grid: xi in [-xi_max, xi_max]"),
      int_field("stability.n_xi", &RunConfig::stability_n_xi, "Bloch grid size in xi"),
      real_field("stability.eta_max", &RunConfig::stability_eta_max, "transverse grid: eta in [0, eta_max]"),
      int_field("stability.n_eta", &RunConfig::stability_n_eta, "transverse grid size"),
      list_field("evans.xi", &RunConfig::evans_xi, "Floquet exponents for the root search"),
      real_field("evans.radius", &RunConfig::evans_radius, "root search disk |lambda| <= radius"),
      real_field("symmetrizer.radius", &RunConfig::symmetrizer_radius,
                 "R: low grid up to 1/R, medium grid |lambda| in [1/R, R]"),
      int_field("symmetrizer.n_gamma", &RunConfig::symmetrizer_n_gamma, "low grid: positive gamma values"),
      int_field("symmetrizer.n_tau", &RunConfig::symmetrizer_n_tau, "low grid: nonnegative tau values"),
      int_field("symmetrizer.n_medium_radius", &RunConfig::symmetrizer_n_medium_radius, "medium grid radii"),
      int_field("symmetrizer.n_medium_angle", &RunConfig::symmetrizer_n_medium_angle, "medium grid angles"),
      bool_field("test.tamper_symmetrizer", &RunConfig::test_tamper_symmetrizer,
                 "test hook: replace S by -S before certification (must fail)"),
      real_field("modulation.q", &RunConfig::modulation_q, "mean slow wavenumber"),
      real_field("modulation.amplitude", &RunConfig::modulation_amplitude, "bump amplitude A"),
      real_field("modulation.width", &RunConfig::modulation_width, "bump width w"),
      real_field("modulation.center", &RunConfig::modulation_center, "bump center x0"),
      real_field("modulation.length", &RunConfig::modulation_length, "slow domain length L"),
      int_field("modulation.nx", &RunConfig::modulation_nx, "slow grid points (even, >= 16)"),
      real_field("modulation.T", &RunConfig::modulation_T, "final slow time; 0 selects half the blow-up estimate"),
      int_field("modulation.n_time", &RunConfig::modulation_n_time, "Chebyshev nodes in slow time"),
      int_field("modulation.n_theta", &RunConfig::modulation_n_theta, "fast grid of the expansion (even, >= 8)"),
      int_field("modulation.k_nodes", &RunConfig::modulation_k_nodes, "Chebyshev nodes of the profile map in k"),
      real_field("modulation.k_margin", &RunConfig::modulation_k_margin, "profile map range beyond the k0 range"),
      int_field("expansion.order", &RunConfig::expansion_order, "ansatz order m in {0, 1, 2}"),
      list_field("epsilon", &RunConfig::epsilon, "scale parameters (comma separated)"),
      int_field("norm.s", &RunConfig::norm_s, "index s of the scaled norm (0..4)"),
      string_field("simulate.scheme", &RunConfig::simulate_scheme, "stepper of the simulate command: strang|etdrk4"),
      string_field("validate.scheme", &RunConfig::validate_scheme, "stepper of the validate study: strang|etdrk4"),
      real_field("simulate.dt", &RunConfig::simulate_dt, "unscaled step; 0 selects min(0.25 dx'^2, 0.01)"),
      int_field("simulate.points_per_wavelength", &RunConfig::simulate_points_per_wavelength,
                "direct-simulation resolution (>= 16)"),
      int_field("simulate.n_snapshots", &RunConfig::simulate_n_snapshots, "snapshots in [0, T], both ends included"),
      seed_field(),
      string_field("output.dir", &RunConfig::output_dir, "output directory"),
  };
  return f;
}

const Field& find_field(const std::string& key) {
  for (const auto& f : fields()) {
    if (f.doc.key == key) return f;
  }
  throw ConfigError("unknown key '" + key + "'");
}

}  // namespace

std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("format_real failed");
  return std::string(buf, ptr);
}

std::vector<double> parse_real_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_real("list", item));
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

std::vector<SchemaEntry> config_schema() {
  std::vector<SchemaEntry> out;
  for (const auto& f : fields()) out.push_back(f.doc);
  return out;
}

ReactionSystem RunConfig::system() const {
  if (system_name == "lambda_omega") return make_lambda_omega(omega0, omega1);
  if (system_name == "brusselator") return make_brusselator(brusselator_a, brusselator_b);
  throw ConfigError("system.name: unknown system '" + system_name + "'");
}

std::map<std::string, std::string> RunConfig::echo() const {
  std::map<std::string, std::string> out;
  for (const auto& f : fields()) out[f.doc.key] = f.get(*this);
  return out;
}

void validate_config(const RunConfig& c) {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  need(c.system_name == "lambda_omega" || c.system_name == "brusselator",
       "system.name must be lambda_omega or brusselator");
  need(c.n_theta >= 8 && c.n_theta % 2 == 0, "grid.n_theta must be even and >= 8");
  need(c.profile_k > 0.0, "profile.k must be > 0");
  if (c.system_name == "lambda_omega") need(c.profile_k < 1.0, "profile.k must be < 1 for lambda_omega");
  need(c.family_kmin > 0.0 && c.family_kmax > c.family_kmin, "family needs 0 < kmin < kmax");
  if (c.system_name == "lambda_omega") need(c.family_kmax < 1.0, "family.kmax must be < 1 for lambda_omega");
  need(c.family_steps >= 1, "family.steps must be >= 1");
  need(c.stability_xi_max > 0.0 && c.stability_xi_max <= 0.5, "stability.xi_max must be in (0, 0.5]");
  need(c.stability_n_xi >= 3, "stability.n_xi must be >= 3");
  need(c.stability_eta_max >= 0.0 && c.stability_n_eta >= 1, "stability eta grid invalid");
  need(c.evans_radius > 0.0, "evans.radius must be > 0");
  need(c.symmetrizer_radius > 1.0, "symmetrizer.radius must be > 1");
  need(c.symmetrizer_n_gamma >= 1 && c.symmetrizer_n_tau >= 2 && c.symmetrizer_n_medium_radius >= 2 &&
           c.symmetrizer_n_medium_angle >= 2,
       "symmetrizer grid sizes too small");
  need(c.modulation_q > 0.0, "modulation.q must be > 0");
  need(c.modulation_amplitude >= 0.0 && c.modulation_width > 0.0 && c.modulation_length > 0.0,
       "modulation needs amplitude >= 0, width > 0, length > 0");
  need(c.modulation_nx >= 16 && c.modulation_nx % 2 == 0, "modulation.nx must be even and >= 16");
  need(c.modulation_T >= 0.0, "modulation.T must be >= 0");
  need(c.modulation_n_time >= 4, "modulation.n_time must be >= 4");
  need(c.modulation_n_theta >= 8 && c.modulation_n_theta % 2 == 0, "modulation.n_theta must be even and >= 8");
  need(c.modulation_k_nodes >= 4, "modulation.k_nodes must be >= 4");
  need(c.modulation_k_margin > 0.0, "modulation.k_margin must be > 0");
  need(c.expansion_order >= 0 && c.expansion_order <= 2, "expansion.order must be 0, 1 or 2");
  need(!c.epsilon.empty(), "epsilon list is empty");
  for (double e : c.epsilon) need(e > 0.0 && e < 1.0, "epsilon values must lie in (0, 1)");
  need(c.norm_s >= 0 && c.norm_s <= 4, "norm.s must be in 0..4");
  need(c.simulate_scheme == "strang" || c.simulate_scheme == "etdrk4", "simulate.scheme must be strang or etdrk4");
  need(c.validate_scheme == "strang" || c.validate_scheme == "etdrk4", "validate.scheme must be strang or etdrk4");
  need(c.simulate_dt >= 0.0, "simulate.dt must be >= 0");
  need(c.simulate_points_per_wavelength >= 16, "simulate.points_per_wavelength must be >= 16");
  need(c.simulate_n_snapshots >= 2, "simulate.n_snapshots must be >= 2");
  need(!c.output_dir.empty(), "output.dir must not be empty");
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  find_field(key).set(cfg, value);
  cfg.explicit_keys.emplace_back(key, trim(value));
}

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  std::set<std::string> seen;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (!seen.insert(key).second) throw ConfigError("line " + std::to_string(lineno) + ": duplicate key " + key);
    try {
      set_config_value(cfg, key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  validate_config(cfg);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("manifest is not valid JSON: ") + e.what());
    }
    if (!j.contains("config") || !j["config"].is_object()) throw ConfigError("manifest has no config object");
    std::string flat;
    for (auto& [k, v] : j["config"].items()) {
      if (!v.is_string()) throw ConfigError("manifest config values must be strings");
      flat += k + " = " + v.get<std::string>() + "\n";
    }
    return parse_config(flat);
  }
  return parse_config(text);
}

}  // namespace hfw
