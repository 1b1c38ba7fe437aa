#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "hfw/reaction.hpp"

namespace hfw {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flat dotted key = value configuration. Every key has a default; see config_schema().
struct RunConfig {
  std::string system_name = "lambda_omega";
  double omega0 = 1.0;
  double omega1 = 0.5;
  double brusselator_a = 1.0;
  double brusselator_b = 2.2;

  int n_theta = 64;
  double profile_k = 0.4;

  double family_kmin = 0.2;
  double family_kmax = 0.45;
  int family_steps = 10;

  double stability_xi_max = 0.5;
  int stability_n_xi = 41;
  double stability_eta_max = 0.2;
  int stability_n_eta = 5;

  std::vector<double> evans_xi{0.0, 0.1, 0.25, 0.5};
  double evans_radius = 0.5;

  double symmetrizer_radius = 10.0;
  int symmetrizer_n_gamma = 12;
  int symmetrizer_n_tau = 41;
  int symmetrizer_n_medium_radius = 9;
  int symmetrizer_n_medium_angle = 13;
  bool test_tamper_symmetrizer = false;  // test hook: certify with S replaced by -S

  double modulation_q = 0.28;
  double modulation_amplitude = 0.05;
  double modulation_width = 0.5;
  double modulation_center = 3.0;
  double modulation_length = 6.283185307179586;
  int modulation_nx = 64;
  double modulation_T = 0.5;  // 0 selects 0.5 * blow-up estimate
  int modulation_n_time = 20;
  int modulation_n_theta = 32;
  int modulation_k_nodes = 16;
  double modulation_k_margin = 0.02;

  int expansion_order = 2;
  std::vector<double> epsilon{0.04, 0.028, 0.02, 0.014, 0.01};
  int norm_s = 2;

  std::string simulate_scheme = "strang";
  std::string validate_scheme = "etdrk4";
  double simulate_dt = 0.0;
  int simulate_points_per_wavelength = 32;
  int simulate_n_snapshots = 6;

  unsigned seed = 0;
  std::string output_dir = "out";

  // Keys set explicitly (file or overrides), in order, with their raw text.
  std::vector<std::pair<std::string, std::string>> explicit_keys;

  ReactionSystem system() const;
  // Every key with its effective value formatted as text.
  std::map<std::string, std::string> echo() const;
};

struct SchemaEntry {
  std::string key;
  std::string type;  // real, int, bool, string, list
  std::string default_value;
  std::string description;
};
std::vector<SchemaEntry> config_schema();

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);  // .json files read the "config" object of a manifest
// Sets one key from text; call validate_config afterwards.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);
void validate_config(const RunConfig& cfg);

std::vector<double> parse_real_list(const std::string& text);
std::string format_real(double v);  // shortest round-trip decimal, '.' separator

}  // namespace hfw
