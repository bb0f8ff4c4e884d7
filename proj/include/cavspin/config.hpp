#pragma once

// Structured run configuration. The on-disk format is strict JSON with nested
// sections (cavity, ensemble, probe, state, sequence, output): unknown keys
// are rejected by name, frequencies are plain Hz, angles are degrees.
// Internally everything is rad/s and radians; resolve() derives the effective
// parameters and fills anything the state section leaves unspecified.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cavspin/cavity.hpp"
#include "cavspin/ellipse.hpp"
#include "cavspin/errors.hpp"
#include "cavspin/sequence.hpp"

namespace cavspin {

inline constexpr double kConfigPi = 3.14159265358979324;

struct CavitySection {
  double kappa_hz = 0.0;   // cavity linewidth, Hz (converted to rad/s internally)
  double gamma_hz = 0.0;   // excited-state decay, Hz
  double delta_hz = 0.0;   // effective detuning, Hz
  double probe_detuning_fraction = 0.5;
  double oscillator_strength = 2.0 / 3.0;

  CavityParams to_params() const {
    return {2.0 * kConfigPi * kappa_hz, 2.0 * kConfigPi * gamma_hz, 2.0 * kConfigPi * delta_hz,
            probe_detuning_fraction};
  }
  bool operator==(const CavitySection&) const = default;
};

struct EnsembleSection {
  double n_tot = 0.0;
  std::optional<double> eta_eff;
  std::vector<double> eta_samples;

  EnsembleCoupling to_params() const { return {n_tot, eta_samples, eta_eff}; }
  bool operator==(const EnsembleSection&) const = default;
};

struct ProbeSection {
  double p0 = 0.0;
  std::optional<double> frac_power_var;

  ProbeConfig to_params() const { return {p0, frac_power_var}; }
  bool operator==(const ProbeSection&) const = default;
};

// Sparse overlay on StateParams: engaged values win, anything absent is
// derived from the physics sections (or falls back to the ideal value).
struct StateSection {
  std::optional<double> s0;
  std::optional<double> q;
  std::optional<double> xi;
  std::optional<double> gamma_factor;
  std::optional<double> s;                      // Bloch radius, spin units
  std::optional<double> bloch_radius_fraction;  // alternative to s
  std::optional<double> readout_var;
  std::optional<double> contrast;
  std::optional<double> contrast_in;

  bool operator==(const StateSection&) const = default;
};

struct SequenceSection {
  Backend backend = Backend::gaussian;
  std::vector<double> alpha_deg;  // analysis angles; empty = default 0..168 step 12
  int shots_per_alpha = 100;
  std::uint64_t seed = 1;
  std::array<double, 3> echo_axis{1.0, 0.0, 0.0};
  bool echo = true;
  int threads = 1;

  bool operator==(const SequenceSection&) const = default;
};

struct OutputSection {
  std::string dir = "out";
  bool emit_shots = true;
  bool emit_variance = true;
  bool emit_fit = true;

  bool operator==(const OutputSection&) const = default;
};

struct RunConfig {
  std::optional<CavitySection> cavity;
  std::optional<EnsembleSection> ensemble;
  std::optional<ProbeSection> probe;
  StateSection state;
  SequenceSection sequence;
  OutputSection output;

  bool operator==(const RunConfig&) const = default;
};

namespace detail {

using Json = nlohmann::ordered_json;

inline void check_known(const Json& obj, const std::string& path,
                        std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* k : allowed)
      if (item.key() == k) known = true;
    if (!known)
      throw ConfigError("unknown config key: " +
                        (path.empty() ? item.key() : path + "." + item.key()));
  }
}

inline const Json* find_key(const Json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

inline double as_number(const Json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError("config key " + path + " must be a number");
  return v.get<double>();
}

inline int as_count(const Json& v, const std::string& path) {
  if (!v.is_number_integer()) throw ConfigError("config key " + path + " must be an integer");
  return static_cast<int>(v.get<long long>());
}

inline std::uint64_t as_seed(const Json& v, const std::string& path) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<long long>() >= 0)
    return static_cast<std::uint64_t>(v.get<long long>());
  throw ConfigError("config key " + path + " must be a non-negative integer");
}

inline bool as_bool(const Json& v, const std::string& path) {
  if (!v.is_boolean()) throw ConfigError("config key " + path + " must be a boolean");
  return v.get<bool>();
}

inline std::string as_string(const Json& v, const std::string& path) {
  if (!v.is_string()) throw ConfigError("config key " + path + " must be a string");
  return v.get<std::string>();
}

inline std::vector<double> as_number_list(const Json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError("config key " + path + " must be an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& e : v) out.push_back(as_number(e, path));
  return out;
}

inline const Json* section(const Json& root, const char* name) {
  const Json* s = find_key(root, name);
  if (s && !s->is_object())
    throw ConfigError(std::string("config section ") + name + " must be an object");
  return s;
}

inline double require_number(const Json& obj, const std::string& path, const char* key) {
  const Json* v = find_key(obj, key);
  if (!v) throw ConfigError("missing config key: " + path + "." + key);
  return as_number(*v, path + "." + key);
}

inline std::optional<double> optional_number(const Json& obj, const std::string& path,
                                             const char* key) {
  const Json* v = find_key(obj, key);
  if (!v) return {};
  return as_number(*v, path + "." + key);
}

}  // namespace detail

inline RunConfig parse_config(const std::string& text) {
  using detail::Json;
  Json root;
  try {
    root = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config root must be an object");
  detail::check_known(root, "", {"cavity", "ensemble", "probe", "state", "sequence", "output"});

  RunConfig cfg;

  if (const Json* c = detail::section(root, "cavity")) {
    detail::check_known(*c, "cavity",
                        {"kappa_hz", "gamma_hz", "delta_hz", "probe_detuning_fraction",
                         "oscillator_strength"});
    CavitySection sec;
    sec.kappa_hz = detail::require_number(*c, "cavity", "kappa_hz");
    sec.gamma_hz = detail::require_number(*c, "cavity", "gamma_hz");
    sec.delta_hz = detail::require_number(*c, "cavity", "delta_hz");
    if (auto v = detail::optional_number(*c, "cavity", "probe_detuning_fraction"))
      sec.probe_detuning_fraction = *v;
    if (auto v = detail::optional_number(*c, "cavity", "oscillator_strength"))
      sec.oscillator_strength = *v;
    cfg.cavity = sec;
  }

  if (const Json* e = detail::section(root, "ensemble")) {
    detail::check_known(*e, "ensemble", {"n_tot", "eta_eff", "eta_samples"});
    EnsembleSection sec;
    sec.n_tot = detail::require_number(*e, "ensemble", "n_tot");
    sec.eta_eff = detail::optional_number(*e, "ensemble", "eta_eff");
    if (const Json* v = detail::find_key(*e, "eta_samples"))
      sec.eta_samples = detail::as_number_list(*v, "ensemble.eta_samples");
    cfg.ensemble = sec;
  }

  if (const Json* p = detail::section(root, "probe")) {
    detail::check_known(*p, "probe", {"p0", "frac_power_var"});
    ProbeSection sec;
    sec.p0 = detail::require_number(*p, "probe", "p0");
    sec.frac_power_var = detail::optional_number(*p, "probe", "frac_power_var");
    cfg.probe = sec;
  }

  if (const Json* s = detail::section(root, "state")) {
    detail::check_known(*s, "state",
                        {"s0", "q", "xi", "gamma_factor", "s", "bloch_radius_fraction",
                         "readout_var", "contrast", "contrast_in"});
    cfg.state.s0 = detail::optional_number(*s, "state", "s0");
    cfg.state.q = detail::optional_number(*s, "state", "q");
    cfg.state.xi = detail::optional_number(*s, "state", "xi");
    cfg.state.gamma_factor = detail::optional_number(*s, "state", "gamma_factor");
    cfg.state.s = detail::optional_number(*s, "state", "s");
    cfg.state.bloch_radius_fraction = detail::optional_number(*s, "state", "bloch_radius_fraction");
    cfg.state.readout_var = detail::optional_number(*s, "state", "readout_var");
    cfg.state.contrast = detail::optional_number(*s, "state", "contrast");
    cfg.state.contrast_in = detail::optional_number(*s, "state", "contrast_in");
  }

  if (const Json* q = detail::section(root, "sequence")) {
    detail::check_known(*q, "sequence",
                        {"backend", "alpha_deg", "shots_per_alpha", "seed", "echo_axis", "echo",
                         "threads"});
    if (const Json* v = detail::find_key(*q, "backend"))
      cfg.sequence.backend = backend_from_string(detail::as_string(*v, "sequence.backend"));
    if (const Json* v = detail::find_key(*q, "alpha_deg"))
      cfg.sequence.alpha_deg = detail::as_number_list(*v, "sequence.alpha_deg");
    if (const Json* v = detail::find_key(*q, "shots_per_alpha"))
      cfg.sequence.shots_per_alpha = detail::as_count(*v, "sequence.shots_per_alpha");
    if (const Json* v = detail::find_key(*q, "seed"))
      cfg.sequence.seed = detail::as_seed(*v, "sequence.seed");
    if (const Json* v = detail::find_key(*q, "echo_axis")) {
      const std::vector<double> ax = detail::as_number_list(*v, "sequence.echo_axis");
      if (ax.size() != 3)
        throw ConfigError("config key sequence.echo_axis must have exactly 3 components");
      cfg.sequence.echo_axis = {ax[0], ax[1], ax[2]};
    }
    if (const Json* v = detail::find_key(*q, "echo"))
      cfg.sequence.echo = detail::as_bool(*v, "sequence.echo");
    if (const Json* v = detail::find_key(*q, "threads"))
      cfg.sequence.threads = detail::as_count(*v, "sequence.threads");
  }

  if (const Json* o = detail::section(root, "output")) {
    detail::check_known(*o, "output", {"dir", "emit_shots", "emit_variance", "emit_fit"});
    if (const Json* v = detail::find_key(*o, "dir"))
      cfg.output.dir = detail::as_string(*v, "output.dir");
    if (const Json* v = detail::find_key(*o, "emit_shots"))
      cfg.output.emit_shots = detail::as_bool(*v, "output.emit_shots");
    if (const Json* v = detail::find_key(*o, "emit_variance"))
      cfg.output.emit_variance = detail::as_bool(*v, "output.emit_variance");
    if (const Json* v = detail::find_key(*o, "emit_fit"))
      cfg.output.emit_fit = detail::as_bool(*v, "output.emit_fit");
  }

  return cfg;
}

inline std::string serialize_config(const RunConfig& cfg) {
  using detail::Json;
  Json root = Json::object();

  if (cfg.cavity) {
    Json c = Json::object();
    c["kappa_hz"] = cfg.cavity->kappa_hz;
    c["gamma_hz"] = cfg.cavity->gamma_hz;
    c["delta_hz"] = cfg.cavity->delta_hz;
    c["probe_detuning_fraction"] = cfg.cavity->probe_detuning_fraction;
    c["oscillator_strength"] = cfg.cavity->oscillator_strength;
    root["cavity"] = std::move(c);
  }
  if (cfg.ensemble) {
    Json e = Json::object();
    e["n_tot"] = cfg.ensemble->n_tot;
    if (cfg.ensemble->eta_eff) e["eta_eff"] = *cfg.ensemble->eta_eff;
    if (!cfg.ensemble->eta_samples.empty()) e["eta_samples"] = cfg.ensemble->eta_samples;
    root["ensemble"] = std::move(e);
  }
  if (cfg.probe) {
    Json p = Json::object();
    p["p0"] = cfg.probe->p0;
    if (cfg.probe->frac_power_var) p["frac_power_var"] = *cfg.probe->frac_power_var;
    root["probe"] = std::move(p);
  }

  Json s = Json::object();
  if (cfg.state.s0) s["s0"] = *cfg.state.s0;
  if (cfg.state.q) s["q"] = *cfg.state.q;
  if (cfg.state.xi) s["xi"] = *cfg.state.xi;
  if (cfg.state.gamma_factor) s["gamma_factor"] = *cfg.state.gamma_factor;
  if (cfg.state.s) s["s"] = *cfg.state.s;
  if (cfg.state.bloch_radius_fraction)
    s["bloch_radius_fraction"] = *cfg.state.bloch_radius_fraction;
  if (cfg.state.readout_var) s["readout_var"] = *cfg.state.readout_var;
  if (cfg.state.contrast) s["contrast"] = *cfg.state.contrast;
  if (cfg.state.contrast_in) s["contrast_in"] = *cfg.state.contrast_in;
  root["state"] = std::move(s);

  Json q = Json::object();
  q["backend"] = backend_name(cfg.sequence.backend);
  q["alpha_deg"] = cfg.sequence.alpha_deg;
  q["shots_per_alpha"] = cfg.sequence.shots_per_alpha;
  q["seed"] = cfg.sequence.seed;
  q["echo_axis"] = cfg.sequence.echo_axis;
  q["echo"] = cfg.sequence.echo;
  q["threads"] = cfg.sequence.threads;
  root["sequence"] = std::move(q);

  Json o = Json::object();
  o["dir"] = cfg.output.dir;
  o["emit_shots"] = cfg.output.emit_shots;
  o["emit_variance"] = cfg.output.emit_variance;
  o["emit_fit"] = cfg.output.emit_fit;
  root["output"] = std::move(o);

  return root.dump(2) + "\n";
}

struct ResolvedRun {
  EffectiveParams eff;  // zeroed when no cavity/ensemble sections are present
  StateParams state;
  SequenceConfig sequence;
};

// Precedence: explicit state values win; missing ones come from the physics
// sections; without those, ideal fallbacks apply (full Bloch radius, xi=1,
// gamma=1, readout 0, contrasts 1). The per-q radius interpolation is a
// reproduction convention applied by the grid commands, not here.
inline ResolvedRun resolve(const RunConfig& cfg) {
  ResolvedRun r;
  const bool have_phys = cfg.cavity && cfg.ensemble;
  if (have_phys) {
    const ProbeConfig probe = cfg.probe ? cfg.probe->to_params() : ProbeConfig{};
    r.eff = make_effective_params(cfg.cavity->to_params(), cfg.ensemble->to_params(), probe,
                                  cfg.cavity->oscillator_strength, cfg.state.q);
  }

  if (cfg.state.s0)
    r.state.s0 = *cfg.state.s0;
  else if (have_phys)
    r.state.s0 = r.eff.s0;
  else
    throw ConfigError("state.s0 is required when cavity/ensemble sections are absent");

  if (cfg.state.q)
    r.state.q = *cfg.state.q;
  else if (have_phys)
    r.state.q = r.eff.q;
  else
    throw ConfigError("state.q is required when cavity/ensemble sections are absent");

  r.state.xi = cfg.state.xi ? *cfg.state.xi : (have_phys ? r.eff.xi : 1.0);
  r.state.gamma_factor =
      cfg.state.gamma_factor ? *cfg.state.gamma_factor : (have_phys ? r.eff.gamma_factor : 1.0);

  if (cfg.state.s && cfg.state.bloch_radius_fraction)
    throw ConfigError("state.s and state.bloch_radius_fraction are mutually exclusive");
  if (cfg.state.s)
    r.state.s = *cfg.state.s;
  else
    r.state.s = cfg.state.bloch_radius_fraction ? *cfg.state.bloch_radius_fraction * r.state.s0
                                                : r.state.s0;

  r.state.readout_var = cfg.state.readout_var.value_or(0.0);
  r.state.contrast = cfg.state.contrast.value_or(1.0);
  r.state.contrast_in = cfg.state.contrast_in.value_or(1.0);
  try {
    r.state.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid state parameters: ") + e.what());
  }

  r.sequence.backend = cfg.sequence.backend;
  r.sequence.state = r.state;
  r.sequence.phi1 = have_phys ? r.eff.phi1 : 0.0;
  r.sequence.p0_per_pulse = cfg.probe ? cfg.probe->p0 : 0.0;
  if (cfg.sequence.alpha_deg.empty()) {
    for (int k = 0; k < 15; ++k) r.sequence.alpha_list.push_back(k * kConfigPi / 15.0);
  } else {
    for (double deg : cfg.sequence.alpha_deg)
      r.sequence.alpha_list.push_back(deg * kConfigPi / 180.0);
  }
  r.sequence.shots_per_alpha = cfg.sequence.shots_per_alpha;
  r.sequence.seed = cfg.sequence.seed;
  r.sequence.echo_axis = cfg.sequence.echo_axis;
  r.sequence.echo_enabled = cfg.sequence.echo;
  r.sequence.threads = cfg.sequence.threads;
  return r;
}

// Default operating point: kappa = 2pi x 1.01 MHz, Gamma = 2pi x 6.065 MHz,
// delta = 2pi x 3.29 GHz, eta = 0.139, 2 S0 = 3.2e4, p0 = 4.1e4 (Q = 19),
// sigma^2_ro = 0.13, C_in = 0.80, C(19) = 0.78.
inline RunConfig default_config() {
  RunConfig c;
  c.cavity = CavitySection{1.01e6, 6.065e6, 3.29e9, 0.5, 2.0 / 3.0};
  c.ensemble = EnsembleSection{3.2e4, 0.139, {}};
  c.probe = ProbeSection{4.1e4, {}};
  c.state.q = 19.0;
  c.state.bloch_radius_fraction = 0.80;
  c.state.readout_var = 0.13;
  c.state.contrast_in = 0.80;
  c.state.contrast = 0.78;
  for (int k = 0; k < 15; ++k) c.sequence.alpha_deg.push_back(k * 12.0);
  return c;
}

}  // namespace cavspin
