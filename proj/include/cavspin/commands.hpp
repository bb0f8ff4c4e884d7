#pragma once

// CLI command implementations: model (closed-form ellipse extrema over a
// shearing grid), simulate (pulse-sequence scans to shot CSV), fit (shot CSV
// to variance points + cosine fit + squeezing report), reproduce
// (figure-style CSV bundles). run_cli() wires them to subcommands and maps
// the error taxonomy to exit codes (0 ok, 2 config, 3 data, 4 numerical).

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cavspin/cavity.hpp"
#include "cavspin/config.hpp"
#include "cavspin/csvio.hpp"
#include "cavspin/ellipse.hpp"
#include "cavspin/errors.hpp"
#include "cavspin/fit.hpp"
#include "cavspin/sequence.hpp"
#include "cavspin/version.hpp"

namespace cavspin {

inline constexpr double kRadToDeg = 180.0 / kConfigPi;

inline std::vector<double> log_grid(double lo, double hi, int n) {
  if (!(lo > 0.0) || !(hi > lo) || n < 2)
    throw std::invalid_argument("log_grid: need 0 < lo < hi and n >= 2");
  std::vector<double> g(n);
  const double step = (std::log10(hi) - std::log10(lo)) / (n - 1);
  for (int i = 0; i < n; ++i) g[i] = std::pow(10.0, std::log10(lo) + i * step);
  g.front() = lo;
  g.back() = hi;
  return g;
}

// Technical parameter set at a grid point: per-q Bloch radius interpolation
// and the aggregate photon-noise law gamma(q) (an explicit
// state.gamma_factor override wins); probe-derived q is replaced by the grid
// value.
inline StateParams technical_state(const RunConfig& cfg, double qv) {
  RunConfig c = cfg;
  c.probe.reset();
  c.state.q = qv;
  c.state.s.reset();
  c.state.bloch_radius_fraction.reset();
  StateParams st = resolve(c).state;
  if (!cfg.state.gamma_factor) st.gamma_factor = gamma_of_q(qv);
  if (!cfg.state.s) st.s = bloch_radius_fraction(qv) * st.s0;
  return st;
}

// Ideal system: full Bloch radius, unit xi, shot-noise-limited probe, no
// readout noise, unit contrasts.
inline StateParams ideal_state(double s0, double qv) {
  StateParams st;
  st.s0 = s0;
  st.s = s0;
  st.q = qv;
  return st;
}

inline std::vector<ModelRow> model_rows(const RunConfig& cfg, const std::vector<double>& q_grid) {
  std::vector<ModelRow> rows;
  rows.reserve(2 * q_grid.size());
  for (double qv : q_grid) {
    const StateParams tech = technical_state(cfg, qv);
    const EllipsePrediction ei = variance_extrema(ideal_state(tech.s0, qv));
    rows.push_back({qv, ei.sigma2_max, ei.sigma2_min, ei.alpha0 * kRadToDeg, "ideal"});
    const EllipsePrediction et = variance_extrema(tech);
    rows.push_back({qv, et.sigma2_max, et.sigma2_min, et.alpha0 * kRadToDeg, "technical"});
  }
  return rows;
}

// The hash covers what determines the data: physics sections and sequence
// settings. Execution schedule and destination are normalized away, so
// parallel runs and runs into different directories emit identical bytes.
inline Provenance config_provenance(const RunConfig& cfg) {
  RunConfig canon = cfg;
  canon.sequence.threads = 1;
  canon.output = OutputSection{};
  return {fnv1a64(serialize_config(canon)), cfg.sequence.seed};
}

inline std::vector<double> default_q_grid() { return log_grid(0.15, 200.0, 61); }

inline void cmd_model(const RunConfig& cfg, const std::vector<double>& q_grid, std::ostream& os) {
  write_model_csv(os, model_rows(cfg, q_grid), config_provenance(cfg));
}

inline std::vector<ShotRecord> cmd_simulate(const RunConfig& cfg, std::ostream& os) {
  const ResolvedRun r = resolve(cfg);
  std::vector<ShotRecord> shots = run_scan(r.sequence);
  write_shots_csv(os, shots, config_provenance(cfg));
  return shots;
}

struct FitBundle {
  std::vector<VariancePoint> points;
  CosineFit fit;
  FitReport report;
};

inline FitBundle make_fit_bundle(const std::vector<ShotRecord>& records, const StateParams& st) {
  FitBundle b;
  b.points = variance_points(records, st.s0);
  b.fit = fit_cosine(b.points);
  b.report = extract_report(b.fit, st);
  return b;
}

inline void write_fit_report(std::ostream& os, const FitBundle& b) {
  const CosineFit& f = b.fit;
  const FitReport& r = b.report;
  os << "cosine fit: sigma2(alpha) = offset - amplitude cos(2 alpha - 2 alpha0)\n"
     << "  offset       = " << f.offset << " +- "
     << std::sqrt(std::max(f.param_cov[0][0], 0.0)) << "\n"
     << "  amplitude    = " << f.amplitude << "\n"
     << "  alpha0       = " << f.alpha0 * kRadToDeg << " deg +- "
     << alpha0_std_error(f) * kRadToDeg << " deg\n"
     << "  residual_rms = " << f.residual_rms << "\n"
     << "extrema: sigma2_min = " << r.sigma2_min << " +- " << r.sigma2_min_err << " ("
     << r.squeezing.sigma2_min_db << " dB), sigma2_max = " << r.sigma2_max << " ("
     << r.squeezing.sigma2_max_db << " dB)\n"
     << "intrinsic sigma2 (readout subtracted) = " << r.squeezing.intrinsic_sigma2 << "\n"
     << "zeta = " << r.squeezing.zeta << " +- " << r.zeta_err << " (" << r.squeezing.zeta_db
     << " dB), zeta^-1 = " << -r.squeezing.zeta_db << " dB\n";
}

inline FitBundle cmd_fit(const std::vector<ShotRecord>& records, const RunConfig& cfg,
                         std::ostream& variance_csv, std::ostream& report_txt) {
  const ResolvedRun r = resolve(cfg);
  FitBundle b = make_fit_bundle(records, r.state);
  write_variance_csv(variance_csv, b.points, config_provenance(cfg));
  write_fit_report(report_txt, b);
  return b;
}

namespace detail {

inline void write_text_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw DataError("cannot write file: " + p.string());
  os << text;
  os.flush();
  if (!os) throw DataError("cannot write file: " + p.string());
}

inline double unbiased_variance(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= double(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / double(v.size() - 1);
}

}  // namespace detail

inline constexpr std::array<double, 4> kFig2QValues{0.0, 1.2, 7.7, 30.7};
inline constexpr std::array<double, 12> kFig3QPoints{0.5, 1.2, 2.9, 4.9, 7.7, 12.0,
                                                     19.0, 30.7, 48.0, 76.0, 120.0, 190.0};

// Scan template for reproduction runs: always the gaussian backend (the
// full-scale operating point is far beyond the exact backend's Dicke dimension).
inline SequenceConfig reproduction_scan(const RunConfig& cfg, const StateParams& st,
                                        std::uint64_t seed) {
  SequenceConfig s;
  s.backend = Backend::gaussian;
  s.state = st;
  if (cfg.sequence.alpha_deg.empty()) {
    for (int k = 0; k < 15; ++k) s.alpha_list.push_back(k * kConfigPi / 15.0);
  } else {
    for (double d : cfg.sequence.alpha_deg) s.alpha_list.push_back(d / kRadToDeg);
  }
  s.shots_per_alpha = cfg.sequence.shots_per_alpha;
  s.seed = seed;
  s.echo_axis = cfg.sequence.echo_axis;
  s.threads = cfg.sequence.threads;
  return s;
}

inline std::vector<std::string> reproduce_fig2(const RunConfig& cfg,
                                               const std::filesystem::path& dir) {
  const Provenance prov = config_provenance(cfg);
  std::ostringstream points, curves, fits;
  points << provenance_line(prov) << "\nq,alpha_deg,sigma2,stderr,n\n";
  curves << provenance_line(prov) << "\nq,alpha_deg,sigma2_model\n";
  fits << provenance_line(prov) << "\nq,offset,amplitude,alpha0_deg,sigma2_min,sigma2_max\n";

  int qi = 0;
  for (double qv : kFig2QValues) {
    const StateParams st = technical_state(cfg, qv);
    const SequenceConfig scan = reproduction_scan(cfg, st, cfg.sequence.seed + 101 * qi);
    const std::vector<VariancePoint> pts = variance_points(run_scan(scan), st.s0);
    for (const VariancePoint& p : pts)
      points << format_g17(qv) << "," << format_g17(p.alpha * kRadToDeg) << ","
             << format_g17(p.sigma2) << "," << format_g17(p.std_err) << "," << p.n << "\n";
    const CosineFit fit = fit_cosine(pts);
    fits << format_g17(qv) << "," << format_g17(fit.offset) << "," << format_g17(fit.amplitude)
         << "," << format_g17(fit.alpha0 * kRadToDeg) << ","
         << format_g17(fit.offset - fit.amplitude) << ","
         << format_g17(fit.offset + fit.amplitude) << "\n";
    for (int d = 0; d <= 180; d += 2)
      curves << format_g17(qv) << "," << d << ","
             << format_g17(normalized_variance(st, d / kRadToDeg)) << "\n";
    ++qi;
  }
  detail::write_text_file(dir / "fig2_points.csv", points.str());
  detail::write_text_file(dir / "fig2_curves.csv", curves.str());
  detail::write_text_file(dir / "fig2_fits.csv", fits.str());
  return {(dir / "fig2_points.csv").string(), (dir / "fig2_curves.csv").string(),
          (dir / "fig2_fits.csv").string()};
}

inline std::vector<std::string> reproduce_fig3(const RunConfig& cfg,
                                               const std::filesystem::path& dir) {
  const Provenance prov = config_provenance(cfg);
  std::ostringstream model;
  cmd_model(cfg, default_q_grid(), model);
  detail::write_text_file(dir / "fig3_model.csv", model.str());

  std::ostringstream points;
  points << provenance_line(prov)
         << "\nq,sigma2_max,sigma2_min,alpha0_deg,sigma2_min_err,alpha0_err_deg\n";
  int qi = 0;
  for (double qv : kFig3QPoints) {
    const StateParams st = technical_state(cfg, qv);
    const SequenceConfig scan = reproduction_scan(cfg, st, cfg.sequence.seed + 211 * qi);
    const CosineFit fit = fit_cosine(variance_points(run_scan(scan), st.s0));
    points << format_g17(qv) << "," << format_g17(fit.offset + fit.amplitude) << ","
           << format_g17(fit.offset - fit.amplitude) << ","
           << format_g17(fit.alpha0 * kRadToDeg) << ","
           << format_g17(extremum_std_error(fit, -1.0)) << ","
           << format_g17(alpha0_std_error(fit) * kRadToDeg) << "\n";
    ++qi;
  }
  detail::write_text_file(dir / "fig3_points.csv", points.str());
  return {(dir / "fig3_model.csv").string(), (dir / "fig3_points.csv").string()};
}

// zeta(q) and the contrast series C(q); the contrast interpolation convention
// is applied across the grid (it passes through the measured 0.78 at q=19).
inline std::vector<std::string> reproduce_fig4(const RunConfig& cfg,
                                               const std::filesystem::path& dir) {
  std::ostringstream os;
  os << provenance_line(config_provenance(cfg)) << "\nq,zeta,zeta_db,zeta_inv_db,contrast\n";
  for (double qv : default_q_grid()) {
    StateParams st = technical_state(cfg, qv);
    st.contrast = contrast_of_q(qv);
    const EllipsePrediction e = variance_extrema(st);
    const SqueezingReport rep = metrological_squeezing(st, e.sigma2_min, e.sigma2_max);
    os << format_g17(qv) << "," << format_g17(rep.zeta) << "," << format_g17(rep.zeta_db) << ","
       << format_g17(-rep.zeta_db) << "," << format_g17(st.contrast) << "\n";
  }
  detail::write_text_file(dir / "fig4.csv", os.str());
  return {(dir / "fig4.csv").string()};
}

// var S_z of the initial CSS against S0 over a decade, with the projection
// noise line S0/2 and a weighted through-origin slope in a trailing comment.
inline std::vector<std::string> reproduce_inset(const RunConfig& cfg,
                                                const std::filesystem::path& dir) {
  std::ostringstream os;
  os << provenance_line(config_provenance(cfg)) << "\ns0,var_sz,var_sz_err,line\n";
  double num = 0.0, den = 0.0;
  for (int k = 0; k <= 6; ++k) {
    const double s0 = 2000.0 * std::pow(10.0, k / 6.0);
    SequenceConfig scan;
    scan.backend = Backend::gaussian;
    scan.state = ideal_state(s0, 0.0);
    scan.alpha_list = {0.0};
    scan.shots_per_alpha = std::max(cfg.sequence.shots_per_alpha, 10000);
    scan.seed = cfg.sequence.seed + 307 * k;
    scan.threads = cfg.sequence.threads;
    const std::vector<ShotRecord> records = run_scan(scan);
    std::vector<double> sz;
    sz.reserve(records.size());
    for (const ShotRecord& r : records) sz.push_back(r.sz_measured);
    const double v = detail::unbiased_variance(sz);
    const double err = v * std::sqrt(2.0 / double(sz.size() - 1));
    os << format_g17(s0) << "," << format_g17(v) << "," << format_g17(err) << ","
       << format_g17(0.5 * s0) << "\n";
    const double w = 1.0 / (err * err);
    num += w * s0 * v;
    den += w * s0 * s0;
  }
  os << "# fitted slope through origin = " << format_g17(num / den)
     << " (projection noise limit 0.5)\n";
  detail::write_text_file(dir / "inset.csv", os.str());
  return {(dir / "inset.csv").string()};
}

inline std::vector<std::string> cmd_reproduce(const std::string& figure, const RunConfig& cfg,
                                              const std::string& out_dir) {
  const std::filesystem::path dir(out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (figure == "fig2") return reproduce_fig2(cfg, dir);
  if (figure == "fig3") return reproduce_fig3(cfg, dir);
  if (figure == "fig4") return reproduce_fig4(cfg, dir);
  if (figure == "inset") return reproduce_inset(cfg, dir);
  throw ConfigError("unknown figure id: " + figure + " (expected fig2|fig3|fig4|inset)");
}

inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"cavity-feedback spin squeezing toolkit"};
  app.name("cavspin");
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string config_path, out_dir, backend_flag, fit_input, figure;
  std::uint64_t seed = 0;
  CLI::Option* opt_seed = app.add_option("--seed", seed, "override the sequence seed");
  app.add_option("--config", config_path, "JSON config file (built-in defaults when absent)");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--backend", backend_flag, "simulation backend: exact|gaussian");

  CLI::App* sub_model =
      app.add_subcommand("model", "closed-form ellipse extrema over a shearing grid");
  CLI::App* sub_sim = app.add_subcommand("simulate", "run the pulse sequence, write shot records");
  CLI::App* sub_fit = app.add_subcommand("fit", "variance points + cosine fit from a shot CSV");
  sub_fit->add_option("input", fit_input, "shot CSV file")->required();
  CLI::App* sub_rep = app.add_subcommand("reproduce", "write a figure-style CSV bundle");
  sub_rep->add_option("figure", figure, "fig2|fig3|fig4|inset")->required();
  for (CLI::App* s : {sub_model, sub_sim, sub_fit, sub_rep}) s->fallthrough();

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  }

  try {
    RunConfig cfg = default_config();
    if (!config_path.empty()) {
      std::ifstream is(config_path);
      if (!is) throw ConfigError("cannot read config file: " + config_path);
      std::stringstream ss;
      ss << is.rdbuf();
      cfg = parse_config(ss.str());
    }
    if (opt_seed->count() > 0) cfg.sequence.seed = seed;
    if (!backend_flag.empty()) cfg.sequence.backend = backend_from_string(backend_flag);
    if (!out_dir.empty()) cfg.output.dir = out_dir;

    const std::filesystem::path dir(cfg.output.dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);

    if (app.got_subcommand(sub_model)) {
      std::ostringstream csv;
      cmd_model(cfg, default_q_grid(), csv);
      detail::write_text_file(dir / "model.csv", csv.str());
      out << "wrote " << (dir / "model.csv").string() << "\n";
    } else if (app.got_subcommand(sub_sim)) {
      std::ostringstream csv;
      const std::vector<ShotRecord> shots = cmd_simulate(cfg, csv);
      if (cfg.output.emit_shots) {
        detail::write_text_file(dir / "shots.csv", csv.str());
        out << "wrote " << (dir / "shots.csv").string() << "\n";
      }
      out << shots.size() << " shots\n";
    } else if (app.got_subcommand(sub_fit)) {
      std::ifstream is(fit_input);
      if (!is) throw DataError("cannot read input file: " + fit_input);
      std::vector<ShotRecord> records = read_shots_csv(is);
      std::ostringstream var_csv, report;
      cmd_fit(records, cfg, var_csv, report);
      if (cfg.output.emit_variance) {
        detail::write_text_file(dir / "variance.csv", var_csv.str());
        out << "wrote " << (dir / "variance.csv").string() << "\n";
      }
      if (cfg.output.emit_fit) {
        detail::write_text_file(dir / "fit_report.txt", report.str());
        out << "wrote " << (dir / "fit_report.txt").string() << "\n";
      }
      out << report.str();
    } else if (app.got_subcommand(sub_rep)) {
      for (const std::string& p : cmd_reproduce(figure, cfg, cfg.output.dir))
        out << "wrote " << p << "\n";
    }
    return 0;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return 4;
  }
}

}  // namespace cavspin
