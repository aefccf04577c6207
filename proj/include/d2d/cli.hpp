#pragma once

// Batch front-end: `key = value` configuration parsing and the command
// runners behind tools/d2dsim.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "d2d/csv.hpp"
#include "d2d/errors.hpp"
#include "d2d/lower_game.hpp"
#include "d2d/montecarlo.hpp"
#include "d2d/oracle.hpp"
#include "d2d/upper_pricing.hpp"

namespace d2d::cli {

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"solve-rb", "price-search", "experiment", "sweep", "oracle-check"};
  return names;
}

struct RunConfig {
  std::string command = "experiment";
  mc::ScenarioConfig scenario;
  std::vector<mc::Method> methods{mc::Method::parse("sppp"),         mc::Method::parse("bisection"),
                                  mc::Method::parse("io"),           mc::Method::parse("all-active"),
                                  mc::Method::parse("guard-zone-150"), mc::Method::parse("guard-zone-200")};
  int draws = 100;
  std::string out_dir = "out";
  int n_d2d = 3;        // instance size for solve-rb, price-search, oracle-check
  double mu = -1.0;     // solve-rb price; negative means "use the bisection price"
  int grid_points = 21;  // oracle-check grid per dimension
  int instances = 1;    // oracle-check instance count
  mc::SweepParameter sweep_parameter = mc::SweepParameter::q_tol_db;
  std::vector<double> sweep_values{-5.0, 0.0, 5.0, 10.0, 15.0};

  void validate() const {
    if (std::find(command_names().begin(), command_names().end(), command) == command_names().end())
      throw ConfigError("unknown command '" + command + "'");
    if (methods.empty()) throw ConfigError("methods must not be empty");
    if (draws < 1) throw ConfigError("draws must be >= 1");
    if (n_d2d < 1) throw ConfigError("n_d2d must be >= 1");
    if (grid_points < 2) throw ConfigError("grid_points must be >= 2");
    if (instances < 1) throw ConfigError("instances must be >= 1");
    if (sweep_values.empty()) throw ConfigError("sweep_values must not be empty");
    try {
      scenario.validate();
    } catch (const DomainError& e) {
      throw ConfigError(e.what());
    }
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double to_double(const std::string& v) {
  std::size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty() || !std::isfinite(d)) throw ConfigError("expected a number, got '" + v + "'");
  return d;
}

inline long long to_integer(const std::string& v) {
  std::size_t used = 0;
  long long d = 0;
  try {
    d = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw ConfigError("expected an integer, got '" + v + "'");
  return d;
}

inline std::uint64_t to_u64(const std::string& v) {
  std::size_t used = 0;
  unsigned long long d = 0;
  try {
    if (!v.empty() && v[0] != '-') d = std::stoull(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw ConfigError("expected an unsigned integer, got '" + v + "'");
  return d;
}

inline bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("expected true/false, got '" + v + "'");
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

inline const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto num = [&t](const char* key, auto field) {
      t[key] = [field](RunConfig& c, const std::string& v) { field(c) = to_double(v); };
    };
    t["command"] = [](RunConfig& c, const std::string& v) { c.command = v; };
    t["seed"] = [](RunConfig& c, const std::string& v) { c.scenario.seed = to_u64(v); };
    t["methods"] = [](RunConfig& c, const std::string& v) {
      c.methods.clear();
      for (const auto& m : split_list(v)) c.methods.push_back(mc::Method::parse(m));
    };
    t["draws"] = [](RunConfig& c, const std::string& v) { c.draws = static_cast<int>(to_integer(v)); };
    t["n_d2d"] = [](RunConfig& c, const std::string& v) { c.n_d2d = static_cast<int>(to_integer(v)); };
    t["mu"] = [](RunConfig& c, const std::string& v) { c.mu = to_double(v); };
    t["grid_points"] = [](RunConfig& c, const std::string& v) { c.grid_points = static_cast<int>(to_integer(v)); };
    t["instances"] = [](RunConfig& c, const std::string& v) { c.instances = static_cast<int>(to_integer(v)); };
    t["output_dir"] = [](RunConfig& c, const std::string& v) { c.out_dir = v; };
    t["sweep_parameter"] = [](RunConfig& c, const std::string& v) {
      if (v == "q_tol_db")
        c.sweep_parameter = mc::SweepParameter::q_tol_db;
      else if (v == "d2d_density")
        c.sweep_parameter = mc::SweepParameter::d2d_density;
      else
        throw ConfigError("sweep_parameter must be q_tol_db or d2d_density, got '" + v + "'");
    };
    t["sweep_values"] = [](RunConfig& c, const std::string& v) {
      c.sweep_values.clear();
      for (const auto& s : split_list(v)) c.sweep_values.push_back(to_double(s));
    };
    num("bs_density", [](RunConfig& c) -> double& { return c.scenario.bs_density; });
    num("cellular_density", [](RunConfig& c) -> double& { return c.scenario.cellular_density; });
    num("d2d_density", [](RunConfig& c) -> double& { return c.scenario.d2d_density; });
    num("d2d_mean_length", [](RunConfig& c) -> double& { return c.scenario.d2d_mean_length; });
    num("subband_bandwidth_hz", [](RunConfig& c) -> double& { return c.scenario.subband_bandwidth_hz; });
    num("cellular_p_max", [](RunConfig& c) -> double& { return c.scenario.cellular_power.p_max; });
    num("cellular_kappa", [](RunConfig& c) -> double& { return c.scenario.cellular_power.kappa; });
    num("d2d_p_max", [](RunConfig& c) -> double& { return c.scenario.d2d_power.p_max; });
    num("d2d_kappa", [](RunConfig& c) -> double& { return c.scenario.d2d_power.kappa; });
    num("noise_psd_dbm_hz", [](RunConfig& c) -> double& { return c.scenario.noise_psd_dbm_hz; });
    num("q_tol_db", [](RunConfig& c) -> double& { return c.scenario.q_tol_db; });
    num("shadowing_db", [](RunConfig& c) -> double& { return c.scenario.shadowing_db; });
    num("mode_select_weight", [](RunConfig& c) -> double& { return c.scenario.mode_select_weight; });
    num("pf_smoothing", [](RunConfig& c) -> double& { return c.scenario.pf_smoothing; });
    num("min_distance", [](RunConfig& c) -> double& { return c.scenario.min_distance; });
    // A path-loss exponent drives both the channel gains and the matching power-control law.
    t["alpha_ue_ue"] = [](RunConfig& c, const std::string& v) {
      c.scenario.alpha_ue_ue = c.scenario.d2d_power.alpha = to_double(v);
    };
    t["alpha_ue_bs"] = [](RunConfig& c, const std::string& v) {
      c.scenario.alpha_ue_bs = c.scenario.cellular_power.alpha = to_double(v);
    };
    t["subbands"] = [](RunConfig& c, const std::string& v) { c.scenario.subbands = static_cast<int>(to_integer(v)); };
    t["pf_warmup_rounds"] = [](RunConfig& c, const std::string& v) {
      c.scenario.pf_warmup_rounds = static_cast<int>(to_integer(v));
    };
    t["multi_cell"] = [](RunConfig& c, const std::string& v) { c.scenario.multi_cell = to_bool(v); };
    t["d2d_length_law"] = [](RunConfig& c, const std::string& v) {
      if (v == "exponential")
        c.scenario.length_law = mc::LengthLaw::exponential;
      else if (v == "fixed")
        c.scenario.length_law = mc::LengthLaw::fixed;
      else
        throw ConfigError("d2d_length_law must be exponential or fixed, got '" + v + "'");
    };
    return t;
  }();
  return table;
}

}  // namespace detail

inline std::vector<std::string> valid_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : detail::setters()) keys.push_back(k);
  return keys;
}

/// Parses `key = value` lines; `#` starts a comment. Errors carry the line number.
inline RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "line " + std::to_string(lineno) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value', got '" + line + "'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + "missing key");
    const auto& table = detail::setters();
    const auto it = table.find(key);
    if (it == table.end()) {
      std::string list;
      for (const auto& k : valid_keys()) list += (list.empty() ? "" : ", ") + k;
      throw ConfigError(where + "unknown key '" + key + "' (valid keys: " + list + ")");
    }
    try {
      it->second(cfg, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + key + ": " + e.what());
    }
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitSolver = 3;

namespace detail {

inline std::string path_in(const RunConfig& cfg, const std::string& name) {
  return (std::filesystem::path(cfg.out_dir) / name).string();
}

inline std::string join(const Vector& v) {
  std::string s;
  for (int i = 0; i < v.size(); ++i) s += (i ? ";" : "") + csv::num(v[i]);
  return s;
}

/// Plain-text dump of one RB instance, enough to rebuild it by hand.
inline void dump_instance(std::ostream& os, const mc::RbProblem& p) {
  const auto lower = make_lower_instance(p.ch, p.pw);
  os << "instance: n_d2d=" << lower.size() << " q_tol=" << csv::num(p.q_tol) << "\n";
  for (int i = 0; i < lower.size(); ++i) {
    os << "  link " << i << ": P=" << csv::num(lower.power[i]) << " g=" << csv::num(lower.g[i])
       << " i_c=" << csv::num(lower.i_c[i]) << " h=[";
    for (int j = 0; j < lower.size(); ++j) os << (j ? " " : "") << csv::num(lower.h(i, j));
    os << "]\n";
  }
}

inline mc::RbProblem instance_for(const RunConfig& cfg, std::uint64_t index) {
  return mc::random_rb_problem(cfg.scenario, cfg.n_d2d, mc::derive_seed(cfg.scenario.seed, index));
}

inline int run_solve_rb(const RunConfig& cfg, std::ostream& log) {
  const auto p = instance_for(cfg, 0);
  const auto upper = make_upper_instance(make_lower_instance(p.ch, p.pw), p.q_tol);
  const double mu = cfg.mu >= 0.0 ? cfg.mu : bisection_price(upper).mu_star;
  const auto lower = upper.lower.with_price(mu);
  csv::Writer summary(path_in(cfg, "summary.csv"),
                      {"solver", "mu", "iterations", "converged", "interference", "q_tol", "total_rate", "x"});
  auto emit = [&](const char* name, const LowerSolution& s) {
    std::ofstream trace(path_in(cfg, std::string("trace_") + name + ".csv"));
    s.trace.write_csv(trace);
    const double rate = oracle::total_expected_rate(s.state.x, upper.lower);
    summary.row({name, csv::num(mu), csv::num(s.trace.iterations), s.trace.converged ? "1" : "0",
                 csv::num(bs_interference(s.state.x, lower)), csv::num(p.q_tol), csv::num(rate), join(s.state.x)});
    log << name << ": mu=" << csv::num(mu) << " iterations=" << s.trace.iterations
        << (s.trace.converged ? "" : " (not converged)") << " total_rate=" << csv::num(rate) << "\n";
  };
  emit("lb", lb_iterate(lower));
  if (lower.size() <= kExactEnumerationCap) emit("br", br_iterate(lower));
  return kExitOk;
}

inline int run_price_search(const RunConfig& cfg, std::ostream& log) {
  const auto p = instance_for(cfg, 0);
  const auto upper = make_upper_instance(make_lower_instance(p.ch, p.pw), p.q_tol);
  csv::Writer summary(path_in(cfg, "summary.csv"), {"method", "mu_star", "u_c1", "u_c2", "utility", "interference",
                                                    "q_tol", "iterations", "trivial", "x"});
  for (const auto& m : cfg.methods) {
    PricingOutcome out;
    switch (m.kind) {
      case mc::MethodKind::sppp: out = sppp_solve(upper); break;
      case mc::MethodKind::bisection: out = bisection_price(upper); break;
      case mc::MethodKind::bisection_br: out = bisection_price(upper, {LowerSolver::br, {}}); break;
      case mc::MethodKind::io: out = io_greedy(upper); break;
      case mc::MethodKind::all_active: out = all_active_outcome(upper); break;
      default:
        log << m.label() << ": skipped (scenario-level baseline)\n";
        continue;
    }
    const std::string label = m.label();
    summary.row({label, csv::num(out.mu_star), csv::num(out.u_c1), csv::num(out.u_c2), csv::num(out.utility()),
                 csv::num(out.interference), csv::num(upper.q_tol), csv::num(out.iterations),
                 out.trivial ? "1" : "0", join(out.x_star.x)});
    if (!out.bisection_steps.empty()) {
      csv::Writer trace(path_in(cfg, "trace_" + label + ".csv"),
                        {"step", "mu_l", "mu_u", "mu_m", "uc1_m", "uc2_m", "lower_iterations"});
      int k = 0;
      for (const auto& s : out.bisection_steps)
        trace.row({csv::num(++k), csv::num(s.mu_l), csv::num(s.mu_u), csv::num(s.mu_m), csv::num(s.uc1_m),
                   csv::num(s.uc2_m), csv::num(s.lower_iterations)});
    } else if (!out.critical_points.empty()) {
      csv::Writer trace(path_in(cfg, "trace_" + label + ".csv"), {"index", "nu", "mu", "utility", "x"});
      int k = 0;
      for (const auto& c : out.critical_points)
        trace.row({csv::num(++k), csv::num(c.nu), csv::num(c.mu), csv::num(c.utility),
                   join(c.y.head(upper.size()))});
    }
    log << label << ": mu*=" << csv::num(out.mu_star) << " utility=" << csv::num(out.utility())
        << " interference/Q=" << csv::num(upper.q_tol > 0.0 ? out.interference / upper.q_tol : 0.0) << "\n";
  }
  return kExitOk;
}

inline int run_experiment_cmd(const RunConfig& cfg, std::ostream& log) {
  const auto res = mc::run_experiment(cfg.scenario, cfg.methods, cfg.draws);
  csv::Writer summary(path_in(cfg, "summary.csv"),
                      {"method", "draws", "failed_draws", "cellular_mean_rate", "d2d_total_rate", "cellular_links",
                       "d2d_links", "protection_checks", "protection_violations", "max_interference_ratio"});
  csv::Writer per_draw(path_in(cfg, "draws.csv"),
                       {"draw", "method", "failed", "cellular_mean_rate", "d2d_total_rate"});
  for (const auto& m : res.methods) {
    summary.row({m.label, csv::num(res.draws), csv::num(m.failed_draws), csv::num(m.mean_cellular_rate()),
                 csv::num(m.mean_d2d_total()), csv::num(static_cast<long long>(m.cellular_rates.size())),
                 csv::num(static_cast<long long>(m.d2d_rates.size())), csv::num(m.protection_checks),
                 csv::num(m.protection_violations), csv::num(m.max_interference_ratio)});
    for (int d = 0; d < res.draws; ++d)
      per_draw.row({csv::num(d), m.label, m.draw_failed[d] ? "1" : "0", csv::num(m.cellular_mean_per_draw[d]),
                    csv::num(m.d2d_total_per_draw[d])});
    for (const auto& [series, values] : {std::pair{"cellular", &m.cellular_rates}, std::pair{"d2d", &m.d2d_rates}}) {
      if (values->empty()) continue;
      csv::Writer cdf(path_in(cfg, "cdf_" + std::string(series) + "_" + m.label + ".csv"), {"rate", "probability"});
      for (const auto& [v, pr] : mc::rate_cdf(*values)) cdf.row({csv::num(v), csv::num(pr)});
    }
    log << m.label << ": cellular_mean_rate=" << csv::num(m.mean_cellular_rate())
        << " d2d_total_rate=" << csv::num(m.mean_d2d_total()) << " failed_draws=" << m.failed_draws << "\n";
  }
  return kExitOk;
}

inline int run_sweep_cmd(const RunConfig& cfg, std::ostream& log) {
  const auto rows = mc::run_sweep(cfg.scenario, cfg.methods, cfg.draws, cfg.sweep_parameter, cfg.sweep_values);
  csv::Writer sweep(path_in(cfg, "sweep.csv"), {"method", "parameter", "value", "metric", "result"});
  for (const auto& r : rows)
    sweep.row({r.method, mc::to_string(r.parameter), csv::num(r.value), r.metric, csv::num(r.result)});
  for (const auto& m : cfg.methods) {
    log << m.label() << ":";
    for (const auto& r : rows)
      if (r.method == m.label() && r.metric == "cellular_mean_rate") log << " " << csv::num(r.value) << "->" << csv::num(r.result);
    log << "\n";
  }
  return kExitOk;
}

inline int run_oracle_check(const RunConfig& cfg, std::ostream& log) {
  csv::Writer summary(path_in(cfg, "summary.csv"),
                      {"instance", "mu_star", "ne_rate", "optimum_rate", "ratio", "ne_max_gain"});
  for (int k = 0; k < cfg.instances; ++k) {
    const auto p = instance_for(cfg, static_cast<std::uint64_t>(k));
    const auto upper = make_upper_instance(make_lower_instance(p.ch, p.pw), p.q_tol);
    const auto out = bisection_price(upper, {LowerSolver::br, {}});
    const double ne_rate = oracle::total_expected_rate(out.x_star.x, upper.lower);
    oracle::GridSpec grid;
    grid.points_per_dim = cfg.grid_points;
    const auto opt = oracle::brute_force_single_stage(upper, grid);
    const auto ne = oracle::verify_ne(out.x_star.x, upper.lower.with_price(out.mu_star), oracle::UtilityKind::exact);
    const double ratio = opt.objective > 0.0 ? ne_rate / opt.objective : 1.0;
    summary.row({csv::num(k), csv::num(out.mu_star), csv::num(ne_rate), csv::num(opt.objective), csv::num(ratio),
                 csv::num(ne.max_gain)});
    log << "instance " << k << ": ne_rate=" << csv::num(ne_rate) << " optimum=" << csv::num(opt.objective)
        << " gap=" << csv::num(opt.objective - ne_rate) << " (" << csv::num(100.0 * (1.0 - ratio)) << "%)\n";
  }
  return kExitOk;
}

}  // namespace detail

/// Runs the configured command. Returns 0, 2 (configuration) or 3 (solver).
inline int run(const RunConfig& cfg, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  try {
    cfg.validate();
    std::error_code ec;
    std::filesystem::create_directories(cfg.out_dir, ec);
    if (ec || !std::filesystem::is_directory(cfg.out_dir))
      throw ConfigError("output directory '" + cfg.out_dir + "' is not writable");
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  try {
    if (cfg.command == "solve-rb") return detail::run_solve_rb(cfg, log);
    if (cfg.command == "price-search") return detail::run_price_search(cfg, log);
    if (cfg.command == "experiment") return detail::run_experiment_cmd(cfg, log);
    if (cfg.command == "sweep") return detail::run_sweep_cmd(cfg, log);
    return detail::run_oracle_check(cfg, log);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "solver error: " << e.what() << "\n";
    if (cfg.command != "experiment" && cfg.command != "sweep") detail::dump_instance(err, detail::instance_for(cfg, 0));
    return kExitSolver;
  }
}

}  // namespace d2d::cli
