#pragma once

// Scenario generation and experiment orchestration: hexagonal BS layout,
// Poisson-distributed cellular UEs and D2D pairs per cell, proportional-fair
// mode selection, per-RB pricing in every cell, and rate aggregation for the
// measured (central) cell.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "d2d/lower_game.hpp"
#include "d2d/net_model.hpp"
#include "d2d/upper_pricing.hpp"

namespace d2d::mc {

enum class LengthLaw { exponential, fixed };

struct ScenarioConfig {
  double bs_density = 1.0 / (std::numbers::pi * 500.0 * 500.0);  // per m^2
  double cellular_density = 10.0;
  double d2d_density = 10.0;
  double d2d_mean_length = 80.0;
  LengthLaw length_law = LengthLaw::exponential;
  int subbands = 10;
  double subband_bandwidth_hz = 1e6;
  PowerControlConfig cellular_power{0.2, 0.75, kAlphaUeBs};
  PowerControlConfig d2d_power{0.02, 0.75, kAlphaUeUe};
  double alpha_ue_ue = kAlphaUeUe;
  double alpha_ue_bs = kAlphaUeBs;
  double noise_psd_dbm_hz = -174.0;
  double q_tol_db = 0.0;
  bool multi_cell = true;
  double shadowing_db = 0.0;  // lognormal std-dev; 0 disables
  double mode_select_weight = 0.5;
  int pf_warmup_rounds = 10;
  double pf_smoothing = 0.1;
  double min_distance = 1.0;  // close-in floor for every path-loss distance
  std::uint64_t seed = 1;

  void validate() const {
    if (!(bs_density > 0.0)) throw DomainError("bs_density must be > 0");
    if (cellular_density < 0.0 || d2d_density < 0.0) throw DomainError("link densities must be >= 0");
    if (!(d2d_mean_length > 0.0)) throw DomainError("d2d_mean_length must be > 0");
    if (subbands < 1) throw DomainError("subbands must be >= 1");
    if (!(subband_bandwidth_hz > 0.0)) throw DomainError("subband_bandwidth_hz must be > 0");
    cellular_power.validate();
    d2d_power.validate();
    if (!(alpha_ue_ue > 2.0 && alpha_ue_bs > 2.0)) throw DomainError("path-loss exponents must be > 2");
    if (shadowing_db < 0.0) throw DomainError("shadowing_db must be >= 0");
    if (!(mode_select_weight > 0.0 && mode_select_weight <= 1.0))
      throw DomainError("mode_select_weight must be in (0, 1]");
    if (!(min_distance > 0.0)) throw DomainError("min_distance must be > 0");
  }

  /// Circumradius of a hexagonal cell of area 1 / bs_density.
  double cell_radius() const { return std::sqrt(2.0 / (3.0 * std::sqrt(3.0) * bs_density)); }
  double inter_site_distance() const { return std::sqrt(3.0) * cell_radius(); }
  double noise_watts() const { return thermal_noise_watts(noise_psd_dbm_hz, subband_bandwidth_hz); }
};

/// SplitMix64 finaliser; derives independent per-draw seeds from the master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------
// Mode selection
// ---------------------------------------------------------------------------

struct SchedulerState {
  std::vector<double> avg_rate;
};

struct ModeSelection {
  std::vector<int> subband_owner;  // link index or -1
  std::vector<bool> cellular_mode;
};

/// One proportional-fair round: each sub-band in turn goes to the
/// unscheduled link with the largest weight * rate / avg_rate (ties to the
/// lower index). Links with a zero metric are never scheduled.
inline std::vector<int> pf_round(const std::vector<double>& rates, const std::vector<double>& weights, int subbands,
                                 const std::vector<double>& avg_rate) {
  const int n = static_cast<int>(rates.size());
  std::vector<int> owner(subbands, -1);
  std::vector<bool> taken(n, false);
  for (int k = 0; k < subbands; ++k) {
    int best = -1;
    double best_metric = 0.0;
    for (int i = 0; i < n; ++i) {
      if (taken[i]) continue;
      const double metric = avg_rate[i] > 0.0 ? weights[i] * rates[i] / avg_rate[i] : 0.0;
      if (metric > best_metric) {
        best_metric = metric;
        best = i;
      }
    }
    if (best < 0) break;
    owner[k] = best;
    taken[best] = true;
  }
  return owner;
}

/// Runs `warmup_rounds` PF rounds with exponential smoothing of the average
/// rate, then returns the partition produced by the next round. Potential D2D
/// links that are not scheduled stay in D2D mode. An empty state starts from
/// avg_rate = rate.
inline ModeSelection mode_select(const std::vector<double>& rates, const std::vector<double>& weights, int subbands,
                                 SchedulerState& state, int warmup_rounds = 10, double smoothing = 0.1) {
  const int n = static_cast<int>(rates.size());
  if (state.avg_rate.empty()) state.avg_rate = rates;
  auto update = [&](const std::vector<int>& owner) {
    std::vector<bool> served(n, false);
    for (int o : owner)
      if (o >= 0) served[o] = true;
    for (int i = 0; i < n; ++i)
      state.avg_rate[i] = (1.0 - smoothing) * state.avg_rate[i] + smoothing * (served[i] ? rates[i] : 0.0);
  };
  for (int r = 0; r < warmup_rounds; ++r) update(pf_round(rates, weights, subbands, state.avg_rate));
  ModeSelection sel;
  sel.subband_owner = pf_round(rates, weights, subbands, state.avg_rate);
  update(sel.subband_owner);
  sel.cellular_mode.assign(n, false);
  for (int o : sel.subband_owner)
    if (o >= 0) sel.cellular_mode[o] = true;
  return sel;
}

// ---------------------------------------------------------------------------
// Scenario
// ---------------------------------------------------------------------------

struct CellularUe {
  Position pos;
  int cell = 0;
  double power = 0.0;
  bool from_d2d = false;  // potential D2D link scheduled in cellular mode
};

struct D2dLink {
  Position tx;
  Position rx;
  int cell = 0;
  double power = 0.0;
};

/// One network snapshot after mode selection. Gains are linear and static
/// across RBs (no fast fading); shadowing, when enabled, is drawn once per
/// transmitter/receiver pair.
struct Scenario {
  LinkPopulation population;
  std::vector<CellularUe> cellular;              // scheduled cellular transmitters
  std::vector<D2dLink> d2d;                      // links in D2D mode
  std::vector<std::vector<int>> rb_owner;        // [cell][rb] -> cellular index or -1
  std::vector<std::vector<int>> cell_d2d;        // [cell] -> D2D indices
  double noise_w = 0.0;
  Matrix h;   // (D2D rx, D2D tx)
  Matrix hc;  // (D2D rx, cellular tx)
  Matrix g;   // (D2D tx, BS)
  Matrix gc;  // (cellular tx, BS)

  int cells() const { return static_cast<int>(population.bs_positions.size()); }
  int subbands() const { return population.rb_count; }
};

namespace detail {

inline bool in_hexagon(Position p, Position centre, double inradius) {
  const double dx = p.x - centre.x, dy = p.y - centre.y;
  for (int k = 0; k < 3; ++k) {
    const double a = k * std::numbers::pi / 3.0;
    if (std::abs(dx * std::cos(a) + dy * std::sin(a)) > inradius) return false;
  }
  return true;
}

template <class Rng>
Position uniform_in_cell(Rng& rng, Position centre, double radius) {
  std::uniform_real_distribution<double> u(-radius, radius);
  const double inradius = radius * std::sqrt(3.0) / 2.0;
  while (true) {
    Position p{centre.x + u(rng), centre.y + u(rng)};
    if (in_hexagon(p, centre, inradius)) return p;
  }
}

template <class Rng>
int poisson_count(Rng& rng, double mean) {
  if (mean <= 0.0) return 0;
  return std::poisson_distribution<int>(mean)(rng);
}

}  // namespace detail

/// BS at the origin plus, for multi-cell runs, the first ring of six.
inline std::vector<Position> hexagonal_bs_layout(const ScenarioConfig& cfg) {
  std::vector<Position> bs{{0.0, 0.0}};
  if (cfg.multi_cell) {
    const double isd = cfg.inter_site_distance();
    for (int k = 0; k < 6; ++k) {
      const double a = k * std::numbers::pi / 3.0;
      bs.push_back({isd * std::cos(a), isd * std::sin(a)});
    }
  }
  return bs;
}

inline Scenario generate_scenario(const ScenarioConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::exponential_distribution<double> length(1.0 / cfg.d2d_mean_length);
  std::normal_distribution<double> normal(0.0, 1.0);

  Scenario sc;
  sc.population.bs_positions = hexagonal_bs_layout(cfg);
  sc.population.rb_count = cfg.subbands;
  sc.population.rb_bandwidth_hz = cfg.subband_bandwidth_hz;
  sc.noise_w = cfg.noise_watts();
  const int cells = sc.cells();
  const double radius = cfg.cell_radius();
  sc.rb_owner.assign(cells, std::vector<int>(cfg.subbands, -1));
  sc.cell_d2d.assign(cells, {});

  auto dist = [&](Position a, Position b) { return std::max(cfg.min_distance, distance(a, b)); };

  for (int c = 0; c < cells; ++c) {
    const Position bs = sc.population.bs_positions[c];
    const int n_cell = detail::poisson_count(rng, cfg.cellular_density);
    const int n_pot = detail::poisson_count(rng, cfg.d2d_density);
    std::vector<Position> ue(n_cell);
    for (auto& p : ue) p = detail::uniform_in_cell(rng, bs, radius);
    std::vector<D2dPair> pot(n_pot);
    for (auto& p : pot) {
      p.tx = detail::uniform_in_cell(rng, bs, radius);
      double len = cfg.length_law == LengthLaw::exponential ? length(rng) : cfg.d2d_mean_length;
      len = std::max(len, cfg.min_distance);
      const double a = angle(rng);
      p.rx = {p.tx.x + len * std::cos(a), p.tx.y + len * std::sin(a)};
    }

    // Mode selection on interference-free cellular-mode rates.
    std::vector<Position> tx;
    std::vector<double> rates, weights;
    for (const auto& p : ue) {
      tx.push_back(p);
      weights.push_back(1.0);
    }
    for (const auto& p : pot) {
      tx.push_back(p.tx);
      weights.push_back(cfg.mode_select_weight);
    }
    for (const auto& p : tx) {
      const double d = dist(p, bs);
      rates.push_back(shannon_rate(fractional_power(d, cfg.cellular_power) * path_gain(d, cfg.alpha_ue_bs) / sc.noise_w));
    }
    SchedulerState state;
    const auto sel = mode_select(rates, weights, cfg.subbands, state, cfg.pf_warmup_rounds, cfg.pf_smoothing);
    for (int k = 0; k < cfg.subbands; ++k) {
      const int o = sel.subband_owner[k];
      if (o < 0) continue;
      CellularUe u;
      u.pos = tx[o];
      u.cell = c;
      u.power = fractional_power(dist(u.pos, bs), cfg.cellular_power);
      u.from_d2d = o >= n_cell;
      sc.rb_owner[c][k] = static_cast<int>(sc.cellular.size());
      sc.cellular.push_back(u);
      sc.population.cellular_links.push_back({u.pos, c});
    }
    for (int j = 0; j < n_pot; ++j) {
      if (sel.cellular_mode[n_cell + j]) continue;
      D2dLink l;
      l.tx = pot[j].tx;
      l.rx = pot[j].rx;
      l.cell = c;
      l.power = fractional_power(dist(l.tx, l.rx), cfg.d2d_power);
      sc.cell_d2d[c].push_back(static_cast<int>(sc.d2d.size()));
      sc.d2d.push_back(l);
      sc.population.d2d_pairs.push_back(pot[j]);
    }
  }

  const int nd = static_cast<int>(sc.d2d.size());
  const int nc = static_cast<int>(sc.cellular.size());
  auto shadow = [&]() { return cfg.shadowing_db > 0.0 ? db_to_linear(cfg.shadowing_db * normal(rng)) : 1.0; };
  sc.h.resize(nd, nd);
  sc.hc.resize(nd, nc);
  sc.g.resize(nd, cells);
  sc.gc.resize(nc, cells);
  for (int i = 0; i < nd; ++i)
    for (int j = 0; j < nd; ++j) sc.h(i, j) = path_gain(dist(sc.d2d[j].tx, sc.d2d[i].rx), cfg.alpha_ue_ue) * shadow();
  for (int i = 0; i < nd; ++i)
    for (int u = 0; u < nc; ++u) sc.hc(i, u) = path_gain(dist(sc.cellular[u].pos, sc.d2d[i].rx), cfg.alpha_ue_ue) * shadow();
  for (int j = 0; j < nd; ++j)
    for (int b = 0; b < cells; ++b)
      sc.g(j, b) = path_gain(dist(sc.d2d[j].tx, sc.population.bs_positions[b]), cfg.alpha_ue_bs) * shadow();
  for (int u = 0; u < nc; ++u)
    for (int b = 0; b < cells; ++b)
      sc.gc(u, b) = path_gain(dist(sc.cellular[u].pos, sc.population.bs_positions[b]), cfg.alpha_ue_bs) * shadow();
  sc.population.validate();
  return sc;
}

/// Single-cell view of one RB. Out-of-cell transmitters (cellular UEs on the
/// same RB and D2D links at full power) are folded into per-link noise.
struct RbProblem {
  ChannelMatrices ch;
  PowerVector pw;
  std::vector<int> links;  // global D2D indices
  int cellular = -1;       // global cellular index, -1 if the RB is unused
  double signal = 0.0;     // received cellular power at the BS
  double q_tol = 0.0;
};

inline RbProblem rb_problem(const Scenario& sc, int cell, int rb, double q_tol_db) {
  RbProblem p;
  p.links = sc.cell_d2d[cell];
  p.cellular = sc.rb_owner[cell][rb];
  const int n = static_cast<int>(p.links.size());
  const int nc = p.cellular >= 0 ? 1 : 0;
  auto& ch = p.ch;
  ch.h.resize(n, n);
  ch.g.resize(n);
  ch.hc.resize(n, nc);
  ch.gc.resize(nc, nc);
  ch.noise_d2d = Vector::Constant(n, sc.noise_w);
  ch.noise_cell = Vector::Constant(nc, sc.noise_w);
  p.pw.p_d.resize(n);
  p.pw.p_c.resize(nc);
  for (int a = 0; a < n; ++a) {
    const int i = p.links[a];
    p.pw.p_d[a] = sc.d2d[i].power;
    ch.g[a] = sc.g(i, cell);
    for (int b = 0; b < n; ++b) ch.h(a, b) = sc.h(i, p.links[b]);
    if (nc) ch.hc(a, 0) = sc.hc(i, p.cellular);
  }
  if (nc) {
    p.pw.p_c[0] = sc.cellular[p.cellular].power;
    ch.gc(0, 0) = sc.gc(p.cellular, cell);
    p.signal = p.pw.p_c[0] * ch.gc(0, 0);
    p.q_tol = p.signal * db_to_linear(q_tol_db);
  }
  for (int other = 0; other < sc.cells(); ++other) {
    if (other == cell) continue;
    const int u = sc.rb_owner[other][rb];
    for (int a = 0; a < n; ++a) {
      const int i = p.links[a];
      if (u >= 0) ch.noise_d2d[a] += sc.cellular[u].power * sc.hc(i, u);
      for (int j : sc.cell_d2d[other]) ch.noise_d2d[a] += sc.d2d[j].power * sc.h(i, j);
    }
    if (nc) {
      if (u >= 0) ch.noise_cell[0] += sc.cellular[u].power * sc.gc(u, cell);
      for (int j : sc.cell_d2d[other]) ch.noise_cell[0] += sc.d2d[j].power * sc.g(j, cell);
    }
  }
  return p;
}

/// Isolated single-cell RB with exactly `n_d2d` D2D links and one cellular
/// UE, placed uniformly in the central cell (mode selection skipped).
inline RbProblem random_rb_problem(const ScenarioConfig& cfg, int n_d2d, std::uint64_t seed) {
  cfg.validate();
  if (n_d2d < 0) throw DomainError("random_rb_problem: n_d2d must be >= 0");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::exponential_distribution<double> length(1.0 / cfg.d2d_mean_length);
  const Position bs{0.0, 0.0};
  const double radius = cfg.cell_radius();
  auto dist = [&](Position a, Position b) { return std::max(cfg.min_distance, distance(a, b)); };

  const Position ue = detail::uniform_in_cell(rng, bs, radius);
  std::vector<Position> tx(n_d2d), rx(n_d2d);
  for (int i = 0; i < n_d2d; ++i) {
    tx[i] = detail::uniform_in_cell(rng, bs, radius);
    double len = cfg.length_law == LengthLaw::exponential ? length(rng) : cfg.d2d_mean_length;
    len = std::max(len, cfg.min_distance);
    const double a = angle(rng);
    rx[i] = {tx[i].x + len * std::cos(a), tx[i].y + len * std::sin(a)};
  }
  RbProblem p;
  p.cellular = 0;
  auto& ch = p.ch;
  ch.h.resize(n_d2d, n_d2d);
  ch.g.resize(n_d2d);
  ch.hc.resize(n_d2d, 1);
  ch.gc.resize(1, 1);
  ch.noise_d2d = Vector::Constant(n_d2d, cfg.noise_watts());
  ch.noise_cell = Vector::Constant(1, cfg.noise_watts());
  p.pw.p_d.resize(n_d2d);
  p.pw.p_c.resize(1);
  for (int i = 0; i < n_d2d; ++i) {
    p.links.push_back(i);
    p.pw.p_d[i] = fractional_power(dist(tx[i], rx[i]), cfg.d2d_power);
    ch.g[i] = path_gain(dist(tx[i], bs), cfg.alpha_ue_bs);
    ch.hc(i, 0) = path_gain(dist(ue, rx[i]), cfg.alpha_ue_ue);
    for (int j = 0; j < n_d2d; ++j) ch.h(i, j) = path_gain(dist(tx[j], rx[i]), cfg.alpha_ue_ue);
  }
  p.pw.p_c[0] = fractional_power(dist(ue, bs), cfg.cellular_power);
  ch.gc(0, 0) = path_gain(dist(ue, bs), cfg.alpha_ue_bs);
  p.signal = p.pw.p_c[0] * ch.gc(0, 0);
  p.q_tol = p.signal * db_to_linear(cfg.q_tol_db);
  return p;
}

// ---------------------------------------------------------------------------
// Methods
// ---------------------------------------------------------------------------

enum class MethodKind { sppp, bisection, bisection_br, io, all_active, guard_zone, cellular_only };

struct Method {
  MethodKind kind = MethodKind::bisection;
  double radius = 0.0;  // guard zone only

  std::string label() const {
    switch (kind) {
      case MethodKind::sppp: return "sppp";
      case MethodKind::bisection: return "bisection";
      case MethodKind::bisection_br: return "bisection-br";
      case MethodKind::io: return "io";
      case MethodKind::all_active: return "all-active";
      case MethodKind::cellular_only: return "cellular-only";
      case MethodKind::guard_zone: {
        char buf[48];
        std::snprintf(buf, sizeof buf, "guard-zone-%g", radius);
        return buf;
      }
    }
    return "?";
  }

  /// Accepts the labels above; guard zones as `guard-zone-200` or `guard-zone(200)`.
  static Method parse(const std::string& text) {
    static const std::map<std::string, MethodKind> plain{
        {"sppp", MethodKind::sppp},         {"bisection", MethodKind::bisection},
        {"bisection-br", MethodKind::bisection_br}, {"io", MethodKind::io},
        {"all-active", MethodKind::all_active}, {"cellular-only", MethodKind::cellular_only}};
    if (auto it = plain.find(text); it != plain.end()) return {it->second, 0.0};
    const std::string prefix = "guard-zone";
    if (text.rfind(prefix, 0) == 0 && text.size() > prefix.size()) {
      std::string arg = text.substr(prefix.size());
      if (arg.front() == '-' || arg.front() == ':') arg = arg.substr(1);
      else if (arg.front() == '(' && arg.back() == ')') arg = arg.substr(1, arg.size() - 2);
      else arg.clear();
      char* end = nullptr;
      const double r = std::strtod(arg.c_str(), &end);
      if (!arg.empty() && end && *end == '\0' && r >= 0.0) return {MethodKind::guard_zone, r};
    }
    throw ConfigError("unknown method '" + text +
                      "' (valid: sppp, bisection, bisection-br, io, all-active, cellular-only, guard-zone-<radius>)");
  }
};

/// Per-RB solver statistics for the measured cell.
struct RbStats {
  bool priced = false;  // a nontrivial pricing problem was solved
  int bisection_iterations = 0;
  int bisection_bound = 0;
  int lower_iterations = 0;
  bool lower_converged = true;
  double mu_star = 0.0;
  double interference = 0.0;
  double q_tol = 0.0;
};

struct DrawOutcome {
  bool failed = false;
  std::string error;
  std::vector<double> cellular_rates;  // measured cell, one per used RB
  std::vector<double> d2d_rates;       // measured cell, per link, averaged over RBs
  std::vector<RbStats> rb_stats;
  int protection_checks = 0;
  int protection_violations = 0;
  double max_interference_ratio = 0.0;  // max interference / Q over constrained RBs, all cells
};

inline constexpr double kProtectionSlack = 1e-3;

/// Activation vector chosen by `method` on one RB of one cell.
inline Vector solve_rb(const Scenario& sc, const RbProblem& p, const Method& method, RbStats* stats = nullptr) {
  const int n = static_cast<int>(p.links.size());
  if (n == 0) return Vector::Zero(0);
  switch (method.kind) {
    case MethodKind::all_active: return Vector::Ones(n);
    case MethodKind::cellular_only: return Vector::Zero(n);
    case MethodKind::guard_zone: {
      Vector x(n);
      for (int a = 0; a < n; ++a) {
        double nearest = std::numeric_limits<double>::infinity();
        for (const auto& bs : sc.population.bs_positions) nearest = std::min(nearest, distance(sc.d2d[p.links[a]].tx, bs));
        x[a] = nearest < method.radius ? 0.0 : 1.0;
      }
      return x;
    }
    default: break;
  }
  if (p.cellular < 0) return Vector::Ones(n);  // nothing to protect on this RB
  const auto upper = make_upper_instance(make_lower_instance(p.ch, p.pw), p.q_tol);
  PricingOutcome out;
  switch (method.kind) {
    case MethodKind::io: out = io_greedy(upper); break;
    case MethodKind::sppp: out = sppp_solve(upper); break;
    case MethodKind::bisection: out = bisection_price(upper); break;
    case MethodKind::bisection_br: out = bisection_price(upper, {LowerSolver::br, {}}); break;
    default: break;
  }
  if (stats) {
    stats->priced = !out.trivial && method.kind != MethodKind::io;
    stats->bisection_iterations = out.iterations;
    stats->bisection_bound = bisection_iteration_bound(upper);
    stats->mu_star = out.mu_star;
    stats->interference = out.interference;
    stats->q_tol = p.q_tol;
    stats->lower_converged = out.lower_converged;
    if (stats->priced) {
      const auto lower = lb_iterate(upper.lower.with_price(out.mu_star));
      stats->lower_iterations = lower.trace.iterations;
    }
  }
  return out.x_star.x;
}

namespace detail {

// E[log2(1 + S / (sum_{active j} p_j + rest))] over Bernoulli(x) activations.
inline double expected_log_rate(double signal, const std::vector<double>& x, const std::vector<double>& interf,
                            double rest) {
  const int n = static_cast<int>(x.size());
  double acc = 0.0;
  auto rec = [&](auto&& self, int j, double prob, double i_sum) -> void {
    if (j == n) {
      acc += prob * std::log2(1.0 + signal / (i_sum + rest));
      return;
    }
    if (x[j] > 0.0) self(self, j + 1, prob * x[j], i_sum + interf[j]);
    if (x[j] < 1.0) self(self, j + 1, prob * (1.0 - x[j]), i_sum);
  };
  rec(rec, 0, 1.0, 0.0);
  return acc;
}

}  // namespace detail

/// Rates of the measured cell (index 0) given activations of every cell.
/// `x[c][k]` is indexed like `sc.cell_d2d[c]`. Other cells always contribute
/// x-weighted interference. With `probabilistic` the measured cell's x are
/// access probabilities: each D2D link is credited log2(1 + E[SINR]) and the
/// cellular link its expected Shannon rate, both over own-cell activation
/// patterns. Otherwise x scales transmit power.
inline void measured_cell_rates(const Scenario& sc, const std::vector<std::vector<Vector>>& x, bool probabilistic,
                                DrawOutcome& out) {
  const int cells = static_cast<int>(x.size());
  const int rbs = sc.subbands();
  const auto& own = sc.cell_d2d[0];
  const int n = static_cast<int>(own.size());
  std::vector<double> d2d(n, 0.0);
  for (int k = 0; k < rbs; ++k) {
    const int u = sc.rb_owner[0][k];
    const Vector& x0 = x[0][k];
    // Out-of-cell interference at each own D2D receiver and at BS 0.
    Vector rest_d2d = Vector::Constant(n, sc.noise_w);
    double rest_bs = sc.noise_w;
    for (int c = 1; c < cells; ++c) {
      const int v = sc.rb_owner[c][k];
      const auto& links = sc.cell_d2d[c];
      for (int a = 0; a < n; ++a) {
        if (v >= 0) rest_d2d[a] += sc.cellular[v].power * sc.hc(own[a], v);
        for (std::size_t b = 0; b < links.size(); ++b)
          rest_d2d[a] += x[c][k][b] * sc.d2d[links[b]].power * sc.h(own[a], links[b]);
      }
      if (v >= 0) rest_bs += sc.cellular[v].power * sc.gc(v, 0);
      for (std::size_t b = 0; b < links.size(); ++b) rest_bs += x[c][k][b] * sc.d2d[links[b]].power * sc.g(links[b], 0);
    }
    for (int a = 0; a < n; ++a) {
      if (u >= 0) rest_d2d[a] += sc.cellular[u].power * sc.hc(own[a], u);
    }
    if (probabilistic) {
      LowerGameInstance inst;
      inst.weights = Vector::Ones(n);
      inst.h.resize(n, n);
      inst.g.resize(n);
      inst.power.resize(n);
      inst.i_c = rest_d2d;
      for (int a = 0; a < n; ++a) {
        inst.power[a] = sc.d2d[own[a]].power;
        inst.g[a] = sc.g(own[a], 0);
        for (int b = 0; b < n; ++b) inst.h(a, b) = sc.h(own[a], own[b]);
      }
      for (int a = 0; a < n; ++a)
        if (x0[a] > 0.0) d2d[a] += std::log2(1.0 + x0[a] * expected_sinr_coefficient(a, x0, inst));
      if (u >= 0) {
        std::vector<double> xs(x0.data(), x0.data() + n), interf(n);
        for (int a = 0; a < n; ++a) interf[a] = sc.d2d[own[a]].power * sc.g(own[a], 0);
        d2d::detail::check_exact_size(n, kExactEnumerationCap);
        out.cellular_rates.push_back(
            detail::expected_log_rate(sc.cellular[u].power * sc.gc(u, 0), xs, interf, rest_bs));
      }
    } else {
      for (int a = 0; a < n; ++a) {
        if (x0[a] <= 0.0) continue;
        double interf = rest_d2d[a];
        for (int b = 0; b < n; ++b)
          if (b != a) interf += x0[b] * sc.d2d[own[b]].power * sc.h(own[a], own[b]);
        d2d[a] += shannon_rate(x0[a] * sc.d2d[own[a]].power * sc.h(own[a], own[a]) / interf);
      }
      if (u >= 0) {
        double interf = rest_bs;
        for (int a = 0; a < n; ++a) interf += x0[a] * sc.d2d[own[a]].power * sc.g(own[a], 0);
        out.cellular_rates.push_back(shannon_rate(sc.cellular[u].power * sc.gc(u, 0) / interf));
      }
    }
  }
  for (int a = 0; a < n; ++a) out.d2d_rates.push_back(d2d[a] / rbs);
}

/// Runs one method on one scenario: every cell prices its RBs independently,
/// then the measured cell's rates are evaluated against the actual
/// activations of all cells. Solver exceptions mark the draw as failed.
inline DrawOutcome run_method_on_scenario(const Scenario& sc, const ScenarioConfig& cfg, const Method& method) {
  DrawOutcome out;
  const int cells = sc.cells();
  std::vector<std::vector<Vector>> x(cells, std::vector<Vector>(sc.subbands()));
  try {
    for (int c = 0; c < cells; ++c) {
      for (int k = 0; k < sc.subbands(); ++k) {
        const RbProblem p = rb_problem(sc, c, k, cfg.q_tol_db);
        RbStats stats;
        x[c][k] = solve_rb(sc, p, method, c == 0 ? &stats : nullptr);
        if (c == 0) out.rb_stats.push_back(stats);
        const bool protected_method = method.kind == MethodKind::sppp || method.kind == MethodKind::bisection ||
                                      method.kind == MethodKind::bisection_br || method.kind == MethodKind::io;
        if (protected_method && p.cellular >= 0 && !p.links.empty()) {
          const auto lower = make_lower_instance(p.ch, p.pw);
          const double interference = bs_interference(x[c][k], lower);
          const double ratio = interference / p.q_tol;
          ++out.protection_checks;
          out.max_interference_ratio = std::max(out.max_interference_ratio, ratio);
          if (interference > p.q_tol * (1.0 + kProtectionSlack)) ++out.protection_violations;
        }
      }
    }
    measured_cell_rates(sc, x, method.kind == MethodKind::bisection_br, out);
  } catch (const std::exception& e) {
    out = DrawOutcome{};
    out.failed = true;
    out.error = e.what();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

struct MethodResult {
  std::string label;
  std::vector<double> cellular_rates;          // pooled over draws
  std::vector<double> d2d_rates;               // pooled over draws
  std::vector<double> cellular_mean_per_draw;  // NaN when a draw has no cellular link
  std::vector<double> d2d_total_per_draw;
  std::vector<bool> draw_failed;
  std::vector<RbStats> rb_stats;               // measured cell, all draws
  int failed_draws = 0;
  int protection_checks = 0;
  int protection_violations = 0;
  double max_interference_ratio = 0.0;

  double mean_cellular_rate() const {
    if (cellular_rates.empty()) return 0.0;
    double s = 0.0;
    for (double v : cellular_rates) s += v;
    return s / cellular_rates.size();
  }

  /// Mean over successful draws of the measured cell's summed D2D rate.
  double mean_d2d_total() const {
    double s = 0.0;
    int k = 0;
    for (std::size_t d = 0; d < d2d_total_per_draw.size(); ++d) {
      if (draw_failed[d]) continue;
      s += d2d_total_per_draw[d];
      ++k;
    }
    return k ? s / k : 0.0;
  }
};

struct ExperimentResult {
  int draws = 0;
  std::vector<MethodResult> methods;

  const MethodResult& at(const std::string& label) const {
    for (const auto& m : methods)
      if (m.label == label) return m;
    throw DomainError("no result for method " + label);
  }
};

/// Worker count: explicit value, else D2D_THREADS, else hardware concurrency.
inline int worker_count(int requested = 0) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("D2D_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs `jobs` independent tasks on up to `threads` workers.
inline void parallel_for(int jobs, int threads, const std::function<void(int)>& body) {
  threads = std::max(1, std::min(threads, jobs));
  if (threads == 1) {
    for (int j = 0; j < jobs; ++j) body(j);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (int j = next++; j < jobs; j = next++) body(j);
    });
  for (auto& th : pool) th.join();
}

inline ExperimentResult run_experiment(const ScenarioConfig& cfg, const std::vector<Method>& methods, int draws,
                                       int threads = 0) {
  if (draws < 1) throw DomainError("run_experiment: draws must be >= 1");
  cfg.validate();
  std::vector<std::vector<DrawOutcome>> per_draw(draws);
  parallel_for(draws, worker_count(threads), [&](int d) {
    const Scenario sc = generate_scenario(cfg, derive_seed(cfg.seed, static_cast<std::uint64_t>(d)));
    auto& row = per_draw[d];
    for (const auto& m : methods) row.push_back(run_method_on_scenario(sc, cfg, m));
  });
  ExperimentResult res;
  res.draws = draws;
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    MethodResult mr;
    mr.label = methods[mi].label();
    for (int d = 0; d < draws; ++d) {
      const auto& o = per_draw[d][mi];
      mr.draw_failed.push_back(o.failed);
      if (o.failed) {
        ++mr.failed_draws;
        mr.cellular_mean_per_draw.push_back(std::numeric_limits<double>::quiet_NaN());
        mr.d2d_total_per_draw.push_back(0.0);
        continue;
      }
      double cs = 0.0, ds = 0.0;
      for (double v : o.cellular_rates) cs += v;
      for (double v : o.d2d_rates) ds += v;
      mr.cellular_rates.insert(mr.cellular_rates.end(), o.cellular_rates.begin(), o.cellular_rates.end());
      mr.d2d_rates.insert(mr.d2d_rates.end(), o.d2d_rates.begin(), o.d2d_rates.end());
      mr.cellular_mean_per_draw.push_back(o.cellular_rates.empty() ? std::numeric_limits<double>::quiet_NaN()
                                                                   : cs / o.cellular_rates.size());
      mr.d2d_total_per_draw.push_back(ds);
      mr.rb_stats.insert(mr.rb_stats.end(), o.rb_stats.begin(), o.rb_stats.end());
      mr.protection_checks += o.protection_checks;
      mr.protection_violations += o.protection_violations;
      mr.max_interference_ratio = std::max(mr.max_interference_ratio, o.max_interference_ratio);
    }
    res.methods.push_back(std::move(mr));
  }
  return res;
}

/// Empirical CDF: sorted (value, i/n) pairs.
inline std::vector<std::pair<double, double>> rate_cdf(std::vector<double> values) {
  if (values.empty()) throw DomainError("rate_cdf: empty series");
  std::sort(values.begin(), values.end());
  std::vector<std::pair<double, double>> out;
  const double n = static_cast<double>(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out.emplace_back(values[i], (i + 1) / n);
  return out;
}

/// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_distance(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw DomainError("ks_distance: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  return d;
}

enum class SweepParameter { q_tol_db, d2d_density };

inline const char* to_string(SweepParameter p) { return p == SweepParameter::q_tol_db ? "q_tol_db" : "d2d_density"; }

struct SweepRow {
  std::string method;
  SweepParameter parameter;
  double value;
  std::string metric;
  double result;
};

/// Re-runs the experiment for every value with common random numbers (same seed).
inline std::vector<SweepRow> run_sweep(const ScenarioConfig& base, const std::vector<Method>& methods, int draws,
                                       SweepParameter param, const std::vector<double>& values, int threads = 0) {
  std::vector<SweepRow> rows;
  for (double v : values) {
    ScenarioConfig cfg = base;
    if (param == SweepParameter::q_tol_db)
      cfg.q_tol_db = v;
    else
      cfg.d2d_density = v;
    const auto res = run_experiment(cfg, methods, draws, threads);
    for (const auto& m : res.methods) {
      rows.push_back({m.label, param, v, "cellular_mean_rate", m.mean_cellular_rate()});
      rows.push_back({m.label, param, v, "d2d_total_rate", m.mean_d2d_total()});
    }
  }
  return rows;
}

}  // namespace d2d::mc
