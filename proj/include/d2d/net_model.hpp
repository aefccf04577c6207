#pragma once

// Physical-layer model: geometry, path loss, fractional power control,
// per-RB SINR and Shannon rate. All quantities are linear (watts, linear
// gains); dB only appears at the CLI boundary.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "d2d/errors.hpp"

namespace d2d {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct Position {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(Position a, Position b) { return std::hypot(a.x - b.x, a.y - b.y); }

struct CellularLink {
  Position tx;
  int serving_bs = 0;
};

struct D2dPair {
  Position tx;
  Position rx;
};

struct LinkPopulation {
  std::vector<Position> bs_positions;
  std::vector<CellularLink> cellular_links;
  std::vector<D2dPair> d2d_pairs;
  int rb_count = 1;
  double rb_bandwidth_hz = 1e6;

  void validate() const {
    if (rb_count < 1) throw DomainError("LinkPopulation: rb_count must be >= 1");
    for (const auto& c : cellular_links)
      if (c.serving_bs < 0 || c.serving_bs >= static_cast<int>(bs_positions.size()))
        throw DomainError("LinkPopulation: invalid serving_bs index");
    for (const auto& p : d2d_pairs)
      if (p.tx.x == p.rx.x && p.tx.y == p.rx.y)
        throw DomainError("LinkPopulation: D2D tx and rx coincide");
  }
};

struct PowerControlConfig {
  double p_max = 0.2;  // watts
  double kappa = 0.75;
  double alpha = 3.76;

  void validate() const {
    if (!(p_max > 0.0)) throw DomainError("PowerControlConfig: p_max must be > 0");
    if (!(kappa >= 0.0 && kappa <= 1.0)) throw DomainError("PowerControlConfig: kappa must be in [0,1]");
    if (!(alpha > 2.0)) throw DomainError("PowerControlConfig: alpha must be > 2");
  }
};

inline constexpr double kAlphaUeUe = 4.37;
inline constexpr double kAlphaUeBs = 3.76;

/// Channel state of a single RB as seen by one cell.
///
/// `h(i, j)` is the gain from D2D transmitter j to D2D receiver i, so the
/// diagonal holds the direct gains. `hc(i, c)` is the gain from cellular
/// transmitter c to D2D receiver i; `gc(i, c)` the gain from cellular
/// transmitter c to the BS serving cellular link i. Noise terms already
/// include any inter-cell interference folded in by the scenario builder.
struct ChannelMatrices {
  Matrix h;
  Vector g;
  Matrix hc;
  Matrix gc;
  Vector noise_d2d;
  Vector noise_cell;

  int n_d2d() const { return static_cast<int>(g.size()); }
  int n_cell() const { return static_cast<int>(noise_cell.size()); }

  void validate() const {
    const auto n = g.size();
    const auto c = noise_cell.size();
    if (h.rows() != n || h.cols() != n) throw DomainError("ChannelMatrices: h must be N_D x N_D");
    if (hc.rows() != n || hc.cols() != c) throw DomainError("ChannelMatrices: hc must be N_D x N_C");
    if (gc.rows() != c || gc.cols() != c) throw DomainError("ChannelMatrices: gc must be N_C x N_C");
    if (noise_d2d.size() != n) throw DomainError("ChannelMatrices: noise_d2d size mismatch");
    auto positive = [](const auto& m) { return m.size() == 0 || (m.array().isFinite().all() && (m.array() > 0.0).all()); };
    if (!positive(h) || !positive(g) || !positive(hc) || !positive(gc))
      throw DomainError("ChannelMatrices: gains must be positive and finite");
    if (!positive(noise_d2d) || !positive(noise_cell)) throw DomainError("ChannelMatrices: noise must be positive");
  }
};

struct PowerVector {
  Vector p_d;
  Vector p_c;
};

inline double fractional_power(double d, const PowerControlConfig& cfg) {
  if (!(d > 0.0)) throw DomainError("fractional_power: distance must be > 0");
  return std::min(cfg.p_max, std::pow(d, cfg.kappa * cfg.alpha));
}

inline double path_gain(double d, double alpha) {
  if (!(d > 0.0)) throw DomainError("path_gain: distance must be > 0");
  return std::pow(d, -alpha);
}

inline double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

/// Thermal noise power of one RB from a PSD in dBm/Hz.
inline double thermal_noise_watts(double psd_dbm_hz, double bandwidth_hz) {
  return dbm_to_watts(psd_dbm_hz) * bandwidth_hz;
}

/// SINR of D2D link `i` when the D2D links flagged in `active` transmit.
inline double sinr_d2d(int i, const std::vector<bool>& active, const ChannelMatrices& ch, const PowerVector& pw) {
  const int n = ch.n_d2d();
  if (i < 0 || i >= n) throw DomainError("sinr_d2d: link index out of range");
  if (!active[i]) return 0.0;
  double denom = ch.noise_d2d[i];
  for (int j = 0; j < n; ++j)
    if (j != i && active[j]) denom += pw.p_d[j] * ch.h(i, j);
  for (int c = 0; c < ch.n_cell(); ++c) denom += pw.p_c[c] * ch.hc(i, c);
  return pw.p_d[i] * ch.h(i, i) / denom;
}

/// SINR of cellular link `i` at its serving BS. D2D interference at that BS
/// is taken from `g` (single-cell view: every D2D link reports to one BS).
inline double sinr_cellular(int i, const std::vector<bool>& active, const ChannelMatrices& ch, const PowerVector& pw) {
  if (i < 0 || i >= ch.n_cell()) throw DomainError("sinr_cellular: link index out of range");
  double denom = ch.noise_cell[i];
  for (int j = 0; j < ch.n_d2d(); ++j)
    if (active[j]) denom += pw.p_d[j] * ch.g[j];
  for (int c = 0; c < ch.n_cell(); ++c)
    if (c != i) denom += pw.p_c[c] * ch.gc(i, c);
  return pw.p_c[i] * ch.gc(i, i) / denom;
}

inline double shannon_rate(double sinr, double bandwidth = 1.0) {
  if (sinr < 0.0 || std::isnan(sinr)) throw DomainError("shannon_rate: sinr must be >= 0");
  return bandwidth * std::log2(1.0 + sinr);
}

}  // namespace d2d
