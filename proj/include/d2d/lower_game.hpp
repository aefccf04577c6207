#pragma once

// Lower-stage D2D game on one RB: the exact expected-SINR best response, the
// expected-interference (lower bound) waterfilling response, synchronous
// fixed-point iterations for both, region classification of the piecewise
// affine response map, and the contraction certificate.

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "d2d/net_model.hpp"

namespace d2d {

/// Largest N_D for which the 2^N_D expectation is enumerated.
inline constexpr int kExactEnumerationCap = 16;

/// Interior tolerance separating silent / active / saturated links.
inline constexpr double kClassifyTolerance = 1e-9;

struct LowerGameInstance {
  Vector weights;
  double mu = 0.0;
  Matrix h;       // h(i, j): D2D tx j -> D2D rx i
  Vector g;       // D2D tx i -> BS
  Vector power;   // P_Di
  Vector i_c;     // cellular interference plus noise at D2D rx i

  int size() const { return static_cast<int>(g.size()); }

  /// Direct received power P_Di * h_ii.
  double direct(int i) const { return power[i] * h(i, i); }
  /// Interference this link causes at the BS when fully on.
  double bs_interference(int i) const { return power[i] * g[i]; }

  void validate() const {
    const auto n = g.size();
    if (weights.size() != n || power.size() != n || i_c.size() != n || h.rows() != n || h.cols() != n)
      throw DomainError("LowerGameInstance: inconsistent dimensions");
    if (!(weights.array() > 0.0).all()) throw DomainError("LowerGameInstance: weights must be > 0");
    if (!(mu >= 0.0)) throw DomainError("LowerGameInstance: mu must be >= 0");
    if (!(i_c.array() > 0.0).all()) throw DomainError("LowerGameInstance: i_c must be > 0");
  }

  LowerGameInstance with_price(double price) const {
    LowerGameInstance out = *this;
    out.mu = price;
    return out;
  }
};

/// Builds the single-RB game from channel state; i_c = hc * p_c + noise.
inline LowerGameInstance make_lower_instance(const ChannelMatrices& ch, const PowerVector& pw,
                                             std::optional<Vector> weights = std::nullopt, double mu = 0.0) {
  LowerGameInstance inst;
  const int n = ch.n_d2d();
  inst.weights = weights ? *weights : Vector::Ones(n);
  inst.mu = mu;
  inst.h = ch.h;
  inst.g = ch.g;
  inst.power = pw.p_d;
  inst.i_c = ch.noise_d2d;
  if (ch.n_cell() > 0) inst.i_c += ch.hc * pw.p_c;
  inst.validate();
  return inst;
}

enum class LinkState { silent, active, saturated };

inline const char* to_string(LinkState s) {
  switch (s) {
    case LinkState::silent: return "silent";
    case LinkState::active: return "active";
    case LinkState::saturated: return "saturated";
  }
  return "?";
}

struct AllocationState {
  Vector x;
  std::vector<LinkState> state;

  std::vector<int> indices(LinkState s) const {
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(state.size()); ++i)
      if (state[i] == s) out.push_back(i);
    return out;
  }
  std::vector<int> active() const { return indices(LinkState::active); }
  std::vector<int> saturated() const { return indices(LinkState::saturated); }
  std::vector<int> silent() const { return indices(LinkState::silent); }

  bool same_region(const AllocationState& other) const { return state == other.state; }
};

inline AllocationState classify(const Vector& x, double tol = kClassifyTolerance) {
  AllocationState out{x, std::vector<LinkState>(x.size())};
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x[i] < -tol || x[i] > 1.0 + tol) throw DomainError("classify: x outside [0,1]");
    if (x[i] <= tol)
      out.state[i] = LinkState::silent;
    else if (x[i] >= 1.0 - tol)
      out.state[i] = LinkState::saturated;
    else
      out.state[i] = LinkState::active;
  }
  return out;
}

/// G with zero diagonal and G(i, j) = P_Dj h_ji, so that s = G x.
struct InterferenceCoupling {
  Matrix g_mat;

  static InterferenceCoupling from(const LowerGameInstance& inst) {
    const int n = inst.size();
    Matrix m(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) m(i, j) = i == j ? 0.0 : inst.power[j] * inst.h(i, j);
    return {std::move(m)};
  }
};

enum class Norm { l1, linf, l2 };

inline const char* to_string(Norm n) {
  switch (n) {
    case Norm::l1: return "l1";
    case Norm::linf: return "linf";
    case Norm::l2: return "l2";
  }
  return "?";
}

inline double vector_norm(const Vector& v, Norm n) {
  switch (n) {
    case Norm::l1: return v.lpNorm<1>();
    case Norm::linf: return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>();
    case Norm::l2: return v.norm();
  }
  return 0.0;
}

/// Operator norm induced by the given vector norm.
inline double induced_norm(const Matrix& m, Norm n) {
  if (m.size() == 0) return 0.0;
  switch (n) {
    case Norm::l1: return m.cwiseAbs().colwise().sum().maxCoeff();
    case Norm::linf: return m.cwiseAbs().rowwise().sum().maxCoeff();
    case Norm::l2: {
      Eigen::JacobiSVD<Matrix> svd(m);
      return svd.singularValues()[0];
    }
  }
  return 0.0;
}

struct ConvergenceTrace {
  std::vector<Vector> iterates;
  std::vector<double> residuals;
  bool converged = false;
  int iterations = 0;

  /// CSV rows `iteration,residual`.
  void write_csv(std::ostream& os, bool header = true) const {
    if (header) os << "iteration,residual\n";
    const auto old = os.precision(12);
    for (std::size_t t = 0; t < residuals.size(); ++t) os << (t + 1) << ',' << residuals[t] << '\n';
    os.precision(old);
  }
};

struct IterationOptions {
  double eps = 1e-6;
  int max_iter = 1000;
  Norm norm = Norm::linf;
};

struct LowerSolution {
  AllocationState state;
  ConvergenceTrace trace;
};

// ---------------------------------------------------------------------------
// Exact expected-SINR game
// ---------------------------------------------------------------------------

namespace detail {

inline void check_exact_size(int n, int cap) {
  if (n > cap)
    throw SizeError("exact enumeration over 2^" + std::to_string(n) + " activation patterns exceeds cap of " +
                    std::to_string(cap) + " links");
}

// Visits every activation pattern of the links other than `i`, passing the
// pattern probability and the D2D interference it produces at receiver i.
// Zero-probability branches are pruned.
template <class Visitor>
void for_each_pattern_of_others(int i, const Vector& x, const LowerGameInstance& inst, Visitor&& visit) {
  const int n = inst.size();
  auto recurse = [&](auto&& self, int j, double prob, double interference) -> void {
    if (j == n) {
      visit(prob, interference);
      return;
    }
    if (j == i) {
      self(self, j + 1, prob, interference);
      return;
    }
    const double on = x[j];
    if (on > 0.0) self(self, j + 1, prob * on, interference + inst.power[j] * inst.h(i, j));
    if (on < 1.0) self(self, j + 1, prob * (1.0 - on), interference);
  };
  recurse(recurse, 0, 1.0, 0.0);
}

}  // namespace detail

/// E over the other links' activations of P_Di h_ii / (I_i + I_Ci), i.e. the
/// expected SINR of link i given that it transmits.
inline double expected_sinr_coefficient(int i, const Vector& x, const LowerGameInstance& inst,
                                        int cap = kExactEnumerationCap) {
  detail::check_exact_size(inst.size(), cap);
  const double signal = inst.direct(i);
  double acc = 0.0;
  detail::for_each_pattern_of_others(i, x, inst, [&](double p, double interf) {
    acc += p * signal / (interf + inst.i_c[i]);
  });
  return acc;
}

/// Expected Shannon rate (bits/s/Hz) of link i over all 2^N_D activation patterns.
inline double expected_rate_exact(int i, const Vector& x, const LowerGameInstance& inst,
                                  int cap = kExactEnumerationCap) {
  detail::check_exact_size(inst.size(), cap);
  if (x[i] <= 0.0) return 0.0;
  const double signal = inst.direct(i);
  double acc = 0.0;
  detail::for_each_pattern_of_others(i, x, inst, [&](double p, double interf) {
    acc += p * std::log2(1.0 + signal / (interf + inst.i_c[i]));
  });
  return x[i] * acc;
}

/// Utility of the exact game: w log2(1 + E[SINR]) - mu x_i P_Di g_ii.
inline double exact_utility(int i, const Vector& x, const LowerGameInstance& inst, int cap = kExactEnumerationCap) {
  const double c = expected_sinr_coefficient(i, x, inst, cap);
  return inst.weights[i] * std::log2(1.0 + x[i] * c) - inst.mu * x[i] * inst.bs_interference(i);
}

inline double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

/// Best response of link i in the exact game (stationary point of w log2(1 + x c) - mu x P g).
inline double br_exact(int i, const Vector& x, const LowerGameInstance& inst, int cap = kExactEnumerationCap) {
  if (inst.mu <= 0.0) return 1.0;
  const double c = expected_sinr_coefficient(i, x, inst, cap);
  return clamp01(inst.weights[i] / (inst.mu * inst.bs_interference(i) * std::numbers::ln2) - 1.0 / c);
}

namespace detail {

template <class Map>
LowerSolution iterate_synchronous(const Vector& x0, const IterationOptions& opt, Map&& f) {
  LowerSolution out;
  auto& tr = out.trace;
  Vector x = x0;
  tr.iterates.push_back(x);
  for (int t = 0; t < opt.max_iter; ++t) {
    Vector next = f(x);
    const double r = vector_norm(next - x, opt.norm);
    x = std::move(next);
    tr.iterates.push_back(x);
    tr.residuals.push_back(r);
    tr.iterations = t + 1;
    if (r < opt.eps) {
      tr.converged = true;
      break;
    }
  }
  out.state = classify(x);
  return out;
}

}  // namespace detail

/// Synchronous best-response map of the exact game.
inline Vector br_map(const Vector& x, const LowerGameInstance& inst, int cap = kExactEnumerationCap) {
  Vector next(x.size());
  for (int i = 0; i < inst.size(); ++i) next[i] = br_exact(i, x, inst, cap);
  return next;
}

/// BR Algorithm: synchronous fixed-point iteration of br_exact. Starts from
/// all-ones unless `x0` is supplied. Non-convergence is reported in the trace.
inline LowerSolution br_iterate(const LowerGameInstance& inst, std::optional<Vector> x0 = std::nullopt,
                                const IterationOptions& opt = {}, int cap = kExactEnumerationCap) {
  detail::check_exact_size(inst.size(), cap);
  const Vector start = x0 ? *x0 : Vector::Ones(inst.size());
  return detail::iterate_synchronous(start, opt, [&](const Vector& x) { return br_map(x, inst, cap); });
}

// ---------------------------------------------------------------------------
// Lower-bound (expected interference) game
// ---------------------------------------------------------------------------

/// s_i = sum_{j != i} x_j P_Dj h_ji.
inline double d2d_interference(int i, const Vector& x, const LowerGameInstance& inst) {
  double s = 0.0;
  for (int j = 0; j < inst.size(); ++j)
    if (j != i) s += x[j] * inst.power[j] * inst.h(i, j);
  return s;
}

/// SINR with interference replaced by its expectation.
inline double lb_sinr(int i, const Vector& x, const LowerGameInstance& inst) {
  return x[i] * inst.direct(i) / (d2d_interference(i, x, inst) + inst.i_c[i]);
}

/// Lower-bound utility w ln(1 + SINR') - mu x_i P_Di g_ii.
inline double lb_utility(int i, const Vector& x, const LowerGameInstance& inst) {
  return inst.weights[i] * std::log1p(lb_sinr(i, x, inst)) - inst.mu * x[i] * inst.bs_interference(i);
}

/// dU_i/dx_i of the lower-bound utility.
inline double lb_utility_derivative(int i, const Vector& x, const LowerGameInstance& inst) {
  const double total = x[i] * inst.direct(i) + d2d_interference(i, x, inst) + inst.i_c[i];
  return inst.weights[i] * inst.direct(i) / total - inst.mu * inst.bs_interference(i);
}

/// a_i = w_i h_ii / (mu g_ii) - I_Ci; +infinity at mu = 0.
inline double waterlevel(int i, const LowerGameInstance& inst) {
  if (inst.mu <= 0.0) return std::numeric_limits<double>::infinity();
  return inst.weights[i] * inst.h(i, i) / (inst.mu * inst.g[i]) - inst.i_c[i];
}

/// Closed-form waterfilling best response [(a_i - s_i) / (P_Di h_ii)]_0^1.
inline double lb_best_response(int i, const Vector& x, const LowerGameInstance& inst) {
  if (inst.mu <= 0.0) return 1.0;
  return clamp01((waterlevel(i, inst) - d2d_interference(i, x, inst)) / inst.direct(i));
}

/// f_L: synchronous lower-bound best-response map.
inline Vector lb_map(const Vector& x, const LowerGameInstance& inst) {
  Vector next(x.size());
  for (int i = 0; i < inst.size(); ++i) next[i] = lb_best_response(i, x, inst);
  return next;
}

/// LB Algorithm: x(0) = 1 (or `x0`), x(t+1) = f_L(x(t)) until the residual drops below eps.
inline LowerSolution lb_iterate(const LowerGameInstance& inst, const IterationOptions& opt = {},
                                std::optional<Vector> x0 = std::nullopt) {
  const Vector start = x0 ? *x0 : Vector::Ones(inst.size());
  return detail::iterate_synchronous(start, opt, [&](const Vector& x) { return lb_map(x, inst); });
}

/// M = B G for the region with the given labels: B_ii = -1/(P_Di h_ii) on active links, 0 elsewhere.
inline Matrix region_matrix(const std::vector<LinkState>& labels, const InterferenceCoupling& coupling,
                            const LowerGameInstance& inst) {
  const int n = inst.size();
  Matrix m = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    if (labels[i] == LinkState::active) m.row(i) = -coupling.g_mat.row(i) / inst.direct(i);
  return m;
}

/// Offset b of the affine piece f_L(x) = M x + b.
inline Vector region_offset(const std::vector<LinkState>& labels, const LowerGameInstance& inst) {
  const int n = inst.size();
  Vector b = Vector::Zero(n);
  for (int i = 0; i < n; ++i) {
    if (labels[i] == LinkState::active) b[i] = waterlevel(i, inst) / inst.direct(i);
    if (labels[i] == LinkState::saturated) b[i] = 1.0;
  }
  return b;
}

/// Labels of the affine piece of f_L containing x: the sign pattern of
/// a_i - s_i against 0 and P_Di h_ii.
inline std::vector<LinkState> region_of(const Vector& x, const LowerGameInstance& inst) {
  std::vector<LinkState> labels(inst.size());
  for (int i = 0; i < inst.size(); ++i) {
    const double gap = waterlevel(i, inst) - d2d_interference(i, x, inst);
    if (gap <= 0.0)
      labels[i] = LinkState::silent;
    else if (gap >= inst.direct(i))
      labels[i] = LinkState::saturated;
    else
      labels[i] = LinkState::active;
  }
  return labels;
}

struct ContractionCertificate {
  bool holds = false;
  double eta = 0.0;
};

/// Sufficient condition ||G|| < min_i P_Di h_ii; eta = ||G|| / min_i P_Di h_ii
/// bounds the per-iteration contraction of f_L in the chosen norm.
inline ContractionCertificate contraction_certificate(const InterferenceCoupling& coupling,
                                                      const LowerGameInstance& inst, Norm norm) {
  double min_direct = std::numeric_limits<double>::infinity();
  for (int i = 0; i < inst.size(); ++i) min_direct = std::min(min_direct, inst.direct(i));
  if (inst.size() == 0) return {true, 0.0};
  const double eta = induced_norm(coupling.g_mat, norm) / min_direct;
  return {eta < 1.0, eta};
}

}  // namespace d2d
