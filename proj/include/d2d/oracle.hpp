#pragma once

// Brute-force references for small single-RB instances. Everything here is
// exponential in N_D and sits behind explicit size guards; solvers never call it.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "d2d/lower_game.hpp"
#include "d2d/upper_pricing.hpp"

namespace d2d::oracle {

struct GridSpec {
  int points_per_dim = 21;
  int dims = 0;
  std::uint64_t budget = 10'000'000;

  std::uint64_t total_points() const {
    std::uint64_t t = 1;
    for (int d = 0; d < dims; ++d) {
      t *= static_cast<std::uint64_t>(points_per_dim);
      if (t > budget) return t;
    }
    return t;
  }
};

struct SingleStageOptimum {
  Vector x_opt;
  double objective = 0.0;
  std::uint64_t feasible_points = 0;
};

/// Sum of weighted expected rates (bits/s/Hz) at x.
inline double total_expected_rate(const Vector& x, const LowerGameInstance& inst) {
  double s = 0.0;
  for (int i = 0; i < inst.size(); ++i) s += inst.weights[i] * expected_rate_exact(i, x, inst);
  return s;
}

/// Exhaustive grid search of the single-stage problem: maximise the weighted
/// expected rate subject to sum x_i P_Di g_ii <= Q. Q is read directly from
/// `inst.q_tol` (zero is allowed).
inline SingleStageOptimum brute_force_single_stage(const UpperInstance& inst, GridSpec grid = {}) {
  const auto& lg = inst.lower;
  const int n = lg.size();
  grid.dims = n;
  if (grid.points_per_dim < 2) throw DomainError("GridSpec: points_per_dim must be >= 2");
  if (grid.total_points() > grid.budget)
    throw SizeError("brute_force_single_stage: grid of " + std::to_string(grid.points_per_dim) + "^" +
                    std::to_string(n) + " points exceeds budget");
  const int m = grid.points_per_dim;
  const double step = 1.0 / (m - 1);
  SingleStageOptimum best;
  best.x_opt = Vector::Zero(n);
  best.objective = -1.0;
  std::vector<int> idx(n, 0);
  Vector x = Vector::Zero(n);
  while (true) {
    for (int i = 0; i < n; ++i) x[i] = idx[i] * step;
    if (bs_interference(x, lg) <= inst.q_tol) {
      ++best.feasible_points;
      const double obj = total_expected_rate(x, lg);
      if (obj > best.objective) {
        best.objective = obj;
        best.x_opt = x;
      }
    }
    int d = 0;
    while (d < n && ++idx[d] == m) idx[d++] = 0;
    if (d == n) break;
  }
  if (best.objective < 0.0) best.objective = 0.0;
  return best;
}

struct LcpSolution {
  Vector y;
  Vector z;
};

/// Every solution of 0 <= y _|_ A y + q + nu d >= 0 obtained from one of the
/// 2^(2 N_D) complementary bases. Singular bases are skipped.
inline std::vector<LcpSolution> brute_force_lcp(const LcpInstance& lcp, double nu, double tol = 1e-9) {
  const int dim = lcp.size();
  if (dim > 12) throw SizeError("brute_force_lcp: dimension above 12");
  const Vector rhs = lcp.q_vec + nu * lcp.d_vec;
  const double scale = std::max(1.0, rhs.cwiseAbs().maxCoeff());
  std::vector<LcpSolution> out;
  for (std::uint32_t mask = 0; mask < (1u << dim); ++mask) {
    std::vector<int> alpha;
    for (int k = 0; k < dim; ++k)
      if (mask & (1u << k)) alpha.push_back(k);
    Vector y = Vector::Zero(dim);
    if (!alpha.empty()) {
      const int na = static_cast<int>(alpha.size());
      Matrix sub(na, na);
      Vector r(na);
      for (int i = 0; i < na; ++i) {
        r[i] = -rhs[alpha[i]];
        for (int j = 0; j < na; ++j) sub(i, j) = lcp.a_mat(alpha[i], alpha[j]);
      }
      Eigen::FullPivLU<Matrix> lu(sub);
      if (!lu.isInvertible()) continue;
      const Vector ya = lu.solve(r);
      for (int i = 0; i < na; ++i) y[alpha[i]] = ya[i];
    }
    const Vector z = lcp.a_mat * y + rhs;
    if (y.minCoeff() < -tol * std::max(1.0, y.cwiseAbs().maxCoeff())) continue;
    if (z.minCoeff() < -tol * scale) continue;
    out.push_back({y, z});
  }
  return out;
}

enum class UtilityKind { exact, lower_bound };

struct NeCheck {
  bool is_ne = false;
  double max_gain = 0.0;
  int worst_link = -1;
};

/// Scans each link's utility over `grid_points` values in [0, 1] with the
/// others held fixed and reports the largest unilateral improvement.
inline NeCheck verify_ne(const Vector& x, const LowerGameInstance& inst, UtilityKind kind, int grid_points = 101,
                         double tol = 1e-9) {
  if (grid_points < 2) throw DomainError("verify_ne: need at least two grid points");
  auto utility = [&](int i, const Vector& v) {
    return kind == UtilityKind::exact ? exact_utility(i, v, inst) : lb_utility(i, v, inst);
  };
  NeCheck out;
  for (int i = 0; i < inst.size(); ++i) {
    const double base = utility(i, x);
    Vector v = x;
    for (int k = 0; k < grid_points; ++k) {
      v[i] = static_cast<double>(k) / (grid_points - 1);
      const double gain = utility(i, v) - base;
      if (gain > out.max_gain) {
        out.max_gain = gain;
        out.worst_link = i;
      }
    }
  }
  out.is_ne = out.max_gain <= tol;
  return out;
}

struct McEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

/// Monte Carlo estimate of link i's expected rate from Bernoulli(x) activation patterns.
inline McEstimate mc_expected_rate(int i, const Vector& x, const LowerGameInstance& inst, int samples,
                                   std::uint64_t seed) {
  if (samples < 1000) throw DomainError("mc_expected_rate: need at least 1000 samples");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = inst.size();
  double sum = 0.0, sum_sq = 0.0;
  for (int s = 0; s < samples; ++s) {
    double interference = 0.0;
    bool self_on = false;
    for (int j = 0; j < n; ++j) {
      const bool on = unit(rng) < x[j];
      if (j == i)
        self_on = on;
      else if (on)
        interference += inst.power[j] * inst.h(i, j);
    }
    const double r = self_on ? std::log2(1.0 + inst.direct(i) / (interference + inst.i_c[i])) : 0.0;
    sum += r;
    sum_sq += r * r;
  }
  McEstimate out;
  out.estimate = sum / samples;
  const double var = std::max(0.0, sum_sq / samples - out.estimate * out.estimate);
  out.std_error = std::sqrt(var / (samples - 1));
  return out;
}

}  // namespace d2d::oracle
