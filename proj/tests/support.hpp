#pragma once

#include <cstdint>
#include <random>

#include "d2d/d2d.hpp"

namespace testing_support {

using d2d::Matrix;
using d2d::Vector;

/// Random lower-stage instance with unit-scale gains. `cross` scales the
/// off-diagonal gains relative to the direct ones.
inline d2d::LowerGameInstance random_instance(std::mt19937_64& rng, int n, double cross = 0.3, double mu = 0.0) {
  std::uniform_real_distribution<double> u(0.2, 1.0);
  d2d::LowerGameInstance inst;
  inst.weights = Vector::Ones(n);
  inst.mu = mu;
  inst.h.resize(n, n);
  inst.g.resize(n);
  inst.power.resize(n);
  inst.i_c.resize(n);
  for (int i = 0; i < n; ++i) {
    inst.power[i] = u(rng);
    inst.g[i] = 0.1 * u(rng);
    inst.i_c[i] = 0.05 * u(rng);
    for (int j = 0; j < n; ++j) inst.h(i, j) = i == j ? 1.0 + u(rng) : cross * u(rng);
  }
  return inst;
}

inline Vector random_x(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector x(n);
  for (int i = 0; i < n; ++i) x[i] = u(rng);
  return x;
}

/// Pricing instance drawn from the physical model (single cell, one cellular UE).
inline d2d::UpperInstance physical_instance(int n, std::uint64_t seed, double q_tol_db = 0.0) {
  d2d::mc::ScenarioConfig cfg;
  cfg.q_tol_db = q_tol_db;
  const auto p = d2d::mc::random_rb_problem(cfg, n, seed);
  return d2d::make_upper_instance(d2d::make_lower_instance(p.ch, p.pw), p.q_tol);
}

/// Like physical_instance, but skips seeds whose instance is trivially feasible.
inline d2d::UpperInstance nontrivial_instance(int n, std::uint64_t& seed, double q_tol_db = 0.0) {
  while (true) {
    auto inst = physical_instance(n, seed++, q_tol_db);
    if (!inst.trivial()) return inst;
  }
}

}  // namespace testing_support
