#pragma once

// Upper-stage price search on one RB. The BS picks mu to maximise
// min{U_c1, U_c2} = min{mu * sum x_i P_Di g_ii, mu * Q} where x = x*(mu) is
// the lower-game equilibrium. Three searches are provided: parametric
// principal pivoting on the LCP form of the lower-bound equilibrium (SPPP),
// bisection on the U_c1/U_c2 crossing, and the interference-ordering greedy.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "d2d/lower_game.hpp"

namespace d2d {

enum class PricingMethod { sppp, bisection, io, all_active };
enum class LowerSolver { lb, br };

inline const char* to_string(PricingMethod m) {
  switch (m) {
    case PricingMethod::sppp: return "sppp";
    case PricingMethod::bisection: return "bisection";
    case PricingMethod::io: return "io";
    case PricingMethod::all_active: return "all-active";
  }
  return "?";
}

inline const char* to_string(LowerSolver s) { return s == LowerSolver::lb ? "lb" : "br"; }

struct UpperInstance {
  LowerGameInstance lower;  // mu field ignored
  double q_tol = 0.0;
  double mu_max = 0.0;
  double eps_mu = 0.0;

  int size() const { return lower.size(); }

  void validate() const {
    lower.validate();
    if (!(q_tol > 0.0)) throw DomainError("UpperInstance: q_tol must be > 0");
    if (!(mu_max > 0.0)) throw DomainError("UpperInstance: mu_max must be > 0");
    if (!(eps_mu > 0.0)) throw DomainError("UpperInstance: eps_mu must be > 0");
  }

  /// Aggregate interference at the BS if every link transmits.
  double full_interference() const {
    double s = 0.0;
    for (int i = 0; i < size(); ++i) s += lower.bs_interference(i);
    return s;
  }

  /// All-active already respects Q: nothing to price.
  bool trivial() const { return full_interference() <= q_tol; }
};

/// Price above which every waterlevel a_i is negative.
inline double silencing_price(const LowerGameInstance& inst) {
  double m = 0.0;
  for (int i = 0; i < inst.size(); ++i)
    m = std::max(m, inst.weights[i] * inst.h(i, i) / (inst.g[i] * inst.i_c[i]));
  return m;
}

/// mu_max defaults to 10x the silencing price and eps_mu to mu_max * 1e-6.
inline UpperInstance make_upper_instance(LowerGameInstance lower, double q_tol, double mu_max = 0.0,
                                         double eps_mu = 0.0) {
  UpperInstance u;
  lower.mu = 0.0;
  u.lower = std::move(lower);
  u.q_tol = q_tol;
  u.mu_max = mu_max > 0.0 ? mu_max : 10.0 * silencing_price(u.lower);
  if (!(u.mu_max > 0.0)) u.mu_max = 1.0;
  u.eps_mu = eps_mu > 0.0 ? eps_mu : u.mu_max * 1e-6;
  u.validate();
  return u;
}

inline double bs_interference(const Vector& x, const LowerGameInstance& inst) {
  double s = 0.0;
  for (int i = 0; i < inst.size(); ++i) s += x[i] * inst.bs_interference(i);
  return s;
}

struct BisectionStep {
  double mu_l = 0.0, mu_u = 0.0, mu_m = 0.0;
  double uc1_l = 0.0, uc2_l = 0.0;  // at mu_l, before the update
  double uc1_u = 0.0, uc2_u = 0.0;  // at mu_u, before the update
  double uc1_m = 0.0, uc2_m = 0.0;
  int lower_iterations = 0;
};

struct CriticalPoint {
  double nu = 0.0;
  double mu = 0.0;  // +inf at nu = 0
  Vector y;         // [x; t]
  Vector z;         // A y + q + nu d
  double utility = 0.0;
};

struct PricingOutcome {
  double mu_star = 0.0;
  AllocationState x_star;
  double u_c1 = 0.0;
  double u_c2 = 0.0;
  double interference = 0.0;
  int iterations = 0;
  PricingMethod method = PricingMethod::bisection;
  bool trivial = false;
  bool lower_converged = true;
  std::vector<BisectionStep> bisection_steps;
  std::vector<CriticalPoint> critical_points;

  double utility() const { return std::min(u_c1, u_c2); }
};

struct UcEval {
  double u_c1 = 0.0;
  double u_c2 = 0.0;
  LowerSolution lower;
};

struct LowerSolverOptions {
  LowerSolver solver = LowerSolver::lb;
  IterationOptions iteration{};
};

inline LowerSolution solve_lower(const LowerGameInstance& inst, const LowerSolverOptions& opt) {
  return opt.solver == LowerSolver::lb ? lb_iterate(inst, opt.iteration) : br_iterate(inst, std::nullopt, opt.iteration);
}

/// U_c1 and U_c2 at price mu, with the lower equilibrium x*(mu).
inline UcEval eval_uc(double mu, const UpperInstance& inst, const LowerSolverOptions& opt = {}) {
  if (!(mu >= 0.0)) throw DomainError("eval_uc: mu must be >= 0");
  UcEval out;
  out.lower = solve_lower(inst.lower.with_price(mu), opt);
  out.u_c1 = mu * bs_interference(out.lower.state.x, inst.lower);
  out.u_c2 = mu * inst.q_tol;
  return out;
}

namespace detail {

inline PricingOutcome fixed_outcome(const UpperInstance& inst, const Vector& x, double mu, PricingMethod m) {
  PricingOutcome out;
  out.method = m;
  out.mu_star = mu;
  out.x_star = classify(x);
  out.interference = bs_interference(x, inst.lower);
  out.u_c1 = mu * out.interference;
  out.u_c2 = mu * inst.q_tol;
  return out;
}

inline PricingOutcome trivial_outcome(const UpperInstance& inst, PricingMethod m) {
  auto out = fixed_outcome(inst, Vector::Ones(inst.size()), 0.0, m);
  out.trivial = true;
  return out;
}

}  // namespace detail

inline PricingOutcome all_active_outcome(const UpperInstance& inst) {
  return detail::fixed_outcome(inst, Vector::Ones(inst.size()), 0.0, PricingMethod::all_active);
}

// ---------------------------------------------------------------------------
// Bisection
// ---------------------------------------------------------------------------

/// Bisection on the crossing of U_c1 and U_c2. The bracket [mu_l, mu_u]
/// keeps U_c1 >= U_c2 at mu_l and U_c1 <= U_c2 at mu_u; the loop stops once
/// its width is at most eps_mu, so it runs at most ceil(log2(mu_max/eps_mu))
/// times. The returned price is mu_u, which is on the feasible side.
inline PricingOutcome bisection_price(const UpperInstance& inst, const LowerSolverOptions& opt = {}) {
  if (inst.trivial()) return detail::trivial_outcome(inst, PricingMethod::bisection);

  double lo = 0.0;
  double hi = inst.mu_max;
  UcEval at_lo{0.0, 0.0, {}};
  UcEval at_hi = eval_uc(hi, inst, opt);
  PricingOutcome out;
  out.method = PricingMethod::bisection;
  while (hi - lo > inst.eps_mu) {
    BisectionStep step;
    step.mu_l = lo;
    step.mu_u = hi;
    step.uc1_l = at_lo.u_c1;
    step.uc2_l = at_lo.u_c2;
    step.uc1_u = at_hi.u_c1;
    step.uc2_u = at_hi.u_c2;
    step.mu_m = 0.5 * (lo + hi);
    UcEval mid = eval_uc(step.mu_m, inst, opt);
    step.uc1_m = mid.u_c1;
    step.uc2_m = mid.u_c2;
    step.lower_iterations = mid.lower.trace.iterations;
    out.bisection_steps.push_back(step);
    if (mid.u_c1 <= mid.u_c2) {
      hi = step.mu_m;
      at_hi = std::move(mid);
    } else {
      lo = step.mu_m;
      at_lo = std::move(mid);
    }
  }
  out.iterations = static_cast<int>(out.bisection_steps.size());
  out.mu_star = hi;
  out.x_star = at_hi.lower.state;
  out.lower_converged = at_hi.lower.trace.converged;
  out.interference = bs_interference(out.x_star.x, inst.lower);
  out.u_c1 = at_hi.u_c1;
  out.u_c2 = at_hi.u_c2;
  return out;
}

/// Upper bound on bisection iterations.
inline int bisection_iteration_bound(const UpperInstance& inst) {
  return static_cast<int>(std::ceil(std::log2(inst.mu_max / inst.eps_mu)));
}

// ---------------------------------------------------------------------------
// Interference ordering greedy
// ---------------------------------------------------------------------------

/// Turns links fully on in ascending order of P_Di g_ii while the prefix sum
/// stays within Q; the rest stay silent. No price is involved.
inline PricingOutcome io_greedy(const UpperInstance& inst) {
  const int n = inst.size();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return inst.lower.bs_interference(a) < inst.lower.bs_interference(b);
  });
  Vector x = Vector::Zero(n);
  double total = 0.0;
  for (int i : order) {
    const double next = total + inst.lower.bs_interference(i);
    if (next > inst.q_tol) break;
    total = next;
    x[i] = 1.0;
  }
  return detail::fixed_outcome(inst, x, 0.0, PricingMethod::io);
}

// ---------------------------------------------------------------------------
// Parametric LCP
// ---------------------------------------------------------------------------

/// 0 <= y  _|_  A y + q + nu d >= 0 with y = [x; t].
struct LcpInstance {
  Matrix a_mat;
  Vector q_vec;
  Vector d_vec;
  double nu = 0.0;
  double nu_bar = 0.0;

  int size() const { return static_cast<int>(q_vec.size()); }
  int links() const { return size() / 2; }

  Vector slack(const Vector& y, double at_nu) const { return a_mat * y + q_vec + at_nu * d_vec; }
};

inline LcpInstance build_lcp(const UpperInstance& inst) {
  const auto& lg = inst.lower;
  const int n = lg.size();
  LcpInstance lcp;
  lcp.a_mat = Matrix::Zero(2 * n, 2 * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) lcp.a_mat(i, j) = lg.power[j] * lg.h(i, j);
  lcp.a_mat.topRightCorner(n, n) = Matrix::Identity(n, n);
  lcp.a_mat.bottomLeftCorner(n, n) = -Matrix::Identity(n, n);
  lcp.q_vec.resize(2 * n);
  lcp.d_vec = Vector::Zero(2 * n);
  for (int i = 0; i < n; ++i) {
    lcp.q_vec[i] = lg.i_c[i];
    lcp.q_vec[n + i] = 1.0;
    lcp.d_vec[i] = -lg.weights[i] * lg.h(i, i) / lg.g[i];
  }
  const double mu_min = 1e-12 * inst.mu_max;
  lcp.nu_bar = 1.0 / mu_min;
  return lcp;
}

/// Dictionary of the LCP for a complementary basis: the basic variable of
/// every index k (y_k if `y_basic[k]`, else z_k) equals
/// q[k] + nu * d[k] + sum_j m(k, j) * (nonbasic variable j).
struct LcpTableau {
  std::vector<bool> y_basic;
  Matrix m;
  Vector q;
  Vector d;

  Vector values(double nu) const { return q + nu * d; }

  /// (y, z) of the basic solution at nu.
  std::pair<Vector, Vector> solution(double nu) const {
    const Vector v = values(nu);
    Vector y = Vector::Zero(v.size()), z = Vector::Zero(v.size());
    for (Eigen::Index k = 0; k < v.size(); ++k) (y_basic[k] ? y : z)[k] = v[k];
    return {y, z};
  }
};

/// Principal pivot transform of (A, q, d) on the set of indices whose y is basic.
inline LcpTableau make_tableau(const LcpInstance& lcp, const std::vector<bool>& y_basic) {
  const int n = lcp.size();
  std::vector<int> alpha, beta;
  for (int k = 0; k < n; ++k) (y_basic[k] ? alpha : beta).push_back(k);
  const int na = static_cast<int>(alpha.size()), nb = static_cast<int>(beta.size());
  auto sub = [&](const std::vector<int>& r, const std::vector<int>& c) {
    Matrix s(r.size(), c.size());
    for (std::size_t i = 0; i < r.size(); ++i)
      for (std::size_t j = 0; j < c.size(); ++j) s(i, j) = lcp.a_mat(r[i], c[j]);
    return s;
  };
  auto subv = [](const Vector& v, const std::vector<int>& r) {
    Vector s(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) s[i] = v[r[i]];
    return s;
  };
  LcpTableau t;
  t.y_basic = y_basic;
  t.m = Matrix::Zero(n, n);
  t.q = Vector::Zero(n);
  t.d = Vector::Zero(n);
  if (na == 0) {
    t.m = lcp.a_mat;
    t.q = lcp.q_vec;
    t.d = lcp.d_vec;
    return t;
  }
  const Matrix aaa = sub(alpha, alpha);
  Eigen::FullPivLU<Matrix> lu(aaa);
  if (!lu.isInvertible()) throw DegenerateError("LCP principal block is singular");
  const Matrix inv = lu.inverse();
  const Matrix aab = sub(alpha, beta), aba = sub(beta, alpha), abb = sub(beta, beta);
  const Vector qa = subv(lcp.q_vec, alpha), qb = subv(lcp.q_vec, beta);
  const Vector da = subv(lcp.d_vec, alpha), db = subv(lcp.d_vec, beta);
  // Nonbasic ordering matches the index ordering: z_alpha and y_beta.
  const Matrix m_aa = inv, m_ab = -inv * aab, m_ba = aba * inv, m_bb = abb - aba * inv * aab;
  const Vector q_a = -inv * qa, q_b = qb - aba * inv * qa;
  const Vector d_a = -inv * da, d_b = db - aba * inv * da;
  for (int i = 0; i < na; ++i) {
    t.q[alpha[i]] = q_a[i];
    t.d[alpha[i]] = d_a[i];
    for (int j = 0; j < na; ++j) t.m(alpha[i], alpha[j]) = m_aa(i, j);
    for (int j = 0; j < nb; ++j) t.m(alpha[i], beta[j]) = m_ab(i, j);
  }
  for (int i = 0; i < nb; ++i) {
    t.q[beta[i]] = q_b[i];
    t.d[beta[i]] = d_b[i];
    for (int j = 0; j < na; ++j) t.m(beta[i], alpha[j]) = m_ba(i, j);
    for (int j = 0; j < nb; ++j) t.m(beta[i], beta[j]) = m_bb(i, j);
  }
  return t;
}

/// Exchanges basic and nonbasic variables on the index set `alpha` (size 1
/// or 2) of an existing tableau, in place.
inline void pivot_tableau(LcpTableau& t, const std::vector<int>& alpha) {
  const int n = static_cast<int>(t.q.size());
  const int na = static_cast<int>(alpha.size());
  Matrix block(na, na);
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < na; ++j) block(i, j) = t.m(alpha[i], alpha[j]);
  Eigen::FullPivLU<Matrix> lu(block);
  if (!lu.isInvertible()) throw DegenerateError("LCP pivot block is singular");
  const Matrix inv = lu.inverse();
  std::vector<bool> in_alpha(n, false);
  for (int k : alpha) in_alpha[k] = true;

  Matrix rows_a(na, n);  // M_alpha,*
  Vector qa(na), da(na);
  for (int i = 0; i < na; ++i) {
    rows_a.row(i) = t.m.row(alpha[i]);
    qa[i] = t.q[alpha[i]];
    da[i] = t.d[alpha[i]];
  }
  Matrix cols_a(n, na);  // M_*,alpha
  for (int j = 0; j < na; ++j) cols_a.col(j) = t.m.col(alpha[j]);

  const Matrix inv_rows = inv * rows_a;  // M_aa^{-1} M_a*
  const Vector inv_q = inv * qa, inv_d = inv * da;
  Matrix m = t.m;
  Vector q = t.q, d = t.d;
  for (int k = 0; k < n; ++k) {
    if (in_alpha[k]) continue;
    const Eigen::RowVectorXd c = cols_a.row(k);  // M_k,alpha
    m.row(k) -= c * inv_rows;
    q[k] -= (c * inv_q)(0);
    d[k] -= (c * inv_d)(0);
    for (int j = 0; j < na; ++j) m(k, alpha[j]) = (c * inv.col(j))(0);
  }
  for (int i = 0; i < na; ++i) {
    m.row(alpha[i]) = -inv_rows.row(i);
    q[alpha[i]] = -inv_q[i];
    d[alpha[i]] = -inv_d[i];
    for (int j = 0; j < na; ++j) m(alpha[i], alpha[j]) = inv(i, j);
  }
  t.m = std::move(m);
  t.q = std::move(q);
  t.d = std::move(d);
  for (int k : alpha) t.y_basic[k] = !t.y_basic[k];
}

namespace detail {

inline std::string basis_string(const std::vector<bool>& b) {
  std::string s;
  for (bool v : b) s += v ? 'y' : 'z';
  return s;
}

/// Basic solution for `y_basic` at nu, solved afresh from the LCP data with
/// one step of iterative refinement rather than read off a pivoted tableau.
inline std::pair<Vector, Vector> basic_solution(const LcpInstance& lcp, const std::vector<bool>& y_basic, double nu) {
  const int n = lcp.size();
  std::vector<int> alpha;
  for (int k = 0; k < n; ++k)
    if (y_basic[k]) alpha.push_back(k);
  const Vector rhs = lcp.q_vec + nu * lcp.d_vec;
  Vector y = Vector::Zero(n);
  if (!alpha.empty()) {
    const int na = static_cast<int>(alpha.size());
    Matrix sub(na, na);
    Vector b(na);
    for (int i = 0; i < na; ++i) {
      b[i] = -rhs[alpha[i]];
      for (int j = 0; j < na; ++j) sub(i, j) = lcp.a_mat(alpha[i], alpha[j]);
    }
    Eigen::FullPivLU<Matrix> lu(sub);
    Vector ya = lu.solve(b);
    ya += lu.solve(b - sub * ya);
    for (int i = 0; i < na; ++i) y[alpha[i]] = ya[i];
  }
  Vector z = lcp.a_mat * y + rhs;
  for (int k : alpha) z[k] = 0.0;
  return {y, z};
}

inline double beta_dot_x(const Vector& v, const LcpTableau& t, const LowerGameInstance& lg) {
  double s = 0.0;
  for (int i = 0; i < lg.size(); ++i)
    if (t.y_basic[i]) s += lg.bs_interference(i) * v[i];
  return s;
}

}  // namespace detail

/// Symmetric parametric principal pivoting on nu = 1/mu.
///
/// Starting from y = 0 at nu = 0 (mu = infinity, every link silent), the
/// basic solution q(tau) + nu d(tau) is followed until a basic variable hits
/// zero at the next critical value; then that index is exchanged with a
/// single principal pivot when its diagonal entry is nonzero, or with a
/// double pivot against the min-ratio blocking variable when it is zero.
/// A negative diagonal means the solution path folds back, so nu is then
/// followed downwards until the next critical value turns it again.
/// Between critical values x(nu) is affine, so U_c1 is affine in mu and the
/// best point on each segment is either its end or its crossing with U_c2;
/// both are scored. The walk ends at nu_bar. A (nu, y, z) record is kept at
/// every critical value, taken right after the pivot.
inline PricingOutcome sppp_solve(const LcpInstance& original, const UpperInstance& inst) {
  if (inst.trivial()) return detail::trivial_outcome(inst, PricingMethod::sppp);
  const auto& lg = inst.lower;
  const int n = lg.size();
  const int dim = original.size();
  if (dim != 2 * n) throw DomainError("sppp_solve: LCP and instance sizes differ");
  constexpr double kPivotTol = 1e-12;

  // Pivot on a copy where link i's row is divided by P_Di h_ii and t_i is
  // measured in the same unit; raw entries span many orders of magnitude.
  Vector scale = Vector::Ones(n);
  for (int i = 0; i < n; ++i)
    if (original.a_mat(i, i) > 0.0) scale[i] = original.a_mat(i, i);
  LcpInstance lcp = original;
  for (int i = 0; i < n; ++i) {
    lcp.a_mat.row(i) /= scale[i];
    lcp.a_mat.col(n + i) *= scale[i];
    lcp.q_vec[i] /= scale[i];
    lcp.d_vec[i] /= scale[i];
  }
  const double d_tol = kPivotTol * std::max(1.0, lcp.d_vec.cwiseAbs().maxCoeff());
  const int max_pivots = 50 * std::max(dim, 1) + 100;

  PricingOutcome out;
  out.method = PricingMethod::sppp;
  double best_u = 0.0;
  double best_mu = 0.0;
  Vector best_x = Vector::Ones(n);  // placeholder, replaced by the first scored point

  auto x_of = [&](const LcpTableau& t, double nu) {
    const Vector v = t.values(nu);
    Vector x = Vector::Zero(n);
    for (int i = 0; i < n; ++i)
      if (t.y_basic[i]) x[i] = std::clamp(v[i], 0.0, 1.0);
    return x;
  };
  bool have_best = false;
  auto score = [&](double mu, const Vector& x) {
    const double u = std::min(mu * bs_interference(x, lg), mu * inst.q_tol);
    if (!have_best || u > best_u) {
      have_best = true;
      best_u = u;
      best_mu = mu;
      best_x = x;
    }
  };

  std::vector<bool> basis(dim, false);
  double nu = 0.0;
  double dir = 1.0;  // +1 while nu increases along the path, -1 on a fold
  std::set<std::string> seen_at_nu;
  int pivots = 0;
  auto record = [&](const LcpTableau& t, double at_nu) {
    CriticalPoint cp;
    cp.nu = at_nu;
    cp.mu = at_nu > 0.0 ? 1.0 / at_nu : std::numeric_limits<double>::infinity();
    auto [y, z] = detail::basic_solution(lcp, t.y_basic, at_nu);
    for (int i = 0; i < n; ++i) {
      y[n + i] *= scale[i];
      z[i] *= scale[i];
    }
    cp.y = std::move(y);
    cp.z = std::move(z);
    const Vector x = x_of(t, at_nu);
    cp.utility = at_nu > 0.0 ? std::min(cp.mu * bs_interference(x, lg), cp.mu * inst.q_tol) : 0.0;
    out.critical_points.push_back(std::move(cp));
  };
  auto fail = [&](const std::string& what) {
    std::ostringstream msg;
    msg << "SPPP: " << what << " at nu=" << nu << " (basis " << detail::basis_string(basis) << ")";
    throw DegenerateError(msg.str());
  };

  LcpTableau tab = make_tableau(lcp, basis);
  record(tab, nu);
  seen_at_nu.insert(detail::basis_string(basis));
  while (true) {
    // Next critical value in the current direction.
    double next = dir > 0 ? lcp.nu_bar : 0.0;
    int r = -1;
    for (int k = 0; k < dim; ++k) {
      if (dir * tab.d[k] < -d_tol) {
        const double crit = -tab.q[k] / tab.d[k];
        const double step = std::max(0.0, dir * (crit - nu));
        if (step < dir * (next - nu)) {
          next = nu + dir * step;
          r = k;
        }
      }
    }
    // Score the segment between nu and next: its far end and any U_c1 = U_c2 crossing.
    {
      const double lo = std::min(nu, next), hi = std::max(nu, next);
      const double bq = detail::beta_dot_x(tab.q, tab, lg);
      const double bd = detail::beta_dot_x(tab.d, tab, lg);
      const double mu_lo = hi > 0.0 ? 1.0 / hi : std::numeric_limits<double>::infinity();
      const double mu_hi = lo > 0.0 ? 1.0 / lo : std::numeric_limits<double>::infinity();
      if (next > 0.0) score(1.0 / next, x_of(tab, next));
      const double denom = bq - inst.q_tol;
      if (denom != 0.0) {
        const double mu_cross = -bd / denom;
        if (mu_cross > mu_lo && mu_cross < mu_hi) score(mu_cross, x_of(tab, 1.0 / mu_cross));
      }
    }
    if (r < 0) {
      if (dir < 0) fail("solution path returned to nu = 0");
      nu = lcp.nu_bar;
      record(tab, nu);
      break;
    }
    if (next != nu) seen_at_nu.clear();
    nu = next;
    const double diag = tab.m(r, r);
    if (std::abs(diag) > kPivotTol) {
      basis[r] = !basis[r];
      pivot_tableau(tab, {r});
    } else {
      // Drive the nonbasic variable of r; the first basic variable to reach zero blocks.
      const Vector v = tab.values(nu);
      int s = -1;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (int k = 0; k < dim; ++k) {
        if (k == r || tab.m(k, r) >= -kPivotTol) continue;
        const double ratio = std::max(0.0, v[k]) / -tab.m(k, r);
        if (ratio < best_ratio) {
          best_ratio = ratio;
          s = k;
        }
      }
      if (s < 0) fail("unblocked driving variable " + std::to_string(r));
      basis[r] = !basis[r];
      basis[s] = !basis[s];
      pivot_tableau(tab, {r, s});
    }
    // The variable that just entered at r must grow along the continued path.
    if (std::abs(tab.d[r]) > d_tol) dir = tab.d[r] > 0.0 ? 1.0 : -1.0;
    if (++pivots > max_pivots) throw CyclingError("SPPP: pivot budget exhausted");
    if (!seen_at_nu.insert(detail::basis_string(basis)).second) {
      throw CyclingError("SPPP: basis " + detail::basis_string(basis) + " revisited at nu=" + std::to_string(nu));
    }
    record(tab, nu);
  }

  out.iterations = pivots;
  out.mu_star = best_mu;
  out.x_star = classify(best_x);
  out.interference = bs_interference(best_x, lg);
  out.u_c1 = best_mu * out.interference;
  out.u_c2 = best_mu * inst.q_tol;
  return out;
}

inline PricingOutcome sppp_solve(const UpperInstance& inst) { return sppp_solve(build_lcp(inst), inst); }

// ---------------------------------------------------------------------------
// Structure of U_c1
// ---------------------------------------------------------------------------

struct MonotonicityCertificate {
  bool coupling_condition = false;    // sum_{j != i} (h_ij / h_jj) g_jj < g_ii for all i
  bool saturated_condition = false;   // saturated links' interference condition on every active link
  bool holds() const { return coupling_condition && saturated_condition; }
};

/// Sufficient conditions for U_c1 to be non-increasing on the region of
/// `labels` (with a non-empty active set).
inline MonotonicityCertificate monotonicity_certificate(const UpperInstance& inst,
                                                        const std::vector<LinkState>& labels) {
  const auto& lg = inst.lower;
  const int n = lg.size();
  MonotonicityCertificate c;
  c.coupling_condition = true;
  for (int i = 0; i < n && c.coupling_condition; ++i) {
    double s = 0.0;
    for (int j = 0; j < n; ++j)
      if (j != i) s += lg.h(j, i) / lg.h(j, j) * lg.g[j];
    c.coupling_condition = s < lg.g[i];
  }
  c.saturated_condition = true;
  int first = -1;
  for (int i = 0; i < n; ++i)
    if (labels[i] == LinkState::active) {
      first = i;
      break;
    }
  if (first < 0) return c;
  for (int i = 0; i < n && c.saturated_condition; ++i) {
    if (labels[i] != LinkState::active) continue;
    double s = 0.0;
    for (int j = 0; j < n; ++j)
      if (labels[j] == LinkState::saturated) s += lg.power[j] * (lg.h(i, j) - lg.h(i, first) / lg.g[first] * lg.g[j]);
    c.saturated_condition = s >= 0.0;
  }
  return c;
}

struct AffineForm {
  double slope = 0.0;
  double intercept = 0.0;
  double operator()(double mu) const { return intercept + slope * mu; }
};

/// U_c1(mu) = intercept + slope * mu on the region with the given labels:
/// x_a = H_aa^{-1} (W_a / mu - C_a), x_s = 1, x_0 = 0.
inline AffineForm uc1_region_form(const std::vector<LinkState>& labels, const UpperInstance& inst) {
  const auto& lg = inst.lower;
  const int n = lg.size();
  std::vector<int> act, sat;
  for (int i = 0; i < n; ++i) {
    if (labels[i] == LinkState::active) act.push_back(i);
    if (labels[i] == LinkState::saturated) sat.push_back(i);
  }
  AffineForm f;
  for (int j : sat) f.slope += lg.bs_interference(j);
  if (act.empty()) return f;
  const int na = static_cast<int>(act.size());
  Matrix h_aa(na, na);
  Vector w_a(na), c_a(na), beta_a(na);
  for (int r = 0; r < na; ++r) {
    const int i = act[r];
    for (int c = 0; c < na; ++c) h_aa(r, c) = lg.power[act[c]] * lg.h(i, act[c]) / lg.direct(i);
    double i_d = 0.0;
    for (int j : sat) i_d += lg.power[j] * lg.h(i, j);
    w_a[r] = lg.weights[i] / lg.bs_interference(i);
    c_a[r] = (lg.i_c[i] + i_d) / lg.direct(i);
    beta_a[r] = lg.bs_interference(i);
  }
  Eigen::FullPivLU<Matrix> lu(h_aa);
  if (!lu.isInvertible()) throw DegenerateError("uc1_region_form: H_aa is singular");
  const Vector bh = lu.transpose().solve(beta_a);  // H_aa^{-T} beta_a
  f.intercept = bh.dot(w_a);
  f.slope -= bh.dot(c_a);
  return f;
}

}  // namespace d2d
