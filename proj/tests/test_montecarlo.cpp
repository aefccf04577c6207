#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "d2d/d2d.hpp"

using namespace d2d;
using namespace d2d::mc;

namespace {

int nearest_bs(Position p, const std::vector<Position>& bs) {
  int best = 0;
  for (int b = 1; b < static_cast<int>(bs.size()); ++b)
    if (distance(p, bs[b]) < distance(p, bs[best])) best = b;
  return best;
}

std::vector<Method> methods(std::initializer_list<const char*> labels) {
  std::vector<Method> out;
  for (const char* l : labels) out.push_back(Method::parse(l));
  return out;
}

}  // namespace

TEST(Config, DefaultsAndValidation) {
  ScenarioConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  // One BS per pi * 500^2 m^2.
  EXPECT_NEAR(3.0 * std::sqrt(3.0) / 2.0 * cfg.cell_radius() * cfg.cell_radius(), std::numbers::pi * 250000.0, 1e-6);
  EXPECT_EQ(cfg.subbands, 10);
  EXPECT_EQ(cfg.d2d_mean_length, 80.0);
  cfg.mode_select_weight = 0.0;
  EXPECT_THROW(cfg.validate(), DomainError);
  cfg = ScenarioConfig{};
  cfg.d2d_density = -1.0;
  EXPECT_THROW(cfg.validate(), DomainError);
}

TEST(Layout, CentralCellPlusRing) {
  ScenarioConfig cfg;
  const auto bs = hexagonal_bs_layout(cfg);
  ASSERT_EQ(bs.size(), 7u);
  for (std::size_t b = 1; b < 7; ++b) EXPECT_NEAR(distance(bs[0], bs[b]), cfg.inter_site_distance(), 1e-9);
  cfg.multi_cell = false;
  EXPECT_EQ(hexagonal_bs_layout(cfg).size(), 1u);
}

TEST(Scenario, ZeroDensityGivesEmptySets) {
  ScenarioConfig cfg;
  cfg.cellular_density = 0.0;
  cfg.d2d_density = 0.0;
  const auto sc = generate_scenario(cfg, 3);
  EXPECT_TRUE(sc.cellular.empty());
  EXPECT_TRUE(sc.d2d.empty());
  for (const auto& cell : sc.rb_owner)
    for (int o : cell) EXPECT_EQ(o, -1);
}

TEST(Scenario, SameSeedSameSnapshot) {
  ScenarioConfig cfg;
  const auto a = generate_scenario(cfg, 11);
  const auto b = generate_scenario(cfg, 11);
  const auto c = generate_scenario(cfg, 12);
  EXPECT_EQ(a.h, b.h);
  EXPECT_EQ(a.g, b.g);
  EXPECT_EQ(a.rb_owner, b.rb_owner);
  const bool same_as_c = a.h.rows() == c.h.rows() && a.h == c.h;
  EXPECT_FALSE(same_as_c);
}

TEST(Scenario, TransmittersInsideTheirCell) {
  ScenarioConfig cfg;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto sc = generate_scenario(cfg, seed);
    const auto& bs = sc.population.bs_positions;
    // Hexagonal cells are the Voronoi cells of the lattice.
    for (const auto& u : sc.cellular) EXPECT_EQ(nearest_bs(u.pos, bs), u.cell);
    for (const auto& l : sc.d2d) EXPECT_EQ(nearest_bs(l.tx, bs), l.cell);
  }
}

TEST(Scenario, MeanLinkLength) {
  ScenarioConfig cfg;
  cfg.multi_cell = false;
  cfg.d2d_density = 50.0;
  double sum = 0.0;
  std::size_t count = 0;
  for (std::uint64_t seed = 0; count < 10000; ++seed) {
    const auto sc = generate_scenario(cfg, derive_seed(99, seed));
    for (const auto& l : sc.d2d) {
      sum += distance(l.tx, l.rx);
      ++count;
    }
  }
  const double mean = sum / count;
  const double stderr_ = 80.0 / std::sqrt(static_cast<double>(count));
  EXPECT_NEAR(mean, 80.0, 3.0 * stderr_);
}

TEST(Scenario, FixedLengthLaw) {
  ScenarioConfig cfg;
  cfg.length_law = LengthLaw::fixed;
  const auto sc = generate_scenario(cfg, 5);
  ASSERT_FALSE(sc.d2d.empty());
  for (const auto& l : sc.d2d) EXPECT_NEAR(distance(l.tx, l.rx), 80.0, 1e-9);
}

TEST(Scenario, PowersFollowFractionalControl) {
  ScenarioConfig cfg;
  const auto sc = generate_scenario(cfg, 6);
  for (const auto& l : sc.d2d) {
    EXPECT_GT(l.power, 0.0);
    EXPECT_LE(l.power, cfg.d2d_power.p_max);
    EXPECT_DOUBLE_EQ(l.power, fractional_power(std::max(1.0, distance(l.tx, l.rx)), cfg.d2d_power));
  }
}

TEST(ModeSelect, TinyWeightKeepsPotentialLinksInD2dMode) {
  const std::vector<double> rates{1.0, 2.0, 3.0, 5.0, 5.0};
  const std::vector<double> weights{1.0, 1.0, 1.0, 1e-9, 1e-9};
  SchedulerState st;
  const auto sel = mode_select(rates, weights, 3, st);
  EXPECT_FALSE(sel.cellular_mode[3]);
  EXPECT_FALSE(sel.cellular_mode[4]);
}

TEST(ModeSelect, SingleLinkAlwaysScheduled) {
  SchedulerState st;
  const auto sel = mode_select({0.7}, {0.5}, 1, st);
  EXPECT_EQ(sel.subband_owner, std::vector<int>{0});
  EXPECT_TRUE(sel.cellular_mode[0]);
}

TEST(ModeSelect, WeightedMetricDecides) {
  // R / Rbar of 2 with q = 1 against 1 with q = 1/2.
  const auto owner = pf_round({2.0, 1.0}, {1.0, 0.5}, 1, {1.0, 1.0});
  EXPECT_EQ(owner, std::vector<int>{0});
  // Unscheduled links gain priority as their average decays.
  SchedulerState st;
  const auto sel = mode_select({1.0, 1.0}, {1.0, 1.0}, 1, st, 1, 0.5);
  EXPECT_EQ(sel.subband_owner, std::vector<int>{1});
}

TEST(Methods, ParseAndLabel) {
  EXPECT_EQ(Method::parse("guard-zone-200").label(), "guard-zone-200");
  EXPECT_EQ(Method::parse("guard-zone(150)").radius, 150.0);
  EXPECT_EQ(Method::parse("bisection-br").kind, MethodKind::bisection_br);
  EXPECT_THROW(Method::parse("guard-zone"), ConfigError);
  EXPECT_THROW(Method::parse("nope"), ConfigError);
}

TEST(Rates, AllActiveMatchesDirectSinr) {
  ScenarioConfig cfg;
  const auto sc = generate_scenario(cfg, 21);
  const auto out = run_method_on_scenario(sc, cfg, Method::parse("all-active"));
  ASSERT_FALSE(out.failed);
  const int rbs = sc.subbands();
  std::vector<double> cell_ref, d2d_ref(sc.cell_d2d[0].size(), 0.0);
  for (int k = 0; k < rbs; ++k) {
    const int u = sc.rb_owner[0][k];
    if (u >= 0) {
      double interf = sc.noise_w;
      for (int c = 1; c < sc.cells(); ++c)
        if (sc.rb_owner[c][k] >= 0) interf += sc.cellular[sc.rb_owner[c][k]].power * sc.gc(sc.rb_owner[c][k], 0);
      for (std::size_t j = 0; j < sc.d2d.size(); ++j) interf += sc.d2d[j].power * sc.g(j, 0);
      cell_ref.push_back(std::log2(1.0 + sc.cellular[u].power * sc.gc(u, 0) / interf));
    }
    for (std::size_t a = 0; a < sc.cell_d2d[0].size(); ++a) {
      const int i = sc.cell_d2d[0][a];
      double interf = sc.noise_w;
      for (std::size_t j = 0; j < sc.d2d.size(); ++j)
        if (static_cast<int>(j) != i) interf += sc.d2d[j].power * sc.h(i, j);
      for (int c = 0; c < sc.cells(); ++c)
        if (sc.rb_owner[c][k] >= 0) interf += sc.cellular[sc.rb_owner[c][k]].power * sc.hc(i, sc.rb_owner[c][k]);
      d2d_ref[a] += std::log2(1.0 + sc.d2d[i].power * sc.h(i, i) / interf) / rbs;
    }
  }
  ASSERT_EQ(out.cellular_rates.size(), cell_ref.size());
  for (std::size_t k = 0; k < cell_ref.size(); ++k) EXPECT_NEAR(out.cellular_rates[k], cell_ref[k], 1e-12);
  ASSERT_EQ(out.d2d_rates.size(), d2d_ref.size());
  for (std::size_t a = 0; a < d2d_ref.size(); ++a) EXPECT_NEAR(out.d2d_rates[a], d2d_ref[a], 1e-12);
}

TEST(Rates, GuardZoneZeroEqualsAllActive) {
  ScenarioConfig cfg;
  const auto res = run_experiment(cfg, methods({"all-active", "guard-zone-0"}), 10, 1);
  EXPECT_EQ(res.at("all-active").cellular_rates, res.at("guard-zone-0").cellular_rates);
  EXPECT_EQ(res.at("all-active").d2d_rates, res.at("guard-zone-0").d2d_rates);
}

TEST(Rates, CellularOnlySilencesD2d) {
  ScenarioConfig cfg;
  const auto res = run_experiment(cfg, methods({"cellular-only", "all-active"}), 10, 1);
  for (double r : res.at("cellular-only").d2d_rates) EXPECT_EQ(r, 0.0);
  const auto& co = res.at("cellular-only").cellular_rates;
  const auto& aa = res.at("all-active").cellular_rates;
  ASSERT_EQ(co.size(), aa.size());
  for (std::size_t k = 0; k < co.size(); ++k) EXPECT_GE(co[k], aa[k]);
}

TEST(Experiment, ProtectionHolds) {
  ScenarioConfig cfg;
  for (double q_db : {-5.0, 0.0, 5.0}) {
    cfg.q_tol_db = q_db;
    const auto res = run_experiment(cfg, methods({"sppp", "bisection", "io"}), 30);
    for (const auto& m : res.methods) {
      EXPECT_EQ(m.failed_draws, 0) << m.label;
      EXPECT_GT(m.protection_checks, 0);
      EXPECT_EQ(m.protection_violations, 0) << m.label << " at " << q_db << " dB";
      EXPECT_LE(m.max_interference_ratio, 1.0 + kProtectionSlack);
    }
  }
}

TEST(Experiment, IoNeverHurtsCellularPerDraw) {
  ScenarioConfig cfg;
  const auto res = run_experiment(cfg, methods({"io", "all-active"}), 40);
  const auto& io = res.at("io").cellular_mean_per_draw;
  const auto& aa = res.at("all-active").cellular_mean_per_draw;
  for (std::size_t d = 0; d < io.size(); ++d) {
    if (std::isnan(io[d])) continue;
    EXPECT_GE(io[d], aa[d] - 1e-12) << "draw " << d;
  }
}

TEST(Experiment, ThreadCountDoesNotChangeResults) {
  ScenarioConfig cfg;
  const auto ms = methods({"bisection", "sppp", "guard-zone-150"});
  const auto a = run_experiment(cfg, ms, 12, 1);
  const auto b = run_experiment(cfg, ms, 12, 4);
  for (std::size_t m = 0; m < ms.size(); ++m) {
    EXPECT_EQ(a.methods[m].cellular_rates, b.methods[m].cellular_rates);
    EXPECT_EQ(a.methods[m].d2d_rates, b.methods[m].d2d_rates);
  }
}

TEST(Experiment, OversizedExactGameCountedAsFailure) {
  ScenarioConfig cfg;
  cfg.multi_cell = false;
  cfg.d2d_density = 40.0;
  const auto res = run_experiment(cfg, methods({"bisection-br", "bisection"}), 6);
  const auto& br = res.at("bisection-br");
  EXPECT_GT(br.failed_draws, 0);
  EXPECT_EQ(static_cast<int>(br.draw_failed.size()), 6);
  EXPECT_EQ(res.at("bisection").failed_draws, 0);
}

TEST(Experiment, RejectsZeroDraws) {
  EXPECT_THROW(run_experiment(ScenarioConfig{}, methods({"io"}), 0), DomainError);
}

TEST(Cdf, Examples) {
  const auto one = rate_cdf({4.0});
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0], std::make_pair(4.0, 1.0));
  const auto three = rate_cdf({3.0, 1.0, 2.0});
  EXPECT_EQ(three[0].first, 1.0);
  EXPECT_DOUBLE_EQ(three[0].second, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(three[1].second, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(three[2].second, 1.0);
  EXPECT_THROW(rate_cdf({}), DomainError);
}

TEST(Cdf, KsDistance) {
  EXPECT_EQ(ks_distance({1, 2, 3}, {3, 2, 1}), 0.0);
  EXPECT_EQ(ks_distance({1, 2}, {5, 6}), 1.0);
  EXPECT_DOUBLE_EQ(ks_distance({1, 2, 3, 4}, {3, 4, 5, 6}), 0.5);
}

TEST(Experiment, LowerBoundAndExactGamesGiveSimilarD2dRates) {
  ScenarioConfig cfg;
  cfg.multi_cell = false;
  cfg.q_tol_db = 5.0;
  const auto res = run_experiment(cfg, methods({"bisection", "bisection-br"}), 100);
  EXPECT_LT(ks_distance(res.at("bisection").d2d_rates, res.at("bisection-br").d2d_rates), 0.1);
}

TEST(Sweep, RatesMonotoneInTolerance) {
  ScenarioConfig cfg;
  const std::vector<double> qs{-5.0, 0.0, 5.0, 10.0};
  const auto rows = run_sweep(cfg, methods({"bisection"}), 200, SweepParameter::q_tol_db, qs);
  std::vector<double> cell, d2d;
  for (const auto& r : rows) (r.metric == "cellular_mean_rate" ? cell : d2d).push_back(r.result);
  ASSERT_EQ(cell.size(), qs.size());
  for (std::size_t k = 1; k < qs.size(); ++k) {
    EXPECT_LE(cell[k], cell[k - 1]) << "Q " << qs[k];
    EXPECT_GE(d2d[k], d2d[k - 1]) << "Q " << qs[k];
  }
}

TEST(Experiment, DefaultSetupOrdering) {
  ScenarioConfig cfg;
  const auto res = run_experiment(cfg, methods({"sppp", "bisection", "guard-zone-200", "all-active"}), 200);
  const double gz = res.at("guard-zone-200").mean_cellular_rate();
  const double aa = res.at("all-active").mean_cellular_rate();
  for (const char* m : {"sppp", "bisection"}) {
    EXPECT_GT(res.at(m).mean_cellular_rate(), gz) << m;
    EXPECT_LT(res.at(m).mean_d2d_total(), res.at("all-active").mean_d2d_total()) << m;
  }
  EXPECT_GT(gz, aa);
}
