#include <gtest/gtest.h>

#include <cmath>

#include "d2d/net_model.hpp"

using namespace d2d;

namespace {

// Two D2D links, one cellular link, hand-picked gains.
struct SmallRb {
  ChannelMatrices ch;
  PowerVector pw;

  SmallRb() {
    ch.h.resize(2, 2);
    ch.h << 1e-6, 2e-8, 4e-8, 3e-6;
    ch.g.resize(2);
    ch.g << 1e-9, 5e-10;
    ch.hc.resize(2, 1);
    ch.hc << 1e-9, 2e-9;
    ch.gc.resize(1, 1);
    ch.gc << 1e-8;
    ch.noise_d2d = Vector::Constant(2, 1e-12);
    ch.noise_cell = Vector::Constant(1, 2e-12);
    pw.p_d.resize(2);
    pw.p_d << 0.02, 0.01;
    pw.p_c.resize(1);
    pw.p_c << 0.2;
  }
};

}  // namespace

TEST(FractionalPower, CompensatesBelowCap) {
  PowerControlConfig cfg{1.0, 0.5, 4.0};
  // d^(kappa alpha) = d^2
  EXPECT_DOUBLE_EQ(fractional_power(0.5, cfg), 0.25);
  EXPECT_DOUBLE_EQ(fractional_power(0.9, cfg), 0.81);
}

TEST(FractionalPower, SaturatesAtPmax) {
  PowerControlConfig cfg{0.2, 0.75, kAlphaUeBs};
  EXPECT_DOUBLE_EQ(fractional_power(100.0, cfg), 0.2);
  EXPECT_DOUBLE_EQ(fractional_power(1.0, cfg), 0.2);  // 1^x = 1 > p_max
}

TEST(FractionalPower, RejectsNonPositiveDistance) {
  EXPECT_THROW(fractional_power(0.0, PowerControlConfig{}), DomainError);
  EXPECT_THROW(fractional_power(-3.0, PowerControlConfig{}), DomainError);
}

TEST(PowerControlConfig, Validation) {
  EXPECT_NO_THROW(PowerControlConfig{}.validate());
  EXPECT_THROW((PowerControlConfig{0.0, 0.75, 3.76}.validate()), DomainError);
  EXPECT_THROW((PowerControlConfig{0.2, 1.5, 3.76}.validate()), DomainError);
  EXPECT_THROW((PowerControlConfig{0.2, 0.75, 2.0}.validate()), DomainError);
}

TEST(PathGain, InversePowerLaw) {
  EXPECT_DOUBLE_EQ(path_gain(10.0, 2.0), 0.01);
  EXPECT_NEAR(path_gain(100.0, kAlphaUeUe) / std::exp(-kAlphaUeUe * std::log(100.0)), 1.0, 1e-12);
  EXPECT_THROW(path_gain(0.0, 3.0), DomainError);
}

TEST(Units, DecibelConversions) {
  EXPECT_DOUBLE_EQ(dbm_to_watts(30.0), 1.0);
  EXPECT_DOUBLE_EQ(db_to_linear(0.0), 1.0);
  EXPECT_NEAR(db_to_linear(10.0), 10.0, 1e-12);
  // -174 dBm/Hz over 1 MHz is -114 dBm.
  EXPECT_NEAR(thermal_noise_watts(-174.0, 1e6), std::pow(10.0, -14.4), 1e-27);
}

TEST(Sinr, D2dMatchesHandComputation) {
  SmallRb rb;
  const std::vector<bool> both{true, true};
  const double expected0 = 0.02 * 1e-6 / (1e-12 + 0.01 * 2e-8 + 0.2 * 1e-9);
  const double expected1 = 0.01 * 3e-6 / (1e-12 + 0.02 * 4e-8 + 0.2 * 2e-9);
  EXPECT_NEAR(sinr_d2d(0, both, rb.ch, rb.pw), expected0, 1e-12 * expected0);
  EXPECT_NEAR(sinr_d2d(1, both, rb.ch, rb.pw), expected1, 1e-12 * expected1);
  const std::vector<bool> only0{true, false};
  EXPECT_NEAR(sinr_d2d(0, only0, rb.ch, rb.pw), 0.02 * 1e-6 / (1e-12 + 0.2 * 1e-9), 1e-9);
  EXPECT_EQ(sinr_d2d(1, only0, rb.ch, rb.pw), 0.0);
  EXPECT_THROW(sinr_d2d(2, both, rb.ch, rb.pw), DomainError);
}

TEST(Sinr, CellularSeesActiveD2dAtBs) {
  SmallRb rb;
  const double s = 0.2 * 1e-8;
  EXPECT_NEAR(sinr_cellular(0, {false, false}, rb.ch, rb.pw), s / 2e-12, 1e-6);
  EXPECT_NEAR(sinr_cellular(0, {true, true}, rb.ch, rb.pw), s / (2e-12 + 0.02 * 1e-9 + 0.01 * 5e-10), 1e-9);
  EXPECT_THROW(sinr_cellular(1, {true, true}, rb.ch, rb.pw), DomainError);
}

TEST(Sinr, MoreInterferersNeverHelp) {
  SmallRb rb;
  EXPECT_GT(sinr_d2d(0, {true, false}, rb.ch, rb.pw), sinr_d2d(0, {true, true}, rb.ch, rb.pw));
  EXPECT_GT(sinr_cellular(0, {false, false}, rb.ch, rb.pw), sinr_cellular(0, {true, false}, rb.ch, rb.pw));
}

TEST(ShannonRate, Values) {
  EXPECT_DOUBLE_EQ(shannon_rate(0.0), 0.0);
  EXPECT_DOUBLE_EQ(shannon_rate(1.0), 1.0);
  EXPECT_DOUBLE_EQ(shannon_rate(3.0, 1e6), 2e6);
  EXPECT_THROW(shannon_rate(-0.1), DomainError);
}

TEST(ChannelMatrices, ValidateShapesAndSigns) {
  SmallRb rb;
  EXPECT_NO_THROW(rb.ch.validate());
  EXPECT_EQ(rb.ch.n_d2d(), 2);
  EXPECT_EQ(rb.ch.n_cell(), 1);
  auto bad = rb.ch;
  bad.h(0, 1) = 0.0;
  EXPECT_THROW(bad.validate(), DomainError);
  bad = rb.ch;
  bad.hc.resize(2, 2);
  bad.hc.setConstant(1e-9);
  EXPECT_THROW(bad.validate(), DomainError);
  bad = rb.ch;
  bad.noise_d2d[1] = -1.0;
  EXPECT_THROW(bad.validate(), DomainError);
}

TEST(LinkPopulation, Validate) {
  LinkPopulation pop;
  pop.bs_positions = {{0, 0}};
  pop.cellular_links = {{{10, 0}, 0}};
  pop.d2d_pairs = {{{1, 1}, {2, 2}}};
  EXPECT_NO_THROW(pop.validate());
  pop.cellular_links[0].serving_bs = 1;
  EXPECT_THROW(pop.validate(), DomainError);
  pop.cellular_links[0].serving_bs = 0;
  pop.d2d_pairs[0].rx = pop.d2d_pairs[0].tx;
  EXPECT_THROW(pop.validate(), DomainError);
}

TEST(Geometry, Distance) { EXPECT_DOUBLE_EQ(distance({0, 0}, {3, 4}), 5.0); }
