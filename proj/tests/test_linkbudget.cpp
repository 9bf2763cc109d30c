#include "doctest.h"

#include <cmath>
#include <string>

#include "fso/atmosphere.hpp"
#include "fso/linkbudget.hpp"
#include "support.hpp"

using namespace fso;

TEST_SUITE("linkbudget") {
  TEST_CASE("optical loss") {
    CHECK(optical_loss_db(0.65, 1.0) == doctest::Approx(-10.0 * std::log10(0.65)));
    CHECK(optical_loss_db(1.0, 1.0) == 0.0);
    CHECK_THROWS_AS(optical_loss_db(0.0, 1.0), DomainError);
    CHECK_THROWS_AS(optical_loss_db(0.5, 1.5), DomainError);
  }

  TEST_CASE("pointing loss") {
    // theta_b = 50 urad; 10 urad error gives 8.686 * 2 * 0.04.
    CHECK(pointing_loss_db(10e-6, 100e-6) == doctest::Approx(20.0 / std::log(10.0) * 2.0 * 0.04));
    CHECK(pointing_loss_db(50e-6, 100e-6) == doctest::Approx(20.0 / std::log(10.0) * 2.0));
    CHECK(pointing_loss_db(0.0, 100e-6) == 0.0);
    CHECK(pointing_loss_db(std::nullopt, 100e-6) == kDefaultPointingLossDb);
    CHECK_THROWS_AS(pointing_loss_db(1e-6, 0.0), DomainError);
    CHECK_THROWS_AS(pointing_loss_db(-1e-6, 1e-4), DomainError);
  }

  TEST_CASE("pointing loss is strictly increasing in the error") {
    double previous = -1.0;
    for (double e = 0.0; e < 200e-6; e += 5e-6) {
      const double l = pointing_loss_db(e, 100e-6);
      CHECK(l > previous);
      previous = l;
    }
  }

  TEST_CASE("received power sums the losses") {
    LossBreakdown losses;
    losses.l_sci_db = 3.0;
    losses.l_fog_db = 1.5;
    losses.l_total_db = losses.component_sum();
    TransceiverOptics optics;
    const LinkBudget b = received_power_dbm(optics, losses, 100e-6);
    CHECK(b.l_l_db == 4.5);
    CHECK(b.l_p_db == 2.0);
    CHECK(b.l_o_db == doctest::Approx(1.8708664335714442));
    CHECK(b.p_r_dbm == doctest::Approx(23.0 - 4.5 - 2.0 - b.l_o_db));
    CHECK(b.snr_db == doctest::Approx(b.p_r_dbm + 30.0));
  }

  TEST_CASE("budget formatting") {
    LossBreakdown losses;
    losses.l_sci_db = 0.25;
    losses.l_total_db = 0.25;
    const LinkBudget b = received_power_dbm(TransceiverOptics{}, losses, 100e-6);
    const std::string csv = format_budget_csv(losses, b);
    CHECK(csv.rfind("component,value\n", 0) == 0);
    CHECK(csv.find("l_sci_db,0.25\n") != std::string::npos);
    CHECK(csv.find("l_p_db,2\n") != std::string::npos);
    CHECK(format_budget_table(losses, b).find("p_r_dbm") != std::string::npos);
  }

  TEST_CASE("optical loss examples and algebra") {
    CHECK(optical_loss_db(0.2, 1.0) == doctest::Approx(6.9897).epsilon(1e-4));
    testing::Gen gen(31);
    for (int i = 0; i < 100; ++i) {
      const double a = gen.uniform(1e-3, 1.0);
      const double b = gen.uniform(1e-3, 1.0);
      CHECK(optical_loss_db(a, b) == doctest::Approx(optical_loss_db(b, a)).epsilon(1e-12));
      CHECK(optical_loss_db(a, b) ==
            doctest::Approx(optical_loss_db(a, 1.0) + optical_loss_db(1.0, b)).epsilon(1e-12));
    }
  }

  TEST_CASE("lossless link receives the transmit power") {
    TransceiverOptics optics;
    optics.tx_power_dbm = 10.0;
    optics.tx_efficiency = optics.rx_efficiency = 1.0;
    optics.pointing_error_rad = 0.0;
    const LinkBudget b = received_power_dbm(optics, LossBreakdown{}, 100e-6);
    CHECK(b.p_r_dbm == 10.0);
  }

  TEST_CASE("fixed 2 dB optical and pointing losses on the clear scenario") {
    WeatherScenario clear;
    clear.visibility_km = 10.0;
    clear.wind_speed_ground = 1.0;
    LinkGeometry g;
    g.tx_altitude_m = g.rx_altitude_m = 4000.0;
    const LossBreakdown losses = total_atmospheric_loss(clear, g);
    TransceiverOptics optics;
    optics.optical_loss_db = 2.0;
    const LinkBudget b = received_power_dbm(optics, losses, g.beam_divergence_rad);
    CHECK(b.p_r_dbm == doctest::Approx(optics.tx_power_dbm - losses.l_sci_db - 4.0).epsilon(1e-12));
    optics.optical_loss_db = -1.0;
    CHECK_THROWS_AS(received_power_dbm(optics, losses, 1e-4), DomainError);
  }

  TEST_CASE("budget identity over random inputs") {
    testing::Gen gen(32);
    for (int i = 0; i < 200; ++i) {
      LossBreakdown losses;
      losses.l_sci_db = gen.uniform(0.0, 20.0);
      losses.l_fog_db = gen.uniform(0.0, 50.0);
      losses.l_total_db = losses.component_sum();
      TransceiverOptics optics;
      optics.tx_power_dbm = gen.uniform(-10.0, 40.0);
      optics.tx_efficiency = gen.uniform(0.01, 1.0);
      optics.rx_efficiency = gen.uniform(0.01, 1.0);
      optics.noise_floor_dbm = gen.uniform(-60.0, 0.0);
      if (gen.uniform(0.0, 1.0) < 0.5) optics.pointing_error_rad = gen.uniform(0.0, 1e-4);
      const LinkBudget b = received_power_dbm(optics, losses, 100e-6);
      CHECK(b.p_r_dbm == doctest::Approx(optics.tx_power_dbm - b.l_l_db - b.l_p_db - b.l_o_db)
                             .epsilon(1e-12));
      CHECK(b.snr_db == doctest::Approx(b.p_r_dbm - optics.noise_floor_dbm).epsilon(1e-12));
      CHECK(b.l_p_db >= 0.0);
      CHECK(b.l_o_db >= 0.0);
    }
  }

  TEST_CASE("optics validation") {
    TransceiverOptics o;
    o.tx_efficiency = 1.2;
    CHECK_THROWS_AS(o.validate(), DomainError);
  }
}
