#include "doctest.h"

#include <cmath>
#include <sstream>
#include <vector>

#include "fso/numerics.hpp"
#include "fso/pat.hpp"
#include "support.hpp"

using namespace fso;

namespace {

// Composite Simpson power of a Gaussian spot over [x0,x1] x [y0,y1].
double grid_power(double x0, double x1, double y0, double y1, const Eigen::Vector2d& c, double r,
                  double power) {
  const int n = 1200;  // even
  const double dx = (x1 - x0) / n;
  const double dy = (y1 - y0) / n;
  const double peak = 2.0 * power / (numerics::kPi * r * r);
  auto weight = [n](int i) { return i == 0 || i == n ? 1.0 : (i % 2 ? 4.0 : 2.0); };
  double sum = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double x = x0 + i * dx - c.x();
    double row = 0.0;
    for (int j = 0; j <= n; ++j) {
      const double y = y0 + j * dy - c.y();
      row += weight(j) * std::exp(-2.0 * (x * x + y * y) / (r * r));
    }
    sum += weight(i) * row;
  }
  return peak * sum * dx * dy / 9.0;
}

}  // namespace

TEST_SUITE("pat") {
  TEST_CASE("quadrant overlap against 2-D grid integration") {
    const QdGeometry g = QdGeometry::calibrated(1e-3, 0.3e-3, 20e-6);
    const double h = 0.5e-3;
    const double in = 10e-6;
    for (const Eigen::Vector2d& c :
         {Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(0.15e-3, 0.0), Eigen::Vector2d(0.1e-3, -0.05e-3),
          Eigen::Vector2d(-0.3e-3, 0.2e-3)}) {
      const QdReading r = qd_overlap(c, g, 2.0);
      CHECK(r.v1 == doctest::Approx(grid_power(in, h, in, h, c, 0.3e-3, 2.0)).epsilon(1e-8));
      CHECK(r.v2 == doctest::Approx(grid_power(-h, -in, in, h, c, 0.3e-3, 2.0)).epsilon(1e-8));
      CHECK(r.v3 == doctest::Approx(grid_power(-h, -in, -h, -in, c, 0.3e-3, 2.0)).epsilon(1e-8));
      CHECK(r.v4 == doctest::Approx(grid_power(in, h, -h, -in, c, 0.3e-3, 2.0)).epsilon(1e-8));
    }
  }

  TEST_CASE("overlap symmetry and power bound") {
    const QdGeometry g = QdGeometry::calibrated(1e-3, 0.3e-3, 20e-6);
    const QdReading centred = qd_overlap(Eigen::Vector2d::Zero(), g, 1.0);
    CHECK(centred.v1 == doctest::Approx(centred.v2).epsilon(1e-12));
    CHECK(centred.v1 == doctest::Approx(centred.v3).epsilon(1e-12));
    CHECK(centred.v1 == doctest::Approx(centred.v4).epsilon(1e-12));
    testing::Gen gen(21);
    for (int i = 0; i < 100; ++i) {
      const Eigen::Vector2d c(gen.uniform(-1e-3, 1e-3), gen.uniform(-1e-3, 1e-3));
      const QdReading r = qd_overlap(c, g, 1.0);
      CHECK(r.sum() <= 1.0);
      CHECK(r.sum() >= 0.0);
      const QdReading mirrored = qd_overlap(Eigen::Vector2d(-c.x(), c.y()), g, 1.0);
      CHECK(r.v1 == doctest::Approx(mirrored.v2).epsilon(1e-9));
      CHECK(r.v4 == doctest::Approx(mirrored.v3).epsilon(1e-9));
    }
  }

  TEST_CASE("calibrated estimator is unbiased for small offsets") {
    const QdGeometry g = QdGeometry::calibrated(1e-3, 0.3e-3, 20e-6);
    for (double d : {-20e-6, -5e-6, 3e-6, 15e-6}) {
      const Eigen::Vector2d est = estimate_displacement(qd_overlap(Eigen::Vector2d(d, -d), g, 1.0), g);
      CHECK(est.x() == doctest::Approx(d).epsilon(0.01));
      CHECK(est.y() == doctest::Approx(-d).epsilon(0.01));
    }
    CHECK_THROWS_AS(estimate_displacement(QdReading{}, g), DomainError);
    QdGeometry bad = g;
    bad.estimator_gain = 0.0;
    CHECK_THROWS_AS(bad.validate(), DomainError);
  }

  TEST_CASE("estimate sign follows the offset") {
    const QdGeometry g = QdGeometry::calibrated(1e-3, 0.3e-3, 20e-6);
    testing::Gen gen(22);
    for (int i = 0; i < 100; ++i) {
      const Eigen::Vector2d c(gen.uniform(-0.4e-3, 0.4e-3), gen.uniform(-0.4e-3, 0.4e-3));
      const Eigen::Vector2d e = estimate_displacement(qd_overlap(c, g, 1.0), g);
      CHECK((e.x() > 0) == (c.x() > 0));
      CHECK((e.y() > 0) == (c.y() > 0));
    }
  }

  TEST_CASE("multi-sample SNR") {
    std::vector<QdReading> readings(9, QdReading{0.25, 0.25, 0.25, 0.25});
    const MultiSampleResult r = multisample_snr(readings, 0.05);
    CHECK(r.snr_single == doctest::Approx(1.0 / 0.1));
    CHECK(r.snr_combined == doctest::Approx(3.0 * r.snr_single));
    CHECK(r.averaged.v1 == doctest::Approx(0.25));
    CHECK_FALSE(r.saturated);
    const MultiSampleResult clean = multisample_snr(readings, 0.0);
    CHECK(clean.saturated);
    CHECK(std::isinf(clean.snr_combined));
    CHECK_THROWS_AS(multisample_snr(std::vector<QdReading>{}, 0.1), LengthError);
  }

  TEST_CASE("noise is seeded and clamped at zero") {
    const QdGeometry g = QdGeometry::calibrated(1e-3, 0.3e-3, 20e-6);
    const QdReading a = qd_response(Eigen::Vector2d(1e-5, 0), g, 1.0, 0.5, 3);
    const QdReading b = qd_response(Eigen::Vector2d(1e-5, 0), g, 1.0, 0.5, 3);
    CHECK(a.v1 == b.v1);
    CHECK(a.v3 == b.v3);
    Engine e = make_engine(1, 2);
    for (int i = 0; i < 1000; ++i) {
      const QdReading r = add_quadrant_noise(QdReading{}, 1.0, e);
      CHECK(r.v1 >= 0.0);
      CHECK(r.v4 >= 0.0);
    }
  }

  TEST_CASE("tracking loop") {
    TrackingConfig cfg;
    const TrackingResult r1 = run_tracking_loop(cfg);
    CHECK(r1.corrections == 1000);
    CHECK(r1.residual.size() == 1000);
    CHECK(r1.rms_m < cfg.geometry.detector_size_m);
    CHECK(r1.rms_m == doctest::Approx(std::hypot(r1.rms_x_m, r1.rms_y_m)));
    const TrackingResult again = run_tracking_loop(cfg);
    CHECK(again.rms_m == r1.rms_m);
    cfg.samples_per_correction = 10;
    CHECK(run_tracking_loop(cfg).rms_m < r1.rms_m);
  }

  TEST_CASE("tracking loop validation and divergence") {
    TrackingConfig cfg;
    cfg.loop_rate_hz = 2000.0;
    CHECK_THROWS_AS(run_tracking_loop(cfg), DomainError);
    cfg = TrackingConfig{};
    cfg.duration_s = 0.05;
    CHECK_THROWS_AS(run_tracking_loop(cfg), DomainError);
    cfg = TrackingConfig{};
    cfg.initial_offset = Eigen::Vector2d(5e-3, 0.0);
    cfg.quadrant_noise_std = 0.0;
    CHECK_THROWS_AS(run_tracking_loop(cfg), InstabilityError);
  }

  TEST_CASE("a far offset puts the power in the +x quadrants") {
    const QdGeometry g = QdGeometry::calibrated(1e-3, 0.3e-3, 20e-6);
    const QdReading r = qd_overlap(Eigen::Vector2d(0.45e-3, 0.0), g, 1.0);
    CHECK(r.v1 + r.v4 > 100.0 * (r.v2 + r.v3));
  }

  TEST_CASE("estimator algebra") {
    const QdGeometry g = QdGeometry::calibrated(1e-3, 0.3e-3, 20e-6);
    const double k = g.estimator_gain;
    const Eigen::Vector2d centred = estimate_displacement(QdReading{1, 1, 1, 1}, g);
    CHECK(centred.x() == 0.0);
    CHECK(centred.y() == 0.0);
    const Eigen::Vector2d sat = estimate_displacement(QdReading{1, 0, 0, 0}, g);
    CHECK(sat.x() == doctest::Approx(k));
    CHECK(sat.y() == doctest::Approx(k));
    testing::Gen gen(23);
    for (int i = 0; i < 200; ++i) {
      const QdReading r{gen.uniform(0, 1), gen.uniform(0, 1), gen.uniform(0, 1), gen.uniform(0.01, 1)};
      const Eigen::Vector2d e = estimate_displacement(r, g);
      // Point reflection through the centre swaps Q1<->Q3 and Q2<->Q4.
      const Eigen::Vector2d odd = estimate_displacement(QdReading{r.v3, r.v4, r.v1, r.v2}, g);
      CHECK(odd.x() == doctest::Approx(-e.x()).epsilon(1e-12));
      CHECK(odd.y() == doctest::Approx(-e.y()).epsilon(1e-12));
      const double c = gen.log_uniform(1e-6, 1e6);
      const Eigen::Vector2d scaled =
          estimate_displacement(QdReading{c * r.v1, c * r.v2, c * r.v3, c * r.v4}, g);
      CHECK(scaled.x() == doctest::Approx(e.x()).epsilon(1e-12));
      CHECK(scaled.y() == doctest::Approx(e.y()).epsilon(1e-12));
    }
  }

  TEST_CASE("estimate is monotone in the offset inside half a beam radius") {
    const QdGeometry g = QdGeometry::calibrated(1e-3, 0.3e-3, 20e-6);
    double previous = -1.0;
    for (double x = -0.149e-3; x < 0.15e-3; x += 2e-6) {
      const double e = estimate_displacement(qd_overlap(Eigen::Vector2d(x, 0.0), g, 1.0), g).x();
      CHECK(e > previous);
      previous = e;
    }
  }

  TEST_CASE("a single reading reports the single-sample SNR") {
    const std::vector<QdReading> one{QdReading{0.3, 0.2, 0.1, 0.4}};
    const MultiSampleResult r = multisample_snr(one, 0.02);
    CHECK(r.snr_combined == doctest::Approx(r.snr_single).epsilon(1e-12));
    CHECK(r.samples == 1);
  }

  TEST_CASE("noiseless unit-gain loop removes a static offset") {
    TrackingConfig cfg;
    cfg.initial_offset = Eigen::Vector2d(5e-6, -3e-6);
    cfg.disturbance.rms_m = 0.0;
    cfg.quadrant_noise_std = 0.0;
    cfg.controller_gain = 1.0;
    cfg.duration_s = 0.1;
    const TrackingResult r = run_tracking_loop(cfg);
    CHECK(r.residual.at(3).offset.norm() < 1e-3 * cfg.initial_offset.norm());
  }

  TEST_CASE("with the controller off the residual is the disturbance") {
    TrackingConfig cfg;
    cfg.initial_offset = Eigen::Vector2d::Zero();
    cfg.controller_gain = 0.0;
    const TrackingResult r = run_tracking_loop(cfg);
    CHECK(r.rms_x_m == doctest::Approx(r.disturbance_rms_x_m).epsilon(1e-12));
    CHECK(r.rms_y_m == doctest::Approx(r.disturbance_rms_y_m).epsilon(1e-12));
  }

  TEST_CASE("residual CSV") {
    TrackingConfig cfg;
    cfg.duration_s = 0.1;
    std::ostringstream out;
    write_residual_csv(out, run_tracking_loop(cfg));
    const std::string s = out.str();
    CHECK(s.rfind("time_s,offset_x_m,offset_y_m\n", 0) == 0);
    CHECK(std::count(s.begin(), s.end(), '\n') == 101);
  }
}
