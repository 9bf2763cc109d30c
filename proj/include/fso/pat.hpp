#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "fso/random.hpp"

namespace fso {

/// Quadrant powers. Q1 = +x+y, Q2 = -x+y, Q3 = -x-y, Q4 = +x-y.
struct QdReading {
  double v1 = 0.0;
  double v2 = 0.0;
  double v3 = 0.0;
  double v4 = 0.0;

  double sum() const { return v1 + v2 + v3 + v4; }
};

struct QdGeometry {
  double detector_size_m = 1e-3;  // side of the square detector
  double beam_radius_m = 0.3e-3;  // 1/e^2 radius on the detector
  double gap_m = 20e-6;           // dead zone between quadrants
  double estimator_gain = 0.0;    // m per unit normalized difference

  void validate() const;

  /// Geometry whose estimator gain makes small-offset estimates unbiased.
  static QdGeometry calibrated(double detector_size_m, double beam_radius_m, double gap_m);
};

/// Slope-matched gain: inverse of d(normalized difference)/dx at x = 0.
double calibrated_estimator_gain(double detector_size_m, double beam_radius_m, double gap_m);

/// Noiseless quadrant powers for a Gaussian spot at `offset`.
QdReading qd_overlap(const Eigen::Vector2d& offset, const QdGeometry& geometry,
                     double signal_power);

/// Adds i.i.d. Gaussian noise to every quadrant and clamps at zero.
QdReading add_quadrant_noise(const QdReading& clean, double noise_std, Engine& engine);

QdReading qd_response(const Eigen::Vector2d& offset, const QdGeometry& geometry,
                      double signal_power, double noise_std, std::uint64_t seed);

/// Normalized-difference displacement estimate in meters.
Eigen::Vector2d estimate_displacement(const QdReading& reading, const QdGeometry& geometry);

struct MultiSampleResult {
  QdReading averaged;
  std::size_t samples = 0;
  double snr_single = 0.0;    // per-sample amplitude SNR of the summed power
  double snr_combined = 0.0;  // sum of signals over root-sum-square noise
  bool saturated = false;     // noiseless input: SNR is unbounded
};

/// Aggregates m readings taken over a static channel. quadrant_noise_std is
/// the per-quadrant noise of a single reading.
MultiSampleResult multisample_snr(std::span<const QdReading> readings, double quadrant_noise_std);

/// Band-limited Gaussian jitter applied independently on both axes.
struct DisturbanceModel {
  double rms_m = 0.1e-3;       // per axis
  double bandwidth_hz = 5.0;   // PSD falls to 1/e at this frequency
};

struct TrackingConfig {
  Eigen::Vector2d initial_offset{0.2e-3, -0.1e-3};
  DisturbanceModel disturbance;
  QdGeometry geometry = QdGeometry::calibrated(1e-3, 0.3e-3, 20e-6);
  int samples_per_correction = 1;  // m
  double loop_rate_hz = 1000.0;
  double controller_gain = 0.8;
  double duration_s = 1.0;
  double signal_power = 1.0;
  double quadrant_noise_std = 0.05;
  std::uint64_t seed = 1;

  void validate() const;
};

struct TrackingSample {
  double time_s = 0.0;
  Eigen::Vector2d offset = Eigen::Vector2d::Zero();
};

struct TrackingResult {
  std::vector<TrackingSample> residual;
  double rms_x_m = 0.0;
  double rms_y_m = 0.0;
  double rms_m = 0.0;  // radial
  double max_m = 0.0;  // radial
  double disturbance_rms_x_m = 0.0;
  double disturbance_rms_y_m = 0.0;
  std::size_t corrections = 0;
};

/// Proportional tracking loop: each step takes m readings at the current
/// misalignment, averages them, estimates the displacement and moves the
/// steering correction by gain * estimate.
TrackingResult run_tracking_loop(const TrackingConfig& config);

/// `time_s,offset_x_m,offset_y_m` rows.
void write_residual_csv(std::ostream& out, const TrackingResult& result);

}  // namespace fso
