#include "fso/pat.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <random>

#include "fso/channel_trace.hpp"
#include "fso/errors.hpp"
#include "fso/numerics.hpp"

namespace fso {

namespace {

constexpr double kMaxLoopRateHz = 1000.0;
constexpr int kDivergenceSteps = 10;
constexpr double kOverlapTolerance = 1e-11;

struct AxisMasses {
  double positive;
  double negative;
};

AxisMasses axis_masses(double center, const QdGeometry& g) {
  const double half = 0.5 * g.detector_size_m;
  const double inner = 0.5 * g.gap_m;
  return {numerics::gaussian_segment_mass(inner, half, center, g.beam_radius_m, kOverlapTolerance),
          numerics::gaussian_segment_mass(-half, -inner, center, g.beam_radius_m,
                                          kOverlapTolerance)};
}

}  // namespace

void QdGeometry::validate() const {
  if (!(detector_size_m > 0.0 && beam_radius_m > 0.0 && gap_m > 0.0 && estimator_gain > 0.0)) {
    throw DomainError("QdGeometry: all fields must be positive");
  }
  if (!(gap_m < detector_size_m)) throw DomainError("QdGeometry: gap must be smaller than detector");
}

double calibrated_estimator_gain(double detector_size_m, double beam_radius_m, double gap_m) {
  QdGeometry g{detector_size_m, beam_radius_m, gap_m, 1.0};
  g.validate();
  const double step = 1e-3 * beam_radius_m;
  const AxisMasses m = axis_masses(step, g);
  const double difference = (m.positive - m.negative) / (m.positive + m.negative);
  return step / difference;
}

QdGeometry QdGeometry::calibrated(double detector_size_m, double beam_radius_m, double gap_m) {
  return {detector_size_m, beam_radius_m, gap_m,
          calibrated_estimator_gain(detector_size_m, beam_radius_m, gap_m)};
}

QdReading qd_overlap(const Eigen::Vector2d& offset, const QdGeometry& geometry,
                     double signal_power) {
  geometry.validate();
  if (!(signal_power >= 0.0)) throw DomainError("qd_overlap: signal power must be >= 0");
  const AxisMasses x = axis_masses(offset.x(), geometry);
  const AxisMasses y = axis_masses(offset.y(), geometry);
  return {signal_power * x.positive * y.positive, signal_power * x.negative * y.positive,
          signal_power * x.negative * y.negative, signal_power * x.positive * y.negative};
}

QdReading add_quadrant_noise(const QdReading& clean, double noise_std, Engine& engine) {
  if (!(noise_std >= 0.0)) throw DomainError("add_quadrant_noise: noise std must be >= 0");
  if (noise_std == 0.0) return clean;
  std::normal_distribution<double> normal(0.0, noise_std);
  auto noisy = [&](double v) { return std::max(0.0, v + normal(engine)); };
  QdReading r;
  r.v1 = noisy(clean.v1);
  r.v2 = noisy(clean.v2);
  r.v3 = noisy(clean.v3);
  r.v4 = noisy(clean.v4);
  return r;
}

QdReading qd_response(const Eigen::Vector2d& offset, const QdGeometry& geometry,
                      double signal_power, double noise_std, std::uint64_t seed) {
  Engine engine = make_engine(seed, streams::kQdNoise);
  return add_quadrant_noise(qd_overlap(offset, geometry, signal_power), noise_std, engine);
}

Eigen::Vector2d estimate_displacement(const QdReading& r, const QdGeometry& geometry) {
  const double total = r.sum();
  if (!(total > 0.0)) throw DomainError("estimate_displacement: quadrant sum must be > 0");
  const double g = geometry.estimator_gain;
  return {g * ((r.v1 + r.v4) - (r.v2 + r.v3)) / total, g * ((r.v1 + r.v2) - (r.v3 + r.v4)) / total};
}

MultiSampleResult multisample_snr(std::span<const QdReading> readings, double quadrant_noise_std) {
  if (readings.empty()) throw LengthError("multisample_snr: no readings");
  if (!(quadrant_noise_std >= 0.0)) throw DomainError("multisample_snr: noise std must be >= 0");
  MultiSampleResult out;
  out.samples = readings.size();
  double signal_sum = 0.0;
  for (const QdReading& r : readings) {
    out.averaged.v1 += r.v1;
    out.averaged.v2 += r.v2;
    out.averaged.v3 += r.v3;
    out.averaged.v4 += r.v4;
    signal_sum += r.sum();
  }
  const double m = static_cast<double>(readings.size());
  out.averaged.v1 /= m;
  out.averaged.v2 /= m;
  out.averaged.v3 /= m;
  out.averaged.v4 /= m;
  if (quadrant_noise_std == 0.0) {
    out.saturated = true;
    out.snr_single = out.snr_combined = std::numeric_limits<double>::infinity();
    return out;
  }
  // Summed power carries four independent quadrant noises: std 2 sigma.
  const double sample_noise = 2.0 * quadrant_noise_std;
  out.snr_single = (signal_sum / m) / sample_noise;
  out.snr_combined = signal_sum / std::sqrt(m * sample_noise * sample_noise);
  return out;
}

void TrackingConfig::validate() const {
  geometry.validate();
  if (samples_per_correction < 1) throw DomainError("tracking: m must be >= 1");
  if (!(loop_rate_hz > 0.0 && loop_rate_hz <= kMaxLoopRateHz)) {
    throw DomainError("tracking: loop rate must lie in (0, 1000] Hz");
  }
  if (!(duration_s * loop_rate_hz >= 100.0)) {
    throw DomainError("tracking: duration must cover at least 100 corrections");
  }
  if (!(controller_gain >= 0.0)) throw DomainError("tracking: controller gain must be >= 0");
  if (!(signal_power > 0.0)) throw DomainError("tracking: signal power must be > 0");
  if (!(quadrant_noise_std >= 0.0)) throw DomainError("tracking: noise std must be >= 0");
  if (!(disturbance.rms_m >= 0.0)) throw DomainError("tracking: disturbance rms must be >= 0");
  if (disturbance.rms_m > 0.0 && !(disturbance.bandwidth_hz > 0.0)) {
    throw DomainError("tracking: disturbance bandwidth must be > 0");
  }
}

TrackingResult run_tracking_loop(const TrackingConfig& config) {
  config.validate();
  const auto steps = static_cast<Eigen::Index>(std::floor(config.duration_s * config.loop_rate_hz));

  Eigen::ArrayXd jitter_x = Eigen::ArrayXd::Zero(steps);
  Eigen::ArrayXd jitter_y = Eigen::ArrayXd::Zero(steps);
  if (config.disturbance.rms_m > 0.0) {
    // exp(-(t/tau)^2) has a PSD falling to 1/e at f = 1 / (pi tau).
    const double tau = 1.0 / (numerics::kPi * config.disturbance.bandwidth_hz);
    const double corr = tau * config.loop_rate_hz;
    GaussianProcess(corr, config.seed, streams::kDisturbX).fill(0, jitter_x);
    GaussianProcess(corr, config.seed, streams::kDisturbY).fill(0, jitter_y);
    jitter_x *= config.disturbance.rms_m;
    jitter_y *= config.disturbance.rms_m;
  }

  TrackingResult out;
  out.residual.reserve(static_cast<std::size_t>(steps));
  Eigen::Vector2d correction = Eigen::Vector2d::Zero();
  std::vector<QdReading> readings(static_cast<std::size_t>(config.samples_per_correction));
  int outside = 0;
  double sum_x2 = 0.0;
  double sum_y2 = 0.0;
  for (Eigen::Index k = 0; k < steps; ++k) {
    const Eigen::Vector2d offset =
        config.initial_offset + Eigen::Vector2d(jitter_x[k], jitter_y[k]) - correction;
    out.residual.push_back({static_cast<double>(k) / config.loop_rate_hz, offset});
    sum_x2 += offset.x() * offset.x();
    sum_y2 += offset.y() * offset.y();
    out.max_m = std::max(out.max_m, offset.norm());

    outside = offset.norm() > config.geometry.detector_size_m ? outside + 1 : 0;
    if (outside >= kDivergenceSteps) {
      throw InstabilityError("tracking loop diverged beyond the detector for " +
                             std::to_string(kDivergenceSteps) + " consecutive steps");
    }

    // One static channel draw per correction interval.
    const QdReading clean = qd_overlap(offset, config.geometry, config.signal_power);
    Engine engine = make_engine(config.seed, streams::kQdNoise, static_cast<std::uint64_t>(k));
    for (QdReading& r : readings) r = add_quadrant_noise(clean, config.quadrant_noise_std, engine);
    const MultiSampleResult aggregate = multisample_snr(readings, config.quadrant_noise_std);
    if (aggregate.averaged.sum() > 0.0) {
      correction += config.controller_gain *
                    estimate_displacement(aggregate.averaged, config.geometry);
    }
    ++out.corrections;
  }
  const double n = static_cast<double>(steps);
  out.rms_x_m = std::sqrt(sum_x2 / n);
  out.rms_y_m = std::sqrt(sum_y2 / n);
  out.rms_m = std::sqrt((sum_x2 + sum_y2) / n);
  out.disturbance_rms_x_m = std::sqrt(jitter_x.square().mean());
  out.disturbance_rms_y_m = std::sqrt(jitter_y.square().mean());
  return out;
}

void write_residual_csv(std::ostream& out, const TrackingResult& result) {
  out << "time_s,offset_x_m,offset_y_m\n";
  char line[96];
  for (const TrackingSample& s : result.residual) {
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g\n", s.time_s, s.offset.x(), s.offset.y());
    out << line;
  }
}

}  // namespace fso
