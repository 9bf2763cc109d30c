#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fso/atmosphere.hpp"

namespace fso {

enum class FadingKind { log_normal, gamma_gamma };

std::string to_string(FadingKind kind);

struct GammaGammaParams {
  double alpha = 0.0;
  double beta = 0.0;

  /// Scintillation index implied by the parameters: 1/a + 1/b + 1/(ab).
  double implied_index() const { return 1.0 / alpha + 1.0 / beta + 1.0 / (alpha * beta); }
};

/// Marginal intensity distribution of a unit-mean fading process.
struct FadingModel {
  FadingKind kind = FadingKind::log_normal;
  double sigma_i2 = 0.0;
  GammaGammaParams shape;  // meaningful only for gamma_gamma

  static FadingModel log_normal(double scintillation_index);
  static FadingModel gamma_gamma(GammaGammaParams params);

  void validate() const;
};

/// Time series of nonnegative linear intensity gains.
struct ChannelTrace {
  double sample_rate_hz = 0.0;
  double duration_s = 0.0;
  std::uint64_t seed = 0;
  double coherence_time_s = 0.0;
  Eigen::ArrayXd gains;

  Eigen::Index size() const { return gains.size(); }
  double time_of(Eigen::Index i) const { return static_cast<double>(i) / sample_rate_hz; }
};

struct TraceStats {
  double mean = 0.0;
  double scintillation_index = 0.0;
  /// Lag at which the normalized autocovariance first drops to 1/2.
  double half_power_time_s = 0.0;
  /// half_power_time_s / sqrt(ln 2), comparable with the generator's tau0.
  double coherence_time_s = 0.0;
};

/// Rytov variance to scintillation index, valid from weak to saturated
/// turbulence.
double scintillation_index(double rytov_variance);

/// Plane-wave gamma-gamma shape parameters for a Rytov variance > 0.
GammaGammaParams gamma_gamma_params(double rytov_variance);

/// Frozen-turbulence coherence time sqrt(lambda * l) / v.
double coherence_time(const LinkGeometry& geometry, double wind_speed);

/// Unit-variance stationary Gaussian sequence with autocorrelation
/// exp(-(k / correlation_samples)^2), addressable by absolute sample index.
/// Any sample depends only on (seed, stream, index).
class GaussianProcess {
 public:
  GaussianProcess(double correlation_samples, std::uint64_t seed, std::uint64_t stream);

  void fill(std::int64_t start, Eigen::Ref<Eigen::ArrayXd> out) const;

 private:
  void fill_nodes(std::int64_t first, Eigen::Ref<Eigen::ArrayXd> out) const;

  std::uint64_t seed_;
  std::uint64_t stream_;
  double node_step_ = 1.0;  // samples per node
  std::vector<double> kernel_;
  int half_width_ = 0;
  double lag1_correlation_ = 0.0;
};

/// Streaming generator for unit-mean fading traces. fill() can be called for
/// any index range; the values are identical to those of one long run.
class TraceGenerator {
 public:
  TraceGenerator(const FadingModel& model, double coherence_time_s, double sample_rate_hz,
                 std::uint64_t seed);

  void fill(std::int64_t start, Eigen::Ref<Eigen::ArrayXd> out, unsigned workers = 1) const;

  const FadingModel& model() const { return model_; }

 private:
  void fill_serial(std::int64_t start, Eigen::Ref<Eigen::ArrayXd> out) const;

  FadingModel model_;
  GaussianProcess first_;
  GaussianProcess second_;
};

struct TraceOptions {
  /// Above this many samples use TraceGenerator::fill in chunks instead.
  std::int64_t max_samples = 100'000'000;
  unsigned workers = 0;
};

ChannelTrace generate_trace(const FadingModel& model, double coherence_time_s,
                            double sample_rate_hz, double duration_s, std::uint64_t seed,
                            const TraceOptions& options = {});

TraceStats trace_stats(const Eigen::Ref<const Eigen::ArrayXd>& gains, double sample_rate_hz);
TraceStats trace_stats(const ChannelTrace& trace);

}  // namespace fso
