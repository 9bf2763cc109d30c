#include "fso/channel_trace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "fso/numerics.hpp"
#include "fso/parallel.hpp"
#include "fso/random.hpp"

namespace fso {

namespace {

constexpr std::int64_t kNoiseBlock = 4096;
constexpr std::int64_t kFillChunk = 65536;
// Above this correlation length the process is built on a coarser node grid
// and interpolated, keeping the kernel short.
constexpr double kMaxDirectCorrelation = 64.0;
constexpr double kNodesPerCorrelation = 32.0;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

// Exponents of the large- and small-scale scintillation terms.
double large_scale_log(double rytov) {
  const double s125 = std::pow(rytov, 6.0 / 5.0);  // sigma_R^(12/5)
  return 0.49 * rytov / std::pow(1.0 + 1.11 * s125, 7.0 / 6.0);
}

double small_scale_log(double rytov) {
  const double s125 = std::pow(rytov, 6.0 / 5.0);
  return 0.51 * rytov / std::pow(1.0 + 0.69 * s125, 5.0 / 6.0);
}

// Unit-mean gamma variate with the given shape at standard-normal score z.
double unit_gamma_at(double shape, double z) {
  if (z <= 0.0) {
    const double p = numerics::normal_cdf(z);
    if (p <= 0.0) return 0.0;
    return numerics::gamma_p_inv(shape, p) / shape;
  }
  const double q = numerics::normal_cdf(-z);
  return numerics::gamma_q_inv(shape, q) / shape;
}

}  // namespace

std::string to_string(FadingKind kind) {
  return kind == FadingKind::log_normal ? "log_normal" : "gamma_gamma";
}

FadingModel FadingModel::log_normal(double index) {
  FadingModel m;
  m.kind = FadingKind::log_normal;
  m.sigma_i2 = index;
  m.validate();
  return m;
}

FadingModel FadingModel::gamma_gamma(GammaGammaParams params) {
  FadingModel m;
  m.kind = FadingKind::gamma_gamma;
  m.shape = params;
  if (!(params.alpha > 0.0 && params.beta > 0.0)) {
    throw DomainError("FadingModel: gamma-gamma alpha and beta must be > 0");
  }
  m.sigma_i2 = params.implied_index();
  return m;
}

void FadingModel::validate() const {
  if (!(sigma_i2 >= 0.0) || !std::isfinite(sigma_i2)) {
    throw DomainError("FadingModel: scintillation index must be finite and >= 0");
  }
  if (kind == FadingKind::gamma_gamma && !(shape.alpha > 0.0 && shape.beta > 0.0)) {
    throw DomainError("FadingModel: gamma-gamma alpha and beta must be > 0");
  }
}

double scintillation_index(double rytov) {
  if (!(rytov >= 0.0)) throw DomainError("scintillation_index: Rytov variance must be >= 0");
  if (rytov == 0.0) return 0.0;
  return std::expm1(large_scale_log(rytov) + small_scale_log(rytov));
}

GammaGammaParams gamma_gamma_params(double rytov) {
  if (!(rytov > 0.0)) {
    throw DomainError("gamma_gamma_params: Rytov variance must be > 0 (use log-normal at 0)");
  }
  return {1.0 / std::expm1(large_scale_log(rytov)), 1.0 / std::expm1(small_scale_log(rytov))};
}

double coherence_time(const LinkGeometry& geometry, double wind_speed) {
  if (!(wind_speed > 0.0)) throw DomainError("coherence_time: wind speed must be > 0");
  geometry.validate();
  return std::sqrt(geometry.wavelength_m * geometry.distance_m) / wind_speed;
}

// --- GaussianProcess -------------------------------------------------------

GaussianProcess::GaussianProcess(double correlation_samples, std::uint64_t seed,
                                 std::uint64_t stream)
    : seed_(seed), stream_(stream) {
  if (!(correlation_samples > 0.0) || !std::isfinite(correlation_samples)) {
    throw DomainError("GaussianProcess: correlation length must be positive and finite");
  }
  double node_corr = correlation_samples;
  if (correlation_samples > kMaxDirectCorrelation) {
    node_step_ = correlation_samples / kNodesPerCorrelation;
    node_corr = kNodesPerCorrelation;
  }
  // Convolving white noise with exp(-2 t^2 / tau^2) yields the Gaussian
  // autocorrelation exp(-t^2 / tau^2). Three tau keeps taps above e^-18.
  half_width_ = static_cast<int>(std::ceil(3.0 * node_corr));
  kernel_.resize(2 * half_width_ + 1);
  double energy = 0.0;
  for (int j = -half_width_; j <= half_width_; ++j) {
    const double t = j / node_corr;
    kernel_[j + half_width_] = std::exp(-2.0 * t * t);
    energy += kernel_[j + half_width_] * kernel_[j + half_width_];
  }
  const double norm = 1.0 / std::sqrt(energy);
  for (double& k : kernel_) k *= norm;
  lag1_correlation_ = 0.0;
  for (std::size_t j = 0; j + 1 < kernel_.size(); ++j) {
    lag1_correlation_ += kernel_[j] * kernel_[j + 1];
  }
}

void GaussianProcess::fill_nodes(std::int64_t first, Eigen::Ref<Eigen::ArrayXd> out) const {
  const std::int64_t count = out.size();
  if (count == 0) return;
  const std::int64_t noise_lo = first - half_width_;
  const std::int64_t noise_hi = first + count - 1 + half_width_;
  std::vector<double> noise(static_cast<std::size_t>(noise_hi - noise_lo + 1));
  std::vector<double> block(kNoiseBlock);
  for (std::int64_t b = floor_div(noise_lo, kNoiseBlock); b <= floor_div(noise_hi, kNoiseBlock);
       ++b) {
    Engine engine = make_engine(seed_, stream_, static_cast<std::uint64_t>(b));
    std::normal_distribution<double> normal;
    for (double& v : block) v = normal(engine);
    const std::int64_t block_lo = b * kNoiseBlock;
    const std::int64_t lo = std::max(block_lo, noise_lo);
    const std::int64_t hi = std::min(block_lo + kNoiseBlock - 1, noise_hi);
    for (std::int64_t i = lo; i <= hi; ++i) noise[i - noise_lo] = block[i - block_lo];
  }
  const int taps = static_cast<int>(kernel_.size());
  for (std::int64_t n = 0; n < count; ++n) {
    // out[n] = sum_j h[j] w[first + n - j]
    const double* w = noise.data() + n + 2 * half_width_;
    double acc = 0.0;
    for (int j = 0; j < taps; ++j) acc += kernel_[j] * w[-j];
    out[n] = acc;
  }
}

void GaussianProcess::fill(std::int64_t start, Eigen::Ref<Eigen::ArrayXd> out) const {
  const std::int64_t count = out.size();
  if (count == 0) return;
  if (node_step_ == 1.0) {
    fill_nodes(start, out);
    return;
  }
  // Linear interpolation between nodes, rescaled to unit variance.
  const std::int64_t first_node =
      static_cast<std::int64_t>(std::floor(static_cast<double>(start) / node_step_));
  const std::int64_t last_node =
      static_cast<std::int64_t>(std::floor(static_cast<double>(start + count - 1) / node_step_)) +
      1;
  Eigen::ArrayXd nodes(last_node - first_node + 1);
  fill_nodes(first_node, nodes);
  for (std::int64_t i = 0; i < count; ++i) {
    const double position = static_cast<double>(start + i) / node_step_;
    const double base = std::floor(position);
    const double f = position - base;
    const std::int64_t n = static_cast<std::int64_t>(base) - first_node;
    const double a = nodes[n];
    const double b = nodes[n + 1];
    const double var = (1.0 - f) * (1.0 - f) + f * f + 2.0 * f * (1.0 - f) * lag1_correlation_;
    out[i] = ((1.0 - f) * a + f * b) / std::sqrt(var);
  }
}

// --- TraceGenerator --------------------------------------------------------

namespace {

double correlation_samples(const FadingModel& model, double coherence_time_s,
                           double sample_rate_hz) {
  model.validate();
  if (!(coherence_time_s > 0.0 && sample_rate_hz > 0.0)) {
    throw DomainError("TraceGenerator: coherence time and sample rate must be > 0");
  }
  return coherence_time_s * sample_rate_hz;
}

}  // namespace

TraceGenerator::TraceGenerator(const FadingModel& model, double coherence_time_s,
                               double sample_rate_hz, std::uint64_t seed)
    : model_(model),
      first_(correlation_samples(model, coherence_time_s, sample_rate_hz), seed,
             streams::kTraceA),
      second_(coherence_time_s * sample_rate_hz, seed, streams::kTraceB) {}

void TraceGenerator::fill_serial(std::int64_t start, Eigen::Ref<Eigen::ArrayXd> out) const {
  if (model_.sigma_i2 == 0.0) {
    out.setOnes();
    return;
  }
  if (model_.kind == FadingKind::log_normal) {
    const double s2 = std::log1p(model_.sigma_i2);
    const double s = std::sqrt(s2);
    first_.fill(start, out);
    out = (s * out - 0.5 * s2).exp();
    return;
  }
  Eigen::ArrayXd z2(out.size());
  first_.fill(start, out);
  second_.fill(start, z2);
  const double alpha = model_.shape.alpha;
  const double beta = model_.shape.beta;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    out[i] = unit_gamma_at(alpha, out[i]) * unit_gamma_at(beta, z2[i]);
  }
}

void TraceGenerator::fill(std::int64_t start, Eigen::Ref<Eigen::ArrayXd> out,
                          unsigned workers) const {
  const std::int64_t count = out.size();
  const std::int64_t chunks = (count + kFillChunk - 1) / kFillChunk;
  parallel_chunks(static_cast<std::size_t>(chunks), workers, [&](std::size_t c) {
    const std::int64_t lo = static_cast<std::int64_t>(c) * kFillChunk;
    const std::int64_t n = std::min(kFillChunk, count - lo);
    fill_serial(start + lo, out.segment(lo, n));
  });
}

ChannelTrace generate_trace(const FadingModel& model, double coherence_time_s,
                            double sample_rate_hz, double duration_s, std::uint64_t seed,
                            const TraceOptions& options) {
  if (!(sample_rate_hz > 0.0 && duration_s > 0.0 && coherence_time_s > 0.0)) {
    throw DomainError("generate_trace: rate, duration and coherence time must be > 0");
  }
  const double samples = std::round(sample_rate_hz * duration_s);
  if (samples > static_cast<double>(options.max_samples)) {
    throw LengthError("generate_trace: " + std::to_string(samples) +
                      " samples exceed the in-memory budget of " +
                      std::to_string(options.max_samples) + "; use TraceGenerator::fill");
  }
  ChannelTrace trace;
  trace.sample_rate_hz = sample_rate_hz;
  trace.duration_s = duration_s;
  trace.seed = seed;
  trace.coherence_time_s = coherence_time_s;
  trace.gains.resize(std::max<Eigen::Index>(1, static_cast<Eigen::Index>(samples)));
  TraceGenerator(model, coherence_time_s, sample_rate_hz, seed)
      .fill(0, trace.gains, options.workers);
  return trace;
}

TraceStats trace_stats(const Eigen::Ref<const Eigen::ArrayXd>& gains, double sample_rate_hz) {
  const Eigen::Index n = gains.size();
  if (n < 100) throw LengthError("trace_stats: need at least 100 samples");
  TraceStats s;
  s.mean = gains.mean();
  const Eigen::ArrayXd centered = gains - s.mean;
  const double var = centered.square().mean();
  s.scintillation_index = var / (s.mean * s.mean);
  s.half_power_time_s = std::numeric_limits<double>::infinity();
  s.coherence_time_s = std::numeric_limits<double>::infinity();
  if (var == 0.0) return s;
  double previous = 1.0;
  for (Eigen::Index lag = 1; lag <= n / 2; ++lag) {
    const double r = (centered.head(n - lag) * centered.tail(n - lag)).sum() /
                     (static_cast<double>(n) * var);
    if (r < 0.5) {
      const double crossing = (lag - 1) + (previous - 0.5) / (previous - r);
      s.half_power_time_s = crossing / sample_rate_hz;
      s.coherence_time_s = s.half_power_time_s / std::sqrt(std::log(2.0));
      break;
    }
    previous = r;
  }
  return s;
}

TraceStats trace_stats(const ChannelTrace& trace) {
  return trace_stats(trace.gains, trace.sample_rate_hz);
}

}  // namespace fso
