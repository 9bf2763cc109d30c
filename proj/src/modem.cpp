#include "fso/modem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "fso/numerics.hpp"
#include "fso/parallel.hpp"
#include "fso/random.hpp"

namespace fso {

namespace {

constexpr Eigen::Index kNoiseChunk = 65536;
constexpr std::size_t kLinkBlock = 65536;

void add_noise(Eigen::Ref<Eigen::ArrayXd> samples, double noise_std, std::uint64_t seed,
               unsigned workers) {
  if (noise_std == 0.0) return;
  const Eigen::Index n = samples.size();
  const Eigen::Index chunks = (n + kNoiseChunk - 1) / kNoiseChunk;
  parallel_chunks(static_cast<std::size_t>(chunks), workers, [&](std::size_t c) {
    const Eigen::Index lo = static_cast<Eigen::Index>(c) * kNoiseChunk;
    const Eigen::Index hi = std::min(n, lo + kNoiseChunk);
    Engine engine = make_engine(seed, streams::kChannelNoise, c);
    std::normal_distribution<double> normal(0.0, noise_std);
    for (Eigen::Index i = lo; i < hi; ++i) samples[i] += normal(engine);
  });
}

}  // namespace

void Pam4Config::validate() const {
  if (!(symbol_rate_hz > 0.0)) throw DomainError("modem: symbol rate must be > 0");
  if (samples_per_symbol < 1) throw DomainError("modem: samples_per_symbol must be >= 1");
  if (!(levels[0] >= 0.0)) throw DomainError("modem: intensity levels must be nonnegative");
  for (int i = 1; i < 4; ++i) {
    if (!(levels[i] > levels[i - 1])) {
      throw DomainError("modem: intensity levels must be strictly increasing");
    }
  }
}

std::array<double, 3> Pam4Config::midpoint_thresholds() const { return thresholds_between(levels); }

std::uint8_t bits_to_level(std::uint8_t b0, std::uint8_t b1, bool gray) {
  if (!gray) return static_cast<std::uint8_t>(2 * b0 + b1);
  if (b0 == 0) return b1 == 0 ? 0 : 1;
  return b1 == 1 ? 2 : 3;
}

std::array<std::uint8_t, 2> level_to_bits(std::uint8_t level, bool gray) {
  static constexpr std::array<std::array<std::uint8_t, 2>, 4> kGray{{{0, 0}, {0, 1}, {1, 1}, {1, 0}}};
  static constexpr std::array<std::array<std::uint8_t, 2>, 4> kBinary{{{0, 0}, {0, 1}, {1, 0}, {1, 1}}};
  return gray ? kGray[level] : kBinary[level];
}

ModulatedSignal modulate(std::span<const std::uint8_t> bits, const Pam4Config& config) {
  config.validate();
  ModulatedSignal out;
  const std::size_t n = (bits.size() + 1) / 2;
  out.padded_bits = bits.size() % 2;
  out.symbols.resize(static_cast<Eigen::Index>(n));
  out.labels.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::uint8_t b0 = bits[2 * k] & 1u;
    const std::uint8_t b1 = 2 * k + 1 < bits.size() ? (bits[2 * k + 1] & 1u) : 0;
    const std::uint8_t level = bits_to_level(b0, b1, config.gray_mapping);
    out.labels[k] = level;
    out.symbols[static_cast<Eigen::Index>(k)] = config.levels[level];
  }
  return out;
}

Eigen::ArrayXd apply_channel(const Eigen::ArrayXd& symbols, const ChannelTrace& trace,
                             double noise_std, std::uint64_t seed, const Pam4Config& config,
                             double start_time_s, unsigned workers) {
  config.validate();
  if (!(noise_std >= 0.0)) throw DomainError("apply_channel: noise std must be >= 0");
  if (trace.size() == 0 || !(trace.sample_rate_hz > 0.0)) {
    throw LengthError("apply_channel: empty channel trace");
  }
  const int sps = config.samples_per_symbol;
  Eigen::ArrayXd out(symbols.size() * sps);
  for (Eigen::Index k = 0; k < symbols.size(); ++k) {
    const double t = start_time_s + static_cast<double>(k) / config.symbol_rate_hz;
    const auto index = static_cast<Eigen::Index>(std::floor(t * trace.sample_rate_hz));
    if (index < 0 || index >= trace.size()) {
      throw LengthError("apply_channel: trace too short for symbol at t=" + std::to_string(t) +
                        " s");
    }
    out.segment(k * sps, sps).setConstant(trace.gains[index] * symbols[k]);
  }
  add_noise(out, noise_std, seed, workers);
  return out;
}

Eigen::ArrayXd apply_channel(const Eigen::ArrayXd& symbols, double gain, double noise_std,
                             std::uint64_t seed, const Pam4Config& config, unsigned workers) {
  config.validate();
  if (!(noise_std >= 0.0)) throw DomainError("apply_channel: noise std must be >= 0");
  if (!(gain >= 0.0)) throw DomainError("apply_channel: gain must be >= 0");
  const int sps = config.samples_per_symbol;
  Eigen::ArrayXd out(symbols.size() * sps);
  for (Eigen::Index k = 0; k < symbols.size(); ++k) {
    out.segment(k * sps, sps).setConstant(gain * symbols[k]);
  }
  add_noise(out, noise_std, seed, workers);
  return out;
}

Eigen::ArrayXd integrate_and_dump(const Eigen::ArrayXd& samples, int samples_per_symbol) {
  if (samples_per_symbol == 1) return samples;
  if (samples.size() % samples_per_symbol != 0) {
    throw LengthError("integrate_and_dump: sample count is not a multiple of samples_per_symbol");
  }
  return samples.reshaped(samples_per_symbol, samples.size() / samples_per_symbol)
      .colwise()
      .mean()
      .transpose();
}

std::array<double, 3> thresholds_between(const std::array<double, 4>& levels) {
  return {0.5 * (levels[0] + levels[1]), 0.5 * (levels[1] + levels[2]),
          0.5 * (levels[2] + levels[3])};
}

std::vector<std::uint8_t> decide_levels(const Eigen::Ref<const Eigen::ArrayXd>& decisions,
                                        const std::array<double, 3>& thresholds) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(decisions.size()));
  for (Eigen::Index i = 0; i < decisions.size(); ++i) {
    const double v = decisions[i];
    out[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(
        (v > thresholds[0]) + (v > thresholds[1]) + (v > thresholds[2]));
  }
  return out;
}

std::array<double, 4> kmeans_levels(const Eigen::Ref<const Eigen::ArrayXd>& decisions,
                                    int max_iterations) {
  const Eigen::Index n = decisions.size();
  if (n < 4) throw CalibrationError("kmeans_levels: need at least four samples");
  std::vector<double> sorted(decisions.begin(), decisions.end());
  std::sort(sorted.begin(), sorted.end());
  std::array<double, 4> centers{};
  for (int q = 0; q < 4; ++q) {
    const Eigen::Index lo = q * n / 4;
    const Eigen::Index hi = (q + 1) * n / 4;
    centers[q] = sorted[static_cast<std::size_t>((lo + hi) / 2)];
  }
  std::array<double, 4> sum{};
  std::array<std::size_t, 4> count{};
  for (int it = 0; it < max_iterations; ++it) {
    const auto thresholds = thresholds_between(centers);
    sum.fill(0.0);
    count.fill(0);
    // Sorted input: each cluster is a contiguous run.
    for (double v : sorted) {
      const int level = (v > thresholds[0]) + (v > thresholds[1]) + (v > thresholds[2]);
      sum[level] += v;
      ++count[level];
    }
    std::array<double, 4> next{};
    for (int k = 0; k < 4; ++k) {
      if (count[k] == 0) {
        throw CalibrationError("kmeans_levels: degenerate clustering, fewer than 4 levels");
      }
      next[k] = sum[k] / static_cast<double>(count[k]);
    }
    const bool converged = next == centers;
    centers = next;
    if (converged) break;
  }
  for (int k = 1; k < 4; ++k) {
    if (!(centers[k] > centers[k - 1])) {
      throw CalibrationError("kmeans_levels: degenerate clustering, fewer than 4 levels");
    }
  }
  return centers;
}

BitVector demodulate(const Eigen::ArrayXd& samples, const ThresholdSpec& thresholds,
                     const Pam4Config& config) {
  config.validate();
  if (samples.size() == 0) throw LengthError("demodulate: no samples");
  const Eigen::ArrayXd decisions = integrate_and_dump(samples, config.samples_per_symbol);
  const std::array<double, 3> t =
      std::holds_alternative<AdaptiveThresholds>(thresholds)
          ? thresholds_between(kmeans_levels(decisions))
          : std::get<std::array<double, 3>>(thresholds);
  const auto levels = decide_levels(decisions, t);
  BitVector bits(levels.size() * 2);
  for (std::size_t k = 0; k < levels.size(); ++k) {
    const auto pair = level_to_bits(levels[k], config.gray_mapping);
    bits[2 * k] = pair[0];
    bits[2 * k + 1] = pair[1];
  }
  return bits;
}

// --- statistics ------------------------------------------------------------

void LevelAccumulator::add(double value, std::uint8_t label) {
  const std::size_t n = ++count_[label];
  const double delta = value - mean_[label];
  mean_[label] += delta / static_cast<double>(n);
  m2_[label] += delta * (value - mean_[label]);
}

void LevelAccumulator::merge(const LevelAccumulator& other) {
  for (int k = 0; k < 4; ++k) {
    const std::size_t na = count_[k];
    const std::size_t nb = other.count_[k];
    if (nb == 0) continue;
    if (na == 0) {
      count_[k] = nb;
      mean_[k] = other.mean_[k];
      m2_[k] = other.m2_[k];
      continue;
    }
    const double n = static_cast<double>(na + nb);
    const double delta = other.mean_[k] - mean_[k];
    mean_[k] += delta * static_cast<double>(nb) / n;
    m2_[k] += other.m2_[k] + delta * delta * static_cast<double>(na) * static_cast<double>(nb) / n;
    count_[k] = na + nb;
  }
}

LevelStats LevelAccumulator::stats() const {
  LevelStats s;
  for (int k = 0; k < 4; ++k) {
    if (count_[k] == 0) {
      throw DomainError("eye statistics: level " + std::to_string(k) + " has no samples");
    }
    s.count[k] = count_[k];
    s.mean[k] = mean_[k];
    s.stddev[k] = std::sqrt(std::max(0.0, m2_[k] / static_cast<double>(count_[k])));
  }
  s.q = eye_q_factors(s.mean, s.stddev);
  return s;
}

std::array<double, 3> eye_q_factors(const std::array<double, 4>& mean,
                                    const std::array<double, 4>& stddev) {
  std::array<double, 3> q{};
  for (int i = 1; i < 4; ++i) {
    const double gap = mean[i] - mean[i - 1];
    const double spread = stddev[i] + stddev[i - 1];
    if (spread == 0.0) {
      if (!(gap > 0.0)) {
        throw DomainError("eye Q-factor: zero spread with a closed eye between levels " +
                          std::to_string(i - 1) + " and " + std::to_string(i));
      }
      q[i - 1] = std::numeric_limits<double>::infinity();
    } else {
      q[i - 1] = gap / spread;
    }
  }
  return q;
}

LevelStats eye_stats(const Eigen::Ref<const Eigen::ArrayXd>& decisions,
                     std::span<const std::uint8_t> labels) {
  if (static_cast<std::size_t>(decisions.size()) != labels.size()) {
    throw LengthError("eye_stats: decisions and labels differ in length");
  }
  LevelAccumulator acc;
  for (Eigen::Index i = 0; i < decisions.size(); ++i) {
    acc.add(decisions[i], labels[static_cast<std::size_t>(i)]);
  }
  return acc.stats();
}

double estimate_ber_from_stats(const LevelStats& stats) {
  const auto q = eye_q_factors(stats.mean, stats.stddev);
  double sum = 0.0;
  for (double qi : q) sum += std::isinf(qi) ? 0.0 : numerics::q_function(qi);
  return std::clamp(0.25 * sum, 0.0, 0.5);
}

BitErrorCount count_ber(std::span<const std::uint8_t> tx_bits,
                        std::span<const std::uint8_t> rx_bits) {
  if (tx_bits.size() != rx_bits.size()) {
    throw LengthError("count_ber: bit streams differ in length (" +
                      std::to_string(tx_bits.size()) + " vs " + std::to_string(rx_bits.size()) +
                      ")");
  }
  BitErrorCount out;
  out.bits = tx_bits.size();
  for (std::size_t i = 0; i < tx_bits.size(); ++i) out.errors += (tx_bits[i] ^ rx_bits[i]) & 1u;
  out.ber = out.bits ? static_cast<double>(out.errors) / static_cast<double>(out.bits) : 0.0;
  return out;
}

// --- block link ------------------------------------------------------------

namespace {

BlockOutcome decide_block(std::span<const std::uint8_t> bits, const ModulatedSignal& tx,
                          Eigen::ArrayXd samples, double noise_std, std::uint64_t noise_seed,
                          const Pam4Config& config, const ThresholdSpec& thresholds) {
  BlockOutcome out;
  out.signal_energy =
      samples.square().sum() / static_cast<double>(config.samples_per_symbol);
  add_noise(samples, noise_std, noise_seed, 1);
  const Eigen::ArrayXd decisions = integrate_and_dump(samples, config.samples_per_symbol);
  const std::array<double, 3> t =
      std::holds_alternative<AdaptiveThresholds>(thresholds)
          ? thresholds_between(kmeans_levels(decisions))
          : std::get<std::array<double, 3>>(thresholds);
  const auto levels = decide_levels(decisions, t);

  out.symbols = tx.labels.size();
  out.padded_bits = tx.padded_bits;
  out.rx_bits.resize(bits.size());
  for (std::size_t k = 0; k < levels.size(); ++k) {
    const auto pair = level_to_bits(levels[k], config.gray_mapping);
    out.rx_bits[2 * k] = pair[0];
    if (2 * k + 1 < bits.size()) out.rx_bits[2 * k + 1] = pair[1];
    out.levels.add(decisions[static_cast<Eigen::Index>(k)], tx.labels[k]);
  }
  out.bit_errors = count_ber(bits, out.rx_bits).errors;
  bool all_levels = true;
  for (int k = 0; k < 4; ++k) all_levels = all_levels && out.levels.count(k) > 0;
  out.ber_estimated = all_levels ? estimate_ber_from_stats(out.levels.stats()) : 0.0;
  return out;
}

}  // namespace

BlockOutcome transmit_block(std::span<const std::uint8_t> bits, double gain, double noise_std,
                            std::uint64_t noise_seed, const Pam4Config& config,
                            const ThresholdSpec& thresholds) {
  if (!(noise_std >= 0.0)) throw DomainError("transmit_block: noise std must be >= 0");
  const ModulatedSignal tx = modulate(bits, config);
  return decide_block(bits, tx, apply_channel(tx.symbols, gain, 0.0, 0, config), noise_std,
                      noise_seed, config, thresholds);
}

BlockOutcome transmit_block(std::span<const std::uint8_t> bits, const ChannelTrace& trace,
                            double start_time_s, double noise_std, std::uint64_t noise_seed,
                            const Pam4Config& config, const ThresholdSpec& thresholds) {
  if (!(noise_std >= 0.0)) throw DomainError("transmit_block: noise std must be >= 0");
  const ModulatedSignal tx = modulate(bits, config);
  return decide_block(bits, tx, apply_channel(tx.symbols, trace, 0.0, 0, config, start_time_s),
                      noise_std, noise_seed, config, thresholds);
}

BerReport simulate_static_link(const Pam4Config& config, std::size_t symbols, double gain,
                               double noise_std, std::uint64_t seed,
                               const ThresholdSpec& thresholds, unsigned workers) {
  config.validate();
  const std::size_t blocks = (symbols + kLinkBlock - 1) / kLinkBlock;
  std::vector<std::size_t> errors(blocks);
  std::vector<std::size_t> bit_counts(blocks);
  std::vector<double> energy(blocks);
  std::vector<LevelAccumulator> levels(blocks);
  parallel_chunks(blocks, workers, [&](std::size_t b) {
    const std::size_t n = std::min(kLinkBlock, symbols - b * kLinkBlock);
    BitVector bits(2 * n);
    Engine engine = make_engine(seed, streams::kPayload, b);
    for (std::size_t i = 0; i < bits.size(); i += 64) {
      const std::uint64_t word = engine();
      for (std::size_t j = 0; j < 64 && i + j < bits.size(); ++j) bits[i + j] = (word >> j) & 1u;
    }
    BlockOutcome block = transmit_block(bits, gain, noise_std, derive_seed(seed, b), config,
                                        thresholds);
    errors[b] = block.bit_errors;
    bit_counts[b] = bits.size();
    energy[b] = block.signal_energy;
    levels[b] = block.levels;
  });
  BerReport report;
  LevelAccumulator pooled;
  double total_energy = 0.0;
  for (std::size_t b = 0; b < blocks; ++b) {
    report.bits_tx += bit_counts[b];
    report.bit_errors += errors[b];
    pooled.merge(levels[b]);
    total_energy += energy[b];
  }
  report.ber_counted =
      report.bits_tx ? static_cast<double>(report.bit_errors) / static_cast<double>(report.bits_tx)
                     : 0.0;
  report.level_stats = pooled.stats();
  report.ber_estimated = estimate_ber_from_stats(report.level_stats);
  const double effective_noise = noise_std / std::sqrt(config.samples_per_symbol);
  if (effective_noise > 0.0 && symbols > 0) {
    report.snr_db = 10.0 * std::log10(total_energy / static_cast<double>(symbols) /
                                      (effective_noise * effective_noise));
  }
  return report;
}

double noise_std_for_q(const Pam4Config& config, double q) {
  config.validate();
  if (!(q > 0.0)) throw DomainError("noise_std_for_q: Q-factor must be > 0");
  double gap = std::numeric_limits<double>::infinity();
  for (int i = 1; i < 4; ++i) gap = std::min(gap, config.levels[i] - config.levels[i - 1]);
  return gap / (2.0 * q) * std::sqrt(static_cast<double>(config.samples_per_symbol));
}

}  // namespace fso
