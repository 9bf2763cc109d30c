#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "fso/channel_trace.hpp"

namespace fso {

using BitVector = std::vector<std::uint8_t>;  // one bit (0/1) per element

struct Pam4Config {
  double symbol_rate_hz = 2e9;  // 4 Gbps line rate
  std::array<double, 4> levels{0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0};
  bool gray_mapping = true;
  int samples_per_symbol = 1;

  void validate() const;
  std::array<double, 3> midpoint_thresholds() const;
};

struct ModulatedSignal {
  Eigen::ArrayXd symbols;             // intensity per symbol
  std::vector<std::uint8_t> labels;   // level index 0..3 per symbol
  std::size_t padded_bits = 0;        // trailing zero bits added to fill a symbol
};

/// Two bits per symbol. With Gray mapping 00, 01, 11, 10 map to L0..L3.
ModulatedSignal modulate(std::span<const std::uint8_t> bits, const Pam4Config& config);

/// Level index for a bit pair and its inverse.
std::uint8_t bits_to_level(std::uint8_t b0, std::uint8_t b1, bool gray);
std::array<std::uint8_t, 2> level_to_bits(std::uint8_t level, bool gray);

/// r = H(t) x + n with the trace held constant across each symbol interval.
/// Each symbol spans samples_per_symbol output samples. Symbol k sits at
/// start_time_s + k / symbol_rate_hz.
Eigen::ArrayXd apply_channel(const Eigen::ArrayXd& symbols, const ChannelTrace& trace,
                             double noise_std, std::uint64_t seed, const Pam4Config& config,
                             double start_time_s = 0.0, unsigned workers = 1);

/// Static channel with a scalar gain.
Eigen::ArrayXd apply_channel(const Eigen::ArrayXd& symbols, double gain, double noise_std,
                             std::uint64_t seed, const Pam4Config& config,
                             unsigned workers = 1);

/// Averages each group of samples_per_symbol samples into one decision value.
Eigen::ArrayXd integrate_and_dump(const Eigen::ArrayXd& samples, int samples_per_symbol);

struct AdaptiveThresholds {};
using ThresholdSpec = std::variant<std::array<double, 3>, AdaptiveThresholds>;

/// 1-D k-means (k = 4) level estimate, initialized at quartile medians.
/// Throws CalibrationError when fewer than four distinct levels are found.
std::array<double, 4> kmeans_levels(const Eigen::Ref<const Eigen::ArrayXd>& decisions,
                                    int max_iterations = 50);

std::array<double, 3> thresholds_between(const std::array<double, 4>& levels);

/// Level decisions; a value equal to a threshold goes to the lower level.
std::vector<std::uint8_t> decide_levels(const Eigen::Ref<const Eigen::ArrayXd>& decisions,
                                        const std::array<double, 3>& thresholds);

BitVector demodulate(const Eigen::ArrayXd& samples, const ThresholdSpec& thresholds,
                     const Pam4Config& config);

struct LevelStats {
  std::array<double, 4> mean{};
  std::array<double, 4> stddev{};
  std::array<std::size_t, 4> count{};
  std::array<double, 3> q{};  // eye Q-factors between adjacent levels
};

/// Streaming per-level moments; merge() combines disjoint sample sets.
class LevelAccumulator {
 public:
  void add(double value, std::uint8_t label);
  void merge(const LevelAccumulator& other);
  LevelStats stats() const;  // throws DomainError when a level is missing
  std::size_t count(int level) const { return count_[level]; }

 private:
  std::array<std::size_t, 4> count_{};
  std::array<double, 4> mean_{};
  std::array<double, 4> m2_{};
};

/// Genie-aided eye statistics from labeled decision values.
LevelStats eye_stats(const Eigen::Ref<const Eigen::ArrayXd>& decisions,
                     std::span<const std::uint8_t> labels);

/// BER from eye statistics: (1/4) sum_i Q((mu_i - mu_{i-1}) / (sigma_i + sigma_{i-1})).
double estimate_ber_from_stats(const LevelStats& stats);

/// Eye Q-factors from per-level means and standard deviations.
std::array<double, 3> eye_q_factors(const std::array<double, 4>& mean,
                                    const std::array<double, 4>& stddev);

struct BitErrorCount {
  std::size_t bits = 0;
  std::size_t errors = 0;
  double ber = 0.0;
};

BitErrorCount count_ber(std::span<const std::uint8_t> tx_bits, std::span<const std::uint8_t> rx_bits);

struct BerReport {
  std::size_t bits_tx = 0;
  std::size_t bit_errors = 0;
  double ber_counted = 0.0;
  double ber_estimated = 0.0;
  LevelStats level_stats;
  std::optional<double> snr_db;  // unset for a noiseless channel
  std::size_t padded_bits = 0;
};

/// Result of pushing one block of bits through modulate, channel and decision.
struct BlockOutcome {
  BitVector rx_bits;
  std::size_t bit_errors = 0;
  LevelAccumulator levels;
  double ber_estimated = 0.0;
  double signal_energy = 0.0;  // sum of (H x)^2 over symbols
  std::size_t symbols = 0;
  std::size_t padded_bits = 0;
};

BlockOutcome transmit_block(std::span<const std::uint8_t> bits, double gain, double noise_std,
                            std::uint64_t noise_seed, const Pam4Config& config,
                            const ThresholdSpec& thresholds);

/// Same, with the gain taken from a fading trace; symbol k sits at
/// start_time_s + k / symbol_rate_hz.
BlockOutcome transmit_block(std::span<const std::uint8_t> bits, const ChannelTrace& trace,
                            double start_time_s, double noise_std, std::uint64_t noise_seed,
                            const Pam4Config& config, const ThresholdSpec& thresholds);

/// Block-parallel static-channel link with pseudorandom bits. Results do not
/// depend on the worker count.
BerReport simulate_static_link(const Pam4Config& config, std::size_t symbols, double gain,
                               double noise_std, std::uint64_t seed,
                               const ThresholdSpec& thresholds, unsigned workers = 0);

/// Noise std giving every eye the Q-factor q at unit gain.
double noise_std_for_q(const Pam4Config& config, double q);

}  // namespace fso
