#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fso/channel_trace.hpp"
#include "fso/config.hpp"
#include "fso/linkbudget.hpp"
#include "fso/modem.hpp"

namespace fso {

struct ExecutionOptions {
  unsigned workers = 0;  // 0: one per hardware thread
  bool timestamps = true;
};

struct FadingSummary {
  std::string model;  // log_normal, gamma_gamma or none
  double rytov_variance = 0.0;
  double scintillation_index = 0.0;
  std::optional<GammaGammaParams> shape;
  double coherence_time_s = 0.0;
  double trace_sample_rate_hz = 0.0;
  std::size_t trace_samples = 0;
};

struct NoiseSummary {
  std::string mode;
  double noise_std = 0.0;
  std::optional<double> target_q;
};

struct PayloadSummary {
  std::string source;  // "pseudorandom" or the input path
  std::size_t payload_bits = 0;
  std::optional<std::size_t> bytes;
  std::optional<std::size_t> byte_errors;
  std::string output_path;
};

struct RunReport {
  Json config;
  LossBreakdown losses;
  LinkBudget budget;
  FadingSummary fading;
  std::optional<TraceStats> trace;
  NoiseSummary noise;
  BerReport ber;
  PayloadSummary payload;
  std::size_t blocks = 0;
  std::vector<std::string> warnings;
  std::optional<double> wall_clock_s;
  std::optional<std::string> started_at;
};

/// Per-block noise standard deviation that puts the mean block BER estimate
/// at the level of a unit-gain link with eye Q-factor q.
double calibrate_noise_std(const Pam4Config& modem, std::span<const double> block_gains, double q);

RunReport run_endtoend(const RunConfig& config, const ExecutionOptions& exec = {});

/// Sends the file at path_in through the configured channel and writes the
/// recovered bytes to path_out.
RunReport payload_roundtrip(const std::string& path_in, const RunConfig& config,
                            const std::string& path_out, const ExecutionOptions& exec = {});

/// One run per value of a numeric configuration key. `pat.*` axes run the
/// tracking loop, every other axis the end-to-end link. The same base seed
/// is used for every row.
std::string scenario_sweep(const RunConfig& base, const std::string& axis,
                           const std::vector<double>& values, const ExecutionOptions& exec = {});

Json report_to_json(const RunReport& report);

}  // namespace fso
