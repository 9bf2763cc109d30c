#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "fso/atmosphere.hpp"
#include "fso/linkbudget.hpp"
#include "fso/modem.hpp"
#include "fso/pat.hpp"
#include "fso/spatial_filter.hpp"

namespace fso {

using Json = nlohmann::ordered_json;

enum class FadingSelection { automatic, log_normal, gamma_gamma, none };
enum class NoiseMode { q_factor, physical, fixed };
enum class ThresholdMode { adaptive, fixed };

struct ChannelSettings {
  FadingSelection fading = FadingSelection::automatic;
  double gamma_gamma_threshold = 0.3;  // Rytov variance switching to gamma-gamma
  double outage_probability = 1e-3;
  double emulated_duration_s = 60.0;
  double trace_samples_per_coherence = 16.0;
  RainModel rain;
  bool include_geometric_loss = false;
};

struct NoiseSettings {
  NoiseMode mode = NoiseMode::q_factor;
  double target_q = 3.7;
  double noise_std = 0.0;  // used by NoiseMode::fixed
};

struct RunSettings {
  std::uint64_t seed = 1;
  std::size_t symbols = 10'000'000;
  std::size_t block_symbols = 10'000;
  ThresholdMode thresholds = ThresholdMode::adaptive;
  std::string payload_path;  // empty: pseudorandom bits
};

struct FilterSettings {
  FilterDemoConfig demo;
  SolarModel solar;
  /// When true the grid noise power comes from the solar model.
  bool noise_from_solar = false;
};

/// Everything a run needs, resolved from defaults, preset, file and overrides.
struct RunConfig {
  std::string scenario = "clear";
  WeatherScenario weather;
  LinkGeometry geometry;
  TransceiverOptics optics;
  Pam4Config modem;
  ChannelSettings channel;
  NoiseSettings noise;
  RunSettings run;
  TrackingConfig pat;
  FilterSettings filter;

  void validate() const;
};

struct PresetInfo {
  std::string name;
  std::string description;
  std::string provenance;
};

std::vector<PresetInfo> list_presets();
RunConfig preset(std::string_view name);

Json to_json(const RunConfig& config);
RunConfig config_from_json(const Json& j);

/// Applies `section.key=value`. The key must already exist in `j`.
void apply_override(Json& j, const std::string& assignment);

/// Numeric keys usable as sweep axes, in dotted form.
std::vector<std::string> numeric_keys(const Json& j);

/// Defaults < preset < config file < overrides.
RunConfig resolve_config(const std::optional<std::string>& preset_name,
                         const std::optional<std::string>& config_path,
                         const std::vector<std::string>& overrides);

}  // namespace fso
