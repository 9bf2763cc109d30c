#include "fso/config.hpp"

#include <cstdlib>
#include <fstream>

#include "fso/errors.hpp"

namespace fso {

namespace {

template <typename Enum>
struct EnumName {
  Enum value;
  const char* name;
};

constexpr EnumName<FadingSelection> kFadingNames[] = {
    {FadingSelection::automatic, "auto"},
    {FadingSelection::log_normal, "log_normal"},
    {FadingSelection::gamma_gamma, "gamma_gamma"},
    {FadingSelection::none, "none"},
};
constexpr EnumName<NoiseMode> kNoiseNames[] = {
    {NoiseMode::q_factor, "q_factor"},
    {NoiseMode::physical, "physical"},
    {NoiseMode::fixed, "fixed"},
};
constexpr EnumName<ThresholdMode> kThresholdNames[] = {
    {ThresholdMode::adaptive, "adaptive"},
    {ThresholdMode::fixed, "fixed"},
};

template <typename Enum, std::size_t N>
const char* enum_name(const EnumName<Enum> (&table)[N], Enum value) {
  for (const auto& e : table) {
    if (e.value == value) return e.name;
  }
  return "?";
}

template <typename Enum, std::size_t N>
Enum enum_value(const EnumName<Enum> (&table)[N], const std::string& name, const char* key) {
  for (const auto& e : table) {
    if (name == e.name) return e.value;
  }
  std::string valid;
  for (const auto& e : table) valid += std::string(valid.empty() ? "" : ", ") + e.name;
  throw ConfigError(std::string(key) + ": unknown value '" + name + "' (valid: " + valid + ")");
}

// Reads j[key] into out if present, with the key path in error messages.
template <typename T>
void read(const Json& j, const char* section, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string(section) + "." + key + ": " + e.what());
  }
}

void read_optional(const Json& j, const char* section, const char* key,
                   std::optional<double>& out) {
  if (!j.contains(key)) return;
  if (j.at(key).is_null()) {
    out.reset();
    return;
  }
  double v = 0.0;
  read(j, section, key, v);
  out = v;
}

const Json& section(const Json& j, const char* name) {
  static const Json empty = Json::object();
  if (!j.contains(name)) return empty;
  if (!j.at(name).is_object()) throw ConfigError(std::string(name) + ": expected an object");
  return j.at(name);
}

Json parse_scalar(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception&) {
    return Json(text);
  }
}

void collect_numeric(const Json& j, const std::string& prefix, std::vector<std::string>& out) {
  for (const auto& [key, value] : j.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (value.is_object()) {
      collect_numeric(value, path, out);
    } else if (value.is_number()) {
      out.push_back(path);
    }
  }
}

}  // namespace

void RunConfig::validate() const {
  weather.validate();
  geometry.validate();
  optics.validate();
  modem.validate();
  pat.validate();
  if (run.symbols < 10'000) throw ConfigError("run.symbols must be >= 10000");
  if (run.block_symbols < 64 || run.block_symbols % 4 != 0) {
    throw ConfigError("run.block_symbols must be a multiple of 4 and >= 64");
  }
  if (!(channel.outage_probability > 0.0 && channel.outage_probability <= 0.5)) {
    throw ConfigError("channel.outage_probability must lie in (0, 0.5]");
  }
  if (!(channel.emulated_duration_s > 0.0 && channel.trace_samples_per_coherence > 0.0)) {
    throw ConfigError("channel.emulated_duration_s and trace_samples_per_coherence must be > 0");
  }
  if (!(channel.gamma_gamma_threshold >= 0.0)) {
    throw ConfigError("channel.gamma_gamma_threshold must be >= 0");
  }
  if (noise.mode == NoiseMode::q_factor && !(noise.target_q > 0.0)) {
    throw ConfigError("noise.target_q must be > 0");
  }
  if (!(noise.noise_std >= 0.0)) throw ConfigError("noise.noise_std must be >= 0");
  if (filter.demo.n < 1) throw ConfigError("filter.n must be >= 1");
}

std::vector<PresetInfo> list_presets() {
  return {
      {"clear", "clear weather: V = 10 km, v = 1 m/s, no fog or rain layers, 20 km at 1550 nm",
       "measured clear-day inputs (visibility, wind speed, layer thicknesses, wavelength, link "
       "distance); link altitude 4 km chosen for a weak-turbulence channel"},
      {"hazy", "hazy weather: V = 3 km, v = 6 m/s, 50 m fog layer, 1 km rain layer, 20 km at 1550 nm",
       "measured hazy-day inputs (visibility, wind speed, layer thicknesses, wavelength, link "
       "distance); rain rate 2.5 mm/h and link altitude 1 km are not tabulated and chosen here"},
  };
}

RunConfig preset(std::string_view name) {
  RunConfig c;
  c.geometry.distance_m = 20e3;
  c.geometry.wavelength_m = 1550e-9;
  if (name == "clear") {
    c.scenario = "clear";
    c.weather.visibility_km = 10.0;
    c.weather.wind_speed_ground = 1.0;
    c.weather.fog_layer_m = 0.0;
    c.weather.rain_layer_km = 0.0;
    c.weather.rain_rate = 0.0;
    c.geometry.tx_altitude_m = c.geometry.rx_altitude_m = 4000.0;
  } else if (name == "hazy") {
    c.scenario = "hazy";
    c.weather.visibility_km = 3.0;
    c.weather.wind_speed_ground = 6.0;
    c.weather.fog_layer_m = 50.0;
    c.weather.rain_layer_km = 1.0;
    c.weather.rain_rate = 2.5;
    c.geometry.tx_altitude_m = c.geometry.rx_altitude_m = 1000.0;
  } else {
    throw ConfigError("unknown scenario preset '" + std::string(name) + "' (valid: clear, hazy)");
  }
  return c;
}

Json to_json(const RunConfig& c) {
  Json j;
  j["scenario"] = c.scenario;
  j["weather"] = {
      {"visibility_km", c.weather.visibility_km},
      {"wind_speed_ground_mps", c.weather.wind_speed_ground},
      {"fog_layer_m", c.weather.fog_layer_m},
      {"rain_layer_km", c.weather.rain_layer_km},
      {"rain_rate_mm_per_h", c.weather.rain_rate},
      {"ground_cn2_m_minus_2_3", c.weather.ground_cn2},
      {"cloud_thickness_m", c.weather.cloud ? c.weather.cloud->thickness_m : 0.0},
      {"cloud_equivalent_visibility_km",
       c.weather.cloud ? c.weather.cloud->equivalent_visibility_km : 0.1},
  };
  j["geometry"] = {
      {"distance_m", c.geometry.distance_m},
      {"tx_altitude_m", c.geometry.tx_altitude_m},
      {"rx_altitude_m", c.geometry.rx_altitude_m},
      {"wavelength_m", c.geometry.wavelength_m},
      {"tx_aperture_m", c.geometry.tx_aperture_m},
      {"rx_aperture_m", c.geometry.rx_aperture_m},
      {"beam_divergence_rad", c.geometry.beam_divergence_rad},
      {"rx_fov_sr", c.geometry.rx_fov_sr},
  };
  j["optics"] = {
      {"tx_efficiency", c.optics.tx_efficiency},
      {"rx_efficiency", c.optics.rx_efficiency},
      {"tx_power_dbm", c.optics.tx_power_dbm},
      {"pointing_error_rad",
       c.optics.pointing_error_rad ? Json(*c.optics.pointing_error_rad) : Json(nullptr)},
      {"optical_loss_db",
       c.optics.optical_loss_db ? Json(*c.optics.optical_loss_db) : Json(nullptr)},
      {"responsivity_a_per_w", c.optics.responsivity},
      {"noise_floor_dbm", c.optics.noise_floor_dbm},
  };
  j["modem"] = {
      {"symbol_rate_hz", c.modem.symbol_rate_hz},
      {"levels", c.modem.levels},
      {"gray_mapping", c.modem.gray_mapping},
      {"samples_per_symbol", c.modem.samples_per_symbol},
  };
  j["channel"] = {
      {"fading", enum_name(kFadingNames, c.channel.fading)},
      {"gamma_gamma_threshold", c.channel.gamma_gamma_threshold},
      {"outage_probability", c.channel.outage_probability},
      {"emulated_duration_s", c.channel.emulated_duration_s},
      {"trace_samples_per_coherence", c.channel.trace_samples_per_coherence},
      {"rain_k", c.channel.rain.k},
      {"rain_alpha", c.channel.rain.alpha},
      {"include_geometric_loss", c.channel.include_geometric_loss},
  };
  j["noise"] = {
      {"mode", enum_name(kNoiseNames, c.noise.mode)},
      {"target_q", c.noise.target_q},
      {"noise_std", c.noise.noise_std},
  };
  j["run"] = {
      {"seed", c.run.seed},
      {"symbols", c.run.symbols},
      {"block_symbols", c.run.block_symbols},
      {"thresholds", enum_name(kThresholdNames, c.run.thresholds)},
      {"payload_path", c.run.payload_path},
  };
  j["pat"] = {
      {"detector_size_m", c.pat.geometry.detector_size_m},
      {"beam_radius_m", c.pat.geometry.beam_radius_m},
      {"gap_m", c.pat.geometry.gap_m},
      {"estimator_gain_m", c.pat.geometry.estimator_gain},
      {"samples_per_correction", c.pat.samples_per_correction},
      {"loop_rate_hz", c.pat.loop_rate_hz},
      {"controller_gain", c.pat.controller_gain},
      {"duration_s", c.pat.duration_s},
      {"signal_power", c.pat.signal_power},
      {"quadrant_noise_std", c.pat.quadrant_noise_std},
      {"disturbance_rms_m", c.pat.disturbance.rms_m},
      {"disturbance_bandwidth_hz", c.pat.disturbance.bandwidth_hz},
      {"initial_offset_x_m", c.pat.initial_offset.x()},
      {"initial_offset_y_m", c.pat.initial_offset.y()},
  };
  j["filter"] = {
      {"n", c.filter.demo.n},
      {"aperture_side_m", c.filter.demo.aperture_side_m},
      {"spot_center_x_m", c.filter.demo.spot.center.x()},
      {"spot_center_y_m", c.filter.demo.spot.center.y()},
      {"spot_radius_m", c.filter.demo.spot.radius_m},
      {"noise_power_w", c.filter.demo.noise_power_total},
      {"noise_from_solar", c.filter.noise_from_solar},
      {"solar_radiance_w_per_m2_sr_nm", c.filter.solar.background_radiance},
      {"optical_bandwidth_nm", c.filter.solar.optical_bandwidth_nm},
      {"target_unfiltered_ber", c.filter.demo.target_unfiltered_ber},
      {"symbols", c.filter.demo.symbols},
  };
  return j;
}

RunConfig config_from_json(const Json& j) {
  RunConfig c;
  read(j, "", "scenario", c.scenario);

  const Json& w = section(j, "weather");
  read(w, "weather", "visibility_km", c.weather.visibility_km);
  read(w, "weather", "wind_speed_ground_mps", c.weather.wind_speed_ground);
  read(w, "weather", "fog_layer_m", c.weather.fog_layer_m);
  read(w, "weather", "rain_layer_km", c.weather.rain_layer_km);
  read(w, "weather", "rain_rate_mm_per_h", c.weather.rain_rate);
  read(w, "weather", "ground_cn2_m_minus_2_3", c.weather.ground_cn2);
  CloudLayer cloud{0.0, 0.1};
  read(w, "weather", "cloud_thickness_m", cloud.thickness_m);
  read(w, "weather", "cloud_equivalent_visibility_km", cloud.equivalent_visibility_km);
  if (cloud.thickness_m > 0.0) c.weather.cloud = cloud;

  const Json& g = section(j, "geometry");
  read(g, "geometry", "distance_m", c.geometry.distance_m);
  read(g, "geometry", "tx_altitude_m", c.geometry.tx_altitude_m);
  read(g, "geometry", "rx_altitude_m", c.geometry.rx_altitude_m);
  read(g, "geometry", "wavelength_m", c.geometry.wavelength_m);
  read(g, "geometry", "tx_aperture_m", c.geometry.tx_aperture_m);
  read(g, "geometry", "rx_aperture_m", c.geometry.rx_aperture_m);
  read(g, "geometry", "beam_divergence_rad", c.geometry.beam_divergence_rad);
  read(g, "geometry", "rx_fov_sr", c.geometry.rx_fov_sr);

  const Json& o = section(j, "optics");
  read(o, "optics", "tx_efficiency", c.optics.tx_efficiency);
  read(o, "optics", "rx_efficiency", c.optics.rx_efficiency);
  read(o, "optics", "tx_power_dbm", c.optics.tx_power_dbm);
  read_optional(o, "optics", "pointing_error_rad", c.optics.pointing_error_rad);
  read_optional(o, "optics", "optical_loss_db", c.optics.optical_loss_db);
  read(o, "optics", "responsivity_a_per_w", c.optics.responsivity);
  read(o, "optics", "noise_floor_dbm", c.optics.noise_floor_dbm);

  const Json& m = section(j, "modem");
  read(m, "modem", "symbol_rate_hz", c.modem.symbol_rate_hz);
  read(m, "modem", "levels", c.modem.levels);
  read(m, "modem", "gray_mapping", c.modem.gray_mapping);
  read(m, "modem", "samples_per_symbol", c.modem.samples_per_symbol);

  const Json& ch = section(j, "channel");
  std::string name = enum_name(kFadingNames, c.channel.fading);
  read(ch, "channel", "fading", name);
  c.channel.fading = enum_value(kFadingNames, name, "channel.fading");
  read(ch, "channel", "gamma_gamma_threshold", c.channel.gamma_gamma_threshold);
  read(ch, "channel", "outage_probability", c.channel.outage_probability);
  read(ch, "channel", "emulated_duration_s", c.channel.emulated_duration_s);
  read(ch, "channel", "trace_samples_per_coherence", c.channel.trace_samples_per_coherence);
  read(ch, "channel", "rain_k", c.channel.rain.k);
  read(ch, "channel", "rain_alpha", c.channel.rain.alpha);
  read(ch, "channel", "include_geometric_loss", c.channel.include_geometric_loss);

  const Json& n = section(j, "noise");
  name = enum_name(kNoiseNames, c.noise.mode);
  read(n, "noise", "mode", name);
  c.noise.mode = enum_value(kNoiseNames, name, "noise.mode");
  read(n, "noise", "target_q", c.noise.target_q);
  read(n, "noise", "noise_std", c.noise.noise_std);

  const Json& r = section(j, "run");
  read(r, "run", "seed", c.run.seed);
  read(r, "run", "symbols", c.run.symbols);
  read(r, "run", "block_symbols", c.run.block_symbols);
  name = enum_name(kThresholdNames, c.run.thresholds);
  read(r, "run", "thresholds", name);
  c.run.thresholds = enum_value(kThresholdNames, name, "run.thresholds");
  read(r, "run", "payload_path", c.run.payload_path);

  const Json& p = section(j, "pat");
  QdGeometry qd = c.pat.geometry;
  read(p, "pat", "detector_size_m", qd.detector_size_m);
  read(p, "pat", "beam_radius_m", qd.beam_radius_m);
  read(p, "pat", "gap_m", qd.gap_m);
  const QdGeometry defaults = c.pat.geometry;
  const bool shape_changed = qd.detector_size_m != defaults.detector_size_m ||
                             qd.beam_radius_m != defaults.beam_radius_m ||
                             qd.gap_m != defaults.gap_m;
  if (shape_changed) {
    qd = QdGeometry::calibrated(qd.detector_size_m, qd.beam_radius_m, qd.gap_m);
  }
  // An explicit gain only wins when it differs from the default calibration.
  double gain = defaults.estimator_gain;
  read(p, "pat", "estimator_gain_m", gain);
  if (gain != defaults.estimator_gain) qd.estimator_gain = gain;
  c.pat.geometry = qd;
  read(p, "pat", "samples_per_correction", c.pat.samples_per_correction);
  read(p, "pat", "loop_rate_hz", c.pat.loop_rate_hz);
  read(p, "pat", "controller_gain", c.pat.controller_gain);
  read(p, "pat", "duration_s", c.pat.duration_s);
  read(p, "pat", "signal_power", c.pat.signal_power);
  read(p, "pat", "quadrant_noise_std", c.pat.quadrant_noise_std);
  read(p, "pat", "disturbance_rms_m", c.pat.disturbance.rms_m);
  read(p, "pat", "disturbance_bandwidth_hz", c.pat.disturbance.bandwidth_hz);
  read(p, "pat", "initial_offset_x_m", c.pat.initial_offset.x());
  read(p, "pat", "initial_offset_y_m", c.pat.initial_offset.y());
  c.pat.seed = c.run.seed;

  const Json& f = section(j, "filter");
  read(f, "filter", "n", c.filter.demo.n);
  read(f, "filter", "aperture_side_m", c.filter.demo.aperture_side_m);
  read(f, "filter", "spot_center_x_m", c.filter.demo.spot.center.x());
  read(f, "filter", "spot_center_y_m", c.filter.demo.spot.center.y());
  read(f, "filter", "spot_radius_m", c.filter.demo.spot.radius_m);
  read(f, "filter", "noise_power_w", c.filter.demo.noise_power_total);
  read(f, "filter", "noise_from_solar", c.filter.noise_from_solar);
  read(f, "filter", "solar_radiance_w_per_m2_sr_nm", c.filter.solar.background_radiance);
  read(f, "filter", "optical_bandwidth_nm", c.filter.solar.optical_bandwidth_nm);
  read(f, "filter", "target_unfiltered_ber", c.filter.demo.target_unfiltered_ber);
  read(f, "filter", "symbols", c.filter.demo.symbols);
  const double radius = 0.5 * c.geometry.rx_aperture_m;
  c.filter.solar.aperture_area_m2 = 3.14159265358979323846 * radius * radius;
  c.filter.solar.fov_sr = c.geometry.rx_fov_sr;
  if (c.filter.noise_from_solar) {
    c.filter.demo.noise_power_total = solar_noise_power(c.filter.solar);
  }

  c.validate();
  return c;
}

void apply_override(Json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
    if (!node->is_object() || !node->contains(part)) {
      throw ConfigError("unknown configuration key '" + key + "'");
    }
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (node->is_object()) throw ConfigError("'" + key + "' is a section, not a value");
  *node = node->is_string() ? Json(text) : parse_scalar(text);
}

std::vector<std::string> numeric_keys(const Json& j) {
  std::vector<std::string> keys;
  collect_numeric(j, "", keys);
  return keys;
}

RunConfig resolve_config(const std::optional<std::string>& preset_name,
                         const std::optional<std::string>& config_path,
                         const std::vector<std::string>& overrides) {
  Json j = to_json(preset_name ? preset(*preset_name) : RunConfig{});
  if (config_path) {
    std::ifstream in(*config_path);
    if (!in) throw IoError(*config_path, "cannot open configuration file");
    Json file;
    try {
      file = Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(*config_path + ": " + e.what());
    }
    if (!file.is_object()) throw ConfigError(*config_path + ": expected a JSON object");
    for (const auto& [key, value] : file.items()) {
      if (!j.contains(key)) throw ConfigError(*config_path + ": unknown key '" + key + "'");
      if (value.is_object()) {
        for (const auto& [inner, v] : value.items()) {
          if (!j[key].contains(inner)) {
            throw ConfigError(*config_path + ": unknown key '" + key + "." + inner + "'");
          }
          j[key][inner] = v;
        }
      } else {
        j[key] = value;
      }
    }
  }
  for (const std::string& o : overrides) apply_override(j, o);
  return config_from_json(j);
}

}  // namespace fso
