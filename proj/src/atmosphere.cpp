#include "fso/atmosphere.hpp"

#include <algorithm>
#include <string>

#include "fso/channel_trace.hpp"

namespace fso {

namespace {

constexpr double kRytovCoefficient = 1.23;

}  // namespace

void WeatherScenario::validate() const {
  if (!(visibility_km > 0.0)) throw DomainError("weather: visibility_km must be > 0");
  if (!(wind_speed_ground >= 0.0)) throw DomainError("weather: wind speed must be >= 0");
  if (!(fog_layer_m >= 0.0)) throw DomainError("weather: fog_layer_m must be >= 0");
  if (!(rain_layer_km >= 0.0)) throw DomainError("weather: rain_layer_km must be >= 0");
  if (!(rain_rate >= 0.0)) throw DomainError("weather: rain_rate must be >= 0");
  if (!(ground_cn2 > 0.0)) throw DomainError("weather: ground_cn2 must be > 0");
  if (cloud && !(cloud->thickness_m > 0.0 && cloud->equivalent_visibility_km > 0.0)) {
    throw DomainError("weather: cloud thickness and visibility must be > 0");
  }
}

void LinkGeometry::validate() const {
  if (!(distance_m > 0.0)) throw DomainError("geometry: distance_m must be > 0");
  if (!(wavelength_m > 0.0)) throw DomainError("geometry: wavelength_m must be > 0");
  if (!(tx_aperture_m > 0.0 && rx_aperture_m > 0.0)) {
    throw DomainError("geometry: apertures must be > 0");
  }
  if (!(tx_altitude_m >= 0.0 && rx_altitude_m >= 0.0)) {
    throw DomainError("geometry: altitudes must be >= 0");
  }
  if (!(beam_divergence_rad > 0.0)) throw DomainError("geometry: beam divergence must be > 0");
  if (!(rx_fov_sr > 0.0)) throw DomainError("geometry: rx_fov_sr must be > 0");
}

double cloud_attenuation_db(const std::optional<CloudLayer>& layer, double wavelength_m) {
  if (!layer) return 0.0;
  if (!(layer->thickness_m > 0.0 && layer->equivalent_visibility_km > 0.0)) {
    throw DomainError("cloud_attenuation_db: layer thickness and visibility must be > 0");
  }
  return fog_attenuation_db_per_km(layer->equivalent_visibility_km, wavelength_m) *
         (layer->thickness_m * 1e-3);
}

double rytov_variance_path_integral(const LinkGeometry& geometry,
                                    const WeatherScenario& scenario) {
  geometry.validate();
  scenario.validate();
  const double length = geometry.distance_m;
  const double h0 = geometry.tx_altitude_m;
  const double dh = geometry.rx_altitude_m - geometry.tx_altitude_m;
  auto integrand = [&](double z) {
    const double h = h0 + dh * (z / length);
    return cn2_profile(h, scenario.wind_speed_ground, scenario.ground_cn2) *
           std::pow(z, 5.0 / 6.0);
  };
  // Scaled so a constant C_n^2 reproduces the 1.23 closed form exactly.
  const double weight = kRytovCoefficient * (11.0 / 6.0) *
                        std::pow(geometry.wavenumber(), 7.0 / 6.0);
  return weight * numerics::integrate(integrand, 0.0, length, 1e-6, 60);
}

double rytov_variance(const LinkGeometry& geometry, const WeatherScenario& scenario) {
  geometry.validate();
  scenario.validate();
  if (!geometry.is_horizontal()) return rytov_variance_path_integral(geometry, scenario);
  const double altitude = 0.5 * (geometry.tx_altitude_m + geometry.rx_altitude_m);
  const double cn2 = cn2_profile(altitude, scenario.wind_speed_ground, scenario.ground_cn2);
  return rytov_variance_constant(cn2, geometry.wavelength_m, geometry.distance_m);
}

double rytov_variance_constant(double cn2, double wavelength_m, double length_m) {
  if (!(cn2 >= 0.0) || !(wavelength_m > 0.0) || !(length_m >= 0.0)) {
    throw DomainError("rytov_variance_constant: requires cn2 >= 0, wavelength > 0, length >= 0");
  }
  const double k = 2.0 * numerics::kPi / wavelength_m;
  return kRytovCoefficient * cn2 * std::pow(k, 7.0 / 6.0) * std::pow(length_m, 11.0 / 6.0);
}

double scintillation_loss_db(double rytov, double outage_probability) {
  if (!(rytov >= 0.0)) throw DomainError("scintillation_loss_db: Rytov variance must be >= 0");
  // p = 0.5 is accepted as the median-margin limit.
  if (!(outage_probability > 0.0 && outage_probability <= 0.5)) {
    throw DomainError("scintillation_loss_db: outage probability must lie in (0, 0.5]");
  }
  const double index = scintillation_index(rytov);
  if (index == 0.0) return 0.0;
  // Unit-mean log-normal: ln I ~ N(-s2/2, s2) with s2 = ln(1 + sigma_I^2).
  const double s2 = std::log1p(index);
  const double z = numerics::normal_quantile(outage_probability);
  const double margin = numerics::kDbPerNeper * (0.5 * s2 - std::sqrt(s2) * z);
  return std::max(0.0, margin);
}

double geometric_loss_db(const LinkGeometry& geometry) {
  geometry.validate();
  const double spot = geometry.tx_aperture_m + geometry.beam_divergence_rad * geometry.distance_m;
  return std::max(0.0, 20.0 * std::log10(spot / geometry.rx_aperture_m));
}

LossBreakdown total_atmospheric_loss(const WeatherScenario& scenario,
                                     const LinkGeometry& geometry,
                                     const AtmosphereOptions& options) {
  scenario.validate();
  geometry.validate();
  LossBreakdown out;
  const double rytov = rytov_variance(geometry, scenario);
  out.l_sci_db = scintillation_loss_db(rytov, options.outage_probability);
  if (scenario.fog_layer_m > 0.0) {
    out.l_fog_db = fog_attenuation_db_per_km(scenario.visibility_km, geometry.wavelength_m) *
                   (scenario.fog_layer_m * 1e-3);
  }
  if (scenario.rain_layer_km > 0.0) {
    out.l_rain_db =
        rain_attenuation_db_per_km(scenario.rain_rate, options.rain) * scenario.rain_layer_km;
  }
  out.l_cloud_db = cloud_attenuation_db(scenario.cloud, geometry.wavelength_m);
  if (options.include_geometric_loss) out.l_geometric_db = geometric_loss_db(geometry);
  out.l_total_db = out.component_sum();
  return out;
}

}  // namespace fso
