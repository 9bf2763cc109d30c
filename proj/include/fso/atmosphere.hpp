#pragma once

#include <cmath>
#include <optional>

#include "fso/errors.hpp"
#include "fso/numerics.hpp"

namespace fso {

/// In-cloud layer treated as dense fog with an equivalent visibility.
struct CloudLayer {
  double thickness_m = 0.0;
  double equivalent_visibility_km = 0.1;
};

struct WeatherScenario {
  double visibility_km = 10.0;
  double wind_speed_ground = 1.0;  // m/s at 0 km
  double fog_layer_m = 0.0;
  double rain_layer_km = 0.0;
  double rain_rate = 0.0;  // mm/h
  std::optional<CloudLayer> cloud;
  double ground_cn2 = 1.7e-14;  // m^-2/3

  void validate() const;
};

struct LinkGeometry {
  double distance_m = 20e3;
  double tx_altitude_m = 0.0;
  double rx_altitude_m = 0.0;
  double wavelength_m = 1550e-9;
  double tx_aperture_m = 0.05;
  double rx_aperture_m = 0.1;
  double beam_divergence_rad = 100e-6;  // full angle, 1/e^2
  double rx_fov_sr = 1e-8;

  void validate() const;
  bool is_horizontal() const { return std::abs(tx_altitude_m - rx_altitude_m) < 1.0; }
  double wavenumber() const { return 2.0 * numerics::kPi / wavelength_m; }
};

/// Positive dB losses. l_total_db is the sum of the others.
struct LossBreakdown {
  double l_sci_db = 0.0;
  double l_fog_db = 0.0;
  double l_rain_db = 0.0;
  double l_cloud_db = 0.0;
  double l_geometric_db = 0.0;
  double l_total_db = 0.0;

  double component_sum() const {
    return l_sci_db + l_fog_db + l_rain_db + l_cloud_db + l_geometric_db;
  }
};

/// Power-law rain attenuation k * R^alpha in dB/km.
struct RainModel {
  double k = 1.076;
  double alpha = 0.67;
};

struct AtmosphereOptions {
  double outage_probability = 1e-3;
  RainModel rain;
  /// Beam-spreading loss is not part of the atmospheric total by default.
  bool include_geometric_loss = false;
};

/// Hufnagel-Valley refractive-index structure profile C_n^2(h).
template <typename Scalar>
Scalar cn2_profile(Scalar altitude_m, Scalar wind_speed, Scalar ground_cn2) {
  using std::exp;
  using std::pow;
  if (!(altitude_m >= Scalar(0)) || !(wind_speed >= Scalar(0)) ||
      !(ground_cn2 > Scalar(0))) {
    throw DomainError("cn2_profile: requires h >= 0, v >= 0, A > 0");
  }
  const Scalar wind = wind_speed / Scalar(27);
  const Scalar scaled_h = Scalar(1e-5) * altitude_m;
  return Scalar(0.00594) * wind * wind * pow(scaled_h, 10) * exp(-altitude_m / Scalar(1000)) +
         Scalar(2.7e-16) * exp(-altitude_m / Scalar(1500)) +
         ground_cn2 * exp(-altitude_m / Scalar(100));
}

/// Kruse visibility exponent q(V).
template <typename Scalar>
Scalar kruse_exponent(Scalar visibility_km) {
  using std::cbrt;
  if (visibility_km > Scalar(50)) return Scalar(1.6);
  if (visibility_km >= Scalar(6)) return Scalar(1.3);
  return Scalar(0.585) * cbrt(visibility_km);
}

/// Kruse fog/haze attenuation in dB/km. Visibility in km, wavelength in m.
template <typename Scalar>
Scalar fog_attenuation_db_per_km(Scalar visibility_km, Scalar wavelength_m) {
  using std::pow;
  if (!(visibility_km > Scalar(0))) {
    throw DomainError("fog_attenuation_db_per_km: visibility must be positive");
  }
  if (!(wavelength_m > Scalar(0))) {
    throw DomainError("fog_attenuation_db_per_km: wavelength must be positive");
  }
  const Scalar wavelength_nm = wavelength_m * Scalar(1e9);
  const Scalar scattering_per_km = Scalar(3.91) / visibility_km;
  return Scalar(4.343) * scattering_per_km *
         pow(wavelength_nm / Scalar(550), -kruse_exponent(visibility_km));
}

/// True when the wavelength lies inside the band the Kruse fit was made for.
inline bool kruse_wavelength_validated(double wavelength_m) {
  return wavelength_m >= 500e-9 && wavelength_m <= 2000e-9;
}

template <typename Scalar>
Scalar rain_attenuation_db_per_km(Scalar rain_rate, const RainModel& model = {}) {
  using std::pow;
  if (!(rain_rate >= Scalar(0))) {
    throw DomainError("rain_attenuation_db_per_km: rain rate must be >= 0");
  }
  if (rain_rate == Scalar(0)) return Scalar(0);
  return Scalar(model.k) * pow(rain_rate, Scalar(model.alpha));
}

double cloud_attenuation_db(const std::optional<CloudLayer>& layer, double wavelength_m);

/// Rytov variance of a plane wave over the link path. Horizontal paths use
/// the constant-C_n^2 closed form; slant paths integrate C_n^2 along the path
/// with a (distance from the transmitter)^(5/6) weight.
double rytov_variance(const LinkGeometry& geometry, const WeatherScenario& scenario);

/// Plane-wave Rytov variance for a path of constant C_n^2.
double rytov_variance_constant(double cn2, double wavelength_m, double length_m);

/// Same path integral, forced numeric even for horizontal links.
double rytov_variance_path_integral(const LinkGeometry& geometry,
                                    const WeatherScenario& scenario);

/// Log-normal fade margin (dB) exceeded with probability outage_probability.
double scintillation_loss_db(double rytov_variance, double outage_probability);

/// Geometric beam-spreading loss for the configured apertures and divergence.
double geometric_loss_db(const LinkGeometry& geometry);

LossBreakdown total_atmospheric_loss(const WeatherScenario& scenario,
                                     const LinkGeometry& geometry,
                                     const AtmosphereOptions& options = {});

}  // namespace fso
