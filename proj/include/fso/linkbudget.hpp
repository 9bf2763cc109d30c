#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "fso/atmosphere.hpp"

namespace fso {

/// Fixed pointing loss applied when no pointing error angle is configured.
inline constexpr double kDefaultPointingLossDb = 2.0;

struct TransceiverOptics {
  double tx_efficiency = 0.65;
  double rx_efficiency = 1.0;
  double tx_power_dbm = 23.0;
  std::optional<double> pointing_error_rad;  // unset: fixed 2 dB loss
  std::optional<double> optical_loss_db;     // unset: derived from efficiencies
  double responsivity = 0.9;                 // A/W
  double noise_floor_dbm = -30.0;

  void validate() const;
};

struct LinkBudget {
  double p_r_dbm = 0.0;
  double l_l_db = 0.0;
  double l_p_db = 0.0;
  double l_o_db = 0.0;
  double snr_db = 0.0;
};

/// Optical loss -10 log10(eta_t * eta_r) as a positive dB value.
template <typename Scalar>
Scalar optical_loss_db(Scalar tx_efficiency, Scalar rx_efficiency) {
  using std::log10;
  if (!(tx_efficiency > Scalar(0) && tx_efficiency <= Scalar(1) &&
        rx_efficiency > Scalar(0) && rx_efficiency <= Scalar(1))) {
    throw DomainError("optical_loss_db: efficiencies must lie in (0, 1]");
  }
  const Scalar loss = -Scalar(10) * log10(tx_efficiency * rx_efficiency);
  return loss > Scalar(0) ? loss : Scalar(0);
}

/// Gaussian-beam pointing loss 10 log10(e) * 2 theta^2 / theta_b^2, where
/// theta_b is the 1/e^2 half-angle.
template <typename Scalar>
Scalar pointing_loss_db(Scalar pointing_error_rad, Scalar beam_divergence_rad) {
  if (!(beam_divergence_rad > Scalar(0))) {
    throw DomainError("pointing_loss_db: beam divergence must be positive");
  }
  if (!(pointing_error_rad >= Scalar(0))) {
    throw DomainError("pointing_loss_db: pointing error must be >= 0");
  }
  const Scalar half_angle = beam_divergence_rad / Scalar(2);
  const Scalar ratio = pointing_error_rad / half_angle;
  return Scalar(2 * numerics::kDbPerNeper) * Scalar(2) * ratio * ratio;
}

/// Pointing loss for an optional error angle: fixed 2 dB when unset.
double pointing_loss_db(const std::optional<double>& pointing_error_rad,
                        double beam_divergence_rad);

LinkBudget received_power_dbm(const TransceiverOptics& optics, const LossBreakdown& losses,
                              double beam_divergence_rad);

/// Budget report with one row per loss component.
std::string format_budget_table(const LossBreakdown& losses, const LinkBudget& budget);
std::string format_budget_csv(const LossBreakdown& losses, const LinkBudget& budget);

}  // namespace fso
