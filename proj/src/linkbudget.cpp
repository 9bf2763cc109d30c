#include "fso/linkbudget.hpp"

#include <cstdio>
#include <sstream>
#include <utility>
#include <vector>

namespace fso {

void TransceiverOptics::validate() const {
  if (!(tx_efficiency > 0.0 && tx_efficiency <= 1.0 && rx_efficiency > 0.0 &&
        rx_efficiency <= 1.0)) {
    throw DomainError("optics: efficiencies must lie in (0, 1]");
  }
  if (pointing_error_rad && !(*pointing_error_rad >= 0.0)) {
    throw DomainError("optics: pointing error must be >= 0");
  }
  if (optical_loss_db && !(*optical_loss_db >= 0.0)) {
    throw DomainError("optics: fixed optical loss must be >= 0");
  }
}

double pointing_loss_db(const std::optional<double>& pointing_error_rad,
                        double beam_divergence_rad) {
  if (!pointing_error_rad) {
    if (!(beam_divergence_rad > 0.0)) {
      throw DomainError("pointing_loss_db: beam divergence must be positive");
    }
    return kDefaultPointingLossDb;
  }
  return pointing_loss_db(*pointing_error_rad, beam_divergence_rad);
}

LinkBudget received_power_dbm(const TransceiverOptics& optics, const LossBreakdown& losses,
                              double beam_divergence_rad) {
  optics.validate();
  LinkBudget out;
  out.l_l_db = losses.l_total_db;
  out.l_p_db = pointing_loss_db(optics.pointing_error_rad, beam_divergence_rad);
  out.l_o_db = optics.optical_loss_db
                   ? *optics.optical_loss_db
                   : optical_loss_db(optics.tx_efficiency, optics.rx_efficiency);
  out.p_r_dbm = optics.tx_power_dbm - out.l_l_db - out.l_p_db - out.l_o_db;
  out.snr_db = out.p_r_dbm - optics.noise_floor_dbm;
  return out;
}

namespace {

std::vector<std::pair<std::string, double>> budget_rows(const LossBreakdown& losses,
                                                        const LinkBudget& budget) {
  return {
      {"l_sci_db", losses.l_sci_db},     {"l_fog_db", losses.l_fog_db},
      {"l_rain_db", losses.l_rain_db},   {"l_cloud_db", losses.l_cloud_db},
      {"l_geometric_db", losses.l_geometric_db},
      {"l_total_db", losses.l_total_db}, {"l_p_db", budget.l_p_db},
      {"l_o_db", budget.l_o_db},         {"p_r_dbm", budget.p_r_dbm},
      {"snr_db", budget.snr_db},
  };
}

}  // namespace

std::string format_budget_table(const LossBreakdown& losses, const LinkBudget& budget) {
  std::ostringstream out;
  char line[96];
  std::snprintf(line, sizeof line, "%-16s %14s\n", "component", "value");
  out << line;
  for (const auto& [name, value] : budget_rows(losses, budget)) {
    std::snprintf(line, sizeof line, "%-16s %14.6f\n", name.c_str(), value);
    out << line;
  }
  return out.str();
}

std::string format_budget_csv(const LossBreakdown& losses, const LinkBudget& budget) {
  std::ostringstream out;
  out << "component,value\n";
  char value[40];
  for (const auto& [name, v] : budget_rows(losses, budget)) {
    std::snprintf(value, sizeof value, "%.17g", v);
    out << name << ',' << value << '\n';
  }
  return out.str();
}

}  // namespace fso
