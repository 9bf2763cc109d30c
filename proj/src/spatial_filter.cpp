#include "fso/spatial_filter.hpp"

#include <cmath>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "fso/errors.hpp"
#include "fso/numerics.hpp"

namespace fso {

namespace {

constexpr double kMinUnfilteredBer = 5e-4;
constexpr double kMaxUnfilteredBer = 5e-3;

}  // namespace

void ApertureGrid::validate() const {
  if (signal.rows() < 1 || signal.rows() != signal.cols()) {
    throw DomainError("ApertureGrid: signal must be a nonempty square matrix");
  }
  if ((signal.array() < 0.0).any() || !signal.allFinite()) {
    throw DomainError("ApertureGrid: cell powers must be finite and >= 0");
  }
  if (!(noise_power_total > 0.0)) throw DomainError("ApertureGrid: noise power must be > 0");
}

void SolarModel::validate() const {
  if (!(background_radiance >= 0.0 && optical_bandwidth_nm >= 0.0 && aperture_area_m2 > 0.0 &&
        fov_sr > 0.0)) {
    throw DomainError("SolarModel: parameters must be positive");
  }
}

double solar_noise_power(const SolarModel& model) {
  model.validate();
  return model.background_radiance * model.optical_bandwidth_nm * model.aperture_area_m2 *
         model.fov_sr;
}

CellIndex select_cell(const ApertureGrid& grid) {
  grid.validate();
  CellIndex best;
  double best_power = grid.signal(0, 0);
  for (int r = 0; r < grid.order(); ++r) {
    for (int c = 0; c < grid.order(); ++c) {
      if (grid.signal(r, c) > best_power) {
        best_power = grid.signal(r, c);
        best = {r, c};
      }
    }
  }
  return best;
}

FilteredSnr filtered_snr(const ApertureGrid& grid) {
  grid.validate();
  FilteredSnr out;
  out.selected = select_cell(grid);
  const double n2 = static_cast<double>(grid.order()) * grid.order();
  const double total = grid.signal.sum();
  const double selected = grid.signal(out.selected.row, out.selected.col);
  out.snr_unfiltered = total / grid.noise_power_total;
  out.snr_filtered = selected / (grid.noise_power_total / n2);
  out.gain = total > 0.0 ? n2 * selected / total : 1.0;
  out.gain_db = 10.0 * std::log10(out.gain);
  return out;
}

Eigen::Vector2d cell_center(int n, double aperture_side_m, CellIndex cell) {
  const double w = aperture_side_m / n;
  return {-0.5 * aperture_side_m + (cell.col + 0.5) * w, 0.5 * aperture_side_m - (cell.row + 0.5) * w};
}

ApertureGrid gaussian_spot_grid(int n, double aperture_side_m, const BeamSpot& spot,
                                double noise_power_total) {
  if (n < 1) throw DomainError("gaussian_spot_grid: n must be >= 1");
  if (!(aperture_side_m > 0.0 && spot.radius_m > 0.0 && spot.power >= 0.0)) {
    throw DomainError("gaussian_spot_grid: invalid aperture or spot");
  }
  const double w = aperture_side_m / n;
  const double left = -0.5 * aperture_side_m;
  const double top = 0.5 * aperture_side_m;
  Eigen::VectorXd column_mass(n);
  Eigen::VectorXd row_mass(n);
  for (int i = 0; i < n; ++i) {
    column_mass[i] = numerics::gaussian_segment_mass(left + i * w, left + (i + 1) * w,
                                                     spot.center.x(), spot.radius_m);
    row_mass[i] = numerics::gaussian_segment_mass(top - (i + 1) * w, top - i * w, spot.center.y(),
                                                  spot.radius_m);
  }
  ApertureGrid grid;
  grid.signal = spot.power * row_mass * column_mass.transpose();
  grid.noise_power_total = noise_power_total;
  grid.validate();
  return grid;
}

ApertureGrid read_grid_csv(std::istream& in, double noise_power_total) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw IoError("<grid>", "non-numeric cell '" + cell + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  if (n == 0) throw IoError("<grid>", "empty grid");
  ApertureGrid grid;
  grid.signal.resize(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    if (static_cast<Eigen::Index>(rows[r].size()) != n) {
      throw IoError("<grid>", "grid must be square (row " + std::to_string(r) + ")");
    }
    for (Eigen::Index c = 0; c < n; ++c) grid.signal(r, c) = rows[r][c];
  }
  grid.noise_power_total = noise_power_total;
  grid.validate();
  return grid;
}

FilterDemoResult filtering_ber_demo(const FilterDemoConfig& config, const Pam4Config& modem,
                                    std::uint64_t seed, unsigned workers) {
  modem.validate();
  if (!(config.target_unfiltered_ber > 0.0 && config.target_unfiltered_ber < 0.375)) {
    throw DomainError("filtering_ber_demo: target BER must lie in (0, 0.375)");
  }
  FilterDemoResult out;
  const ApertureGrid grid =
      gaussian_spot_grid(config.n, config.aperture_side_m, config.spot, config.noise_power_total);
  out.snr = filtered_snr(grid);

  // All eyes at the Q-factor giving the target BER: (3/4) Q(q) = target.
  const double q = numerics::inverse_q(config.target_unfiltered_ber / 0.75);
  out.noise_std_unfiltered = noise_std_for_q(modem, q);
  // Noise in intensity units scales with the collected background power.
  out.noise_std_filtered = out.noise_std_unfiltered / out.snr.gain;

  const ThresholdSpec thresholds = modem.midpoint_thresholds();
  out.unfiltered = simulate_static_link(modem, config.symbols, 1.0, out.noise_std_unfiltered, seed,
                                        thresholds, workers);
  if (out.unfiltered.ber_counted < kMinUnfilteredBer ||
      out.unfiltered.ber_counted > kMaxUnfilteredBer) {
    throw CalibrationError("filtering_ber_demo: unfiltered BER " +
                           std::to_string(out.unfiltered.ber_counted) +
                           " outside the calibrated band [5e-4, 5e-3]");
  }
  out.filtered = simulate_static_link(modem, config.symbols, 1.0, out.noise_std_filtered, seed,
                                      thresholds, workers);
  return out;
}

}  // namespace fso
