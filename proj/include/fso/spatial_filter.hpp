#pragma once

#include <cstdint>
#include <iosfwd>

#include <Eigen/Core>

#include "fso/modem.hpp"

namespace fso {

/// n x n partition of the receiver aperture. signal(r, c) is the power in
/// cell (r, c); row 0 is the top row (largest y).
struct ApertureGrid {
  Eigen::MatrixXd signal;
  double noise_power_total = 1.0;

  int order() const { return static_cast<int>(signal.rows()); }
  void validate() const;
};

/// Background noise collected by the receiver, linear in FoV.
struct SolarModel {
  double background_radiance = 0.05;  // W m^-2 sr^-1 nm^-1
  double optical_bandwidth_nm = 1.0;
  double aperture_area_m2 = 7.853981633974483e-3;
  double fov_sr = 1e-6;

  void validate() const;
};

double solar_noise_power(const SolarModel& model);

struct CellIndex {
  int row = 0;
  int col = 0;
  bool operator==(const CellIndex&) const = default;
};

/// Strongest cell; ties resolve to the lowest row-major index.
CellIndex select_cell(const ApertureGrid& grid);

struct FilteredSnr {
  double snr_unfiltered = 0.0;
  double snr_filtered = 0.0;
  double gain = 1.0;  // n^2 * max_cell / sum_cells
  double gain_db = 0.0;
  CellIndex selected;
};

FilteredSnr filtered_snr(const ApertureGrid& grid);

struct BeamSpot {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double radius_m = 0.01;
  double power = 1.0;
};

/// Gaussian spot integrated over each cell of a square aperture centred at
/// the origin.
ApertureGrid gaussian_spot_grid(int n, double aperture_side_m, const BeamSpot& spot,
                                double noise_power_total);

/// Centre of cell (row, col) for a square aperture centred at the origin.
Eigen::Vector2d cell_center(int n, double aperture_side_m, CellIndex cell);

/// Comma-separated rows of cell powers; the row count must equal the column count.
ApertureGrid read_grid_csv(std::istream& in, double noise_power_total);

struct FilterDemoConfig {
  int n = 2;
  double aperture_side_m = 0.1;
  BeamSpot spot{Eigen::Vector2d(-0.025, 0.025), 0.008, 1.0};
  double noise_power_total = 1.0;
  double target_unfiltered_ber = 1e-3;
  std::size_t symbols = 10'000'000;
};

struct FilterDemoResult {
  BerReport unfiltered;
  BerReport filtered;
  FilteredSnr snr;
  double noise_std_unfiltered = 0.0;
  double noise_std_filtered = 0.0;
};

/// Static-channel PAM-4 link run twice with common random numbers: once with
/// the full-aperture noise and once with noise reduced by the selection gain.
/// Throws CalibrationError if the unfiltered BER falls outside [5e-4, 5e-3].
FilterDemoResult filtering_ber_demo(const FilterDemoConfig& config, const Pam4Config& modem,
                                    std::uint64_t seed, unsigned workers = 0);

}  // namespace fso
