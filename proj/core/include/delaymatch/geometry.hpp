#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace delaymatch {

using Rng = std::mt19937_64;

/// Planar service area, its uniform zone grid and the constant-speed travel model.
struct AreaConfig {
  double width_km = 4.0;
  double height_km = 4.0;
  int grid_rows = 10;
  int grid_cols = 10;
  double speed_kmh = 25.0;
  double interval_seconds = 1.0;

  int zone_count() const { return grid_rows * grid_cols; }
  double cell_width_km() const { return width_km / grid_cols; }
  double cell_height_km() const { return height_km / grid_rows; }

  /// Throws std::invalid_argument on a non-positive extent, speed, interval or grid.
  void validate() const;
};

struct Location {
  double x_km = 0.0;
  double y_km = 0.0;

  friend bool operator==(const Location&, const Location&) = default;
};

Location clip(Location loc, const AreaConfig& cfg);

struct GaussianArrivalSpec {
  Location mean;
  double std_x_km = 0.8;
  double std_y_km = 0.8;
  double rate_per_interval = 1.0;

  void validate() const;
};

enum class ArrivalMode { poisson, deterministic };

/// Manhattan distance in km.
double manhattan_km(Location a, Location b);

/// Pickup travel time in seconds at the configured constant speed.
double pickup_time(Location a, Location b, const AreaConfig& cfg);

/// Largest possible pickup time inside the area (corner to corner).
double max_pickup_time(const AreaConfig& cfg);

/// Row-major index of the grid cell containing `loc`. Points on an interior
/// cell edge belong to the higher-index cell; the outer max edge belongs to
/// the last row/column.
int zone_of(Location loc, const AreaConfig& cfg);

/// Centre of a zone, mostly useful for tests and synthetic data.
Location zone_center(int zone, const AreaConfig& cfg);

Location sample_unclipped(const GaussianArrivalSpec& spec, Rng& rng);
Location sample_location(const GaussianArrivalSpec& spec, const AreaConfig& cfg, Rng& rng);

/// Number of arrivals in interval `t`. Deterministic mode spreads a fractional
/// rate evenly: floor((t+1)·rate) − floor(t·rate).
int sample_arrival_count(double rate, ArrivalMode mode, int t, Rng& rng);

/// Expected arrivals per interval in every zone, i.e. `rate × P(zone)` for
/// the clipped Gaussian. Mass outside the area lands in the boundary cells.
std::vector<double> zone_arrival_rates(const GaussianArrivalSpec& spec, const AreaConfig& cfg);

}  // namespace delaymatch
