#include "delaymatch/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace delaymatch {

void AreaConfig::validate() const {
  if (!(width_km > 0.0) || !(height_km > 0.0))
    throw std::invalid_argument("area: width_km and height_km must be positive");
  if (grid_rows < 1 || grid_cols < 1)
    throw std::invalid_argument("area: grid_rows and grid_cols must be >= 1");
  if (!(speed_kmh > 0.0)) throw std::invalid_argument("area: speed_kmh must be positive");
  if (!(interval_seconds > 0.0))
    throw std::invalid_argument("area: interval_seconds must be positive");
}

void GaussianArrivalSpec::validate() const {
  if (!(std_x_km > 0.0) || !(std_y_km > 0.0))
    throw std::invalid_argument("arrival spec: standard deviations must be positive");
  if (!(rate_per_interval >= 0.0))
    throw std::invalid_argument("arrival spec: rate_per_interval must be >= 0");
}

Location clip(Location loc, const AreaConfig& cfg) {
  return {std::clamp(loc.x_km, 0.0, cfg.width_km), std::clamp(loc.y_km, 0.0, cfg.height_km)};
}

double manhattan_km(Location a, Location b) {
  return std::abs(a.x_km - b.x_km) + std::abs(a.y_km - b.y_km);
}

double pickup_time(Location a, Location b, const AreaConfig& cfg) {
  return manhattan_km(a, b) / cfg.speed_kmh * 3600.0;
}

double max_pickup_time(const AreaConfig& cfg) {
  return (cfg.width_km + cfg.height_km) / cfg.speed_kmh * 3600.0;
}

namespace {

int cell_index(double v, double cell, int count) {
  const auto idx = static_cast<int>(std::floor(v / cell));
  return std::clamp(idx, 0, count - 1);
}

// Standard normal CDF mass of [lo, hi) for N(mu, sigma²); infinite bounds allowed.
double normal_mass(double lo, double hi, double mu, double sigma) {
  auto cdf = [&](double x) {
    if (std::isinf(x)) return x < 0 ? 0.0 : 1.0;
    return 0.5 * std::erfc(-(x - mu) / (sigma * std::sqrt(2.0)));
  };
  return cdf(hi) - cdf(lo);
}

}  // namespace

int zone_of(Location loc, const AreaConfig& cfg) {
  const int col = cell_index(loc.x_km, cfg.cell_width_km(), cfg.grid_cols);
  const int row = cell_index(loc.y_km, cfg.cell_height_km(), cfg.grid_rows);
  return row * cfg.grid_cols + col;
}

Location zone_center(int zone, const AreaConfig& cfg) {
  const int row = zone / cfg.grid_cols;
  const int col = zone % cfg.grid_cols;
  return {(col + 0.5) * cfg.cell_width_km(), (row + 0.5) * cfg.cell_height_km()};
}

Location sample_unclipped(const GaussianArrivalSpec& spec, Rng& rng) {
  std::normal_distribution<double> nx(spec.mean.x_km, spec.std_x_km);
  std::normal_distribution<double> ny(spec.mean.y_km, spec.std_y_km);
  const double x = nx(rng);
  const double y = ny(rng);
  return {x, y};
}

Location sample_location(const GaussianArrivalSpec& spec, const AreaConfig& cfg, Rng& rng) {
  return clip(sample_unclipped(spec, rng), cfg);
}

int sample_arrival_count(double rate, ArrivalMode mode, int t, Rng& rng) {
  if (rate <= 0.0) return 0;
  if (mode == ArrivalMode::deterministic) {
    return static_cast<int>(std::floor((t + 1) * rate + 1e-12) - std::floor(t * rate + 1e-12));
  }
  std::poisson_distribution<int> dist(rate);
  return dist(rng);
}

std::vector<double> zone_arrival_rates(const GaussianArrivalSpec& spec, const AreaConfig& cfg) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> col_mass(cfg.grid_cols);
  std::vector<double> row_mass(cfg.grid_rows);
  for (int c = 0; c < cfg.grid_cols; ++c) {
    const double lo = c == 0 ? -inf : c * cfg.cell_width_km();
    const double hi = c == cfg.grid_cols - 1 ? inf : (c + 1) * cfg.cell_width_km();
    col_mass[c] = normal_mass(lo, hi, spec.mean.x_km, spec.std_x_km);
  }
  for (int r = 0; r < cfg.grid_rows; ++r) {
    const double lo = r == 0 ? -inf : r * cfg.cell_height_km();
    const double hi = r == cfg.grid_rows - 1 ? inf : (r + 1) * cfg.cell_height_km();
    row_mass[r] = normal_mass(lo, hi, spec.mean.y_km, spec.std_y_km);
  }
  std::vector<double> rates(cfg.zone_count());
  for (int r = 0; r < cfg.grid_rows; ++r)
    for (int c = 0; c < cfg.grid_cols; ++c)
      rates[r * cfg.grid_cols + c] = spec.rate_per_interval * row_mass[r] * col_mass[c];
  return rates;
}

}  // namespace delaymatch
