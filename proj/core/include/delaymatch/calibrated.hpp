#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "delaymatch/geometry.hpp"

namespace delaymatch {

/// Projection and binning of calibrated tables onto the local km grid.
struct CalibratedOptions {
  AreaConfig area{20.0, 20.0, 20, 20, 25.0, 1.0};
  double center_lng = 104.06;
  double center_lat = 30.66;
  /// Epoch mapped to interval 0; defaults to the earliest epoch in either table.
  std::optional<std::int64_t> epoch_origin;
  /// Bootstrapping draws rows from the same period of this many seconds.
  double period_seconds = 3600.0;
  bool resample = false;
};

struct RequestRow {
  std::int64_t passenger_id = 0;
  std::int64_t request_epoch_s = 0;
  double origin_lng = 0, origin_lat = 0, dest_lng = 0, dest_lat = 0;
  double trip_duration_s = 0;
};

struct ShiftRow {
  std::int64_t driver_id = 0;
  std::int64_t online_epoch_s = 0;
  double online_lng = 0, online_lat = 0;
  std::int64_t offline_epoch_s = 0;
};

/// Reads the request CSV (header required). Throws std::runtime_error with
/// the 1-based line number on malformed rows or decreasing request times.
std::vector<RequestRow> read_request_table(const std::filesystem::path& path);
std::vector<ShiftRow> read_shift_table(const std::filesystem::path& path);

void write_request_table(const std::filesystem::path& path, const std::vector<RequestRow>& rows);
void write_shift_table(const std::filesystem::path& path, const std::vector<ShiftRow>& rows);

/// Equirectangular projection around (center_lng, center_lat), shifted so the
/// centre sits in the middle of the area.
Location project(double lng, double lat, const CalibratedOptions& opts);
void unproject(Location loc, const CalibratedOptions& opts, double& lng, double& lat);

struct ScheduledRequest {
  std::int64_t source_id = 0;
  Location origin;
  Location destination;
  double trip_duration_s = 0;
};

struct ScheduledShift {
  std::int64_t driver_id = 0;
  int online_interval = 0;
  int offline_interval = 0;
  Location location;
};

/// Per-interval arrival and shift schedule for a calibrated world.
struct ArrivalSchedule {
  AreaConfig area;
  int interval_count = 0;
  int intervals_per_period = 1;
  std::vector<std::vector<ScheduledRequest>> requests;  // indexed by interval
  std::vector<ScheduledShift> shifts;                   // sorted by online interval
  /// Historical average arrivals per interval, [period][zone].
  std::vector<std::vector<double>> passenger_rate;
  std::vector<std::vector<double>> driver_rate;

  bool empty() const { return interval_count == 0; }
  int period_of(int interval) const;
};

/// Validated, projected contents of both tables.
struct CalibratedTables {
  CalibratedOptions options;
  std::int64_t epoch_origin = 0;
  std::vector<RequestRow> requests;
  std::vector<ShiftRow> shifts;
};

CalibratedTables load_calibrated_tables(const std::filesystem::path& requests_file,
                                        const std::filesystem::path& shifts_file,
                                        const CalibratedOptions& opts);

/// Builds the schedule. With `opts.resample`, each interval keeps its
/// historical request count but the rows are drawn with replacement from the
/// same period.
ArrivalSchedule build_schedule(const CalibratedTables& tables, Rng& rng);

ArrivalSchedule ingest_calibrated_tables(const std::filesystem::path& requests_file,
                                         const std::filesystem::path& shifts_file,
                                         const CalibratedOptions& opts, Rng& rng);

struct SyntheticTableConfig {
  CalibratedOptions calibrated;
  int intervals = 3600;
  std::int64_t epoch_start = 1'500'000'000;
  double request_rate = 1.0;  // per interval
  double shift_rate = 0.05;   // new drivers per interval
  double mean_shift_seconds = 4.0 * 3600.0;
  /// Origins and online positions are drawn from these, in local km.
  GaussianArrivalSpec request_origin{{8.0, 8.0}, 3.0, 3.0, 1.0};
  GaussianArrivalSpec request_destination{{10.0, 10.0}, 4.0, 4.0, 1.0};
  GaussianArrivalSpec driver_position{{12.0, 12.0}, 3.0, 3.0, 1.0};
};

struct SyntheticTables {
  std::vector<RequestRow> requests;
  std::vector<ShiftRow> shifts;
};

SyntheticTables generate_synthetic_tables(const SyntheticTableConfig& cfg, Rng& rng);
void generate_synthetic_tables(const SyntheticTableConfig& cfg, Rng& rng,
                               const std::filesystem::path& requests_file,
                               const std::filesystem::path& shifts_file);

}  // namespace delaymatch
