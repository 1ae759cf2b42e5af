#include "delaymatch/calibrated.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>

namespace delaymatch {

namespace {

constexpr double km_per_deg_lat = 110.574;
constexpr double km_per_deg_lng_equator = 111.320;

const char* const request_header =
    "passenger_id,request_epoch_s,origin_lng,origin_lat,dest_lng,dest_lat,trip_duration_s";
const char* const shift_header = "driver_id,online_epoch_s,online_lng,online_lat,offline_epoch_s";

std::runtime_error row_error(const std::filesystem::path& path, std::size_t line,
                             const std::string& what) {
  return std::runtime_error(path.string() + ":" + std::to_string(line) + ": " + what);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

template <typename T>
T parse_field(const std::string& s, const std::filesystem::path& path, std::size_t line,
              const char* name) {
  std::size_t used = 0;
  T value{};
  try {
    if constexpr (std::is_same_v<T, double>)
      value = std::stod(s, &used);
    else
      value = static_cast<T>(std::stoll(s, &used));
  } catch (const std::exception&) {
    throw row_error(path, line, std::string("cannot parse ") + name + " '" + s + "'");
  }
  if (used != s.size() && s.find_first_not_of(" \t\r", used) != std::string::npos)
    throw row_error(path, line, std::string("trailing characters in ") + name);
  if constexpr (std::is_same_v<T, double>) {
    if (!std::isfinite(value)) throw row_error(path, line, std::string(name) + " is not finite");
  }
  return value;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

template <typename Row, typename Parse>
std::vector<Row> read_table(const std::filesystem::path& path, const char* header,
                            std::size_t columns, Parse parse) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) return {};
  line = strip_cr(line);
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  if (line != header) throw row_error(path, 1, "unexpected header, want '" + std::string(header) + "'");
  std::vector<Row> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    auto fields = split_fields(line);
    if (fields.size() != columns)
      throw row_error(path, lineno,
                      "expected " + std::to_string(columns) + " fields, got " +
                          std::to_string(fields.size()));
    rows.push_back(parse(fields, lineno));
  }
  return rows;
}

}  // namespace

std::vector<RequestRow> read_request_table(const std::filesystem::path& path) {
  std::int64_t last_epoch = std::numeric_limits<std::int64_t>::min();
  return read_table<RequestRow>(path, request_header, 7, [&](const auto& f, std::size_t line) {
    RequestRow r;
    r.passenger_id = parse_field<std::int64_t>(f[0], path, line, "passenger_id");
    r.request_epoch_s = parse_field<std::int64_t>(f[1], path, line, "request_epoch_s");
    r.origin_lng = parse_field<double>(f[2], path, line, "origin_lng");
    r.origin_lat = parse_field<double>(f[3], path, line, "origin_lat");
    r.dest_lng = parse_field<double>(f[4], path, line, "dest_lng");
    r.dest_lat = parse_field<double>(f[5], path, line, "dest_lat");
    r.trip_duration_s = parse_field<double>(f[6], path, line, "trip_duration_s");
    if (r.trip_duration_s < 0) throw row_error(path, line, "negative trip_duration_s");
    if (r.request_epoch_s < last_epoch) throw row_error(path, line, "request_epoch_s decreases");
    last_epoch = r.request_epoch_s;
    return r;
  });
}

std::vector<ShiftRow> read_shift_table(const std::filesystem::path& path) {
  std::int64_t last_epoch = std::numeric_limits<std::int64_t>::min();
  return read_table<ShiftRow>(path, shift_header, 5, [&](const auto& f, std::size_t line) {
    ShiftRow r;
    r.driver_id = parse_field<std::int64_t>(f[0], path, line, "driver_id");
    r.online_epoch_s = parse_field<std::int64_t>(f[1], path, line, "online_epoch_s");
    r.online_lng = parse_field<double>(f[2], path, line, "online_lng");
    r.online_lat = parse_field<double>(f[3], path, line, "online_lat");
    r.offline_epoch_s = parse_field<std::int64_t>(f[4], path, line, "offline_epoch_s");
    if (r.offline_epoch_s < r.online_epoch_s)
      throw row_error(path, line, "offline_epoch_s precedes online_epoch_s");
    if (r.online_epoch_s < last_epoch) throw row_error(path, line, "online_epoch_s decreases");
    last_epoch = r.online_epoch_s;
    return r;
  });
}

void write_request_table(const std::filesystem::path& path, const std::vector<RequestRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(15);
  out << request_header << '\n';
  for (const auto& r : rows) {
    out << r.passenger_id << ',' << r.request_epoch_s << ',' << r.origin_lng << ','
        << r.origin_lat << ',' << r.dest_lng << ',' << r.dest_lat << ',' << r.trip_duration_s
        << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void write_shift_table(const std::filesystem::path& path, const std::vector<ShiftRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(15);
  out << shift_header << '\n';
  for (const auto& r : rows) {
    out << r.driver_id << ',' << r.online_epoch_s << ',' << r.online_lng << ',' << r.online_lat
        << ',' << r.offline_epoch_s << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

Location project(double lng, double lat, const CalibratedOptions& opts) {
  const double coslat = std::cos(opts.center_lat * std::numbers::pi / 180.0);
  return {(lng - opts.center_lng) * coslat * km_per_deg_lng_equator + opts.area.width_km / 2.0,
          (lat - opts.center_lat) * km_per_deg_lat + opts.area.height_km / 2.0};
}

void unproject(Location loc, const CalibratedOptions& opts, double& lng, double& lat) {
  const double coslat = std::cos(opts.center_lat * std::numbers::pi / 180.0);
  lng = opts.center_lng + (loc.x_km - opts.area.width_km / 2.0) / (coslat * km_per_deg_lng_equator);
  lat = opts.center_lat + (loc.y_km - opts.area.height_km / 2.0) / km_per_deg_lat;
}

int ArrivalSchedule::period_of(int interval) const {
  if (passenger_rate.empty()) return 0;
  const int p = std::max(0, interval) / intervals_per_period;
  return std::min<int>(p, static_cast<int>(passenger_rate.size()) - 1);
}

namespace {

// Tolerates the rounding of coordinates written at 15 significant digits.
bool inside(Location loc, const AreaConfig& area) {
  constexpr double eps = 1e-6;
  return loc.x_km >= -eps && loc.x_km <= area.width_km + eps && loc.y_km >= -eps &&
         loc.y_km <= area.height_km + eps;
}

Location project_clipped(double lng, double lat, const CalibratedOptions& opts) {
  return clip(project(lng, lat, opts), opts.area);
}

int interval_of(std::int64_t epoch, std::int64_t origin, double interval_seconds) {
  return static_cast<int>(std::floor(static_cast<double>(epoch - origin) / interval_seconds));
}

}  // namespace

CalibratedTables load_calibrated_tables(const std::filesystem::path& requests_file,
                                        const std::filesystem::path& shifts_file,
                                        const CalibratedOptions& opts) {
  opts.area.validate();
  CalibratedTables t;
  t.options = opts;
  t.requests = read_request_table(requests_file);
  t.shifts = read_shift_table(shifts_file);

  for (std::size_t k = 0; k < t.requests.size(); ++k) {
    const auto& r = t.requests[k];
    if (!inside(project(r.origin_lng, r.origin_lat, opts), opts.area) ||
        !inside(project(r.dest_lng, r.dest_lat, opts), opts.area))
      throw row_error(requests_file, k + 2, "coordinates outside the service area");
  }
  for (std::size_t k = 0; k < t.shifts.size(); ++k) {
    const auto& s = t.shifts[k];
    if (!inside(project(s.online_lng, s.online_lat, opts), opts.area))
      throw row_error(shifts_file, k + 2, "coordinates outside the service area");
  }

  if (opts.epoch_origin) {
    t.epoch_origin = *opts.epoch_origin;
  } else {
    std::int64_t origin = std::numeric_limits<std::int64_t>::max();
    if (!t.requests.empty()) origin = std::min(origin, t.requests.front().request_epoch_s);
    if (!t.shifts.empty()) origin = std::min(origin, t.shifts.front().online_epoch_s);
    t.epoch_origin = t.requests.empty() && t.shifts.empty() ? 0 : origin;
  }
  for (std::size_t k = 0; k < t.requests.size(); ++k)
    if (t.requests[k].request_epoch_s < t.epoch_origin)
      throw row_error(requests_file, k + 2, "request precedes the epoch origin");
  return t;
}

ArrivalSchedule build_schedule(const CalibratedTables& tables, Rng& rng) {
  const auto& opts = tables.options;
  ArrivalSchedule s;
  s.area = opts.area;
  s.intervals_per_period =
      std::max(1, static_cast<int>(std::lround(opts.period_seconds / opts.area.interval_seconds)));

  int last = -1;
  for (const auto& r : tables.requests)
    last = std::max(last, interval_of(r.request_epoch_s, tables.epoch_origin, opts.area.interval_seconds));
  for (const auto& sh : tables.shifts)
    last = std::max(last, interval_of(sh.online_epoch_s, tables.epoch_origin, opts.area.interval_seconds));
  s.interval_count = last + 1;
  if (s.interval_count == 0) return s;

  const int periods = (s.interval_count + s.intervals_per_period - 1) / s.intervals_per_period;
  const int zones = opts.area.zone_count();
  s.requests.assign(s.interval_count, {});
  s.passenger_rate.assign(periods, std::vector<double>(zones, 0.0));
  s.driver_rate.assign(periods, std::vector<double>(zones, 0.0));

  std::vector<std::vector<ScheduledRequest>> by_period(periods);
  for (const auto& r : tables.requests) {
    const int iv = interval_of(r.request_epoch_s, tables.epoch_origin, opts.area.interval_seconds);
    ScheduledRequest sr{r.passenger_id, project_clipped(r.origin_lng, r.origin_lat, opts),
                        project_clipped(r.dest_lng, r.dest_lat, opts), r.trip_duration_s};
    s.passenger_rate[iv / s.intervals_per_period][zone_of(sr.origin, opts.area)] += 1.0;
    by_period[iv / s.intervals_per_period].push_back(sr);
    s.requests[iv].push_back(sr);
  }
  for (const auto& sh : tables.shifts) {
    const int on = interval_of(sh.online_epoch_s, tables.epoch_origin, opts.area.interval_seconds);
    const int off = interval_of(sh.offline_epoch_s, tables.epoch_origin, opts.area.interval_seconds);
    ScheduledShift ss{sh.driver_id, on, std::max(off, on + 1),
                      project_clipped(sh.online_lng, sh.online_lat, opts)};
    if (on >= 0) s.driver_rate[on / s.intervals_per_period][zone_of(ss.location, opts.area)] += 1.0;
    s.shifts.push_back(ss);
  }
  for (int p = 0; p < periods; ++p) {
    const int len = std::min(s.intervals_per_period, s.interval_count - p * s.intervals_per_period);
    for (int z = 0; z < zones; ++z) {
      s.passenger_rate[p][z] /= len;
      s.driver_rate[p][z] /= len;
    }
  }

  if (opts.resample) {
    for (int iv = 0; iv < s.interval_count; ++iv) {
      auto& slot = s.requests[iv];
      const auto& pool = by_period[iv / s.intervals_per_period];
      if (slot.empty() || pool.empty()) continue;
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      for (auto& req : slot) req = pool[pick(rng)];
    }
  }
  return s;
}

ArrivalSchedule ingest_calibrated_tables(const std::filesystem::path& requests_file,
                                         const std::filesystem::path& shifts_file,
                                         const CalibratedOptions& opts, Rng& rng) {
  return build_schedule(load_calibrated_tables(requests_file, shifts_file, opts), rng);
}

SyntheticTables generate_synthetic_tables(const SyntheticTableConfig& cfg, Rng& rng) {
  const auto& opts = cfg.calibrated;
  const auto& area = opts.area;
  area.validate();
  SyntheticTables out;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::exponential_distribution<double> shift_len(1.0 / cfg.mean_shift_seconds);
  std::int64_t next_passenger = 1;
  std::int64_t next_driver = 1;
  for (int t = 0; t < cfg.intervals; ++t) {
    const std::int64_t base = cfg.epoch_start + static_cast<std::int64_t>(t * area.interval_seconds);
    const int n = sample_arrival_count(cfg.request_rate, ArrivalMode::poisson, t, rng);
    for (int k = 0; k < n; ++k) {
      const Location o = sample_location(cfg.request_origin, area, rng);
      const Location d = sample_location(cfg.request_destination, area, rng);
      RequestRow r;
      r.passenger_id = next_passenger++;
      r.request_epoch_s = base;
      unproject(o, opts, r.origin_lng, r.origin_lat);
      unproject(d, opts, r.dest_lng, r.dest_lat);
      r.trip_duration_s = std::round(pickup_time(o, d, area) + 60.0);
      out.requests.push_back(r);
    }
    const int m = sample_arrival_count(cfg.shift_rate, ArrivalMode::poisson, t, rng);
    for (int k = 0; k < m; ++k) {
      const Location p = sample_location(cfg.driver_position, area, rng);
      ShiftRow s;
      s.driver_id = next_driver++;
      s.online_epoch_s = base;
      unproject(p, opts, s.online_lng, s.online_lat);
      s.offline_epoch_s = base + std::max<std::int64_t>(
                                     static_cast<std::int64_t>(area.interval_seconds),
                                     static_cast<std::int64_t>(std::llround(shift_len(rng))));
      out.shifts.push_back(s);
    }
  }
  return out;
}

void generate_synthetic_tables(const SyntheticTableConfig& cfg, Rng& rng,
                               const std::filesystem::path& requests_file,
                               const std::filesystem::path& shifts_file) {
  const auto tables = generate_synthetic_tables(cfg, rng);
  write_request_table(requests_file, tables.requests);
  write_shift_table(shifts_file, tables.shifts);
}

}  // namespace delaymatch
