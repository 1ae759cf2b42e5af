#include <gtest/gtest.h>

#include <cmath>

#include "delaymatch/calibrated.hpp"
#include "delaymatch/learners.hpp"
#include "delaymatch/simulator.hpp"
#include "test_support.hpp"

using namespace delaymatch;
using delaymatch::testing::TempDir;
using delaymatch::testing::write_text;

namespace {

const char* request_header =
    "passenger_id,request_epoch_s,origin_lng,origin_lat,dest_lng,dest_lat,trip_duration_s\n";
const char* shift_header = "driver_id,online_epoch_s,online_lng,online_lat,offline_epoch_s\n";

CalibratedOptions options() {
  CalibratedOptions o;
  o.epoch_origin = 1000;
  return o;
}

EnvironmentConfig calibrated_env(std::shared_ptr<const ArrivalSchedule> schedule, int horizon) {
  EnvironmentConfig env;
  env.kind = EnvironmentKind::calibrated;
  env.area = schedule->area;
  env.schedule = std::move(schedule);
  env.horizon = horizon;
  return env;
}

bool same_schedule(const ArrivalSchedule& a, const ArrivalSchedule& b) {
  if (a.interval_count != b.interval_count || a.requests.size() != b.requests.size()) return false;
  for (std::size_t k = 0; k < a.requests.size(); ++k) {
    if (a.requests[k].size() != b.requests[k].size()) return false;
    for (std::size_t j = 0; j < a.requests[k].size(); ++j)
      if (a.requests[k][j].source_id != b.requests[k][j].source_id ||
          !(a.requests[k][j].origin == b.requests[k][j].origin))
        return false;
  }
  return a.passenger_rate == b.passenger_rate && a.driver_rate == b.driver_rate;
}

}  // namespace

TEST(Calibrated, ProjectionCentreAndScale) {
  const CalibratedOptions o = options();
  const Location c = project(o.center_lng, o.center_lat, o);
  EXPECT_NEAR(c.x_km, 10.0, 1e-12);
  EXPECT_NEAR(c.y_km, 10.0, 1e-12);
  const Location north = project(o.center_lng, o.center_lat + 0.01, o);
  EXPECT_NEAR(north.y_km - 10.0, 1.10574, 1e-9);
  double lng = 0, lat = 0;
  unproject({3.0, 17.0}, o, lng, lat);
  const Location back = project(lng, lat, o);
  EXPECT_NEAR(back.x_km, 3.0, 1e-9);
  EXPECT_NEAR(back.y_km, 17.0, 1e-9);
}

TEST(Calibrated, EmptyFilesGiveEmptySchedule) {
  TempDir dir("cal_empty");
  write_text(dir / "r.csv", request_header);
  write_text(dir / "s.csv", shift_header);
  Rng rng(1);
  const ArrivalSchedule s = ingest_calibrated_tables(dir / "r.csv", dir / "s.csv", options(), rng);
  EXPECT_TRUE(s.empty());
  EXPECT_TRUE(s.requests.empty());
  EXPECT_TRUE(s.shifts.empty());
}

TEST(Calibrated, ThreeRowsLandAtTheirIntervals) {
  TempDir dir("cal_three");
  write_text(dir / "r.csv", std::string(request_header) +
                                "1,1000,104.06,30.66,104.07,30.67,300\n"
                                "2,1002,104.05,30.65,104.06,30.66,120\n"
                                "3,1002,104.07,30.70,104.06,30.66,60\n");
  write_text(dir / "s.csv", shift_header);
  Rng rng(1);
  const ArrivalSchedule s = ingest_calibrated_tables(dir / "r.csv", dir / "s.csv", options(), rng);
  ASSERT_EQ(s.interval_count, 3);
  EXPECT_EQ(s.requests[0].size(), 1u);
  EXPECT_EQ(s.requests[1].size(), 0u);
  ASSERT_EQ(s.requests[2].size(), 2u);
  EXPECT_EQ(s.requests[0][0].source_id, 1);
  EXPECT_EQ(s.requests[2][1].source_id, 3);
  EXPECT_DOUBLE_EQ(s.requests[0][0].trip_duration_s, 300.0);
}

TEST(Calibrated, RejectsMalformedInput) {
  TempDir dir("cal_bad");
  write_text(dir / "s.csv", shift_header);
  Rng rng(1);
  const auto expect_error = [&](const std::string& body, const std::string& needle) {
    write_text(dir / "r.csv", body);
    try {
      ingest_calibrated_tables(dir / "r.csv", dir / "s.csv", options(), rng);
      ADD_FAILURE() << "accepted: " << body;
    } catch (const std::exception& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  expect_error("wrong,header\n", "header");
  expect_error(std::string(request_header) + "1,1000,104.06,30.66\n", ":2");
  expect_error(std::string(request_header) + "1,abc,104.06,30.66,104.06,30.66,1\n", ":2");
  expect_error(std::string(request_header) + "1,1005,104.06,30.66,104.06,30.66,1\n2,1001,104.06,30.66,104.06,30.66,1\n",
               ":3");
  expect_error(std::string(request_header) + "1,1005,105.5,30.66,104.06,30.66,1\n", "2");
  expect_error(std::string(request_header) + "1,1005,104.06,30.66,104.06,30.66,-4\n", ":2");
}

TEST(Calibrated, RejectsShiftEndingBeforeStart) {
  TempDir dir("cal_shift");
  write_text(dir / "r.csv", request_header);
  write_text(dir / "s.csv", std::string(shift_header) + "7,1010,104.06,30.66,1005\n");
  Rng rng(1);
  EXPECT_THROW(ingest_calibrated_tables(dir / "r.csv", dir / "s.csv", options(), rng), std::runtime_error);
}

TEST(Calibrated, ResamplingIsSeedDeterministicAndKeepsCounts) {
  TempDir dir("cal_resample");
  Rng gen(3);
  SyntheticTableConfig cfg;
  cfg.intervals = 7200;
  cfg.request_rate = 0.5;
  generate_synthetic_tables(cfg, gen, dir / "r.csv", dir / "s.csv");
  CalibratedOptions opts;
  opts.resample = true;
  Rng a(11), b(11), c(12);
  const auto sa = ingest_calibrated_tables(dir / "r.csv", dir / "s.csv", opts, a);
  const auto sb = ingest_calibrated_tables(dir / "r.csv", dir / "s.csv", opts, b);
  const auto sc = ingest_calibrated_tables(dir / "r.csv", dir / "s.csv", opts, c);
  EXPECT_TRUE(same_schedule(sa, sb));
  EXPECT_FALSE(same_schedule(sa, sc));
  opts.resample = false;
  Rng d(11);
  const auto plain = ingest_calibrated_tables(dir / "r.csv", dir / "s.csv", opts, d);
  ASSERT_EQ(plain.requests.size(), sa.requests.size());
  for (std::size_t k = 0; k < plain.requests.size(); ++k) EXPECT_EQ(plain.requests[k].size(), sa.requests[k].size());
}

TEST(Calibrated, ZeroRateSyntheticTablesAreHeaderOnly) {
  TempDir dir("cal_zero");
  SyntheticTableConfig cfg;
  cfg.request_rate = 0.0;
  cfg.shift_rate = 0.0;
  Rng rng(1);
  generate_synthetic_tables(cfg, rng, dir / "r.csv", dir / "s.csv");
  EXPECT_EQ(delaymatch::testing::read_text(dir / "r.csv"), request_header);
  EXPECT_EQ(delaymatch::testing::read_text(dir / "s.csv"), shift_header);
}

TEST(Calibrated, SyntheticTablesRoundTripThroughIngest) {
  TempDir dir("cal_roundtrip");
  SyntheticTableConfig cfg;
  cfg.intervals = 3600;
  Rng rng(5);
  const SyntheticTables tables = generate_synthetic_tables(cfg, rng);
  write_request_table(dir / "r.csv", tables.requests);
  write_shift_table(dir / "s.csv", tables.shifts);
  EXPECT_EQ(read_request_table(dir / "r.csv").size(), tables.requests.size());
  EXPECT_EQ(read_shift_table(dir / "s.csv").size(), tables.shifts.size());
  Rng r2(1);
  const auto s = ingest_calibrated_tables(dir / "r.csv", dir / "s.csv", cfg.calibrated, r2);
  std::size_t n = 0;
  for (const auto& iv : s.requests) n += iv.size();
  EXPECT_EQ(n, tables.requests.size());
}

TEST(Calibrated, SyntheticRowCountWithinThreeSigma) {
  for (double rate : {0.3, 1.0, 2.5}) {
    SyntheticTableConfig cfg;
    cfg.intervals = 10000;
    cfg.request_rate = rate;
    Rng rng(static_cast<std::uint64_t>(rate * 100));
    const auto tables = generate_synthetic_tables(cfg, rng);
    const double expected = rate * cfg.intervals;
    EXPECT_NEAR(static_cast<double>(tables.requests.size()), expected, 3.0 * std::sqrt(expected)) << rate;
  }
}

TEST(Calibrated, WorldServesScheduledRequestsAndShifts) {
  TempDir dir("cal_world");
  SyntheticTableConfig cfg;
  cfg.intervals = 600;
  cfg.request_rate = 0.8;
  cfg.shift_rate = 0.5;
  Rng rng(2);
  generate_synthetic_tables(cfg, rng, dir / "r.csv", dir / "s.csv");
  Rng r2(1);
  auto schedule = std::make_shared<const ArrivalSchedule>(
      ingest_calibrated_tables(dir / "r.csv", dir / "s.csv", cfg.calibrated, r2));
  const EnvironmentConfig env = calibrated_env(schedule, 300);
  WorldState world(env, 1);
  PureOptimizationPolicy pure;
  const EpisodeResult res = run_episode(world, pure);
  std::int64_t scheduled = 0;
  for (int t = 0; t < 300; ++t) scheduled += static_cast<std::int64_t>(schedule->requests[t].size());
  EXPECT_EQ(res.created, scheduled);
  EXPECT_EQ(res.created, res.matched + res.expired);
  EXPECT_GT(res.matched, 0);
  EXPECT_EQ(world.expected_passenger_rate().size(), 400u);
}

TEST(Calibrated, BusyDriversReturnAtDropOff) {
  TempDir dir("cal_busy");
  write_text(dir / "r.csv", std::string(request_header) + "1,1000,104.06,30.66,104.07,30.66,10\n");
  write_text(dir / "s.csv", std::string(shift_header) + "5,1000,104.06,30.66,2000\n");
  Rng rng(1);
  auto schedule = std::make_shared<const ArrivalSchedule>(
      ingest_calibrated_tables(dir / "r.csv", dir / "s.csv", options(), rng));
  WorldState world(calibrated_env(schedule, 20), 1);
  ASSERT_EQ(world.waiting().size(), 1u);
  ASSERT_EQ(world.idle_drivers().size(), 1u);
  const auto out = world.step(std::vector<int>{1});
  ASSERT_EQ(out.matched.size(), 1u);
  EXPECT_NEAR(out.matched[0].pickup_time_s, 0.0, 1e-6);
  EXPECT_EQ(world.idle_drivers().size(), 0u);
  while (world.t() <= 10) world.step(std::vector<int>{});
  ASSERT_EQ(world.idle_drivers().size(), 1u);
  const Location drop = world.idle_drivers()[0]->location;
  EXPECT_NEAR(drop.x_km, project(104.07, 30.66, options()).x_km, 1e-9);
}

TEST(Calibrated, DriversGoOfflineAtShiftEnd) {
  TempDir dir("cal_offline");
  write_text(dir / "r.csv", request_header);
  write_text(dir / "s.csv", std::string(shift_header) + "5,1000,104.06,30.66,1004\n");
  Rng rng(1);
  auto schedule = std::make_shared<const ArrivalSchedule>(
      ingest_calibrated_tables(dir / "r.csv", dir / "s.csv", options(), rng));
  WorldState world(calibrated_env(schedule, 10), 1);
  EXPECT_EQ(world.drivers().size(), 1u);
  while (world.t() < 5) world.step(std::vector<int>{});
  EXPECT_TRUE(world.drivers().empty());
}
