#include "doctest.h"

#include <cmath>
#include <map>
#include <set>

#include "odsage/calendar.hpp"
#include "odsage/logs.hpp"
#include "odsage/network.hpp"
#include "odsage/simulator.hpp"

using namespace odsage;

namespace {

GeneratedNetwork small_net() {
  SyntheticNetworkSpec spec;
  spec.trunk_len = 2;
  spec.n_lines = 1;
  spec.finger_len = 1;
  spec.seed = 3;
  return make_synthetic_network(spec);  // 4 stations on one line
}

SimConfig base_config(const GeneratedNetwork& gen, int n_days, double rate) {
  DemandRateSpec rates;
  rates.mean_rate = rate;
  SimConfig cfg = make_default_sim_config(gen, 5, n_days, rates);
  cfg.episodes.episode_prob = 0.0;
  return cfg;
}

}  // namespace

TEST_CASE("zero rates give an empty trip log but scheduled trains") {
  const auto gen = small_net();
  SimConfig cfg = base_config(gen, 2, 1.0);
  for (double& r : cfg.base_rates) r = 0.0;
  const auto [trips, trains] = simulate(cfg, gen.net);
  CHECK(trips.empty());
  CHECK(!trains.empty());
}

TEST_CASE("per-line cancel probability one cancels every train on that line") {
  SyntheticNetworkSpec spec;
  spec.trunk_len = 3;
  spec.n_lines = 2;
  spec.finger_len = 2;
  spec.seed = 4;
  const auto gen = make_synthetic_network(spec);
  SimConfig cfg = base_config(gen, 2, 0.5);
  cfg.cancel_prob_per_line[1] = 1.0;
  const auto [trips, trains] = simulate(cfg, gen.net);
  bool saw_line1 = false;
  for (const auto& e : trains) {
    if (e.line == 1) {
      saw_line1 = true;
      CHECK(e.cancelled);
      CHECK(e.delay_s == 0);  // cancelled events carry no delay
    }
  }
  CHECK(saw_line1);
}

TEST_CASE("same seed reproduces byte-identical logs") {
  const auto gen = small_net();
  const SimConfig cfg = base_config(gen, 3, 2.0);
  const auto [trips_a, trains_a] = simulate(cfg, gen.net);
  const auto [trips_b, trains_b] = simulate(cfg, gen.net);
  CHECK(trips_to_csv(trips_a) == trips_to_csv(trips_b));
  CHECK(trains_to_csv(trains_a) == trains_to_csv(trains_b));
  CHECK(!trips_a.empty());
}

TEST_CASE("trip invariants: ordering and service window") {
  const auto gen = small_net();
  SimConfig cfg = base_config(gen, 4, 3.0);
  cfg.delay.prob = 0.5;
  const auto [trips, trains] = simulate(cfg, gen.net);
  REQUIRE(!trips.empty());
  for (const auto& t : trips) {
    CHECK(t.tap_out > t.tap_in);
    const int day = day_of_epoch(t.tap_in);
    CHECK(weekday_of(day) >= 0);
    CHECK(t.tap_in >= service_start_epoch(day));
    CHECK(t.tap_in < service_end_epoch(day));
    CHECK(slot_of_epoch(t.tap_in) >= 0);
  }
  for (const auto& e : trains) {
    const int day = day_of_epoch(e.scheduled);
    CHECK(e.scheduled >= service_start_epoch(day));
    CHECK(e.scheduled < service_end_epoch(day));
    if (e.cancelled) CHECK(e.delay_s == 0);
  }
}

TEST_CASE("disruption index formula") {
  TrainLog log;
  const int64_t t = slot_start_epoch(0, 6);
  auto add = [&](int64_t offset, int delay, bool cancelled) {
    log.push_back({0, 0, 0, t - offset, cancelled ? 0 : delay, cancelled});
  };

  SUBCASE("no trains in window") { CHECK(disruption_index(log, 0, t) == 0.0); }

  SUBCASE("mean delay 300s, no cancellations") {
    add(600, 200, false);
    add(1200, 400, false);
    CHECK(disruption_index(log, 0, t) == doctest::Approx(1.0));
  }

  SUBCASE("mean delay 150s with a quarter cancelled") {
    add(600, 100, false);
    add(1200, 200, false);
    add(1800, 150, false);
    add(2400, 0, true);
    CHECK(disruption_index(log, 0, t) == doctest::Approx(0.75));
  }

  SUBCASE("events outside the one-hour window are ignored") {
    add(3700, 900, false);
    CHECK(disruption_index(log, 0, t) == 0.0);
    add(3600, 900, false);  // exactly one hour back is outside (t-1h, t]
    CHECK(disruption_index(log, 0, t) == 0.0);
    add(3599, 900, false);
    CHECK(disruption_index(log, 0, t) == doctest::Approx(3.0));
  }
}

TEST_CASE("demand drops in disrupted windows") {
  const auto gen = small_net();
  SimConfig cfg = base_config(gen, 1200, 0.0);
  for (double& r : cfg.base_rates) r = 0.0;
  cfg.base_rates[0] = 4.0;  // single active OD
  cfg.community_sigma = 0.0;
  cfg.reliability_elasticity = -0.5;
  cfg.episodes = {0.8, 0.95, 420.0, 0.3, 1.0, 3.0};
  const auto [trips, trains] = simulate(cfg, gen.net);

  const auto ods = enumerate_all_od_pairs(gen.net);
  const int origin = ods[0].origin;

  std::map<int, TrainLog> by_day;
  for (const auto& e : trains) by_day[day_of_epoch(e.scheduled)].push_back(e);
  std::map<std::pair<int, int>, int> demand;
  for (const auto& t : trips)
    if (t.origin == ods[0].origin && t.destination == ods[0].destination)
      demand[{day_of_epoch(t.tap_in), slot_of_epoch(t.tap_in)}]++;

  double sum_disrupted = 0.0, sum_calm = 0.0;
  int64_t n_disrupted = 0, n_calm = 0;
  for (int day = 0; day < cfg.n_days; ++day) {
    for (int slot = 0; slot < kSlotsPerDay; ++slot) {
      const double idx = disruption_index(by_day[day], origin, slot_start_epoch(day, slot));
      const double d = demand.count({day, slot}) ? demand[{day, slot}] : 0;
      if (idx > 0.3) {
        sum_disrupted += d;
        ++n_disrupted;
      } else if (idx == 0.0) {
        sum_calm += d;
        ++n_calm;
      }
    }
  }
  REQUIRE(n_disrupted > 500);
  REQUIRE(n_calm > 500);
  CHECK(sum_disrupted / n_disrupted < sum_calm / n_calm);
}

TEST_CASE("same-community ODs correlate more than cross-community ODs") {
  SyntheticNetworkSpec spec;
  spec.seed = 21;
  const auto full = make_synthetic_network(spec);
  const auto gen = contiguous_subnetwork(full, 0, 3, 12);
  SimConfig cfg = base_config(gen, 150, 2.0);
  cfg.community_sigma = 0.5;
  const auto [trips, trains] = simulate(cfg, gen.net);

  const auto ods = enumerate_all_od_pairs(gen.net);
  const int keep = 40;  // correlation over a subset keeps the test quick
  const int t_len = cfg.n_days * kSlotsPerDay;
  std::vector<std::vector<double>> series(keep, std::vector<double>(t_len, 0.0));
  std::map<std::pair<int, int>, int> od_index;
  for (int i = 0; i < keep; ++i) od_index[{ods[i].origin, ods[i].destination}] = i;
  for (const auto& t : trips) {
    const auto it = od_index.find({t.origin, t.destination});
    if (it == od_index.end()) continue;
    series[it->second][day_of_epoch(t.tap_in) * kSlotsPerDay + slot_of_epoch(t.tap_in)] += 1.0;
  }

  auto community_pair = [&](int i) {
    return std::pair<int, int>{gen.station_community[ods[i].origin],
                               gen.station_community[ods[i].destination]};
  };
  auto correlation = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double ma = 0, mb = 0;
    for (int k = 0; k < t_len; ++k) {
      ma += a[k];
      mb += b[k];
    }
    ma /= t_len;
    mb /= t_len;
    double cab = 0, caa = 0, cbb = 0;
    for (int k = 0; k < t_len; ++k) {
      cab += (a[k] - ma) * (b[k] - mb);
      caa += (a[k] - ma) * (a[k] - ma);
      cbb += (b[k] - mb) * (b[k] - mb);
    }
    return cab / std::sqrt(caa * cbb);
  };

  double within = 0, cross = 0;
  int n_within = 0, n_cross = 0;
  for (int i = 0; i < keep; ++i) {
    for (int j = i + 1; j < keep; ++j) {
      const double c = correlation(series[i], series[j]);
      if (community_pair(i) == community_pair(j)) {
        within += c;
        ++n_within;
      } else {
        cross += c;
        ++n_cross;
      }
    }
  }
  REQUIRE(n_within > 20);
  REQUIRE(n_cross > 20);
  CHECK(within / n_within > cross / n_cross + 0.05);
}

TEST_CASE("default slot profile is positive with unit mean") {
  const auto p = default_slot_profile();
  double sum = 0.0;
  for (double v : p) {
    CHECK(v > 0.0);
    sum += v;
  }
  CHECK(sum / kSlotsPerDay == doctest::Approx(1.0));
}
