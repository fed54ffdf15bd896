#include "doctest.h"

#include <filesystem>
#include <set>

#include "odsage/calendar.hpp"
#include "odsage/io.hpp"
#include "odsage/network.hpp"

using namespace odsage;

namespace {

GeneratedNetwork full_network() {
  SyntheticNetworkSpec spec;
  spec.seed = 11;
  return make_synthetic_network(spec);  // trunk 12, 6 lines, fingers 6 -> 84 stations
}

Network path_network(int n) {
  std::vector<Station> stations(n);
  for (int i = 0; i < n; ++i) {
    stations[i].id = i;
    stations[i].name = "P" + std::to_string(i);
    stations[i].utm_x = 1000.0 * i;
    stations[i].utm_y = 0.0;
  }
  Line line;
  line.id = 0;
  for (int i = 0; i < n; ++i) line.stations.push_back(i);
  return Network(std::move(stations), {line});
}

}  // namespace

TEST_CASE("all-pairs enumeration sizes") {
  const auto gen = full_network();
  CHECK(gen.net.n_stations() == 84);
  CHECK(enumerate_all_od_pairs(gen.net).size() == 6972);

  const auto tiny = contiguous_subnetwork(gen, 0, 3, 12);
  CHECK(tiny.net.n_stations() == 12);
  CHECK(enumerate_all_od_pairs(tiny.net).size() == 132);

  CHECK(enumerate_all_od_pairs(path_network(2)).size() == 2);
}

TEST_CASE("all-pairs enumeration has dense unique indices and no self pairs") {
  const auto ods = enumerate_all_od_pairs(path_network(7));
  std::set<std::pair<int, int>> seen;
  for (size_t i = 0; i < ods.size(); ++i) {
    CHECK(ods[i].index == static_cast<int>(i));
    CHECK(ods[i].origin != ods[i].destination);
    seen.insert({ods[i].origin, ods[i].destination});
  }
  CHECK(seen.size() == ods.size());
}

TEST_CASE("signed station encoding") {
  const Network net = path_network(4);
  const auto v = node_id_encoding({0, 1, 3}, net, IdMode::signed_station, 12);
  CHECK(v == std::vector<double>{0, 1, 0, -1});
}

TEST_CASE("onehot od encoding") {
  const Network net = path_network(12);
  const auto v = node_id_encoding({3, 0, 1}, net, IdMode::onehot_od, 12);
  REQUIRE(v.size() == 12);
  for (int i = 0; i < 12; ++i) CHECK(v[i] == (i == 3 ? 1.0 : 0.0));
}

TEST_CASE("signed encodings sum to zero and are injective") {
  const Network net = path_network(6);
  const auto ods = enumerate_all_od_pairs(net);
  std::set<std::vector<double>> seen;
  for (const auto& od : ods) {
    const auto v = node_id_encoding(od, net, IdMode::signed_station, ods.size());
    double sum = 0.0;
    for (double x : v) sum += x;
    CHECK(sum == 0.0);
    seen.insert(v);
  }
  CHECK(seen.size() == ods.size());
}

TEST_CASE("top-k selection by mean complete demand") {
  const Network net = path_network(3);  // ODs over 3 stations: 6 pairs
  TripLog trips;
  auto add_trips = [&](int o, int d, int count) {
    for (int c = 0; c < count; ++c)
      trips.push_back({o, d, slot_start_epoch(0, 2) + c, slot_start_epoch(0, 2) + c + 300});
  };
  add_trips(0, 1, 5);
  add_trips(1, 2, 9);
  add_trips(2, 0, 7);

  const auto top2 = enumerate_top_k_od_pairs(net, {2, &trips});
  REQUIRE(top2.size() == 2);
  // Selected: (1,2) and (2,0); output ordered by all-pairs index, re-indexed.
  CHECK(top2[0].origin == 1);
  CHECK(top2[0].destination == 2);
  CHECK(top2[0].index == 0);
  CHECK(top2[1].origin == 2);
  CHECK(top2[1].destination == 0);
  CHECK(top2[1].index == 1);

  // Deterministic and a subset of all pairs.
  const auto again = enumerate_top_k_od_pairs(net, {2, &trips});
  CHECK(again[0] == top2[0]);
  CHECK(again[1] == top2[1]);

  CHECK_THROWS_WITH_AS(enumerate_top_k_od_pairs(net, {7, &trips}),
                       "k exceeds pair count", std::invalid_argument);
}

TEST_CASE("top-k ties break by all-pairs index order") {
  const Network net = path_network(3);
  const TripLog empty;  // every OD ties at zero demand
  const auto top3 = enumerate_top_k_od_pairs(net, {3, &empty});
  const auto all = enumerate_all_od_pairs(net);
  for (int i = 0; i < 3; ++i) {
    CHECK(top3[i].origin == all[i].origin);
    CHECK(top3[i].destination == all[i].destination);
  }
}

TEST_CASE("synthetic network is connected and valid") {
  const auto gen = full_network();
  const auto& net = gen.net;
  for (const auto& line : net.lines())
    for (int st : line.stations) CHECK(st < net.n_stations());
  for (int s = 1; s < net.n_stations(); ++s) CHECK(net.hop_distance(0, s) > 0);
  CHECK(gen.station_community.size() == static_cast<size_t>(net.n_stations()));
  // Trunk stations serve every line.
  for (int t = 0; t < 12; ++t) CHECK(net.stations()[t].lines.size() == 6);
}

TEST_CASE("contiguous subnetwork keeps induced line runs") {
  const auto gen = full_network();
  const auto tiny = contiguous_subnetwork(gen, 0, 3, 12);
  CHECK(tiny.net.lines().size() >= 2);  // the sliced line plus trunk overlaps
  for (const auto& line : tiny.net.lines()) {
    CHECK(line.stations.size() >= 2);
    for (size_t i = 0; i + 1 < line.stations.size(); ++i)
      CHECK(tiny.net.hop_distance(line.stations[i], line.stations[i + 1]) == 1);
  }
}

TEST_CASE("relevant line directions orient along the shortest path") {
  const Network net = path_network(5);
  const OdPair forward{0, 1, 3};
  const auto at_origin = net.relevant_line_directions(forward, true);
  REQUIRE(at_origin.size() == 1);
  CHECK(at_origin[0].line == 0);
  CHECK(at_origin[0].direction == 0);

  const OdPair backward{1, 3, 1};
  const auto back_origin = net.relevant_line_directions(backward, true);
  REQUIRE(back_origin.size() == 1);
  CHECK(back_origin[0].direction == 1);

  const auto at_dest = net.relevant_line_directions(forward, false);
  REQUIRE(at_dest.size() == 1);
  CHECK(at_dest[0].direction == 0);
}

TEST_CASE("network csv round-trip") {
  const auto gen = full_network();
  const auto dir = std::filesystem::temp_directory_path() / "odsage_net_csv";
  std::filesystem::create_directories(dir);
  write_text_file((dir / "stations.csv").string(), stations_to_csv(gen.net));
  write_text_file((dir / "lines.csv").string(), lines_to_csv(gen.net));
  const Network back =
      network_from_csv((dir / "stations.csv").string(), (dir / "lines.csv").string());
  CHECK(back.n_stations() == gen.net.n_stations());
  REQUIRE(back.lines().size() == gen.net.lines().size());
  for (size_t l = 0; l < back.lines().size(); ++l)
    CHECK(back.lines()[l].stations == gen.net.lines()[l].stations);
  CHECK(back.stations()[17].utm_x == doctest::Approx(gen.net.stations()[17].utm_x));
  std::filesystem::remove_all(dir);
}
