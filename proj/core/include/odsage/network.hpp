#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "odsage/logs.hpp"

namespace odsage {

struct Station {
  int id = 0;
  std::string name;
  double utm_x = 0.0;  // meters east
  double utm_y = 0.0;  // meters north
  std::set<int> lines;
};

// A line is an ordered station path; trains run in direction 0 (forward
// along the sequence) and direction 1 (reverse).
struct Line {
  int id = 0;
  std::vector<int> stations;
};

// Ordered origin-destination pair; the vertex of every OD graph.
struct OdPair {
  int index = 0;
  int origin = 0;
  int destination = 0;

  friend bool operator==(const OdPair& a, const OdPair& b) {
    return a.index == b.index && a.origin == b.origin && a.destination == b.destination;
  }
};

struct LineDirection {
  int line = 0;
  int direction = 0;
  friend bool operator==(const LineDirection& a, const LineDirection& b) {
    return a.line == b.line && a.direction == b.direction;
  }
  friend bool operator<(const LineDirection& a, const LineDirection& b) {
    return a.line != b.line ? a.line < b.line : a.direction < b.direction;
  }
};

class Network {
 public:
  Network() = default;
  Network(std::vector<Station> stations, std::vector<Line> lines);

  const std::vector<Station>& stations() const { return stations_; }
  const std::vector<Line>& lines() const { return lines_; }
  int n_stations() const { return static_cast<int>(stations_.size()); }

  // Hop count along the station adjacency graph (consecutive stations on
  // a line are one hop apart). Returns -1 when unreachable.
  int hop_distance(int from, int to) const { return hops_[from][to]; }

  // First station after `from` on a shortest-hop path to `to`; -1 when
  // unreachable or from == to.
  int next_hop(int from, int to) const { return next_hop_[from][to]; }

  // The (line, direction) set relevant to an OD at one of its endpoints:
  // lines serving the endpoint, oriented along the OD's shortest-hop
  // path where the line serves that hop, both directions otherwise.
  std::vector<LineDirection> relevant_line_directions(const OdPair& od, bool at_origin) const;

 private:
  std::vector<Station> stations_;
  std::vector<Line> lines_;
  std::vector<std::vector<int>> hops_;
  std::vector<std::vector<int>> next_hop_;
};

enum class IdMode { onehot_od, signed_station };

struct TopKByMeanDemand {
  int k = 0;
  const TripLog* trips = nullptr;
};

// All S*(S-1) ordered pairs, indexed in (origin, destination) order.
std::vector<OdPair> enumerate_all_od_pairs(const Network& net);

// The k pairs with the highest mean per-interval complete demand in the
// supplied log; ties break toward the lower all-pairs index. Output is
// ordered by all-pairs index and re-indexed densely.
std::vector<OdPair> enumerate_top_k_od_pairs(const Network& net, const TopKByMeanDemand& mode);

// onehot_od: N-dim basis vector at od.index (N = n_ods).
// signed_station: S-dim vector, +1 at origin, -1 at destination.
std::vector<double> node_id_encoding(const OdPair& od, const Network& net, IdMode mode,
                                     int n_ods);

int id_encoding_dim(IdMode mode, const Network& net, int n_ods);

// ----- synthetic topology -------------------------------------------------

// Star-shaped network: a central trunk shared by all lines plus two
// "finger" branches per line radiating outward, mimicking a suburban
// rail map. Station communities follow the branch structure (one per
// finger, one for the trunk), which the simulator uses to plant
// spatially correlated demand.
struct SyntheticNetworkSpec {
  int trunk_len = 12;
  int n_lines = 6;
  int finger_len = 6;
  double spacing_m = 1200.0;  // nominal inter-station distance
  uint64_t seed = 1;
};

struct GeneratedNetwork {
  Network net;
  std::vector<int> station_community;
};

GeneratedNetwork make_synthetic_network(const SyntheticNetworkSpec& spec);

// Restriction of a network to `count` contiguous stations of one line.
// Other lines keep their maximal induced sub-paths (>= 2 stations).
// Station ids are re-numbered densely along the chosen slice.
GeneratedNetwork contiguous_subnetwork(const GeneratedNetwork& gen, int line_id, int start,
                                       int count);

// stations.csv: station_id,name,utm_x,utm_y
// lines.csv:    line_id,seq,station_id
std::string stations_to_csv(const Network& net);
std::string lines_to_csv(const Network& net);
Network network_from_csv(const std::string& stations_path, const std::string& lines_path);

}  // namespace odsage
