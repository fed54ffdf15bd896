#include "odsage/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "odsage/calendar.hpp"
#include "odsage/io.hpp"
#include "odsage/rng.hpp"

namespace odsage {

Network::Network(std::vector<Station> stations, std::vector<Line> lines)
    : stations_(std::move(stations)), lines_(std::move(lines)) {
  const int s = n_stations();
  for (int i = 0; i < s; ++i) {
    if (stations_[i].id != i) throw std::invalid_argument("station ids must be dense 0..S-1");
    if (!std::isfinite(stations_[i].utm_x) || !std::isfinite(stations_[i].utm_y))
      throw std::invalid_argument("station coordinates must be finite");
    stations_[i].lines.clear();
  }
  std::vector<std::set<int>> adj(s);
  for (size_t li = 0; li < lines_.size(); ++li) {
    const auto& line = lines_[li];
    if (line.id != static_cast<int>(li)) throw std::invalid_argument("line ids must be dense");
    if (line.stations.size() < 2) throw std::invalid_argument("line needs >= 2 stations");
    for (size_t i = 0; i < line.stations.size(); ++i) {
      const int st = line.stations[i];
      if (st < 0 || st >= s) throw std::invalid_argument("line references unknown station");
      stations_[st].lines.insert(line.id);
      if (i > 0) {
        adj[line.stations[i - 1]].insert(st);
        adj[st].insert(line.stations[i - 1]);
      }
    }
  }

  hops_.assign(s, std::vector<int>(s, -1));
  for (int src = 0; src < s; ++src) {
    auto& dist = hops_[src];
    dist[src] = 0;
    std::deque<int> queue{src};
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      for (int v : adj[u]) {
        if (dist[v] < 0) {
          dist[v] = dist[u] + 1;
          queue.push_back(v);
        }
      }
    }
  }
  next_hop_.assign(s, std::vector<int>(s, -1));
  for (int src = 0; src < s; ++src) {
    for (int dst = 0; dst < s; ++dst) {
      if (src == dst || hops_[src][dst] < 0) continue;
      for (int nb : adj[src]) {  // set iteration: lowest id wins ties
        if (hops_[nb][dst] == hops_[src][dst] - 1) {
          next_hop_[src][dst] = nb;
          break;
        }
      }
    }
  }
}

namespace {

// Whether `line` serves the directed hop a -> b, and in which direction.
bool line_serves_hop(const Line& line, int a, int b, int& direction) {
  for (size_t i = 0; i + 1 < line.stations.size(); ++i) {
    if (line.stations[i] == a && line.stations[i + 1] == b) {
      direction = 0;
      return true;
    }
    if (line.stations[i] == b && line.stations[i + 1] == a) {
      direction = 1;
      return true;
    }
  }
  return false;
}

}  // namespace

std::vector<LineDirection> Network::relevant_line_directions(const OdPair& od,
                                                             bool at_origin) const {
  const int endpoint = at_origin ? od.origin : od.destination;
  int hop_from = -1, hop_to = -1;
  if (at_origin) {
    hop_from = od.origin;
    hop_to = next_hop(od.origin, od.destination);
  } else {
    hop_to = od.destination;
    hop_from = next_hop(od.destination, od.origin);  // last hop, reversed
  }

  std::vector<LineDirection> out;
  for (int line_id : stations_[endpoint].lines) {
    const Line& line = lines_[line_id];
    int dir = 0;
    if (hop_to >= 0 && hop_from >= 0 && line_serves_hop(line, hop_from, hop_to, dir)) {
      out.push_back({line_id, dir});
    } else {
      out.push_back({line_id, 0});
      out.push_back({line_id, 1});
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<OdPair> enumerate_all_od_pairs(const Network& net) {
  const int s = net.n_stations();
  std::vector<OdPair> out;
  out.reserve(static_cast<size_t>(s) * (s - 1));
  int idx = 0;
  for (int o = 0; o < s; ++o)
    for (int d = 0; d < s; ++d)
      if (o != d) out.push_back({idx++, o, d});
  return out;
}

std::vector<OdPair> enumerate_top_k_od_pairs(const Network& net, const TopKByMeanDemand& mode) {
  const auto all = enumerate_all_od_pairs(net);
  if (mode.k > static_cast<int>(all.size())) throw std::invalid_argument("k exceeds pair count");
  if (mode.trips == nullptr) throw std::invalid_argument("top-k mode requires a trip log");

  const int s = net.n_stations();
  std::vector<int64_t> counts(static_cast<size_t>(s) * s, 0);
  std::set<int> days;
  for (const auto& t : *mode.trips) {
    counts[static_cast<size_t>(t.origin) * s + t.destination]++;
    days.insert(day_of_epoch(t.tap_in));
  }
  const double n_intervals = std::max<double>(1.0, static_cast<double>(days.size()) * kSlotsPerDay);

  std::vector<int> order(all.size());
  for (size_t i = 0; i < all.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const double ma = counts[static_cast<size_t>(all[a].origin) * s + all[a].destination] / n_intervals;
    const double mb = counts[static_cast<size_t>(all[b].origin) * s + all[b].destination] / n_intervals;
    if (ma != mb) return ma > mb;
    return a < b;  // ties: lower all-pairs index
  });
  order.resize(mode.k);
  std::sort(order.begin(), order.end());

  std::vector<OdPair> out;
  out.reserve(mode.k);
  for (int i = 0; i < mode.k; ++i)
    out.push_back({i, all[order[i]].origin, all[order[i]].destination});
  return out;
}

std::vector<double> node_id_encoding(const OdPair& od, const Network& net, IdMode mode,
                                     int n_ods) {
  if (mode == IdMode::onehot_od) {
    if (od.index < 0 || od.index >= n_ods) throw std::invalid_argument("od index out of range");
    std::vector<double> v(n_ods, 0.0);
    v[od.index] = 1.0;
    return v;
  }
  if (od.origin >= net.n_stations() || od.destination >= net.n_stations())
    throw std::invalid_argument("od does not belong to network");
  std::vector<double> v(net.n_stations(), 0.0);
  v[od.origin] = 1.0;
  v[od.destination] = -1.0;
  return v;
}

int id_encoding_dim(IdMode mode, const Network& net, int n_ods) {
  return mode == IdMode::onehot_od ? n_ods : net.n_stations();
}

GeneratedNetwork make_synthetic_network(const SyntheticNetworkSpec& spec) {
  Rng rng(derive_seed(spec.seed, 0x6e6574));
  const int t = spec.trunk_len;
  const int f = spec.finger_len;
  const int n = t + 2 * spec.n_lines * f;

  std::vector<Station> stations(n);
  std::vector<int> community(n, 0);
  auto jitter = [&]() { return rng.uniform(-0.15, 0.15) * spec.spacing_m; };
  auto place = [&](int id, double x, double y) {
    stations[id].id = id;
    char name[16];
    std::snprintf(name, sizeof(name), "S%03d", id);
    stations[id].name = name;
    stations[id].utm_x = 700000.0 + x + jitter();
    stations[id].utm_y = 6170000.0 + y + jitter();
  };

  for (int i = 0; i < t; ++i) place(i, i * spec.spacing_m, 0.0);

  const double spread = 0.45;  // radians between adjacent fingers
  std::vector<Line> lines(spec.n_lines);
  int next_id = t;
  for (int l = 0; l < spec.n_lines; ++l) {
    const double off = (l - (spec.n_lines - 1) / 2.0) * spread;
    std::vector<int> west(f), east(f);
    for (int j = 0; j < f; ++j) {
      west[j] = next_id++;
      const double r = (j + 1) * spec.spacing_m;
      place(west[j], -r * std::cos(off), r * std::sin(off));
      community[west[j]] = 1 + 2 * l;
    }
    for (int j = 0; j < f; ++j) {
      east[j] = next_id++;
      const double r = (j + 1) * spec.spacing_m;
      place(east[j], (t - 1) * spec.spacing_m + r * std::cos(off), r * std::sin(off));
      community[east[j]] = 2 + 2 * l;
    }
    Line& line = lines[l];
    line.id = l;
    for (int j = f - 1; j >= 0; --j) line.stations.push_back(west[j]);
    for (int i = 0; i < t; ++i) line.stations.push_back(i);
    for (int j = 0; j < f; ++j) line.stations.push_back(east[j]);
  }

  return {Network(std::move(stations), std::move(lines)), std::move(community)};
}

GeneratedNetwork contiguous_subnetwork(const GeneratedNetwork& gen, int line_id, int start,
                                       int count) {
  const auto& lines = gen.net.lines();
  if (line_id < 0 || line_id >= static_cast<int>(lines.size()))
    throw std::invalid_argument("unknown line");
  const auto& seq = lines[line_id].stations;
  if (start < 0 || count < 2 || start + count > static_cast<int>(seq.size()))
    throw std::invalid_argument("slice out of range");

  std::map<int, int> remap;  // old station id -> new id
  std::vector<Station> stations;
  std::vector<int> community;
  for (int i = 0; i < count; ++i) {
    const int old_id = seq[start + i];
    remap[old_id] = i;
    Station st = gen.net.stations()[old_id];
    st.id = i;
    st.lines.clear();
    stations.push_back(std::move(st));
    community.push_back(gen.station_community[old_id]);
  }

  std::vector<Line> sub_lines;
  for (const auto& line : lines) {
    std::vector<int> run;
    auto flush = [&]() {
      if (run.size() >= 2) {
        Line sl;
        sl.id = static_cast<int>(sub_lines.size());
        sl.stations = run;
        sub_lines.push_back(std::move(sl));
      }
      run.clear();
    };
    for (int st : line.stations) {
      auto it = remap.find(st);
      if (it != remap.end())
        run.push_back(it->second);
      else
        flush();
    }
    flush();
  }

  return {Network(std::move(stations), std::move(sub_lines)), std::move(community)};
}

std::string stations_to_csv(const Network& net) {
  std::ostringstream out;
  out << "station_id,name,utm_x,utm_y\n";
  for (const auto& s : net.stations())
    out << s.id << ',' << s.name << ',' << fmt_g(s.utm_x) << ',' << fmt_g(s.utm_y) << '\n';
  return out.str();
}

std::string lines_to_csv(const Network& net) {
  std::ostringstream out;
  out << "line_id,seq,station_id\n";
  for (const auto& l : net.lines())
    for (size_t i = 0; i < l.stations.size(); ++i)
      out << l.id << ',' << i << ',' << l.stations[i] << '\n';
  return out.str();
}

Network network_from_csv(const std::string& stations_path, const std::string& lines_path) {
  std::vector<Station> stations;
  for (const auto& row : read_csv_rows(stations_path)) {
    Station s;
    s.id = std::stoi(row.at(0));
    s.name = row.at(1);
    s.utm_x = std::stod(row.at(2));
    s.utm_y = std::stod(row.at(3));
    stations.push_back(std::move(s));
  }
  std::sort(stations.begin(), stations.end(),
            [](const Station& a, const Station& b) { return a.id < b.id; });

  std::map<int, std::vector<std::pair<int, int>>> by_line;  // line -> (seq, station)
  for (const auto& row : read_csv_rows(lines_path))
    by_line[std::stoi(row.at(0))].push_back({std::stoi(row.at(1)), std::stoi(row.at(2))});
  std::vector<Line> lines;
  for (auto& [id, entries] : by_line) {
    std::sort(entries.begin(), entries.end());
    Line l;
    l.id = id;
    for (const auto& [seq, st] : entries) l.stations.push_back(st);
    lines.push_back(std::move(l));
  }
  return Network(std::move(stations), std::move(lines));
}

}  // namespace odsage
