#include "odsage/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "odsage/io.hpp"

namespace odsage {

ObservedDemand observed_demand(const TripLog& trips, const OdPair& od, IntervalIndex iv,
                               int64_t prediction_time) {
  const int64_t a = slot_start_epoch(iv);
  const int64_t b = slot_end_epoch(iv);
  if (prediction_time < b) throw std::invalid_argument("future interval");
  ObservedDemand out;
  for (const auto& t : trips) {
    if (t.tap_in < a || t.tap_in >= b) continue;
    if (t.origin == od.origin && t.destination == od.destination && t.tap_out <= prediction_time)
      out.d++;
    if (t.origin == od.origin && t.tap_out > prediction_time) out.p++;
  }
  out.x = out.d + out.p;
  return out;
}

int target_demand(const TripLog& trips, const OdPair& od, IntervalIndex iv) {
  const int64_t a = slot_start_epoch(iv);
  const int64_t b = slot_end_epoch(iv);
  int n = 0;
  for (const auto& t : trips)
    if (t.origin == od.origin && t.destination == od.destination && t.tap_in >= a && t.tap_in < b)
      ++n;
  return n;
}

TripIndex::TripIndex(const TripLog& trips, int n_stations) : n_stations_(n_stations) {
  od_blocks_.resize(static_cast<size_t>(n_stations) * n_stations);
  station_blocks_.resize(n_stations);

  std::vector<int> order(trips.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return trips[a].tap_in < trips[b].tap_in; });
  for (int idx : order) {
    const auto& t = trips[idx];
    auto& ob = od_blocks_[static_cast<size_t>(t.origin) * n_stations + t.destination];
    ob.tap_in.push_back(t.tap_in);
    ob.tap_out.push_back(t.tap_out);
    auto& sb = station_blocks_[t.origin];
    sb.tap_in.push_back(t.tap_in);
    sb.tap_out.push_back(t.tap_out);
    max_day_ = std::max(max_day_, day_of_epoch(t.tap_in));
  }
}

namespace {

// Counts entries of `block` departing in [a, b) with tap_out <= T
// (completed) or > T (unfinished).
void count_in_window(const std::vector<int64_t>& tap_in, const std::vector<int64_t>& tap_out,
                     int64_t a, int64_t b, int64_t t, int& completed, int& unfinished) {
  const auto lo = std::lower_bound(tap_in.begin(), tap_in.end(), a) - tap_in.begin();
  const auto hi = std::lower_bound(tap_in.begin(), tap_in.end(), b) - tap_in.begin();
  for (auto i = lo; i < hi; ++i) {
    if (tap_out[i] <= t)
      ++completed;
    else
      ++unfinished;
  }
}

}  // namespace

int TripIndex::completed(const OdPair& od, IntervalIndex iv, int64_t prediction_time) const {
  const auto& b = od_blocks_[static_cast<size_t>(od.origin) * n_stations_ + od.destination];
  int done = 0, pending = 0;
  count_in_window(b.tap_in, b.tap_out, slot_start_epoch(iv), slot_end_epoch(iv), prediction_time,
                  done, pending);
  return done;
}

int TripIndex::station_unfinished(int station, IntervalIndex iv, int64_t prediction_time) const {
  const auto& b = station_blocks_[station];
  int done = 0, pending = 0;
  count_in_window(b.tap_in, b.tap_out, slot_start_epoch(iv), slot_end_epoch(iv), prediction_time,
                  done, pending);
  return pending;
}

int TripIndex::od_departures(const OdPair& od, IntervalIndex iv) const {
  const auto& b = od_blocks_[static_cast<size_t>(od.origin) * n_stations_ + od.destination];
  const auto lo = std::lower_bound(b.tap_in.begin(), b.tap_in.end(), slot_start_epoch(iv));
  const auto hi = std::lower_bound(b.tap_in.begin(), b.tap_in.end(), slot_end_epoch(iv));
  return static_cast<int>(hi - lo);
}

ObservedDemand TripIndex::observed(const OdPair& od, IntervalIndex iv,
                                   int64_t prediction_time) const {
  if (prediction_time < slot_end_epoch(iv)) throw std::invalid_argument("future interval");
  ObservedDemand out;
  out.d = completed(od, iv, prediction_time);
  out.p = station_unfinished(od.origin, iv, prediction_time);
  out.x = out.d + out.p;
  return out;
}

TrainIndex::TrainIndex(const TrainLog& trains, const Network& net)
    : n_lines_(static_cast<int>(net.lines().size())) {
  groups_.resize(static_cast<size_t>(net.n_stations()) * n_lines_ * 2);
  std::vector<int> order(trains.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return trains[a].scheduled < trains[b].scheduled; });
  for (int idx : order) {
    const auto& e = trains[idx];
    auto& g = groups_[(static_cast<size_t>(e.station) * n_lines_ + e.line) * 2 + e.direction];
    g.scheduled.push_back(e.scheduled);
    const bool served = !e.cancelled;
    g.served_prefix.push_back((g.served_prefix.empty() ? 0 : g.served_prefix.back()) +
                              (served ? 1 : 0));
    g.delay_prefix.push_back((g.delay_prefix.empty() ? 0.0 : g.delay_prefix.back()) +
                             (served ? e.delay_s : 0.0));
    g.cancelled_prefix.push_back((g.cancelled_prefix.empty() ? 0 : g.cancelled_prefix.back()) +
                                 (e.cancelled ? 1 : 0));
    max_day_ = std::max(max_day_, day_of_epoch(e.scheduled));
  }
}

TrainIndex::WindowStats TrainIndex::window(int station, int line, int direction,
                                           int64_t t) const {
  const auto& g = groups_[(static_cast<size_t>(station) * n_lines_ + line) * 2 + direction];
  // (t - 1h, t]
  const auto lo =
      std::upper_bound(g.scheduled.begin(), g.scheduled.end(), t - 3600) - g.scheduled.begin();
  const auto hi = std::upper_bound(g.scheduled.begin(), g.scheduled.end(), t) - g.scheduled.begin();
  WindowStats w;
  if (lo >= hi) return w;
  w.total = static_cast<int>(hi - lo);
  w.served = g.served_prefix[hi - 1] - (lo > 0 ? g.served_prefix[lo - 1] : 0);
  w.delay_sum = g.delay_prefix[hi - 1] - (lo > 0 ? g.delay_prefix[lo - 1] : 0.0);
  w.cancelled = g.cancelled_prefix[hi - 1] - (lo > 0 ? g.cancelled_prefix[lo - 1] : 0);
  return w;
}

namespace {

// Mean and max over one reliability dimension across a line set.
struct MeanMax {
  double mean = 0.0;
  double max = 0.0;
};

std::array<MeanMax, 3> endpoint_stats(const TrainIndex& trains, const Network& net,
                                      const OdPair& od, bool at_origin, int64_t t) {
  const auto line_dirs = net.relevant_line_directions(od, at_origin);
  const int station = at_origin ? od.origin : od.destination;
  std::array<MeanMax, 3> out{};  // count, delay, cancel
  if (line_dirs.empty()) return out;
  bool first = true;
  for (const auto& ld : line_dirs) {
    const auto w = trains.window(station, ld.line, ld.direction, t);
    const double dims[3] = {static_cast<double>(w.served), w.mean_delay(),
                            w.cancel_proportion()};
    for (int k = 0; k < 3; ++k) {
      out[k].mean += dims[k];
      out[k].max = first ? dims[k] : std::max(out[k].max, dims[k]);
    }
    first = false;
  }
  for (auto& mm : out) mm.mean /= static_cast<double>(line_dirs.size());
  return out;
}

}  // namespace

std::array<double, 12> reliability_features(const TrainIndex& trains, const OdPair& od,
                                            int64_t prediction_time, const Network& net) {
  std::array<double, 12> f{};
  int pos = 0;
  for (bool at_origin : {true, false}) {
    const auto stats = endpoint_stats(trains, net, od, at_origin, prediction_time);
    for (int k = 0; k < 3; ++k) {
      f[pos++] = stats[k].mean;
      f[pos++] = stats[k].max;
    }
  }
  return f;
}

std::pair<std::array<double, 5>, std::array<double, kSlotsPerDay>> calendar_features(
    IntervalIndex iv) {
  if (iv.day < 0 || iv.slot < 0 || iv.slot >= kSlotsPerDay)
    throw std::invalid_argument("invalid interval");
  std::array<double, 5> fw{};
  std::array<double, kSlotsPerDay> ft{};
  fw[weekday_of(iv.day)] = 1.0;
  ft[iv.slot] = 1.0;
  return {fw, ft};
}

void tendency_features(const TripIndex& trips, const std::vector<OdPair>& ods, IntervalIndex t,
                       int64_t prediction_time, Matrix& x_out, Matrix& d_out) {
  const int n = static_cast<int>(ods.size());
  x_out = Matrix(n, 8);
  d_out = Matrix(n, 8);
  for (int j = 0; j < 8; ++j) {
    const IntervalIndex iv = shift_back(t, j);
    if (iv.day < 0) throw std::invalid_argument("insufficient history");
    for (int i = 0; i < n; ++i) {
      const auto obs = trips.observed(ods[i], iv, prediction_time);
      x_out.at(i, j) = obs.x;
      d_out.at(i, j) = obs.d;
    }
  }
}

int expected_feature_dim(IdMode mode, const Network& net, int n_ods, bool include_reliability) {
  return 8 + 8 + 5 + kSlotsPerDay + id_encoding_dim(mode, net, n_ods) +
         (include_reliability ? 12 : 0);
}

void Normalizer::apply(Matrix& m) const {
  for (int i = 0; i < m.rows; ++i) {
    double* row = m.row(i);
    for (int j = 0; j < m.cols; ++j) row[j] = (row[j] - mean[j]) / scale[j];
  }
}

Dataset assemble_dataset(const TripLog& trips, const TrainLog& trains,
                         const std::vector<OdPair>& ods, const Network& net,
                         const AssembleOptions& options) {
  Dataset ds;
  ds.n_ods = static_cast<int>(ods.size());
  ds.id_mode = options.id_mode;
  ds.include_reliability = options.include_reliability;
  ds.feature_dim = expected_feature_dim(options.id_mode, net, ds.n_ods,
                                        options.include_reliability);
  if (options.id_mode == IdMode::onehot_od && ds.n_ods > 1000 && options.warnings)
    options.warnings->push_back(
        "onehot_od node-ID features at " + std::to_string(ds.n_ods) +
        " ODs add " + std::to_string(ds.n_ods) + " columns; consider signed_station");

  // Column names, fixed block order.
  for (int j = 0; j < 8; ++j) ds.feature_names.push_back("x_lag" + std::to_string(j));
  for (int j = 0; j < 8; ++j) ds.feature_names.push_back("d_lag" + std::to_string(j));
  for (const char* d : {"mon", "tue", "wed", "thu", "fri"})
    ds.feature_names.push_back(std::string("dow_") + d);
  for (int s = 0; s < kSlotsPerDay; ++s) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "slot_%02d", s);
    ds.feature_names.push_back(buf);
  }
  const int id_dim = id_encoding_dim(options.id_mode, net, ds.n_ods);
  for (int j = 0; j < id_dim; ++j) ds.feature_names.push_back("id_" + std::to_string(j));
  if (options.include_reliability)
    for (const char* e : {"o", "d"})
      for (const char* m : {"count_mean", "count_max", "delay_mean", "delay_max", "cancel_mean",
                            "cancel_max"})
        ds.feature_names.push_back(std::string("rel_") + e + "_" + m);

  const TripIndex trip_index(trips, net.n_stations());
  const TrainIndex train_index(trains, net);
  const int n_days = std::max(trip_index.max_day(), train_index.max_day()) + 1;
  if (n_days < 1) throw std::invalid_argument("logs must cover at least one service day");

  // Static per-OD blocks.
  Matrix id_block(ds.n_ods, id_dim);
  for (int i = 0; i < ds.n_ods; ++i) {
    const auto enc = node_id_encoding(ods[i], net, options.id_mode, ds.n_ods);
    std::copy(enc.begin(), enc.end(), id_block.row(i));
  }

  // Sample boundaries with a full lookback.
  std::vector<IntervalIndex> boundaries;
  for (int day = 0; day < n_days; ++day)
    for (int slot = 0; slot < kSlotsPerDay; ++slot)
      if (shift_back({day, slot}, 8).day >= 0) boundaries.push_back({day, slot});

  ds.samples.resize(boundaries.size());
  const int n_threads = std::max(1, options.threads);
  auto build_range = [&](size_t from, size_t to) {
    Matrix x_lags, d_lags;
    for (size_t b = from; b < to; ++b) {
      const IntervalIndex target = boundaries[b];
      const int64_t t_pred = slot_start_epoch(target);
      SampleSet& sample = ds.samples[b];
      sample.interval = target;
      sample.prediction_time = t_pred;
      sample.features = Matrix(ds.n_ods, ds.feature_dim);
      sample.targets.resize(ds.n_ods);

      tendency_features(trip_index, ods, shift_back(target, 1), t_pred, x_lags, d_lags);
      const auto [fw, ft] = calendar_features(target);
      for (int i = 0; i < ds.n_ods; ++i) {
        double* row = sample.features.row(i);
        int pos = 0;
        for (int j = 0; j < 8; ++j) row[pos++] = x_lags.at(i, j);
        for (int j = 0; j < 8; ++j) row[pos++] = d_lags.at(i, j);
        for (double v : fw) row[pos++] = v;
        for (double v : ft) row[pos++] = v;
        const double* id_row = id_block.row(i);
        for (int j = 0; j < id_dim; ++j) row[pos++] = id_row[j];
        if (options.include_reliability) {
          const auto rel = reliability_features(train_index, ods[i], t_pred, net);
          for (double v : rel) row[pos++] = v;
        }
        sample.targets[i] = trip_index.od_departures(ods[i], target);
      }
    }
  };
  if (n_threads <= 1 || boundaries.size() < 2) {
    build_range(0, boundaries.size());
  } else {
    std::vector<std::thread> workers;
    const size_t chunk = (boundaries.size() + n_threads - 1) / n_threads;
    for (int w = 0; w < n_threads; ++w) {
      const size_t from = w * chunk;
      const size_t to = std::min(boundaries.size(), from + chunk);
      if (from >= to) break;
      workers.emplace_back(build_range, from, to);
    }
    for (auto& th : workers) th.join();
  }

  // Normalization statistics from the training days only.
  ds.normalizer.mean.assign(ds.feature_dim, 0.0);
  ds.normalizer.scale.assign(ds.feature_dim, 1.0);
  if (options.norm_days != nullptr) {
    std::vector<char> is_norm_day(n_days, 0);
    for (int d : *options.norm_days)
      if (d >= 0 && d < n_days) is_norm_day[d] = 1;
    std::vector<double> sum(ds.feature_dim, 0.0), sum_sq(ds.feature_dim, 0.0);
    int64_t n_rows = 0;
    for (const auto& sample : ds.samples) {
      if (!is_norm_day[sample.interval.day]) continue;
      for (int i = 0; i < ds.n_ods; ++i) {
        const double* row = sample.features.row(i);
        for (int j = 0; j < ds.feature_dim; ++j) {
          sum[j] += row[j];
          sum_sq[j] += row[j] * row[j];
        }
      }
      n_rows += ds.n_ods;
    }
    if (n_rows > 0) {
      for (int j = 0; j < ds.feature_dim; ++j) {
        const double mean = sum[j] / static_cast<double>(n_rows);
        const double var = std::max(0.0, sum_sq[j] / static_cast<double>(n_rows) - mean * mean);
        if (var > 1e-12) {
          ds.normalizer.mean[j] = mean;
          ds.normalizer.scale[j] = std::sqrt(var);
        }
      }
    }
    for (auto& sample : ds.samples) ds.normalizer.apply(sample.features);
  }
  return ds;
}

std::string dataset_features_csv(const Dataset& ds) {
  std::ostringstream out;
  out << "day,slot,od_index";
  for (const auto& name : ds.feature_names) out << ',' << name;
  out << '\n';
  for (const auto& sample : ds.samples) {
    const std::string date = iso_date(sample.interval.day);
    for (int i = 0; i < ds.n_ods; ++i) {
      out << date << ',' << sample.interval.slot << ',' << i;
      const double* row = sample.features.row(i);
      for (int j = 0; j < ds.feature_dim; ++j) out << ',' << fmt_g(row[j]);
      out << '\n';
    }
  }
  return out.str();
}

std::string dataset_targets_csv(const Dataset& ds) {
  std::ostringstream out;
  out << "day,slot,od_index,target\n";
  for (const auto& sample : ds.samples) {
    const std::string date = iso_date(sample.interval.day);
    for (int i = 0; i < ds.n_ods; ++i)
      out << date << ',' << sample.interval.slot << ',' << i << ',' << fmt_g(sample.targets[i])
          << '\n';
  }
  return out.str();
}

namespace {

constexpr char kDatasetMagic[8] = {'O', 'D', 'S', 'G', 'D', 'S', '0', '1'};

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

void write_string(std::ofstream& out, const std::string& s) {
  write_pod<int32_t>(out, static_cast<int32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::ifstream& in) {
  const auto n = read_pod<int32_t>(in);
  std::string s(static_cast<size_t>(n), '\0');
  in.read(s.data(), n);
  return s;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write dataset: " + path);
  out.write(kDatasetMagic, sizeof(kDatasetMagic));
  write_pod<int32_t>(out, ds.n_ods);
  write_pod<int32_t>(out, ds.feature_dim);
  write_pod<int32_t>(out, ds.id_mode == IdMode::onehot_od ? 0 : 1);
  write_pod<int32_t>(out, ds.include_reliability ? 1 : 0);
  write_pod<int32_t>(out, static_cast<int32_t>(ds.feature_names.size()));
  for (const auto& name : ds.feature_names) write_string(out, name);
  for (double v : ds.normalizer.mean) write_pod(out, v);
  for (double v : ds.normalizer.scale) write_pod(out, v);
  write_pod<int32_t>(out, static_cast<int32_t>(ds.samples.size()));
  for (const auto& s : ds.samples) {
    write_pod<int32_t>(out, s.interval.day);
    write_pod<int32_t>(out, s.interval.slot);
    write_pod<int64_t>(out, s.prediction_time);
    out.write(reinterpret_cast<const char*>(s.features.data.data()),
              static_cast<std::streamsize>(s.features.data.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(s.targets.data()),
              static_cast<std::streamsize>(s.targets.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("dataset write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kDatasetMagic, sizeof(magic)) != 0)
    throw std::runtime_error("not a dataset file: " + path);
  Dataset ds;
  ds.n_ods = read_pod<int32_t>(in);
  ds.feature_dim = read_pod<int32_t>(in);
  ds.id_mode = read_pod<int32_t>(in) == 0 ? IdMode::onehot_od : IdMode::signed_station;
  ds.include_reliability = read_pod<int32_t>(in) != 0;
  const auto n_names = read_pod<int32_t>(in);
  for (int32_t i = 0; i < n_names; ++i) ds.feature_names.push_back(read_string(in));
  ds.normalizer.mean.resize(ds.feature_dim);
  ds.normalizer.scale.resize(ds.feature_dim);
  for (auto& v : ds.normalizer.mean) v = read_pod<double>(in);
  for (auto& v : ds.normalizer.scale) v = read_pod<double>(in);
  const auto n_samples = read_pod<int32_t>(in);
  ds.samples.resize(n_samples);
  for (auto& s : ds.samples) {
    s.interval.day = read_pod<int32_t>(in);
    s.interval.slot = read_pod<int32_t>(in);
    s.prediction_time = read_pod<int64_t>(in);
    s.features = Matrix(ds.n_ods, ds.feature_dim);
    in.read(reinterpret_cast<char*>(s.features.data.data()),
            static_cast<std::streamsize>(s.features.data.size() * sizeof(double)));
    s.targets.resize(ds.n_ods);
    in.read(reinterpret_cast<char*>(s.targets.data()),
            static_cast<std::streamsize>(s.targets.size() * sizeof(double)));
  }
  if (!in) throw std::runtime_error("dataset truncated: " + path);
  return ds;
}

}  // namespace odsage
