#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "odsage/calendar.hpp"
#include "odsage/logs.hpp"
#include "odsage/matrix.hpp"
#include "odsage/network.hpp"

namespace odsage {

// Demand for one OD and interval as seen from a prediction time:
// d  trips that departed in the interval and already tapped out,
// p  departures from the origin station (any destination) still traveling,
// x  their sum.
struct ObservedDemand {
  int x = 0;
  int d = 0;
  int p = 0;
};

// Direct-scan definition over the raw log. prediction_time must not
// precede the interval end.
ObservedDemand observed_demand(const TripLog& trips, const OdPair& od, IntervalIndex iv,
                               int64_t prediction_time);

// Hindsight demand: all departures on the OD in the interval, regardless
// of completion time.
int target_demand(const TripLog& trips, const OdPair& od, IntervalIndex iv);

// Indexed view of a trip log for repeated windowed queries; results match
// the direct-scan functions above.
class TripIndex {
 public:
  TripIndex(const TripLog& trips, int n_stations);

  int completed(const OdPair& od, IntervalIndex iv, int64_t prediction_time) const;
  int station_unfinished(int station, IntervalIndex iv, int64_t prediction_time) const;
  int od_departures(const OdPair& od, IntervalIndex iv) const;
  ObservedDemand observed(const OdPair& od, IntervalIndex iv, int64_t prediction_time) const;

  int max_day() const { return max_day_; }

 private:
  struct Block {
    std::vector<int64_t> tap_in;   // sorted
    std::vector<int64_t> tap_out;  // aligned with tap_in
  };
  int n_stations_;
  int max_day_ = -1;
  std::vector<Block> od_blocks_;       // origin * S + destination
  std::vector<Block> station_blocks_;  // by origin station
};

// Per-(station, line, direction) train-event index with O(log n) one-hour
// window statistics.
class TrainIndex {
 public:
  TrainIndex(const TrainLog& trains, const Network& net);

  struct WindowStats {
    int total = 0;      // scheduled events in the window
    int served = 0;     // non-cancelled
    double delay_sum = 0.0;  // over served events
    int cancelled = 0;

    double mean_delay() const { return served > 0 ? delay_sum / served : 0.0; }
    double cancel_proportion() const {
      return total > 0 ? static_cast<double>(cancelled) / total : 0.0;
    }
  };

  // Window (t - 1h, t] at one (station, line, direction).
  WindowStats window(int station, int line, int direction, int64_t t) const;
  int max_day() const { return max_day_; }

 private:
  struct Group {
    std::vector<int64_t> scheduled;  // sorted
    std::vector<int> served_prefix;
    std::vector<double> delay_prefix;
    std::vector<int> cancelled_prefix;
  };
  int n_lines_;
  int max_day_ = -1;
  std::vector<Group> groups_;  // station * 2L + line * 2 + dir
};

// Twelve per-OD reliability values over the hour before prediction_time:
// per relevant (line, direction) the served-train count, mean delay of
// served trains and cancelled proportion, then mean and max across lines,
// at the origin and at the destination. Order:
//   [o:count-mean, o:count-max, o:delay-mean, o:delay-max,
//    o:cancel-mean, o:cancel-max, d: same six]
std::array<double, 12> reliability_features(const TrainIndex& trains, const OdPair& od,
                                            int64_t prediction_time, const Network& net);

// f_w (Monday..Friday) and f_t (slot of day) one-hot encodings.
std::pair<std::array<double, 5>, std::array<double, kSlotsPerDay>> calendar_features(
    IntervalIndex iv);

// Stacked x / d values for intervals t, t-1, ..., t-7 evaluated at
// prediction_time (column 0 is interval t). Caller guarantees the
// lookback exists (shift_back(t, 7).day >= 0).
void tendency_features(const TripIndex& trips, const std::vector<OdPair>& ods, IntervalIndex t,
                       int64_t prediction_time, Matrix& x_out, Matrix& d_out);

// ----- dataset assembly -----------------------------------------------------

// Feature matrix and targets for one prediction boundary. `interval` is
// the predicted interval (t+1); prediction_time is its start.
struct SampleSet {
  Matrix features;  // n_ods x F
  std::vector<double> targets;
  IntervalIndex interval;
  int64_t prediction_time = 0;
};

// Per-column z-scoring fit on the training split; constant columns are
// left untouched.
struct Normalizer {
  std::vector<double> mean;
  std::vector<double> scale;
  void apply(Matrix& m) const;
};

struct AssembleOptions {
  IdMode id_mode = IdMode::signed_station;
  bool include_reliability = true;
  // Days whose samples define the normalization statistics; when null the
  // features are left raw.
  const std::vector<int>* norm_days = nullptr;
  std::vector<std::string>* warnings = nullptr;
  int threads = 1;
};

struct Dataset {
  std::vector<SampleSet> samples;
  Normalizer normalizer;
  std::vector<std::string> feature_names;
  int n_ods = 0;
  int feature_dim = 0;
  IdMode id_mode = IdMode::signed_station;
  bool include_reliability = true;
};

// One SampleSet per interval with a full 8-interval lookback, features in
// block order [X(8) | D(8) | f_w(5) | f_t(21) | f_id | f_s(12)].
Dataset assemble_dataset(const TripLog& trips, const TrainLog& trains,
                         const std::vector<OdPair>& ods, const Network& net,
                         const AssembleOptions& options);

int expected_feature_dim(IdMode mode, const Network& net, int n_ods, bool include_reliability);

// Optional CSV dumps. features.csv carries day,slot,od_index plus one
// named column per feature; targets.csv is keyed the same way.
std::string dataset_features_csv(const Dataset& ds);
std::string dataset_targets_csv(const Dataset& ds);

void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace odsage
