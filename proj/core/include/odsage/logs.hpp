#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace odsage {

// One tap-in / tap-out record. Timestamps are epoch seconds.
struct TripEvent {
  int origin = 0;
  int destination = 0;
  int64_t tap_in = 0;
  int64_t tap_out = 0;

  friend bool operator==(const TripEvent& a, const TripEvent& b) {
    return a.origin == b.origin && a.destination == b.destination && a.tap_in == b.tap_in &&
           a.tap_out == b.tap_out;
  }
};

// One train passing (or being cancelled at) a station. Cancelled events
// carry delay 0.
struct TrainEvent {
  int station = 0;
  int line = 0;
  int direction = 0;  // 0 = forward along the line sequence, 1 = reverse
  int64_t scheduled = 0;
  int delay_s = 0;
  bool cancelled = false;

  friend bool operator==(const TrainEvent& a, const TrainEvent& b) {
    return a.station == b.station && a.line == b.line && a.direction == b.direction &&
           a.scheduled == b.scheduled && a.delay_s == b.delay_s && a.cancelled == b.cancelled;
  }
};

using TripLog = std::vector<TripEvent>;
using TrainLog = std::vector<TrainEvent>;

// trips.csv: origin,destination,tap_in,tap_out (ISO-8601 timestamps)
std::string trips_to_csv(const TripLog& log);
TripLog trips_from_csv(const std::string& path);

// trains.csv: station,line,direction,scheduled,delay_s,cancelled
std::string trains_to_csv(const TrainLog& log);
TrainLog trains_from_csv(const std::string& path);

}  // namespace odsage
