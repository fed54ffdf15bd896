#include "odsage/logs.hpp"

#include <sstream>

#include "odsage/calendar.hpp"
#include "odsage/io.hpp"

namespace odsage {

std::string trips_to_csv(const TripLog& log) {
  std::ostringstream out;
  out << "origin,destination,tap_in,tap_out\n";
  for (const auto& t : log) {
    out << t.origin << ',' << t.destination << ',' << iso_datetime(t.tap_in) << ','
        << iso_datetime(t.tap_out) << '\n';
  }
  return out.str();
}

TripLog trips_from_csv(const std::string& path) {
  TripLog log;
  for (const auto& row : read_csv_rows(path)) {
    TripEvent t;
    t.origin = std::stoi(row.at(0));
    t.destination = std::stoi(row.at(1));
    t.tap_in = parse_iso_datetime(row.at(2));
    t.tap_out = parse_iso_datetime(row.at(3));
    log.push_back(t);
  }
  return log;
}

std::string trains_to_csv(const TrainLog& log) {
  std::ostringstream out;
  out << "station,line,direction,scheduled,delay_s,cancelled\n";
  for (const auto& t : log) {
    out << t.station << ',' << t.line << ',' << t.direction << ',' << iso_datetime(t.scheduled)
        << ',' << t.delay_s << ',' << (t.cancelled ? 1 : 0) << '\n';
  }
  return out.str();
}

TrainLog trains_from_csv(const std::string& path) {
  TrainLog log;
  for (const auto& row : read_csv_rows(path)) {
    TrainEvent t;
    t.station = std::stoi(row.at(0));
    t.line = std::stoi(row.at(1));
    t.direction = std::stoi(row.at(2));
    t.scheduled = parse_iso_datetime(row.at(3));
    t.delay_s = std::stoi(row.at(4));
    t.cancelled = row.at(5) == "1";
    log.push_back(t);
  }
  return log;
}

}  // namespace odsage
