#pragma once

#include <cstdint>
#include <string>

namespace odsage {

// Service timetable constants: weekday-only operation, 05:00-12:00,
// divided into 20-minute intervals.
inline constexpr int kSlotsPerDay = 21;
inline constexpr int kSlotSeconds = 20 * 60;
inline constexpr int kServiceStartHour = 5;
inline constexpr int64_t kSecondsPerDay = 86400;

// One 20-minute interval of one service day. `day` is a dense weekday
// index (0, 1, 2, ... skipping weekends); `slot` counts from 05:00.
struct IntervalIndex {
  int day = 0;
  int slot = 0;

  friend bool operator==(const IntervalIndex& a, const IntervalIndex& b) {
    return a.day == b.day && a.slot == b.slot;
  }
};

// Days since 1970-01-01 for a civil date (proleptic Gregorian).
int64_t days_from_civil(int year, int month, int day);
void civil_from_days(int64_t days, int& year, int& month, int& day);

// The calendar starts on a fixed Monday so that weekday(day) == day % 5.
int64_t base_epoch_days();

// Civil days since epoch for weekday index `day` (weekend gaps skipped).
int64_t day_epoch_days(int day);
int weekday_of(int day);  // 0 = Monday .. 4 = Friday

int64_t day_midnight_epoch(int day);
int64_t slot_start_epoch(int day, int slot);
int64_t slot_end_epoch(int day, int slot);
int64_t slot_start_epoch(IntervalIndex iv);
int64_t slot_end_epoch(IntervalIndex iv);
int64_t service_start_epoch(int day);
int64_t service_end_epoch(int day);

// Inverse mappings for timestamps that fall inside a service day.
int day_of_epoch(int64_t t);
int slot_of_epoch(int64_t t);  // -1 when outside the service window

// Steps an interval back by `k` slots, borrowing the previous service
// day's final slots across the 12:00 -> 05:00 boundary. The result may
// have day < 0 when the history does not exist.
IntervalIndex shift_back(IntervalIndex iv, int k);

std::string iso_date(int day);
std::string iso_datetime(int64_t epoch_s);
int64_t parse_iso_datetime(const std::string& text);
int parse_iso_date_to_day(const std::string& text);

}  // namespace odsage
