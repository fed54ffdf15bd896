#include "odsage/calendar.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

namespace odsage {

int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<int64_t>(doe) - 719468;
}

void civil_from_days(int64_t z, int& year, int& month, int& day) {
  z += 719468;
  const int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const int64_t y = static_cast<int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  day = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  month = static_cast<int>(mp + (mp < 10 ? 3 : -9));
  year = static_cast<int>(y + (month <= 2));
}

int64_t base_epoch_days() {
  // 2021-02-01, a Monday.
  static const int64_t kBase = days_from_civil(2021, 2, 1);
  return kBase;
}

int64_t day_epoch_days(int day) {
  return base_epoch_days() + 7 * (day / 5) + (day % 5);
}

int weekday_of(int day) { return day % 5; }

int64_t day_midnight_epoch(int day) { return day_epoch_days(day) * kSecondsPerDay; }

int64_t slot_start_epoch(int day, int slot) {
  return day_midnight_epoch(day) + kServiceStartHour * 3600 +
         static_cast<int64_t>(slot) * kSlotSeconds;
}

int64_t slot_end_epoch(int day, int slot) { return slot_start_epoch(day, slot) + kSlotSeconds; }

int64_t slot_start_epoch(IntervalIndex iv) { return slot_start_epoch(iv.day, iv.slot); }
int64_t slot_end_epoch(IntervalIndex iv) { return slot_end_epoch(iv.day, iv.slot); }

int64_t service_start_epoch(int day) { return slot_start_epoch(day, 0); }
int64_t service_end_epoch(int day) { return slot_end_epoch(day, kSlotsPerDay - 1); }

int day_of_epoch(int64_t t) {
  const int64_t days = t / kSecondsPerDay - base_epoch_days();
  const int64_t weeks = days / 7;
  int64_t rem = days % 7;
  if (rem > 4) rem = 4;  // weekend timestamps clamp to Friday
  return static_cast<int>(weeks * 5 + rem);
}

int slot_of_epoch(int64_t t) {
  const int64_t since_start = t - service_start_epoch(day_of_epoch(t));
  if (since_start < 0) return -1;
  const int64_t slot = since_start / kSlotSeconds;
  return slot < kSlotsPerDay ? static_cast<int>(slot) : -1;
}

IntervalIndex shift_back(IntervalIndex iv, int k) {
  int pos = iv.day * kSlotsPerDay + iv.slot - k;
  int day = pos >= 0 ? pos / kSlotsPerDay : (pos - kSlotsPerDay + 1) / kSlotsPerDay;
  return IntervalIndex{day, pos - day * kSlotsPerDay};
}

std::string iso_date(int day) {
  int y, m, d;
  civil_from_days(day_epoch_days(day), y, m, d);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", y, m, d);
  return buf;
}

std::string iso_datetime(int64_t epoch_s) {
  int64_t days = epoch_s / kSecondsPerDay;
  int64_t sec = epoch_s % kSecondsPerDay;
  if (sec < 0) {
    sec += kSecondsPerDay;
    --days;
  }
  int y, m, d;
  civil_from_days(days, y, m, d);
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d", y, m, d,
                static_cast<int>(sec / 3600), static_cast<int>((sec / 60) % 60),
                static_cast<int>(sec % 60));
  return buf;
}

int64_t parse_iso_datetime(const std::string& text) {
  int y, mo, d, h, mi, s;
  if (std::sscanf(text.c_str(), "%d-%d-%dT%d:%d:%d", &y, &mo, &d, &h, &mi, &s) != 6)
    throw std::invalid_argument("bad ISO-8601 datetime: " + text);
  return days_from_civil(y, mo, d) * kSecondsPerDay + h * 3600 + mi * 60 + s;
}

int parse_iso_date_to_day(const std::string& text) {
  int y, mo, d;
  if (std::sscanf(text.c_str(), "%d-%d-%d", &y, &mo, &d) != 3)
    throw std::invalid_argument("bad ISO date: " + text);
  const int64_t days = days_from_civil(y, mo, d) - base_epoch_days();
  return static_cast<int>((days / 7) * 5 + std::min<int64_t>(days % 7, 4));
}

}  // namespace odsage
