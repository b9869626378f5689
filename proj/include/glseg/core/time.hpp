#pragma once

#include <cstdint>
#include <string>

namespace glseg {

// Minute-resolution local timestamps. Stored as minutes since 1970-01-01
// 00:00 in the (single, fixed) local zone; no DST or zone arithmetic.
struct CivilTime {
  int year = 1970;
  int month = 1;  // 1..12
  int day = 1;    // 1..31
  int hour = 0;
  int minute = 0;
};

std::int64_t days_from_civil(int year, int month, int day);
std::int64_t to_minutes(const CivilTime& t);
CivilTime from_minutes(std::int64_t minutes);

// 0 = Monday ... 6 = Sunday.
int day_of_week(std::int64_t minutes);

// Accepts "YYYY-MM-DDTHH:MM[:SS]" or with a space separator; seconds are
// truncated to minute resolution. Throws Error(validation) on bad input.
std::int64_t parse_timestamp(const std::string& text);

// "YYYY-MM-DD" -> days since epoch.
std::int64_t parse_date(const std::string& text);

std::string format_timestamp(std::int64_t minutes);
std::string format_date(std::int64_t days);

}  // namespace glseg
