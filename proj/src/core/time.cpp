#include "glseg/core/time.hpp"

#include <cstdio>

#include "glseg/core/error.hpp"

namespace glseg {

// Howard Hinnant's civil-days algorithm.
std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

namespace {

void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
  y = static_cast<int>(yy + (m <= 2));
}

bool parse_int(const std::string& s, std::size_t begin, std::size_t len, int& out) {
  if (begin + len > s.size()) return false;
  int v = 0;
  for (std::size_t i = begin; i < begin + len; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
    v = v * 10 + (s[i] - '0');
  }
  out = v;
  return true;
}

}  // namespace

std::int64_t to_minutes(const CivilTime& t) {
  return days_from_civil(t.year, t.month, t.day) * 1440 + t.hour * 60 + t.minute;
}

CivilTime from_minutes(std::int64_t minutes) {
  std::int64_t days = minutes / 1440;
  std::int64_t rem = minutes % 1440;
  if (rem < 0) {
    rem += 1440;
    days -= 1;
  }
  CivilTime t;
  civil_from_days(days, t.year, t.month, t.day);
  t.hour = static_cast<int>(rem / 60);
  t.minute = static_cast<int>(rem % 60);
  return t;
}

int day_of_week(std::int64_t minutes) {
  std::int64_t days = minutes / 1440;
  if (minutes % 1440 < 0) days -= 1;
  // 1970-01-01 was a Thursday (=3 with Monday=0).
  return static_cast<int>(((days % 7) + 7 + 3) % 7);
}

std::int64_t parse_timestamp(const std::string& text) {
  // YYYY-MM-DD[T ]HH:MM[:SS]
  CivilTime t;
  int sec = 0;
  const bool ok =
      text.size() >= 16 && parse_int(text, 0, 4, t.year) && text[4] == '-' &&
      parse_int(text, 5, 2, t.month) && text[7] == '-' &&
      parse_int(text, 8, 2, t.day) && (text[10] == 'T' || text[10] == ' ') &&
      parse_int(text, 11, 2, t.hour) && text[13] == ':' &&
      parse_int(text, 14, 2, t.minute) &&
      (text.size() == 16 ||
       (text.size() == 19 && text[16] == ':' && parse_int(text, 17, 2, sec)));
  if (!ok || t.month < 1 || t.month > 12 || t.day < 1 || t.day > 31 ||
      t.hour > 23 || t.minute > 59) {
    fail(ErrorCode::validation, "bad timestamp (expected ISO-8601 minute): " + text);
  }
  return to_minutes(t);
}

std::int64_t parse_date(const std::string& text) {
  int y, m, d;
  const bool ok = text.size() == 10 && parse_int(text, 0, 4, y) &&
                  text[4] == '-' && parse_int(text, 5, 2, m) && text[7] == '-' &&
                  parse_int(text, 8, 2, d);
  if (!ok || m < 1 || m > 12 || d < 1 || d > 31) {
    fail(ErrorCode::validation, "bad date (expected YYYY-MM-DD): " + text);
  }
  return days_from_civil(y, m, d);
}

std::string format_timestamp(std::int64_t minutes) {
  const CivilTime t = from_minutes(minutes);
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d", t.year, t.month,
                t.day, t.hour, t.minute);
  return buf;
}

std::string format_date(std::int64_t days) {
  int y, m, d;
  civil_from_days(days, y, m, d);
  char buf[12];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", y, m, d);
  return buf;
}

}  // namespace glseg
