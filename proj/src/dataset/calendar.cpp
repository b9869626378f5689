#include "glseg/dataset/calendar.hpp"

#include <fstream>
#include <sstream>

#include "glseg/core/error.hpp"
#include "glseg/core/keyval.hpp"
#include "glseg/core/time.hpp"

namespace glseg {

const char* AcademicCalendar::kind_name(Kind k) {
  switch (k) {
    case brk: return "break";
    case midterm: return "midterm";
    case final: return "final";
    case holiday: return "holiday";
    default: return "?";
  }
}

void AcademicCalendar::add(Kind kind, std::int64_t first_day, std::int64_t last_day) {
  if (last_day < first_day) {
    fail(ErrorCode::validation, std::string("calendar range ends before it starts: ") +
                                    kind_name(kind));
  }
  for (const Range& r : ranges_[kind]) {
    if (first_day <= r.last_day && r.first_day <= last_day) {
      fail(ErrorCode::validation,
           std::string("overlapping calendar ranges of kind '") + kind_name(kind) +
               "': " + format_date(r.first_day) + ".." + format_date(r.last_day) +
               " and " + format_date(first_day) + ".." + format_date(last_day));
    }
  }
  ranges_[kind].push_back({first_day, last_day});
}

bool AcademicCalendar::contains(Kind kind, std::int64_t day) const {
  for (const Range& r : ranges_[kind]) {
    if (day >= r.first_day && day <= r.last_day) return true;
  }
  return false;
}

AcademicCalendar AcademicCalendar::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open calendar file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_string(ss.str());
}

// Lines look like:  break=2017-09-30..2017-10-08
AcademicCalendar AcademicCalendar::from_string(const std::string& text) {
  AcademicCalendar cal;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::config, "calendar line is not kind=range: " + line);
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    Kind kind;
    if (key == "break") kind = brk;
    else if (key == "midterm") kind = midterm;
    else if (key == "final") kind = final;
    else if (key == "holiday") kind = holiday;
    else fail(ErrorCode::config, "unknown calendar kind: " + key);
    const std::size_t dots = value.find("..");
    if (dots == std::string::npos) {
      fail(ErrorCode::config, "calendar range needs 'start..end': " + value);
    }
    cal.add(kind, parse_date(trim(value.substr(0, dots))),
            parse_date(trim(value.substr(dots + 2))));
  }
  return cal;
}

}  // namespace glseg
