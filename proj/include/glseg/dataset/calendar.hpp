#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace glseg {

// Academic-calendar ranges used for the schedule dummy features. Ranges are
// whole days, inclusive on both ends.
class AcademicCalendar {
 public:
  enum Kind { brk = 0, midterm = 1, final = 2, holiday = 3, kind_count = 4 };

  struct Range {
    std::int64_t first_day;
    std::int64_t last_day;
  };

  static AcademicCalendar from_file(const std::string& path);
  static AcademicCalendar from_string(const std::string& text);

  // Throws Error(validation) if ranges of the same kind overlap.
  void add(Kind kind, std::int64_t first_day, std::int64_t last_day);

  bool contains(Kind kind, std::int64_t day) const;

  static const char* kind_name(Kind k);

 private:
  std::array<std::vector<Range>, kind_count> ranges_;
};

}  // namespace glseg
