#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace glseg {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 if absent
};

// Reads a comma-separated file with a mandatory header row. Handles quoted
// fields with embedded commas/quotes and CRLF line endings.
CsvTable read_csv(const std::string& path);

std::string csv_escape(const std::string& field);
void write_csv_row(std::ostream& os, const std::vector<std::string>& fields);

// Fixed-format float used in every CSV we emit, so identical runs produce
// identical bytes.
std::string format_double(double v);

}  // namespace glseg
