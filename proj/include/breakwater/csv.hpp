#pragma once

#include <string>
#include <vector>

namespace breakwater {

// Shortest round-trip decimal rendering (std::to_chars). Used for every
// number we serialize so that equal seeds produce byte-identical files.
std::string format_double(double v);
std::string format_float(float v);

double parse_double(const std::string& s);

// Minimal CSV: no quoting, fields must not contain commas or newlines.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::string csv_join(const std::vector<std::string>& fields);

// Skips blank lines and '#' comment lines; first remaining line is the header.
CsvTable read_csv(const std::string& path);

std::vector<std::string> split(const std::string& s, char sep);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace breakwater
