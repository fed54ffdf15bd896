#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace odsage {

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
bool file_exists(const std::string& path);
void ensure_directory(const std::string& path);

// Splits one CSV line on commas. Fields in this project never contain
// commas or quotes, so no escaping is handled.
std::vector<std::string> split_csv_line(const std::string& line);

// Iterates the non-empty lines of a CSV file, skipping the header row.
std::vector<std::vector<std::string>> read_csv_rows(const std::string& path);

// Fixed-width numeric formatting used for all CSV output, so repeated
// runs are byte-identical.
std::string fmt_g(double v);   // %.9g
std::string fmt_f6(double v);  // %.6f
std::string fmt_e6(double v);  // %.6e

uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 1469598103934665603ull);
uint64_t fnv1a64(const std::string& s);
uint64_t hash_file(const std::string& path);

}  // namespace odsage
