#pragma once

#include <string>
#include <vector>

namespace crx::csv {

// Minimal CSV support for the toolkit's numeric file formats. Fields never
// contain commas or quotes, so no quoting layer is needed.

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

Table read_file(const std::string& path);

void write_file(const std::string& path, const std::vector<std::string>& header,
                const std::vector<std::vector<std::string>>& rows);

std::vector<std::string> split_line(const std::string& line);

// Strict full-token parse; throws CRX_E_PARSE with context on failure.
double parse_double(const std::string& token, const std::string& context);

// Shortest exact round-trip formatting for doubles (17 significant digits).
std::string format_double(double v);

// Compact formatting for bulk signal samples (9 significant digits).
std::string format_sample(double v);

}  // namespace crx::csv
