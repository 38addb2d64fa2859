#pragma once

#include <string>
#include <vector>

namespace chainflow {

// Shortest round-trip-exact decimal form of a double (std::to_chars).
std::string format_double(double v);
double parse_double(const std::string& s);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    int column(const std::string& name) const;  // -1 if absent
};

void write_csv(const std::string& path, const CsvTable& table);
CsvTable read_csv(const std::string& path);

}  // namespace chainflow
