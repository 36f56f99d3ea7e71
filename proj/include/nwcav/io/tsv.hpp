#pragma once

#include <string>
#include <vector>

namespace nwcav::io {

// Tab-separated numeric table with '#' comment lines up front. The last
// comment line before the data is the column header.
struct Table {
    std::vector<std::string> comments;      // without the leading "# "
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;  // each row has columns.size() entries

    int column_index(const std::string& name) const;  // -1 when absent
    std::vector<double> column(const std::string& name) const;
};

// Values are written with enough digits to round-trip a double exactly.
void write_table(const std::string& path, const Table& t);
Table read_table(const std::string& path);

std::string format_double(double v);

} // namespace nwcav::io
