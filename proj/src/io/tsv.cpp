#include "nwcav/io/tsv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace nwcav::io {

int Table::column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == name) return int(i);
    return -1;
}

std::vector<double> Table::column(const std::string& name) const {
    int idx = column_index(name);
    if (idx < 0) throw std::runtime_error("table has no column '" + name + "'");
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r[std::size_t(idx)]);
    return out;
}

std::string format_double(double v) {
    char buf[40];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) throw std::runtime_error("format_double failed");
    return std::string(buf, p);
}

void write_table(const std::string& path, const Table& t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& c : t.comments) out << "# " << c << "\n";
    out << "#";
    for (std::size_t i = 0; i < t.columns.size(); ++i)
        out << (i ? "\t" : " ") << t.columns[i];
    out << "\n";
    for (const auto& r : t.rows) {
        if (r.size() != t.columns.size())
            throw std::runtime_error("row width mismatch writing " + path);
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (i) out << '\t';
            out << format_double(r[i]);
        }
        out << "\n";
    }
    if (!out) throw std::runtime_error("short write to " + path);
}

Table read_table(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    Table t;
    std::string line;
    std::string last_comment;
    bool in_data = false;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (in_data)
                throw std::runtime_error(path + ": comment after data at line " +
                                         std::to_string(lineno));
            std::string body = line.substr(1);
            if (!body.empty() && body[0] == ' ') body.erase(0, 1);
            if (!last_comment.empty()) t.comments.push_back(last_comment);
            last_comment = body;
            continue;
        }
        if (!in_data) {
            // The final comment line names the columns.
            std::istringstream hs(last_comment);
            std::string col;
            while (hs >> col) t.columns.push_back(col);
            if (t.columns.empty())
                throw std::runtime_error(path + ": missing column header");
            in_data = true;
        }
        std::vector<double> row;
        row.reserve(t.columns.size());
        const char* p = line.data();
        const char* end = p + line.size();
        while (p < end) {
            while (p < end && (*p == '\t' || *p == ' ')) ++p;
            if (p >= end) break;
            double v;
            auto [np, ec] = std::from_chars(p, end, v);
            if (ec != std::errc{})
                throw std::runtime_error(path + ": bad number at line " +
                                         std::to_string(lineno));
            row.push_back(v);
            p = np;
        }
        if (row.size() != t.columns.size())
            throw std::runtime_error(path + ": expected " + std::to_string(t.columns.size()) +
                                     " values at line " + std::to_string(lineno));
        t.rows.push_back(std::move(row));
    }
    if (!in_data) throw std::runtime_error(path + ": no data rows");
    return t;
}

} // namespace nwcav::io
