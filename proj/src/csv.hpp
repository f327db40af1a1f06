#pragma once

// Minimal numeric CSV helpers shared by the trace readers and writers.

#include "kvmem/errors.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace kvmem::detail {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;
};

inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_row(const std::string& line)
{
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    return cells;
}

inline CsvTable read_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) throw IoError("'" + path + "' is empty");
    table.header = split_row(line);
    table.columns.resize(table.header.size());
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        auto cells = split_row(line);
        if (cells.size() != table.header.size())
            throw IoError(path + ":" + std::to_string(row) + ": expected " +
                          std::to_string(table.header.size()) + " columns");
        for (std::size_t c = 0; c < cells.size(); ++c) {
            std::size_t used = 0;
            double value = 0.0;
            try {
                value = std::stod(cells[c], &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != cells[c].size())
                throw IoError(path + ":" + std::to_string(row) + ": '" + cells[c] + "' is not a number");
            table.columns[c].push_back(value);
        }
    }
    return table;
}

inline std::string format_double(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<const std::vector<double>*>& columns)
{
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
    out << '\n';
    const std::size_t rows = columns.empty() ? 0 : columns.front()->size();
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < columns.size(); ++c)
            out << (c ? "," : "") << format_double((*columns[c])[r]);
        out << '\n';
    }
    if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace kvmem::detail
