#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace engage::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const; // -1 if absent
    int require_column(const std::string& name) const; // throws if absent
};

// Reads a comma-separated file with a header row. Fields are plain tokens
// (no quoting; none of the pipeline formats carry free text).
Table read_file(const std::filesystem::path& path);

void write_file(const std::filesystem::path& path, const Table& table);

std::string format_double(double v); // shortest round-trip representation

} // namespace engage::csv
