#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

// Minimal RFC 4180 reader/writer. Quoted fields may contain commas, quotes
// ("" escape) and line breaks. Lines starting with '#' before the header are
// treated as comments so exported files can carry a provenance line.
namespace stratkit::csv {

using Row = std::vector<std::string>;

struct Table {
    Row header;
    std::vector<Row> rows;
    std::vector<std::string> comments;  // leading '#' lines, without the '#'
};

Table parse(std::string_view text);
Table read_file(const std::filesystem::path& path);

std::string escape_field(std::string_view field);
std::string format_row(const Row& row);

}  // namespace stratkit::csv
