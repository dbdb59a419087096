#include "stratkit/csv.hpp"

#include <fstream>
#include <sstream>

#include "stratkit/error.hpp"

namespace stratkit::csv {

namespace {

bool is_blank_row(const Row& row) { return row.size() == 1 && row[0].empty(); }

}  // namespace

Table parse(std::string_view text) {
    Table table;
    std::size_t pos = 0;

    // Leading comment lines.
    while (pos < text.size() && text[pos] == '#') {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string_view line = text.substr(pos + 1, eol - pos - 1);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        table.comments.emplace_back(line);
        pos = eol + 1;
    }

    std::vector<Row> rows;
    Row row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    bool row_started = false;

    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        if (!is_blank_row(row)) rows.push_back(std::move(row));
        row.clear();
        row_started = false;
    };

    for (; pos < text.size(); ++pos) {
        const char c = text[pos];
        if (in_quotes) {
            if (c == '"') {
                if (pos + 1 < text.size() && text[pos + 1] == '"') {
                    field.push_back('"');
                    ++pos;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        row_started = true;
        switch (c) {
            case '"':
                if (field_started && !field.empty()) {
                    throw Error(Errc::IoFailure, "stray quote inside unquoted CSV field");
                }
                in_quotes = true;
                field_started = true;
                break;
            case ',':
                end_field();
                break;
            case '\r':
                if (pos + 1 < text.size() && text[pos + 1] == '\n') ++pos;
                end_row();
                break;
            case '\n':
                end_row();
                break;
            default:
                field.push_back(c);
                field_started = true;
        }
    }
    if (in_quotes) throw Error(Errc::IoFailure, "unterminated quoted CSV field");
    if (row_started || !field.empty() || !row.empty()) end_row();

    if (!rows.empty()) {
        table.header = std::move(rows.front());
        table.rows.assign(std::make_move_iterator(rows.begin() + 1),
                          std::make_move_iterator(rows.end()));
    }
    return table;
}

Table read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string(), path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

std::string escape_field(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string format_row(const Row& row) {
    std::string out;
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out.push_back(',');
        out += escape_field(row[i]);
    }
    out.push_back('\n');
    return out;
}

}  // namespace stratkit::csv
