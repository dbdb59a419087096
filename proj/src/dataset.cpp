#include "stratkit/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>

#include "stratkit/csv.hpp"
#include "stratkit/error.hpp"

namespace stratkit {

std::string_view to_string(VariableKind kind) noexcept {
    switch (kind) {
        case VariableKind::Numeric: return "numeric";
        case VariableKind::Categorical: return "categorical";
        case VariableKind::Text: return "text";
    }
    return "unknown";
}

VariableKind parse_variable_kind(std::string_view text) {
    if (text == "numeric") return VariableKind::Numeric;
    if (text == "categorical") return VariableKind::Categorical;
    if (text == "text") return VariableKind::Text;
    throw Error(Errc::InvalidSchema, fmt::format("unknown variable kind '{}'", text),
                std::string(text));
}

CovariateSchema::CovariateSchema(std::vector<Variable> variables)
    : variables_(std::move(variables)) {
    std::unordered_set<std::string> seen;
    for (const auto& v : variables_) {
        if (v.name.empty()) throw Error(Errc::InvalidSchema, "variable with empty name");
        if (!seen.insert(v.name).second) {
            throw Error(Errc::InvalidSchema, "duplicate variable '" + v.name + "'", v.name);
        }
    }
}

std::optional<std::size_t> CovariateSchema::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < variables_.size(); ++i) {
        if (variables_[i].name == name) return i;
    }
    return std::nullopt;
}

const Variable& CovariateSchema::at(std::string_view name) const {
    auto idx = index_of(name);
    if (!idx) {
        throw Error(Errc::InvalidSchema, fmt::format("no variable named '{}'", name),
                    std::string(name));
    }
    return variables_[*idx];
}

const Value& UnitRecord::value(const CovariateSchema& schema, std::string_view name) const {
    auto idx = schema.index_of(name);
    if (!idx || *idx >= values.size()) {
        throw Error(Errc::InvalidSchema, fmt::format("no value for '{}'", name),
                    std::string(name));
    }
    return values[*idx];
}

bool Dataset::has_outcomes() const noexcept {
    return !units.empty() && std::all_of(units.begin(), units.end(), [](const UnitRecord& u) {
        return u.observed_outcome.has_value();
    });
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

std::optional<double> parse_decimal(std::string_view raw) {
    std::string_view s = trim(raw);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(value)) {
        return std::nullopt;
    }
    return value;
}

std::string padded_row_id(std::size_t index, std::size_t count) {
    std::size_t width = std::to_string(count > 0 ? count - 1 : 0).size();
    return fmt::format("{:0{}}", index, width);
}

}  // namespace

Dataset parse_dataset(std::string_view csv_text, const CovariateSchema& schema,
                      const LoadOptions& options) {
    const csv::Table table = csv::parse(csv_text);

    std::unordered_map<std::string, std::size_t> column;
    for (std::size_t c = 0; c < table.header.size(); ++c) column.emplace(table.header[c], c);

    std::vector<std::size_t> var_column;
    var_column.reserve(schema.size());
    for (const auto& v : schema.variables()) {
        auto it = column.find(v.name);
        if (it == column.end()) {
            throw Error(Errc::MissingColumn, "CSV has no column '" + v.name + "'", v.name);
        }
        var_column.push_back(it->second);
    }
    auto optional_column = [&](const char* name) -> std::optional<std::size_t> {
        auto it = column.find(name);
        if (it == column.end()) return std::nullopt;
        return it->second;
    };
    const auto id_col = optional_column("unit_id");
    const auto outcome_col = optional_column("outcome");
    const auto treatment_col = optional_column("treatment");
    if (outcome_col.has_value() != treatment_col.has_value()) {
        throw Error(Errc::MissingColumn, "'outcome' and 'treatment' columns must appear together",
                    outcome_col ? "treatment" : "outcome");
    }

    if (table.rows.empty()) throw Error(Errc::EmptyDataset, "CSV has no data rows");

    Dataset ds;
    ds.schema = schema;
    ds.units.reserve(table.rows.size());
    std::unordered_set<std::string> ids;

    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::size_t row_no = r + 1;
        if (row.size() != table.header.size()) {
            throw Error(Errc::TypeMismatch,
                        fmt::format("row {} has {} fields, header has {}", row_no, row.size(),
                                    table.header.size()));
        }
        UnitRecord unit;
        unit.unit_id = id_col ? row[*id_col] : padded_row_id(r, table.rows.size());
        if (unit.unit_id.empty()) {
            throw Error(Errc::TypeMismatch, fmt::format("row {} has an empty unit_id", row_no),
                        "unit_id");
        }
        if (!ids.insert(unit.unit_id).second) {
            throw Error(Errc::DuplicateUnitId, "duplicate unit_id '" + unit.unit_id + "'",
                        unit.unit_id);
        }

        unit.values.reserve(schema.size());
        for (std::size_t v = 0; v < schema.size(); ++v) {
            const auto& var = schema.variables()[v];
            const std::string& raw = row[var_column[v]];
            if (var.kind == VariableKind::Numeric) {
                auto num = parse_decimal(raw);
                if (!num) {
                    throw Error(Errc::TypeMismatch,
                                fmt::format("row {}, column '{}': '{}' is not a number", row_no,
                                            var.name, raw),
                                var.name);
                }
                unit.values.emplace_back(*num);
            } else {
                if (var.kind == VariableKind::Text && options.max_text_chars &&
                    raw.size() > *options.max_text_chars) {
                    throw Error(Errc::TextTooLong,
                                fmt::format("row {}, column '{}': {} chars exceeds limit {}",
                                            row_no, var.name, raw.size(),
                                            *options.max_text_chars),
                                var.name);
                }
                unit.values.emplace_back(raw);
            }
        }

        if (outcome_col) {
            const std::string& y_raw = row[*outcome_col];
            const std::string& d_raw = row[*treatment_col];
            const bool y_blank = trim(y_raw).empty();
            const bool d_blank = trim(d_raw).empty();
            if (y_blank != d_blank) {
                throw Error(Errc::TypeMismatch,
                            fmt::format("row {}: outcome and treatment must both be present or "
                                        "both be empty",
                                        row_no),
                            y_blank ? "outcome" : "treatment");
            }
            if (!y_blank) {
                auto y = parse_decimal(y_raw);
                if (!y) {
                    throw Error(Errc::TypeMismatch,
                                fmt::format("row {}, column 'outcome': '{}' is not a number",
                                            row_no, y_raw),
                                "outcome");
                }
                auto d = trim(d_raw);
                if (d != "0" && d != "1") {
                    throw Error(Errc::TypeMismatch,
                                fmt::format("row {}, column 'treatment': '{}' is not 0 or 1",
                                            row_no, d_raw),
                                "treatment");
                }
                unit.observed_outcome = *y;
                unit.observed_treatment = d == "1" ? 1 : 0;
            }
        }
        ds.units.push_back(std::move(unit));
    }
    return ds;
}

Dataset load_dataset(const std::filesystem::path& path, const CovariateSchema& schema,
                     const LoadOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string(), path.string());
    std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return parse_dataset(text, schema, options);
}

std::string format_number(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

std::string render_value(const Value& value) {
    if (const double* d = std::get_if<double>(&value)) return format_number(*d);
    return std::get<std::string>(value);
}

std::string dataset_to_csv(const Dataset& dataset) {
    const bool with_outcomes = std::any_of(dataset.units.begin(), dataset.units.end(),
                                           [](const UnitRecord& u) {
                                               return u.observed_outcome.has_value();
                                           });
    csv::Row header{"unit_id"};
    for (const auto& v : dataset.schema.variables()) header.push_back(v.name);
    if (with_outcomes) {
        header.emplace_back("outcome");
        header.emplace_back("treatment");
    }
    std::string out = csv::format_row(header);
    for (const auto& u : dataset.units) {
        csv::Row row{u.unit_id};
        for (const auto& value : u.values) row.push_back(render_value(value));
        if (with_outcomes) {
            row.push_back(u.observed_outcome ? format_number(*u.observed_outcome) : "");
            row.push_back(u.observed_treatment ? std::to_string(*u.observed_treatment) : "");
        }
        out += csv::format_row(row);
    }
    return out;
}

std::string render_unit_description(const UnitRecord& unit, const CovariateSchema& schema) {
    std::string out;
    for (std::size_t i = 0; i < schema.size(); ++i) {
        if (i) out.push_back('\n');
        out += "- ";
        out += schema.variables()[i].name;
        out += ": ";
        std::string text = render_value(unit.values.at(i));
        if (schema.variables()[i].kind == VariableKind::Text) {
            std::string flat;
            flat.reserve(text.size());
            for (std::size_t k = 0; k < text.size(); ++k) {
                if (text[k] == '\r' || text[k] == '\n') {
                    if (text[k] == '\r' && k + 1 < text.size() && text[k + 1] == '\n') ++k;
                    flat.push_back(' ');
                } else {
                    flat.push_back(text[k]);
                }
            }
            text = std::move(flat);
        }
        out += text;
    }
    return out;
}

}  // namespace stratkit
