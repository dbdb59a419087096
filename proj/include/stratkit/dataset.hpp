#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace stratkit {

enum class VariableKind { Numeric, Categorical, Text };

std::string_view to_string(VariableKind kind) noexcept;
VariableKind parse_variable_kind(std::string_view text);

struct Variable {
    std::string name;
    VariableKind kind = VariableKind::Numeric;
    std::string description;
    std::optional<std::string> units;

    friend bool operator==(const Variable&, const Variable&) = default;
};

/// Ordered list of covariates. Names are unique and nonempty.
class CovariateSchema {
public:
    CovariateSchema() = default;
    explicit CovariateSchema(std::vector<Variable> variables);

    const std::vector<Variable>& variables() const noexcept { return variables_; }
    std::size_t size() const noexcept { return variables_.size(); }
    bool empty() const noexcept { return variables_.empty(); }

    std::optional<std::size_t> index_of(std::string_view name) const;
    const Variable& at(std::string_view name) const;

    friend bool operator==(const CovariateSchema&, const CovariateSchema&) = default;

private:
    std::vector<Variable> variables_;
};

/// Numeric covariates hold a double; categorical and text hold the raw label.
using Value = std::variant<double, std::string>;

struct UnitRecord {
    std::string unit_id;
    std::vector<Value> values;  // schema order
    std::optional<double> observed_outcome;
    std::optional<int> observed_treatment;

    const Value& value(const CovariateSchema& schema, std::string_view name) const;

    friend bool operator==(const UnitRecord&, const UnitRecord&) = default;
};

struct Dataset {
    CovariateSchema schema;
    std::vector<UnitRecord> units;

    std::size_t size() const noexcept { return units.size(); }
    bool has_outcomes() const noexcept;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct LoadOptions {
    /// Text covariates longer than this are rejected (no truncation policy).
    std::optional<std::size_t> max_text_chars;
};

Dataset parse_dataset(std::string_view csv_text, const CovariateSchema& schema,
                      const LoadOptions& options = {});
Dataset load_dataset(const std::filesystem::path& path, const CovariateSchema& schema,
                     const LoadOptions& options = {});

/// Serializes with columns unit_id, <schema vars>, [outcome, treatment].
std::string dataset_to_csv(const Dataset& dataset);

/// Shortest decimal text that parses back to the same double.
std::string format_number(double value);
std::string render_value(const Value& value);

/// One `- <name>: <value>` line per variable in schema order. Newlines in
/// text values are flattened to single spaces.
std::string render_unit_description(const UnitRecord& unit, const CovariateSchema& schema);

}  // namespace stratkit
