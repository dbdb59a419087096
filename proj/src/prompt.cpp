#include "stratkit/prompt.hpp"

#include <charconv>
#include <cmath>

#include <fmt/format.h>

#include "stratkit/error.hpp"

namespace stratkit {

namespace {

constexpr std::string_view kStandardTemplate =
    R"(You are an AI assistant tasked with predicting outcomes for individuals in an experiment based on their characteristics and treatment conditions.

<experiment_background>
{{context.background}}
</experiment_background>

<outcome_definition>
The outcome to predict is: {{context.outcome_definition}}
</outcome_definition>

<variable_descriptions>
{{block.variable_descriptions}}
</variable_descriptions>

<individual_characteristics>
{{block.individual_characteristics}}
</individual_characteristics>

<treatment_condition>
{{block.treatment_status}}
</treatment_condition>

Based on the information provided, predict the outcome for this individual under both the control condition (does not receive treatment) and the treatment condition (receives treatment).

Your response should contain only two numbers:
1. The predicted {{context.outcome_type}} under the control condition
2. The predicted {{context.outcome_type}} under the treatment condition

Format your response EXACTLY as follows:
<prediction>
[Control prediction]
[Treatment prediction]
</prediction>

Example response:
<prediction>
{{context.example_control_value}}
{{context.example_treatment_value}}
</prediction>

Do not provide any explanation or commentary.)";

constexpr std::string_view kControlStatus =
    "This individual DOES NOT receive the treatment (control group).";
constexpr std::string_view kTreatmentStatus = "This individual RECEIVES the treatment.";

bool is_reserved(std::string_view name) {
    return name.starts_with("context.") || name.starts_with("block.");
}

// Splits text into literal and placeholder segments; odd indices are names.
std::vector<std::string_view> split_placeholders(std::string_view text) {
    std::vector<std::string_view> parts;
    std::size_t pos = 0;
    while (true) {
        std::size_t open = text.find("{{", pos);
        if (open == std::string_view::npos) break;
        std::size_t close = text.find("}}", open + 2);
        if (close == std::string_view::npos) break;
        parts.push_back(text.substr(pos, open - pos));
        parts.push_back(text.substr(open + 2, close - open - 2));
        pos = close + 2;
    }
    parts.push_back(text.substr(pos));
    return parts;
}

std::string flatten_lines(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '\r' || text[i] == '\n') {
            if (text[i] == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            out.push_back(' ');
        } else {
            out.push_back(text[i]);
        }
    }
    return out;
}

std::string variable_descriptions(const CovariateSchema& schema) {
    std::string out;
    for (std::size_t i = 0; i < schema.size(); ++i) {
        const auto& v = schema.variables()[i];
        if (i) out.push_back('\n');
        out += fmt::format("- {}: {}", v.name, v.description);
        if (v.units) out += fmt::format(" ({})", *v.units);
    }
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

}  // namespace

ExperimentContext ExperimentContext::make(std::string background, std::string outcome_definition,
                                          std::string outcome_type_label,
                                          std::string control_description,
                                          std::string treatment_description,
                                          std::string example_control_value,
                                          std::string example_treatment_value) {
    ExperimentContext ctx{std::move(background),          std::move(outcome_definition),
                          std::move(outcome_type_label),  std::move(control_description),
                          std::move(treatment_description), std::move(example_control_value),
                          std::move(example_treatment_value)};
    ctx.validate();
    return ctx;
}

void ExperimentContext::validate() const {
    const std::pair<std::string_view, const std::string*> fields[] = {
        {"background", &background},
        {"outcome_definition", &outcome_definition},
        {"outcome_type", &outcome_type_label},
        {"control_description", &control_description},
        {"treatment_description", &treatment_description},
        {"example_control_value", &example_control_value},
        {"example_treatment_value", &example_treatment_value},
    };
    for (const auto& [name, value] : fields) {
        if (trim(*value).empty()) {
            throw Error(Errc::InvalidContext, fmt::format("context field '{}' is empty", name),
                        std::string(name));
        }
    }
    if (control_description == treatment_description) {
        throw Error(Errc::InvalidContext,
                    "treatment and control descriptions must differ", "treatment_description");
    }
}

PromptTemplate::PromptTemplate(std::string text) : text_(std::move(text)) {
    auto parts = split_placeholders(text_);
    for (std::size_t i = 1; i < parts.size(); i += 2) placeholders_.emplace_back(parts[i]);
    static constexpr std::string_view kKnown[] = {
        "context.background",
        "context.outcome_definition",
        "context.outcome_type",
        "context.control_description",
        "context.treatment_description",
        "context.example_control_value",
        "context.example_treatment_value",
        "block.variable_descriptions",
        "block.individual_characteristics",
        "block.treatment_status",
    };
    for (const auto& name : placeholders_) {
        if (!is_reserved(name)) continue;
        bool known = false;
        for (auto k : kKnown) known = known || k == name;
        if (!known) {
            throw Error(Errc::UnboundPlaceholder, "unknown reserved placeholder '" + name + "'",
                        name);
        }
    }
}

const PromptTemplate& PromptTemplate::standard() {
    static const PromptTemplate tmpl{std::string(kStandardTemplate)};
    return tmpl;
}

void PromptTemplate::check_bindings(const CovariateSchema& schema) const {
    for (const auto& name : placeholders_) {
        if (!is_reserved(name) && !schema.index_of(name)) {
            throw Error(Errc::UnboundPlaceholder,
                        "placeholder '" + name + "' has no schema variable", name);
        }
    }
}

std::string render_prompt(const UnitRecord& unit, const CovariateSchema& schema,
                          const ExperimentContext& ctx, const PromptTemplate& tmpl) {
    auto parts = split_placeholders(tmpl.text());
    std::string out;
    out.reserve(tmpl.text().size() + 512);
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i % 2 == 0) {
            out += parts[i];
            continue;
        }
        const std::string_view name = parts[i];
        if (name == "context.background") {
            out += ctx.background;
        } else if (name == "context.outcome_definition") {
            out += ctx.outcome_definition;
        } else if (name == "context.outcome_type") {
            out += ctx.outcome_type_label;
        } else if (name == "context.control_description") {
            out += ctx.control_description;
        } else if (name == "context.treatment_description") {
            out += ctx.treatment_description;
        } else if (name == "context.example_control_value") {
            out += ctx.example_control_value;
        } else if (name == "context.example_treatment_value") {
            out += ctx.example_treatment_value;
        } else if (name == "block.variable_descriptions") {
            out += variable_descriptions(schema);
        } else if (name == "block.individual_characteristics") {
            out += render_unit_description(unit, schema);
        } else if (name == "block.treatment_status") {
            out += fmt::format("Control condition: {} {}\nTreatment condition: {} {}",
                               kControlStatus, ctx.control_description, kTreatmentStatus,
                               ctx.treatment_description);
        } else {
            auto idx = schema.index_of(name);
            if (!idx) {
                throw Error(Errc::UnboundPlaceholder,
                            fmt::format("placeholder '{}' has no schema variable", name),
                            std::string(name));
            }
            std::string value = render_value(unit.values.at(*idx));
            if (schema.variables()[*idx].kind == VariableKind::Text) value = flatten_lines(value);
            out += value;
        }
    }
    return out;
}

ParsedPrediction parse_prediction(std::string_view response) {
    constexpr std::string_view kOpen = "<prediction>";
    constexpr std::string_view kClose = "</prediction>";
    const std::size_t open = response.find(kOpen);
    if (open == std::string_view::npos) {
        throw Error(Errc::MissingPredictionBlock, "response has no <prediction> block");
    }
    const std::size_t body_start = open + kOpen.size();
    const std::size_t close = response.find(kClose, body_start);
    if (close == std::string_view::npos) {
        throw Error(Errc::MissingPredictionBlock, "<prediction> block is not closed");
    }
    std::string_view body = response.substr(body_start, close - body_start);

    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos <= body.size()) {
        std::size_t eol = body.find('\n', pos);
        if (eol == std::string_view::npos) eol = body.size();
        auto line = trim(body.substr(pos, eol - pos));
        if (!line.empty()) lines.push_back(line);
        pos = eol + 1;
    }
    if (lines.size() != 2) {
        throw Error(Errc::WrongLineCount,
                    fmt::format("expected 2 prediction lines, found {}", lines.size()),
                    std::to_string(lines.size()));
    }
    auto to_number = [](std::string_view line) {
        std::string_view s = line;
        if (!s.empty() && s.front() == '+') s.remove_prefix(1);
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
            throw Error(Errc::MalformedNumber, fmt::format("'{}' is not a number", line),
                        std::string(line));
        }
        return v;
    };
    return {to_number(lines[0]), to_number(lines[1])};
}

std::string format_prediction_response(double control, double treatment) {
    return fmt::format("<prediction>\n{}\n{}\n</prediction>", format_number(control),
                       format_number(treatment));
}

}  // namespace stratkit
