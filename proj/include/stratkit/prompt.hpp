#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "stratkit/dataset.hpp"

namespace stratkit {

/// Experiment-level text substituted into every prompt. Construct through
/// `ExperimentContext::make`, which rejects empty fields.
struct ExperimentContext {
    std::string background;
    std::string outcome_definition;
    std::string outcome_type_label;
    std::string control_description;
    std::string treatment_description;
    std::string example_control_value;
    std::string example_treatment_value;

    static ExperimentContext make(std::string background, std::string outcome_definition,
                                  std::string outcome_type_label, std::string control_description,
                                  std::string treatment_description,
                                  std::string example_control_value,
                                  std::string example_treatment_value);
    void validate() const;
};

/// Prompt template with `{{name}}` placeholders.
///
/// Reserved placeholders:
///   {{context.background}}, {{context.outcome_definition}},
///   {{context.outcome_type}}, {{context.control_description}},
///   {{context.treatment_description}}, {{context.example_control_value}},
///   {{context.example_treatment_value}}
///   {{block.variable_descriptions}}, {{block.individual_characteristics}},
///   {{block.treatment_status}}
/// Any other placeholder must name a schema variable and is replaced by that
/// unit's value.
class PromptTemplate {
public:
    explicit PromptTemplate(std::string text);

    /// The simulation template used by default: both potential outcomes are
    /// requested in a single `<prediction>` block, control first.
    static const PromptTemplate& standard();

    const std::string& text() const noexcept { return text_; }
    const std::vector<std::string>& placeholders() const noexcept { return placeholders_; }

    /// Throws UnboundPlaceholder for a non-reserved placeholder that is not a
    /// schema variable.
    void check_bindings(const CovariateSchema& schema) const;

private:
    std::string text_;
    std::vector<std::string> placeholders_;
};

std::string render_prompt(const UnitRecord& unit, const CovariateSchema& schema,
                          const ExperimentContext& ctx,
                          const PromptTemplate& tmpl = PromptTemplate::standard());

struct ParsedPrediction {
    double control = 0.0;
    double treatment = 0.0;
};

/// Reads the first `<prediction>...</prediction>` block. The first nonempty
/// line is the control prediction, the second the treatment prediction.
ParsedPrediction parse_prediction(std::string_view response);

/// Formats a response in the shape parse_prediction accepts.
std::string format_prediction_response(double control, double treatment);

}  // namespace stratkit
