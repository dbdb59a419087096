#include <fstream>

#include <fmt/format.h>
#include <json.hpp>

#include "stratkit/csv.hpp"
#include "stratkit/error.hpp"
#include "stratkit/harness.hpp"

namespace stratkit::harness {

namespace {

std::vector<std::string> header_of(const MethodComparison& cmp) {
    std::vector<std::string> h{"method", "mse", "ci_low", "ci_high", "mean_se", "coverage",
                               "mean_tau_hat", "var_tau_hat"};
    for (const auto& b : cmp.baselines) {
        h.push_back("improvement_vs_" + b);
        h.push_back("mse_ratio_vs_" + b);
    }
    return h;
}

std::vector<std::vector<std::string>> rows_of(const MethodComparison& cmp) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& m : cmp.methods) {
        std::vector<std::string> row{m.method,
                                     format_number(m.mse),
                                     format_number(m.ci_low),
                                     format_number(m.ci_high),
                                     format_number(m.mean_se),
                                     format_number(m.coverage),
                                     format_number(m.mean_tau_hat),
                                     format_number(m.var_tau_hat)};
        for (const auto& b : cmp.baselines) {
            const MethodSummary& base = *cmp.find(b);
            row.push_back(format_number(cmp.improvement(m, base)));
            row.push_back(format_number(m.mse / base.mse));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

std::string render_report(const MethodComparison& comparison, ReportFormat format,
                          const std::string& header_comment) {
    if (comparison.methods.empty()) {
        throw Error(Errc::EmptyReport, "no methods to report");
    }
    const auto header = header_of(comparison);
    const auto rows = rows_of(comparison);
    std::string out;
    if (format == ReportFormat::Csv) {
        if (!header_comment.empty()) out += "# " + header_comment + "\n";
        out += csv::format_row(header);
        for (const auto& r : rows) out += csv::format_row(r);
        return out;
    }
    if (!header_comment.empty()) out += "<!-- " + header_comment + " -->\n";
    out += fmt::format("Estimand tau = {}; n = {}; replications = {}.\n\n",
                       format_number(comparison.tau), comparison.n, comparison.reps);
    out += "| " + fmt::format("{}", fmt::join(header, " | ")) + " |\n";
    out += "|";
    for (std::size_t i = 0; i < header.size(); ++i) out += i == 0 ? "---|" : "---:|";
    out += "\n";
    for (const auto& r : rows) out += "| " + fmt::format("{}", fmt::join(r, " | ")) + " |\n";
    if (!comparison.failed.empty()) {
        out += "\nExcluded methods:\n\n";
        for (const auto& [method, reason] : comparison.failed) {
            out += fmt::format("- {}: {}\n", method, reason);
        }
    }
    out += "\nMSE intervals are percentile bootstrap intervals over replication-level squared "
           "errors. Improvement = (baseline MSE - method MSE) / baseline MSE x 100.\n";
    return out;
}

void emit_report(const MethodComparison& comparison, ReportFormat format,
                 const std::filesystem::path& path, const std::string& header_comment) {
    const std::string text = render_report(comparison, format, header_comment);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::IoFailure, "cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw Error(Errc::IoFailure, "failed writing " + path.string());
}

std::string replications_to_csv(const SimulationResult& result, const std::string& header_comment) {
    std::string out;
    if (!header_comment.empty()) out += "# " + header_comment + "\n";
    out += csv::format_row({"rep", "method", "tau_hat", "se_hat", "sq_error", "ok"});
    for (const auto& r : result.records) {
        const double err = r.tau_hat - result.comparison.tau;
        out += csv::format_row({std::to_string(r.rep), result.method_labels.at(r.method),
                                r.ok ? format_number(r.tau_hat) : "", r.ok ? format_number(r.se_hat) : "",
                                r.ok ? format_number(err * err) : "", r.ok ? "1" : "0"});
    }
    return out;
}

std::string comparison_to_json(const MethodComparison& c) {
    nlohmann::ordered_json j;
    j["tau"] = c.tau;
    j["n"] = c.n;
    j["reps"] = c.reps;
    j["master_seed"] = c.master_seed;
    j["baselines"] = c.baselines;
    j["methods"] = nlohmann::ordered_json::array();
    for (const auto& m : c.methods) {
        j["methods"].push_back({{"method", m.method},
                                {"mse", m.mse},
                                {"ci_low", m.ci_low},
                                {"ci_high", m.ci_high},
                                {"mean_se", m.mean_se},
                                {"coverage", m.coverage},
                                {"mean_tau_hat", m.mean_tau_hat},
                                {"var_tau_hat", m.var_tau_hat},
                                {"reps", m.reps}});
    }
    j["failed"] = nlohmann::ordered_json::array();
    for (const auto& [method, reason] : c.failed) {
        j["failed"].push_back({{"method", method}, {"reason", reason}});
    }
    return j.dump(2) + "\n";
}

MethodComparison comparison_from_json(std::string_view text) {
    MethodComparison c;
    try {
        const auto j = nlohmann::json::parse(text);
        c.tau = j.at("tau").get<double>();
        c.n = j.at("n").get<std::size_t>();
        c.reps = j.at("reps").get<std::size_t>();
        c.master_seed = j.at("master_seed").get<std::uint64_t>();
        c.baselines = j.at("baselines").get<std::vector<std::string>>();
        for (const auto& m : j.at("methods")) {
            MethodSummary s;
            s.method = m.at("method").get<std::string>();
            s.mse = m.at("mse").get<double>();
            s.ci_low = m.at("ci_low").get<double>();
            s.ci_high = m.at("ci_high").get<double>();
            s.mean_se = m.at("mean_se").get<double>();
            s.coverage = m.at("coverage").get<double>();
            s.mean_tau_hat = m.at("mean_tau_hat").get<double>();
            s.var_tau_hat = m.at("var_tau_hat").get<double>();
            s.reps = m.at("reps").get<std::size_t>();
            c.methods.push_back(std::move(s));
        }
        for (const auto& f : j.at("failed")) {
            c.failed.emplace_back(f.at("method").get<std::string>(), f.at("reason").get<std::string>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::ConfigError, fmt::format("malformed comparison JSON: {}", e.what()));
    }
    return c;
}

}  // namespace stratkit::harness
