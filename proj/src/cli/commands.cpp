#include <chrono>
#include <fstream>
#include <iterator>
#include <map>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "stratkit/cli.hpp"
#include "stratkit/error.hpp"
#include "stratkit/harness.hpp"
#include "stratkit/scoring.hpp"

namespace stratkit::cli {

using nlohmann::ordered_json;

namespace {

namespace fs = std::filesystem;

[[noreturn]] void config_error(const std::string& msg) { throw Error(Errc::ConfigError, msg); }

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(Errc::IoFailure, "cannot write " + tmp.string());
        out << text;
        if (!out) throw Error(Errc::IoFailure, "failed writing " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoFailure, "cannot read " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Dataset load_configured_dataset(const RunConfig& c) {
    if (!c.dataset) config_error("config has no 'dataset'");
    if (c.schema.variables().empty()) config_error("config has no 'schema'");
    LoadOptions opts;
    opts.max_text_chars = c.max_text_chars;
    return load_dataset(*c.dataset, c.schema, opts);
}

std::vector<double> load_scores(const RunConfig& c, const Dataset& d) {
    const fs::path path = c.output_dir / "scores.csv";
    if (!fs::exists(path)) config_error("scores.csv not found in " + c.output_dir.string() + "; run predict first");
    std::map<std::string, double> by_id;
    for (const auto& s : scores_from_csv(read_file(path))) by_id[s.unit_id] = s.g_hat;
    std::vector<double> g;
    g.reserve(d.units.size());
    for (const auto& u : d.units) {
        const auto it = by_id.find(u.unit_id);
        if (it == by_id.end()) config_error("scores.csv has no score for unit '" + u.unit_id + "'");
        g.push_back(it->second);
    }
    return g;
}

std::vector<int> category_labels(const Dataset& d, const std::vector<std::string>& vars) {
    if (vars.empty()) return {};
    std::vector<std::size_t> idx;
    for (const auto& v : vars) {
        const auto i = d.schema.index_of(v);
        if (!i) config_error("unknown strata variable '" + v + "'");
        idx.push_back(*i);
    }
    std::vector<std::string> keys;
    for (const auto& u : d.units) {
        std::string key;
        for (auto i : idx) key += render_value(u.values[i]) + '\x1f';
        keys.push_back(std::move(key));
    }
    const std::set<std::string> levels(keys.begin(), keys.end());
    std::map<std::string, int> code;
    for (const auto& l : levels) code.emplace(l, static_cast<int>(code.size()));
    std::vector<int> out;
    for (const auto& k : keys) out.push_back(code.at(k));
    return out;
}

std::vector<std::string> unit_ids_of(const Dataset& d) {
    std::vector<std::string> ids;
    for (const auto& u : d.units) ids.push_back(u.unit_id);
    return ids;
}

void print(std::ostream& out, const ordered_json& j) { out << j.dump(2) << '\n'; }

}  // namespace

int exit_code_for(const Error& error) {
    switch (error.code()) {
    case Errc::ConfigError:
    case Errc::MissingColumn:
    case Errc::TypeMismatch:
    case Errc::DuplicateUnitId:
    case Errc::EmptyDataset:
    case Errc::InvalidSchema:
    case Errc::TextTooLong:
    case Errc::InvalidContext:
    case Errc::UnboundPlaceholder:
    case Errc::InvalidArgument:
    case Errc::InvalidLambda:
    case Errc::InvalidProbability:
        return ConfigErrorExit;
    case Errc::BackendUnavailable:
    case Errc::ParseFailure:
    case Errc::PredictionFailed:
    case Errc::MissingPredictionBlock:
    case Errc::MalformedNumber:
    case Errc::WrongLineCount:
        return BackendErrorExit;
    case Errc::NonIntegralAllocation:
    case Errc::BlockTooLarge:
    case Errc::OddCount:
    case Errc::NotPairedDesign:
    case Errc::NonFiniteCost:
    case Errc::EmptyArm:
    case Errc::RankDeficient:
        return DesignInfeasibleExit;
    default:
        return Failure;
    }
}

int cmd_predict(const RunConfig& c, std::ostream& out) {
    if (!c.context) config_error("config has no 'context'");
    const Dataset dataset = load_configured_dataset(c);
    std::optional<PromptTemplate> tmpl;
    if (c.prompt_template) tmpl.emplace(read_file(*c.prompt_template));
    const PromptTemplate& active = tmpl ? *tmpl : PromptTemplate::standard();
    active.check_bindings(dataset.schema);
    auto backend = make_backend(c);

    fs::create_directories(c.output_dir);
    PredictionCache cache(c.output_dir / "predictions.jsonl");
    FailureLog failures(c.output_dir / "failures.jsonl");
    PredictOptions opts;
    opts.prompt_template = &active;
    opts.failures = &failures;
    PredictStats stats;
    const fs::path scores_path = c.output_dir / "scores.csv";

    ordered_json summary{{"command", "predict"}, {"backend", backend->tag()}};
    std::vector<PredictionPair> pairs;
    try {
        pairs = predict_dataset(dataset, *c.context, *backend, cache, c.parallelism, opts, &stats);
    } catch (const PredictionFailure& e) {
        fs::remove(scores_path);
        summary["units"] = dataset.units.size();
        summary["cache_hits"] = stats.cache_hits;
        summary["network_calls"] = backend->calls();
        summary["failures"] = e.failures().size();
        ordered_json failed = ordered_json::array();
        for (const auto& [id, msg] : e.failures()) failed.push_back({{"unit_id", id}, {"error", msg}});
        summary["failed_units"] = failed;
        summary["exit_code"] = static_cast<int>(BackendErrorExit);
        print(out, summary);
        return BackendErrorExit;
    }
    const auto scores = score_predictions(pairs, c.allocation);
    write_file(scores_path, scores_to_csv(scores, c.header()));

    summary["units"] = stats.units;
    summary["cache_hits"] = stats.cache_hits;
    summary["network_calls"] = backend->calls();
    summary["failures"] = 0;
    summary["scores"] = scores_path.string();
    summary["exit_code"] = 0;
    print(out, summary);
    return Success;
}

int cmd_design(const RunConfig& c, std::ostream& out) {
    const DesignSpec spec = c.design_spec(c.design.method);
    const Dataset dataset = load_configured_dataset(c);
    std::vector<double> g;
    if (spec.uses_scores()) g = load_scores(c, dataset);
    std::optional<CovariateMatrix> x;
    if (spec.uses_covariates()) {
        if (c.design.covariates.empty()) config_error(spec.label + " needs design.covariates");
        x = build_covariate_matrix(dataset, c.design.covariates);
    }
    const std::vector<int> cats = category_labels(dataset, c.design.strata_variables);
    if (spec.method == DesignMethod::Categorical && cats.empty()) {
        config_error("categorical design needs design.strata_variables");
    }

    DesignInput input;
    input.g_hat = g;
    input.covariates = x ? &*x : nullptr;
    input.categories = cats;
    input.n = dataset.units.size();
    const Design design = run_design(spec, input, c.allocation, c.seed);

    // Exact allocation in every stratum for the fixed-margin designs.
    const auto d = design.assignment.treatment_vector();
    if (spec.method != DesignMethod::Categorical) {
        for (const auto& s : design.strata.strata) {
            std::size_t treated = 0;
            for (auto m : s.members) treated += static_cast<std::size_t>(d[m]);
            const double expected = static_cast<double>(s.size()) * c.allocation;
            if (static_cast<double>(treated) != expected) {
                throw Error(Errc::NonIntegralAllocation,
                            fmt::format("stratum {} has {} treated, expected {}", s.stratum_id,
                                        treated, expected),
                            std::to_string(s.stratum_id));
            }
        }
    }

    const auto ids = unit_ids_of(dataset);
    write_file(c.output_dir / "strata.csv", strata_to_csv(design.strata, ids, c.header()));
    write_file(c.output_dir / "assignments.csv",
               assignments_to_csv(design.assignment, ids, spec.label, c.header()));

    ordered_json summary{{"command", "design"},
                         {"method", spec.label},
                         {"units", dataset.units.size()},
                         {"strata", design.strata.strata.size()},
                         {"treated", design.assignment.treated()}};
    if (design.lambda_used) summary["lambda"] = *design.lambda_used;
    if (design.strata.total_cost) summary["total_cost"] = *design.strata.total_cost;
    summary["leftover"] = design.strata.leftover ? ordered_json(ids[*design.strata.leftover]) : ordered_json();
    summary["design_input_sha256"] = design.input_fingerprint;
    summary["warnings"] = design.warnings;
    summary["exit_code"] = 0;
    print(out, summary);
    return Success;
}

int cmd_simulate(const RunConfig& c, std::ostream& out) {
    const auto start = std::chrono::steady_clock::now();
    std::vector<DesignSpec> methods;
    for (const auto& m : c.simulation.methods) methods.push_back(c.design_spec(m));
    const bool needs_scores = std::any_of(methods.begin(), methods.end(),
                                          [](const DesignSpec& s) { return s.uses_scores(); });

    harness::ImputedSample sample;
    std::optional<harness::SyntheticDGP> dgp;
    if (c.simulation.dgp) {
        const DgpConfig& g = *c.simulation.dgp;
        dgp = harness::make_linear_dgp(g.dim, g.alpha, g.beta, g.gamma, g.noise_sd, c.seed);
        sample = dgp->sample(g.population);
        if (g.score == "noise") {
            harness::set_correlated_scores(sample, *dgp, 0.0, c.seed);
        } else if (g.score == "correlation") {
            harness::set_correlated_scores(sample, *dgp, g.correlation, c.seed);
        }
    } else {
        if (!c.dataset) config_error("simulate needs a dataset with outcomes or simulation.dgp");
        const Dataset dataset = load_configured_dataset(c);
        if (!dataset.has_outcomes()) {
            config_error("dataset has no observed outcome/treatment columns and no simulation.dgp is configured");
        }
        std::vector<double> g;
        if (needs_scores) g = load_scores(c, dataset);
        sample = harness::impute_counterfactuals(dataset, c.design.covariates);
        sample.g_hat = std::move(g);
        sample.categories = category_labels(dataset, c.design.strata_variables);
    }

    harness::SimulationOptions opts;
    opts.reps = c.simulation.reps;
    opts.n = c.simulation.n.value_or(sample.size() >= 1000 ? 1000 : 400);
    opts.p = c.allocation;
    opts.master_seed = c.seed;
    opts.threads = c.simulation.threads;
    opts.bootstrap_resamples = c.simulation.bootstrap_resamples;
    opts.baselines = c.simulation.baselines;
    const harness::SimulationResult result = harness::run_simulation(sample, methods, opts);
    const auto& cmp = result.comparison;

    fs::create_directories(c.output_dir);
    write_file(c.output_dir / "comparison.json", harness::comparison_to_json(cmp));
    write_file(c.output_dir / "replications.csv", harness::replications_to_csv(result, c.header()));
    if (!cmp.methods.empty()) {
        write_file(c.output_dir / "report.csv",
                   harness::render_report(cmp, harness::ReportFormat::Csv, c.header()));
        write_file(c.output_dir / "report.md",
                   harness::render_report(cmp, harness::ReportFormat::Markdown, c.header()));
    }

    ordered_json summary{{"command", "simulate"},
                         {"tau", cmp.tau},
                         {"n", cmp.n},
                         {"reps", cmp.reps},
                         {"population", sample.size()}};
    if (dgp) summary["theoretical_ratio"] = dgp->theoretical_ratio();
    ordered_json rows = ordered_json::array();
    for (const auto& m : cmp.methods) {
        ordered_json row{{"method", m.method}, {"mse", m.mse}, {"mean_se", m.mean_se},
                         {"coverage", m.coverage}, {"var_tau_hat", m.var_tau_hat}};
        for (const auto& b : cmp.baselines) {
            const auto* base = cmp.find(b);
            row["mse_ratio_vs_" + b] = m.mse / base->mse;
            row["var_ratio_vs_" + b] = m.var_tau_hat / base->var_tau_hat;
        }
        rows.push_back(std::move(row));
    }
    summary["methods"] = rows;
    ordered_json failed = ordered_json::array();
    for (const auto& [m, why] : cmp.failed) failed.push_back({{"method", m}, {"reason", why}});
    summary["failed"] = failed;
    summary["warnings"] = sample.warnings;
    summary["elapsed_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const int code = cmp.methods.empty() ? static_cast<int>(Failure) : static_cast<int>(Success);
    summary["exit_code"] = code;
    print(out, summary);
    return code;
}

int cmd_report(const RunConfig& c, std::ostream& out) {
    const fs::path src = c.output_dir / "comparison.json";
    if (!fs::exists(src)) config_error("comparison.json not found in " + c.output_dir.string() + "; run simulate first");
    const harness::MethodComparison cmp = harness::comparison_from_json(read_file(src));
    write_file(c.output_dir / "report.csv", harness::render_report(cmp, harness::ReportFormat::Csv, c.header()));
    write_file(c.output_dir / "report.md",
               harness::render_report(cmp, harness::ReportFormat::Markdown, c.header()));
    ordered_json summary{{"command", "report"},
                         {"methods", cmp.methods.size()},
                         {"report_csv", (c.output_dir / "report.csv").string()},
                         {"report_md", (c.output_dir / "report.md").string()},
                         {"exit_code", 0}};
    print(out, summary);
    return Success;
}

int run_command(const std::string& command, const fs::path& config_path, const Overrides& overrides,
                std::ostream& out, std::ostream& err) {
    int code = Failure;
    std::string message;
    try {
        const RunConfig config = load_config(config_path, overrides);
        if (command == "predict") return cmd_predict(config, out);
        if (command == "design") return cmd_design(config, out);
        if (command == "simulate") return cmd_simulate(config, out);
        if (command == "report") return cmd_report(config, out);
        throw Error(Errc::ConfigError, "unknown command '" + command + "'");
    } catch (const Error& e) {
        code = exit_code_for(e);
        message = e.what();
    } catch (const std::exception& e) {
        code = Failure;
        message = e.what();
    }
    err << "stratkit " << command << ": " << message << '\n';
    print(out, ordered_json{{"command", command}, {"error", message}, {"exit_code", code}});
    return code;
}

}  // namespace stratkit::cli
