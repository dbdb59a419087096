#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "stratkit/cli.hpp"
#include "stratkit/design.hpp"
#include "stratkit/estimation.hpp"
#include "stratkit/harness.hpp"
#include "stratkit/matching.hpp"
#include "stratkit/prompt.hpp"
#include "stratkit/scoring.hpp"
#include "test_util.hpp"

using namespace stratkit;
using namespace stratkit::harness;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::set<UnitPair> pair_set(const StratumSet& s) {
    const auto p = pairs_of(s);
    return {p.begin(), p.end()};
}

// Pair list in a canonical order so cost sums are evaluated identically.
std::vector<UnitPair> canonical(const StratumSet& s) {
    auto p = pairs_of(s);
    std::sort(p.begin(), p.end());
    return p;
}

Outcome sorted_pairs_are_optimal() {
    const auto t0 = Clock::now();
    std::mt19937_64 gen(101);
    std::normal_distribution<double> normal;
    int equal = 0;
    const int instances = 200;
    for (int t = 0; t < instances; ++t) {
        const std::size_t n = 4 + 2 * static_cast<std::size_t>(t % 5);
        std::vector<double> g(n);
        for (auto& v : g) v = normal(gen);
        kernels::CostMatrix c(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) c(i, j) = (g[i] - g[j]) * (g[i] - g[j]);
        }
        const auto sorted = sorted_block_strata(g, 2);
        const auto brute = brute_force_pair_matching(c);
        if (matching_cost(c, canonical(sorted)) == matching_cost(c, canonical(brute)) &&
            pair_set(sorted) == pair_set(brute)) {
            ++equal;
        }
    }
    const double secs = seconds_since(t0);
    return {equal == instances && secs < 60.0,
            fmt::format("{}/{} instances exact, {:.2f}s", equal, instances, secs)};
}

SimulationOptions options(std::size_t reps, std::size_t n, std::uint64_t seed) {
    SimulationOptions o;
    o.reps = reps;
    o.n = n;
    o.master_seed = seed;
    o.bootstrap_resamples = 200;
    return o;
}

std::vector<DesignSpec> specs(std::initializer_list<const char*> names) {
    std::vector<DesignSpec> out;
    for (const char* n : names) out.push_back(DesignSpec::parse(n));
    return out;
}

Outcome variance_ratio_matches_closed_form() {
    const auto t0 = Clock::now();
    const auto dgp = make_linear_dgp(2, 0.0, {1, 1}, {}, 1.0, 202);
    const auto sample = dgp.sample(20000);
    const auto methods = specs({"simple", "sorted-pair"});
    const auto r = run_simulation(sample, methods, options(3000, 200, 203));
    const double ratio = r.comparison.methods[1].var_tau_hat / r.comparison.methods[0].var_tau_hat;
    return {ratio >= 0.28 && ratio <= 0.38 && seconds_since(t0) < 300.0,
            fmt::format("Var ratio {:.4f} (closed form {:.4f}), {:.1f}s", ratio,
                        dgp.theoretical_ratio(), seconds_since(t0))};
}

// The synthetic units as a dataset so they can go through the predictor.
Dataset as_dataset(const ImputedSample& s) {
    std::string text = "unit_id,x0,x1\n";
    for (std::size_t i = 0; i < s.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        text += fmt::format("{},{},{}\n", s.unit_ids[i], format_number(s.x.values(r, 0)),
                            format_number(s.x.values(r, 1)));
    }
    const CovariateSchema schema({Variable{"x0", VariableKind::Numeric, "First trait", std::nullopt},
                                  Variable{"x1", VariableKind::Numeric, "Second trait", std::nullopt}});
    return parse_dataset(text, schema);
}

Outcome noise_scores_do_no_harm() {
    const auto dgp = make_linear_dgp(2, 0.0, {1, 1}, {}, 1.0, 202);
    auto sample = dgp.sample(20000);
    const Dataset d = as_dataset(sample);
    MockNoiseBackend backend(303);
    PredictionCache cache;
    const auto preds = predict_dataset(d, testutil::workshop_context(), backend, cache, 4);
    const auto scored = score_predictions(preds);
    for (std::size_t i = 0; i < scored.size(); ++i) sample.g_hat[i] = scored[i].g_hat;
    const double rho = score_quality(std::span<const double>(sample.g_hat), dgp.sample(20000).g_hat).pearson;

    const auto methods = specs({"simple", "sorted-pair"});
    const auto r = run_simulation(sample, methods, options(3000, 200, 203));
    const double ratio = r.comparison.methods[1].mse / r.comparison.methods[0].mse;
    return {ratio >= 0.95 && ratio <= 1.05,
            fmt::format("MSE ratio {:.4f} (score-outcome correlation {:.3f})", ratio, rho)};
}

std::string check_unbiased(const ImputedSample& sample, std::size_t n, std::uint64_t seed,
                           bool* all_ok) {
    const auto methods = specs({"simple", "regression", "categorical", "sorted-pair", "sorted-block-4",
                                "mahalanobis-pair", "hybrid-pair"});
    const auto r = run_simulation(sample, methods, options(3000, n, seed));
    const double tau = sample.tau();
    std::string worst;
    double worst_z = -1.0;
    if (!r.comparison.failed.empty()) *all_ok = false;
    for (const auto& m : r.comparison.methods) {
        const double mc_se = std::sqrt(m.var_tau_hat / static_cast<double>(m.reps));
        const double z = std::abs(m.mean_tau_hat - tau) / mc_se;
        if (!(z < 3.0) || m.reps != 3000) *all_ok = false;
        if (z > worst_z) {
            worst_z = z;
            worst = m.method;
        }
    }
    return fmt::format("{} methods, max |bias|/MC-SE {:.2f} ({})", r.comparison.methods.size(),
                       worst_z, worst);
}

// An observational-looking sample: observed outcomes under a randomized
// treatment, filled in by imputation.
ImputedSample imputed_sample() {
    std::mt19937_64 gen(404);
    std::normal_distribution<double> normal;
    std::string text = "unit_id,age,income,region,outcome,treatment\n";
    const char* regions[] = {"north", "south", "east"};
    for (int i = 0; i < 400; ++i) {
        const double age = 20.0 + 40.0 * std::abs(normal(gen)) / 2.0;
        const double income = 40.0 + 10.0 * normal(gen);
        const int region = i % 3;
        const int d = (i * 7 + 3) % 2;
        const double y = 5.0 + 0.08 * age + 0.05 * income + region + d * (1.0 + 0.02 * age) +
                         2.0 * normal(gen);
        text += fmt::format("r{},{},{},{},{},{}\n", i, format_number(age), format_number(income),
                            regions[region], format_number(y), d);
    }
    const CovariateSchema schema(
        {Variable{"age", VariableKind::Numeric, "Age", "years"},
         Variable{"income", VariableKind::Numeric, "Income", "thousands"},
         Variable{"region", VariableKind::Categorical, "Region", std::nullopt}});
    const Dataset d = parse_dataset(text, schema);
    const std::vector<std::string> cols{"age", "income"};
    ImputedSample s = impute_counterfactuals(d, cols);

    MockLinearBackend backend({5.0, 6.0}, {{"age", {0.08, 0.1}}, {"income", {0.05, 0.05}}});
    PredictionCache cache;
    const auto scored = score_predictions(predict_dataset(d, testutil::workshop_context(), backend, cache, 4));
    s.g_hat.clear();
    for (const auto& u : scored) s.g_hat.push_back(u.g_hat);
    s.categories.clear();
    for (const auto& u : d.units) {
        const auto& v = std::get<std::string>(u.value(d.schema, "region"));
        s.categories.push_back(v == "north" ? 0 : v == "south" ? 1 : 2);
    }
    return s;
}

Outcome designs_are_unbiased() {
    bool ok = true;
    const auto dgp = make_linear_dgp(2, 0.5, {1, 1}, {0.5, -0.25}, 1.0, 505);
    auto synthetic = dgp.sample(5000);
    for (std::size_t i = 0; i < synthetic.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        synthetic.categories.push_back((synthetic.x.values(r, 0) > 0 ? 1 : 0) +
                                       (synthetic.x.values(r, 1) > 0 ? 2 : 0));
    }
    const std::string a = check_unbiased(synthetic, 200, 506, &ok);
    const std::string b = check_unbiased(imputed_sample(), 200, 507, &ok);
    return {ok, fmt::format("synthetic: {}; imputed: {}", a, b)};
}

Outcome lambda_limits_are_exact() {
    std::mt19937_64 gen(606);
    std::normal_distribution<double> normal;
    int sorted_equal = 0, mahal_equal = 0;
    const int instances = 100;
    const std::size_t n = 50;
    for (int t = 0; t < instances; ++t) {
        std::vector<double> g(n);
        CovariateMatrix x;
        x.columns = {"a", "b", "c"};
        x.values.resize(static_cast<Eigen::Index>(n), 3);
        for (std::size_t i = 0; i < n; ++i) {
            for (Eigen::Index c = 0; c < 3; ++c) x.values(static_cast<Eigen::Index>(i), c) = normal(gen);
            g[i] = x.values(static_cast<Eigen::Index>(i), 0) + normal(gen);
        }
        const DesignInput in{g, &x, {}, n};
        if (pair_set(form_strata(DesignSpec::parse("hybrid-pair-1"), in)) ==
            pair_set(form_strata(DesignSpec::parse("sorted-pair"), in))) {
            ++sorted_equal;
        }
        if (pair_set(form_strata(DesignSpec::parse("hybrid-pair-0"), in)) ==
            pair_set(form_strata(DesignSpec::parse("mahalanobis-pair"), in))) {
            ++mahal_equal;
        }
    }
    return {sorted_equal == instances && mahal_equal == instances,
            fmt::format("lambda=1 vs sorted {}/{}, lambda=0 vs Mahalanobis {}/{}", sorted_equal,
                        instances, mahal_equal, instances)};
}

Outcome hybrid_solver_quality() {
    std::mt19937_64 gen(707);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    int within = 0;
    const int instances = 500;
    for (int t = 0; t < instances; ++t) {
        const std::size_t n = 4 + 2 * static_cast<std::size_t>(t % 4);
        std::vector<double> g(n);
        Eigen::MatrixXd z(static_cast<Eigen::Index>(n), 2);
        for (std::size_t i = 0; i < n; ++i) {
            g[i] = normal(gen);
            z(static_cast<Eigen::Index>(i), 0) = normal(gen);
            z(static_cast<Eigen::Index>(i), 1) = normal(gen);
        }
        const kernels::HybridCostInputs in{g, sample_variance(g), &z, unit(gen)};
        const auto c = kernels::build_hybrid_cost_matrix(in);
        const double h = *min_cost_pair_matching(c).total_cost;
        const double b = *brute_force_pair_matching(c).total_cost;
        if (h <= 1.05 * b) ++within;
    }
    return {within >= 475, fmt::format("{}/{} within 5% of the optimum", within, instances)};
}

Outcome variance_estimator_is_calibrated() {
    const auto dgp = make_linear_dgp(2, 0.0, {1, 1}, {}, 1.0, 808);
    const auto population = dgp.sample(100000);
    const auto methods = specs({"sorted-pair"});
    const auto r = run_simulation(population, methods, options(2000, 1000, 809));
    const double coverage = r.comparison.methods[0].coverage;

    // Fresh draws of 2000 units, paired on the exact score.
    const std::size_t n = 2000;
    const int draws = 200;
    double total = 0.0;
    for (int k = 0; k < draws; ++k) {
        const auto s = make_linear_dgp(2, 0.0, {1, 1}, {}, 1.0, 900 + static_cast<std::uint64_t>(k)).sample(n);
        const DesignInput in{s.g_hat, nullptr, {}, n};
        const auto d = run_design(DesignSpec::parse("sorted-pair"), in, 0.5, static_cast<std::uint64_t>(k));
        std::vector<double> y(n);
        const auto t = d.assignment.treatment_vector();
        for (std::size_t i = 0; i < n; ++i) y[i] = t[i] == 1 ? s.y1[i] : s.y0[i];
        total += matched_pair_variance(d.strata, y, t).varsigma_sq;
    }
    const double mean = total / draws;
    const double rel = std::abs(mean - dgp.v_paired()) / dgp.v_paired();
    return {coverage >= 0.93 && coverage <= 0.97 && rel <= 0.05,
            fmt::format("coverage {:.2f}% over 2000 reps at 500 pairs; mean varsigma^2 {:.4f} vs {:.4f} "
                        "({:.2f}% off)",
                        100.0 * coverage, mean, dgp.v_paired(), 100.0 * rel)};
}

Outcome prompt_and_parse_conform() {
    const Dataset d = parse_dataset(testutil::workshop_csv(), testutil::workshop_schema());
    const std::string golden = testutil::slurp(testutil::data_dir() / "golden/prompt_basic.txt");
    const bool stable = render_prompt(d.units[0], d.schema, testutil::workshop_context()) == golden &&
                        render_prompt(d.units[0], d.schema, testutil::workshop_context()) == golden;

    const auto example = parse_prediction("<prediction>\n2\n3\n</prediction>");
    const bool parsed = example.control == 2.0 && example.treatment == 3.0;

    auto fails_with = [](std::string_view text, Errc code) {
        try {
            parse_prediction(text);
        } catch (const Error& e) {
            return e.code() == code;
        }
        return false;
    };
    const bool missing = fails_with("Control 2, treatment 3.", Errc::MissingPredictionBlock);
    const bool lines = fails_with("<prediction>\n2\n</prediction>", Errc::WrongLineCount);
    const bool number = fails_with("<prediction>\ntwo\n3\n</prediction>", Errc::MalformedNumber);
    return {stable && parsed && missing && lines && number,
            fmt::format("golden stable={} example={} missing-block={} line-count={} malformed={}",
                        stable, parsed, missing, lines, number)};
}

std::string people_csv(std::size_t n) {
    std::mt19937_64 gen(909);
    std::normal_distribution<double> normal;
    std::string text = "unit_id,age,income,region,outcome,treatment\n";
    const char* regions[] = {"north", "south"};
    for (std::size_t i = 0; i < n; ++i) {
        const double age = 20.0 + static_cast<double>((i * 37) % 45) + 0.5 * normal(gen);
        const double income = 30.0 + 20.0 * std::abs(normal(gen));
        const int d = static_cast<int>(i % 2);
        const double y = 0.1 * age + 0.05 * income + 0.5 * d + normal(gen);
        text += fmt::format("p{:04d},{},{},{},{},{}\n", i, format_number(age), format_number(income),
                            regions[i % 2], format_number(y), d);
    }
    return text;
}

json pipeline_config(const std::vector<std::string>& methods, std::size_t reps, std::size_t n) {
    return json{
        {"dataset", "people.csv"},
        {"schema",
         json::array({{{"name", "age"}, {"kind", "numeric"}, {"description", "Age"}, {"units", "years"}},
                      {{"name", "income"}, {"kind", "numeric"}, {"description", "Income"}, {"units", "k"}},
                      {{"name", "region"}, {"kind", "categorical"}, {"description", "Region"}}})},
        {"context",
         {{"background", "A savings nudge sent by text message."},
          {"outcome_definition", "Savings deposited in the next month"},
          {"outcome_type", "dollars"},
          {"control_description", "No message."},
          {"treatment_description", "A weekly reminder message."},
          {"example_control_value", "10"},
          {"example_treatment_value", "12"}}},
        {"backends",
         {{"mock", {{"kind", "mock-linear"}, {"intercept", {1.0, 2.0}},
                    {"coefficients", {{"age", {0.1, 0.12}}, {"income", {0.05, 0.05}}}}}}}},
        {"backend", "mock"},
        {"parallelism", 4},
        {"allocation", 0.5},
        {"design", {{"method", "hybrid-pair"}, {"covariates", {"age", "income"}}, {"strata_variables", {"region"}}}},
        {"seed", 2024},
        {"output_dir", "out"},
        {"simulation", {{"reps", reps}, {"n", n}, {"methods", methods}}},
    };
}

int run(const std::string& command, const fs::path& config) {
    std::ostringstream out, err;
    return cli::run_command(command, config, {}, out, err);
}

Outcome pipeline_is_deterministic() {
    const json cfg = pipeline_config({"simple", "regression", "categorical", "sorted-pair", "hybrid-pair"}, 50, 60);
    const std::vector<std::string> files{"scores.csv", "strata.csv", "assignments.csv", "report.csv"};
    auto full_run = [&](const testutil::TempDir& dir, std::vector<std::string>* contents) {
        for (const char* cmd : {"predict", "design", "simulate", "report"}) {
            if (run(cmd, dir / "config.json") != 0) return false;
        }
        contents->clear();
        for (const auto& f : files) contents->push_back(testutil::slurp(dir.path() / "out" / f));
        return true;
    };
    testutil::TempDir a, b;
    for (const auto* dir : {&a, &b}) {
        testutil::spit(*dir / "people.csv", people_csv(120));
        testutil::spit(*dir / "config.json", cfg.dump(2));
    }
    std::vector<std::string> first, second, rerun;
    const bool ran = full_run(a, &first) && full_run(b, &second) && full_run(a, &rerun);
    int identical = 0;
    if (ran) {
        for (std::size_t i = 0; i < files.size(); ++i) {
            if (!first[i].empty() && first[i] == second[i] && first[i] == rerun[i]) ++identical;
        }
    }
    return {ran && identical == static_cast<int>(files.size()),
            fmt::format("{}/{} files byte-identical across fresh and cached runs", identical, files.size())};
}

Outcome simulate_throughput() {
    testutil::TempDir dir;
    testutil::spit(dir / "people.csv", people_csv(2000));
    const json cfg = pipeline_config({"simple", "regression", "sorted-pair", "hybrid-pair"}, 3000, 1000);
    testutil::spit(dir / "config.json", cfg.dump(2));
    if (run("predict", dir / "config.json") != 0) return {false, "predict failed"};
    const auto t0 = Clock::now();
    const int code = run("simulate", dir / "config.json");
    const double secs = seconds_since(t0);
    return {code == 0 && secs < 1800.0,
            fmt::format("exit {}, {:.1f}s for 3000 reps x 4 methods at n=1000", code, secs)};
}

}  // namespace

int main(int argc, char** argv) {
    std::set<std::string> only(argv + 1, argv + argc);
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"1 sorted pairs equal brute-force optimum", sorted_pairs_are_optimal},
        {"2 paired/simple variance ratio near closed form", variance_ratio_matches_closed_form},
        {"3 pure-noise scores do no harm", noise_scores_do_no_harm},
        {"4 every design is unbiased", designs_are_unbiased},
        {"5 hybrid lambda limits are exact", lambda_limits_are_exact},
        {"6 hybrid solver within 5% of optimum", hybrid_solver_quality},
        {"7 matched-pair variance calibration", variance_estimator_is_calibrated},
        {"8 prompt and parse conformance", prompt_and_parse_conform},
        {"9 pipeline determinism", pipeline_is_deterministic},
        {"10 simulate throughput", simulate_throughput},
    };
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        if (!only.empty() && !only.count(name.substr(0, name.find(' ')))) continue;
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << name << ": " << o.detail << std::endl;
    }
    std::cout << (failed == 0 ? "all criteria passed" : fmt::format("{} criteria failed", failed)) << "\n";
    return failed == 0 ? 0 : 1;
}
