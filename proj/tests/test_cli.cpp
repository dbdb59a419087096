#include <chrono>
#include <cstdlib>
#include <random>
#include <sstream>

#include <doctest.h>
#include <fmt/format.h>
#include <json.hpp>

#include "stratkit/cli.hpp"
#include "stratkit/csv.hpp"
#include "stratkit/scoring.hpp"
#include "test_util.hpp"

using namespace stratkit;
using namespace stratkit::cli;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Ten units with observed outcomes from a known linear law.
std::string people_csv(std::size_t n = 10) {
    std::mt19937_64 gen(8);
    std::normal_distribution<double> normal;
    std::string text = "unit_id,age,income,region,note,outcome,treatment\n";
    const char* regions[] = {"north", "south"};
    for (std::size_t i = 0; i < n; ++i) {
        const double age = 20 + static_cast<double>((i * 37) % 45);
        const double income = 30 + 2.5 * static_cast<double>((i * 11) % 17);
        const int d = static_cast<int>(i % 2);
        const double y = 0.1 * age + 0.05 * income + 0.5 * d + normal(gen);
        text += fmt::format("p{:03d},{},{},{},\"likes, commas\",{},{}\n", i, format_number(age),
                            format_number(income), regions[i % 2], format_number(y), d);
    }
    return text;
}

json base_config() {
    return json{
        {"dataset", "people.csv"},
        {"schema",
         json::array({{{"name", "age"}, {"kind", "numeric"}, {"description", "Age"}, {"units", "years"}},
                      {{"name", "income"}, {"kind", "numeric"}, {"description", "Income"}, {"units", "k"}},
                      {{"name", "region"}, {"kind", "categorical"}, {"description", "Region"}},
                      {{"name", "note"}, {"kind", "text"}, {"description", "Free text"}}})},
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
                    {"coefficients", {{"age", {0.1, 0.12}}, {"income", {0.05, 0.05}}}}}},
          {"noise", {{"kind", "mock-noise"}, {"seed", 4}}},
          {"down", {{"kind", "remote"}, {"endpoint", "http://127.0.0.1:9/v1/chat"}, {"model", "m"},
                    {"timeout_seconds", 1}}}}},
        {"backend", "mock"},
        {"parallelism", 2},
        {"allocation", 0.5},
        {"design", {{"method", "sorted-pair"}, {"covariates", {"age", "income"}}, {"strata_variables", {"region"}}}},
        {"seed", 123},
        {"output_dir", "out"},
        {"simulation", {{"reps", 10}, {"n", 200}, {"methods", {"simple", "sorted-pair"}}}},
    };
}

struct Workspace {
    testutil::TempDir dir;
    fs::path config;

    explicit Workspace(const json& cfg, std::size_t n = 10) {
        testutil::spit(dir / "people.csv", people_csv(n));
        write(cfg);
    }
    void write(const json& cfg) {
        config = dir / "config.json";
        testutil::spit(config, cfg.dump(2));
    }
    fs::path out(const std::string& name) const { return dir.path() / "out" / name; }
};

struct Run {
    int code = -1;
    json summary;
    std::string err;
};

Run run(const std::string& command, const fs::path& config, const Overrides& o = {}) {
    std::ostringstream out, err;
    Run r;
    r.code = run_command(command, config, o, out, err);
    r.summary = json::parse(out.str());
    r.err = err.str();
    return r;
}

}  // namespace

TEST_CASE("config errors exit with code 2") {
    testutil::TempDir dir;
    testutil::spit(dir / "bad.json", "{ not json");
    CHECK(run("predict", dir / "bad.json").code == 2);
    CHECK(run("predict", dir / "missing.json").code == 2);

    json cfg = base_config();
    cfg["allocation"] = 1.5;
    testutil::spit(dir / "c.json", cfg.dump());
    CHECK(run("design", dir / "c.json").code == 2);

    cfg = base_config();
    cfg["backend"] = "nope";
    testutil::spit(dir / "c.json", cfg.dump());
    CHECK(run("predict", dir / "c.json").code == 2);

    cfg = base_config();
    cfg["design"]["method"] = "hybrid-pair-7";
    testutil::spit(dir / "c.json", cfg.dump());
    const auto r = run("design", dir / "c.json");
    CHECK(r.code == 2);
    CHECK(r.summary["exit_code"] == 2);
    CHECK(r.summary["error"].get<std::string>().find("ConfigError") != std::string::npos);

    cfg = base_config();
    cfg["simulation"]["dgp"] = {{"dim", 2}, {"score", "magic"}};
    testutil::spit(dir / "c.json", cfg.dump());
    CHECK(run("simulate", dir / "c.json").code == 2);

    cfg = base_config();
    cfg["schema"][0]["kind"] = "ordinal";
    testutil::spit(dir / "c.json", cfg.dump());
    CHECK(run("predict", dir / "c.json").code == 2);
}

TEST_CASE("predict with the mock-linear backend writes the closed-form scores") {
    Workspace w(base_config());
    const auto r = run("predict", w.config);
    REQUIRE(r.code == 0);
    CHECK(r.summary["units"] == 10);
    CHECK(r.summary["network_calls"] == 10);
    CHECK(r.summary["cache_hits"] == 0);

    const std::string text = testutil::slurp(w.out("scores.csv"));
    CHECK(text.rfind("# config_sha256=", 0) == 0);
    const auto scores = scores_from_csv(text);
    REQUIRE(scores.size() == 10);
    const Dataset d = parse_dataset(people_csv(), load_config(w.config).schema);
    for (std::size_t i = 0; i < 10; ++i) {
        const double age = std::get<double>(d.units[i].values[0]);
        const double income = std::get<double>(d.units[i].values[1]);
        const double y0 = 1.0 + 0.1 * age + 0.05 * income;
        const double y1 = 2.0 + 0.12 * age + 0.05 * income;
        CHECK(scores[i].unit_id == d.units[i].unit_id);
        CHECK(scores[i].y0_hat == doctest::Approx(y0).epsilon(1e-12));
        CHECK(scores[i].y1_hat == doctest::Approx(y1).epsilon(1e-12));
        CHECK(scores[i].g_hat == doctest::Approx(y0 + y1).epsilon(1e-12));
    }

    const auto again = run("predict", w.config);
    CHECK(again.code == 0);
    CHECK(again.summary["network_calls"] == 0);
    CHECK(again.summary["cache_hits"] == 10);
    CHECK(testutil::slurp(w.out("scores.csv")) == text);
}

TEST_CASE("unreachable endpoint fails without writing scores") {
    json cfg = base_config();
    Workspace w(cfg);
    Overrides o;
    o.backend = "down";
    const auto r = run("predict", w.config, o);
    CHECK(r.code == 3);
    CHECK(r.summary["failures"] == 10);
    CHECK_FALSE(fs::exists(w.out("scores.csv")));
    CHECK(fs::exists(w.out("predictions.jsonl")));
}

TEST_CASE("design sorted pairs on ten units") {
    Workspace w(base_config());
    REQUIRE(run("predict", w.config).code == 0);
    const auto r = run("design", w.config);
    REQUIRE(r.code == 0);
    const auto strata = csv::parse(testutil::slurp(w.out("strata.csv")));
    const auto assign = csv::parse(testutil::slurp(w.out("assignments.csv")));
    REQUIRE(strata.rows.size() == 10);
    std::map<std::string, int> per_stratum;
    int treated = 0;
    for (const auto& row : assign.rows) {
        treated += std::stoi(row[2]);
        per_stratum[row[1]] += std::stoi(row[2]);
    }
    CHECK(per_stratum.size() == 5);
    for (const auto& [id, t] : per_stratum) CHECK(t == 1);
    CHECK(treated == 5);
    CHECK(assign.comments.size() == 1);
    CHECK(assign.comments[0].find("seed=") != std::string::npos);
}

TEST_CASE("design reruns are byte identical and the seed matters") {
    Workspace w(base_config());
    REQUIRE(run("predict", w.config).code == 0);
    REQUIRE(run("design", w.config).code == 0);
    const std::string first = testutil::slurp(w.out("assignments.csv"));
    const std::string strata = testutil::slurp(w.out("strata.csv"));
    REQUIRE(run("design", w.config).code == 0);
    CHECK(testutil::slurp(w.out("assignments.csv")) == first);
    CHECK(testutil::slurp(w.out("strata.csv")) == strata);
    Overrides o;
    o.seed = 124;
    REQUIRE(run("design", w.config, o).code == 0);
    CHECK(testutil::slurp(w.out("assignments.csv")) != first);
}

TEST_CASE("hybrid design prints the default lambda") {
    json cfg = base_config();
    cfg["design"]["method"] = "hybrid-pair";
    Workspace w(cfg);
    REQUIRE(run("predict", w.config).code == 0);
    const auto r = run("design", w.config);
    REQUIRE(r.code == 0);
    CHECK(r.summary["lambda"].get<double>() == doctest::Approx(1.0 / 3.0));
    CHECK(r.summary.contains("total_cost"));

    cfg["design"]["covariates"] = {"age", "income", "region"};
    w.write(cfg);
    const auto r3 = run("design", w.config);
    REQUIRE(r3.code == 0);
    CHECK(r3.summary["lambda"].get<double>() == doctest::Approx(0.25));
}

TEST_CASE("design without scores points at predict; infeasible allocation exits 4") {
    Workspace w(base_config());
    CHECK(run("design", w.config).code == 2);
    REQUIRE(run("predict", w.config).code == 0);
    json cfg = base_config();
    cfg["allocation"] = 0.3;
    w.write(cfg);
    const auto r = run("design", w.config);
    CHECK(r.code == 4);
    CHECK(r.summary["error"].get<std::string>().find("NonIntegralAllocation") != std::string::npos);

    cfg["design"]["method"] = "categorical";
    w.write(cfg);
    CHECK(run("design", w.config).code == 0);
}

TEST_CASE("odd unit counts report the leftover unit") {
    Workspace w(base_config(), 11);
    REQUIRE(run("predict", w.config).code == 0);
    const auto r = run("design", w.config);
    REQUIRE(r.code == 0);
    CHECK(r.summary["leftover"].is_string());
}

TEST_CASE("simulate smoke run on a synthetic population") {
    json cfg = base_config();
    cfg.erase("dataset");
    cfg["simulation"]["dgp"] = {{"dim", 2}, {"beta", {1.0, 1.0}}, {"noise_sd", 1.0}, {"population", 2000}};
    cfg["simulation"]["methods"] = {"simple", "sorted-pair", "mahalanobis-pair", "hybrid-pair"};
    Workspace w(cfg);
    const auto start = std::chrono::steady_clock::now();
    const auto r = run("simulate", w.config);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    REQUIRE(r.code == 0);
    CHECK(secs < 10.0);
    CHECK(r.summary["theoretical_ratio"].get<double>() == doctest::Approx(1.0 / 3.0));
    CHECK(r.summary["methods"].size() == 4);
    for (const char* f : {"comparison.json", "replications.csv", "report.csv", "report.md"}) {
        CHECK(fs::exists(w.out(f)));
    }
    CHECK(testutil::slurp(w.out("report.md")).rfind("<!-- config_sha256=", 0) == 0);
}

TEST_CASE("simulate on imputed data and report re-render") {
    json cfg = base_config();
    cfg["simulation"]["methods"] = {"simple", "regression", "categorical", "sorted-pair"};
    Workspace w(cfg, 60);
    REQUIRE(run("predict", w.config).code == 0);
    const auto r = run("simulate", w.config);
    REQUIRE(r.code == 0);
    CHECK(r.summary["population"] == 60);
    CHECK(r.summary["failed"].empty());
    const std::string csv_before = testutil::slurp(w.out("report.csv"));
    const std::string md_before = testutil::slurp(w.out("report.md"));
    fs::remove(w.out("report.csv"));
    fs::remove(w.out("report.md"));
    REQUIRE(run("report", w.config).code == 0);
    CHECK(testutil::slurp(w.out("report.csv")) == csv_before);
    CHECK(testutil::slurp(w.out("report.md")) == md_before);

    const std::string reps_before = testutil::slurp(w.out("replications.csv"));
    REQUIRE(run("simulate", w.config).code == 0);
    CHECK(testutil::slurp(w.out("replications.csv")) == reps_before);
    CHECK(testutil::slurp(w.out("report.csv")) == csv_before);
}

TEST_CASE("simulate without outcomes or a DGP fails before doing work") {
    json cfg = base_config();
    Workspace w(cfg);
    testutil::spit(w.dir / "people.csv", "unit_id,age,income,region,note\na,1,2,north,x\nb,3,4,south,y\n");
    const auto r = run("simulate", w.config);
    CHECK(r.code == 2);
    CHECK_FALSE(fs::exists(w.out("comparison.json")));
    CHECK(run("report", w.config).code == 2);
}

TEST_CASE("out override redirects every output") {
    Workspace w(base_config());
    Overrides o;
    o.out = w.dir / "elsewhere";
    REQUIRE(run("predict", w.config, o).code == 0);
    CHECK(fs::exists(w.dir / "elsewhere" / "scores.csv"));
    CHECK_FALSE(fs::exists(w.out("scores.csv")));
}

TEST_CASE("the executable maps argument errors to exit code 2") {
    const std::string exe = STRATKIT_CLI;
    auto status = [](const std::string& cmd) {
        const int raw = std::system((cmd + " >/dev/null 2>&1").c_str());
        return WEXITSTATUS(raw);
    };
    CHECK(status(exe) == 2);
    CHECK(status(exe + " predict") == 2);
    CHECK(status(exe + " frobnicate --config x") == 2);
    CHECK(status(exe + " --help") == 0);
    Workspace w(base_config());
    CHECK(status(exe + " predict --config " + w.config.string()) == 0);
    CHECK(status(exe + " design --config " + w.config.string() + " --seed 5") == 0);
}
