#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "stratkit/dataset.hpp"
#include "stratkit/design.hpp"
#include "stratkit/predictor.hpp"
#include "stratkit/prompt.hpp"

namespace stratkit::cli {

enum ExitCode : int {
    Success = 0,
    Failure = 1,
    ConfigErrorExit = 2,
    BackendErrorExit = 3,
    DesignInfeasibleExit = 4,
};

struct BackendSpec {
    std::string kind;  // mock-linear | mock-noise | remote
    // mock-linear
    std::pair<double, double> intercept{0.0, 0.0};
    MockLinearBackend::Coefficients coefficients;
    // mock-noise
    std::uint64_t noise_seed = 0;
    // remote
    std::string endpoint;
    std::string model;
    std::string api_key_env = "STRATKIT_API_KEY";
    int timeout_seconds = 120;
};

struct DgpConfig {
    std::size_t dim = 1;
    double alpha = 0.0;
    std::vector<double> beta;
    std::vector<double> gamma;
    double noise_sd = 1.0;
    std::size_t population = 20000;
    std::string score = "oracle";  // oracle | noise | correlation
    double correlation = 1.0;
};

struct SimulationConfig {
    std::size_t reps = 3000;
    std::optional<std::size_t> n;
    int threads = 0;
    std::vector<std::string> methods{"simple", "sorted-pair"};
    std::vector<std::string> baselines{"simple"};
    std::size_t bootstrap_resamples = 1000;
    std::optional<DgpConfig> dgp;
};

struct DesignConfig {
    std::string method = "sorted-pair";
    std::optional<double> lambda;
    double ridge_epsilon = 1e-8;
    std::vector<std::string> covariates;
    std::vector<std::string> strata_variables;
};

struct RunConfig {
    std::filesystem::path config_path;
    std::string config_sha256;

    std::optional<std::filesystem::path> dataset;
    CovariateSchema schema;
    std::optional<ExperimentContext> context;
    std::map<std::string, BackendSpec> backends;
    std::string backend;
    std::size_t parallelism = 4;
    double allocation = 0.5;
    std::optional<std::filesystem::path> prompt_template;
    DesignConfig design;
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "out";
    std::optional<std::size_t> max_text_chars;
    SimulationConfig simulation;

    /// "config_sha256=<hex> seed=<fingerprint>"
    std::string header() const;
    /// DesignSpec for `method` with the configured lambda and ridge.
    DesignSpec design_spec(const std::string& method) const;
};

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> out;
    std::optional<std::string> backend;
};

/// Relative paths resolve against the config file's directory.
RunConfig load_config(const std::filesystem::path& path, const Overrides& overrides = {});
RunConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir,
                       const Overrides& overrides = {});

/// Builds the selected backend; the API key of a remote backend is read from
/// its environment variable.
std::unique_ptr<Backend> make_backend(const RunConfig& config);

// Each command writes its JSON summary to `out` and returns an exit code.
int cmd_predict(const RunConfig& config, std::ostream& out);
int cmd_design(const RunConfig& config, std::ostream& out);
int cmd_simulate(const RunConfig& config, std::ostream& out);
int cmd_report(const RunConfig& config, std::ostream& out);

/// Exit code for an error raised inside a command.
int exit_code_for(const Error& error);

/// Loads the config and dispatches; errors become a JSON summary and an exit code.
int run_command(const std::string& command, const std::filesystem::path& config_path,
                const Overrides& overrides, std::ostream& out, std::ostream& err);

}  // namespace stratkit::cli
