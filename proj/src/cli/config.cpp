#include <cstdlib>
#include <fstream>
#include <iterator>

#include <fmt/format.h>
#include <json.hpp>

#include "stratkit/cli.hpp"
#include "stratkit/error.hpp"
#include "stratkit/hash.hpp"
#include "stratkit/rng.hpp"

namespace stratkit::cli {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& msg) { throw Error(Errc::ConfigError, msg); }

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        config_error(fmt::format("'{}' has the wrong type", key));
    }
}

const json& require(const json& j, const char* key, const char* where) {
    if (!j.contains(key)) config_error(fmt::format("{} is missing '{}'", where, key));
    return j.at(key);
}

std::string require_string(const json& j, const char* key, const char* where) {
    const json& v = require(j, key, where);
    if (!v.is_string()) config_error(fmt::format("{}.{} must be a string", where, key));
    return v.get<std::string>();
}

std::pair<double, double> pair_of(const json& v, const std::string& what) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
        config_error(what + " must be [control, treatment]");
    }
    return {v[0].get<double>(), v[1].get<double>()};
}

CovariateSchema parse_schema(const json& j) {
    if (!j.is_array() || j.empty()) config_error("'schema' must be a nonempty array");
    std::vector<Variable> vars;
    for (const auto& v : j) {
        Variable var;
        var.name = require_string(v, "name", "schema entry");
        try {
            var.kind = parse_variable_kind(require_string(v, "kind", "schema entry"));
        } catch (const Error& e) {
            config_error(e.what());
        }
        var.description = get_or<std::string>(v, "description", "");
        if (v.contains("units") && !v.at("units").is_null()) var.units = v.at("units").get<std::string>();
        vars.push_back(std::move(var));
    }
    return CovariateSchema(std::move(vars));
}

ExperimentContext parse_context(const json& j) {
    const char* where = "context";
    return ExperimentContext::make(
        require_string(j, "background", where), require_string(j, "outcome_definition", where),
        require_string(j, "outcome_type", where), require_string(j, "control_description", where),
        require_string(j, "treatment_description", where),
        require_string(j, "example_control_value", where),
        require_string(j, "example_treatment_value", where));
}

BackendSpec parse_backend(const std::string& name, const json& j) {
    BackendSpec b;
    b.kind = require_string(j, "kind", ("backend " + name).c_str());
    if (b.kind == "mock-linear") {
        if (j.contains("intercept")) b.intercept = pair_of(j.at("intercept"), name + ".intercept");
        if (j.contains("coefficients")) {
            for (const auto& [var, c] : j.at("coefficients").items()) {
                b.coefficients[var] = pair_of(c, name + ".coefficients." + var);
            }
        }
    } else if (b.kind == "mock-noise") {
        b.noise_seed = get_or<std::uint64_t>(j, "seed", 0);
    } else if (b.kind == "remote") {
        b.endpoint = require_string(j, "endpoint", name.c_str());
        b.model = require_string(j, "model", name.c_str());
        b.api_key_env = get_or<std::string>(j, "api_key_env", b.api_key_env);
        b.timeout_seconds = get_or<int>(j, "timeout_seconds", b.timeout_seconds);
    } else {
        config_error(fmt::format("backend '{}' has unknown kind '{}'", name, b.kind));
    }
    return b;
}

DgpConfig parse_dgp(const json& j) {
    DgpConfig d;
    d.dim = get_or<std::size_t>(j, "dim", d.dim);
    d.alpha = get_or<double>(j, "alpha", d.alpha);
    d.beta = get_or<std::vector<double>>(j, "beta", {});
    d.gamma = get_or<std::vector<double>>(j, "gamma", {});
    d.noise_sd = get_or<double>(j, "noise_sd", d.noise_sd);
    d.population = get_or<std::size_t>(j, "population", d.population);
    if (j.contains("score")) {
        const json& s = j.at("score");
        if (s.is_string()) {
            d.score = s.get<std::string>();
            if (d.score != "oracle" && d.score != "noise") {
                config_error("dgp.score must be \"oracle\", \"noise\" or {\"correlation\": r}");
            }
        } else if (s.is_object() && s.contains("correlation")) {
            d.score = "correlation";
            d.correlation = s.at("correlation").get<double>();
            if (!(d.correlation >= -1.0 && d.correlation <= 1.0)) {
                config_error("dgp.score.correlation must lie in [-1, 1]");
            }
        } else {
            config_error("dgp.score must be \"oracle\", \"noise\" or {\"correlation\": r}");
        }
    }
    if (d.population < 2) config_error("dgp.population must be at least 2");
    if (!(d.noise_sd >= 0.0)) config_error("dgp.noise_sd must be >= 0");
    return d;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

}  // namespace

std::string RunConfig::header() const {
    return fmt::format("config_sha256={} seed={}", config_sha256, rng::seed_fingerprint(seed));
}

DesignSpec RunConfig::design_spec(const std::string& method) const {
    DesignSpec spec = DesignSpec::parse(method);
    if (spec.method == DesignMethod::HybridPair && !spec.lambda) spec.lambda = design.lambda;
    spec.ridge_epsilon = design.ridge_epsilon;
    return spec;
}

RunConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir,
                       const Overrides& overrides) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        config_error(fmt::format("config is not valid JSON: {}", e.what()));
    }
    if (!j.is_object()) config_error("config must be a JSON object");

    RunConfig c;
    c.config_sha256 = sha256_hex(json_text);
    try {
        if (j.contains("dataset")) c.dataset = resolve(base_dir, j.at("dataset").get<std::string>());
        if (j.contains("schema")) c.schema = parse_schema(j.at("schema"));
        if (j.contains("context")) c.context = parse_context(j.at("context"));
        if (j.contains("backends")) {
            for (const auto& [name, b] : j.at("backends").items()) c.backends[name] = parse_backend(name, b);
        }
        c.backend = get_or<std::string>(j, "backend", "");
        c.parallelism = get_or<std::size_t>(j, "parallelism", c.parallelism);
        c.allocation = get_or<double>(j, "allocation", c.allocation);
        if (j.contains("prompt_template")) {
            c.prompt_template = resolve(base_dir, j.at("prompt_template").get<std::string>());
        }
        if (j.contains("design")) {
            const json& d = j.at("design");
            c.design.method = get_or<std::string>(d, "method", c.design.method);
            if (d.contains("lambda") && !d.at("lambda").is_null()) c.design.lambda = d.at("lambda").get<double>();
            c.design.ridge_epsilon = get_or<double>(d, "ridge_epsilon", c.design.ridge_epsilon);
            c.design.covariates = get_or<std::vector<std::string>>(d, "covariates", {});
            c.design.strata_variables = get_or<std::vector<std::string>>(d, "strata_variables", {});
        }
        c.seed = get_or<std::uint64_t>(j, "seed", 0);
        c.output_dir = resolve(base_dir, get_or<std::string>(j, "output_dir", "out"));
        if (j.contains("max_text_chars")) c.max_text_chars = j.at("max_text_chars").get<std::size_t>();
        if (j.contains("simulation")) {
            const json& s = j.at("simulation");
            c.simulation.reps = get_or<std::size_t>(s, "reps", c.simulation.reps);
            if (s.contains("n") && !s.at("n").is_null()) c.simulation.n = s.at("n").get<std::size_t>();
            c.simulation.threads = get_or<int>(s, "threads", c.simulation.threads);
            c.simulation.methods = get_or<std::vector<std::string>>(s, "methods", c.simulation.methods);
            c.simulation.baselines = get_or<std::vector<std::string>>(s, "baselines", c.simulation.baselines);
            c.simulation.bootstrap_resamples =
                get_or<std::size_t>(s, "bootstrap_resamples", c.simulation.bootstrap_resamples);
            if (s.contains("dgp")) c.simulation.dgp = parse_dgp(s.at("dgp"));
        }
    } catch (const json::exception& e) {
        config_error(fmt::format("config has a field of the wrong type: {}", e.what()));
    } catch (const Error& e) {
        if (e.code() == Errc::ConfigError) throw;
        config_error(e.what());
    }

    if (overrides.seed) c.seed = *overrides.seed;
    if (overrides.out) c.output_dir = *overrides.out;
    if (overrides.backend) c.backend = *overrides.backend;

    if (!(c.allocation > 0.0 && c.allocation < 1.0)) config_error("allocation must lie in (0, 1)");
    if (c.parallelism == 0) config_error("parallelism must be at least 1");
    if (c.simulation.reps == 0) config_error("simulation.reps must be at least 1");
    if (!c.backend.empty() && !c.backends.contains(c.backend)) {
        config_error(fmt::format("backend '{}' is not defined", c.backend));
    }
    try {
        c.design_spec(c.design.method);
        for (const auto& m : c.simulation.methods) c.design_spec(m);
        if (c.design.lambda && !(*c.design.lambda >= 0.0 && *c.design.lambda <= 1.0)) {
            config_error("design.lambda must lie in [0, 1]");
        }
    } catch (const Error& e) {
        if (e.code() == Errc::ConfigError) throw;
        config_error(e.what());
    }
    return c;
}

RunConfig load_config(const std::filesystem::path& path, const Overrides& overrides) {
    std::ifstream in(path, std::ios::binary);
    if (!in) config_error("cannot read config " + path.string());
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    RunConfig c = parse_config(text, path.parent_path(), overrides);
    c.config_path = path;
    return c;
}

std::unique_ptr<Backend> make_backend(const RunConfig& config) {
    if (config.backend.empty()) config_error("no backend selected");
    const BackendSpec& b = config.backends.at(config.backend);
    if (b.kind == "mock-linear") return std::make_unique<MockLinearBackend>(b.intercept, b.coefficients);
    if (b.kind == "mock-noise") return std::make_unique<MockNoiseBackend>(b.noise_seed);
    RemoteBackendConfig rc;
    rc.endpoint = b.endpoint;
    rc.model = b.model;
    if (const char* key = std::getenv(b.api_key_env.c_str())) rc.api_key = key;
    rc.timeout = std::chrono::seconds(b.timeout_seconds);
    return std::make_unique<RemoteBackend>(std::move(rc));
}

}  // namespace stratkit::cli
