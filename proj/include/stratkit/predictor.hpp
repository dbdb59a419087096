#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "stratkit/dataset.hpp"
#include "stratkit/error.hpp"
#include "stratkit/prompt.hpp"

namespace stratkit {

struct PredictionPair {
    std::string unit_id;
    double y0_hat = 0.0;
    double y1_hat = 0.0;
    std::string backend_tag;
    std::optional<std::string> raw_response;

    friend bool operator==(const PredictionPair&, const PredictionPair&) = default;
};

struct BackendRequest {
    const UnitRecord& unit;
    const CovariateSchema& schema;
    std::string_view prompt;
};

/// A source of completions. Implementations must be safe to call from
/// several threads at once. Transport problems are reported by throwing
/// Error(Errc::BackendUnavailable).
class Backend {
public:
    virtual ~Backend() = default;

    /// Identifies the backend and every parameter that changes its answers.
    virtual std::string tag() const = 0;
    virtual std::string model_id() const = 0;
    virtual std::string complete(const BackendRequest& request) = 0;

    std::uint64_t calls() const noexcept { return calls_.load(); }

protected:
    void count_call() noexcept { calls_.fetch_add(1); }

private:
    std::atomic<std::uint64_t> calls_{0};
};

/// Y(d) = intercept[d] + sum_j coef_j[d] * x_j over numeric covariates.
class MockLinearBackend final : public Backend {
public:
    using Coefficients = std::map<std::string, std::pair<double, double>>;

    MockLinearBackend(std::pair<double, double> intercept, Coefficients coefficients);

    std::string tag() const override;
    std::string model_id() const override { return "mock"; }
    std::string complete(const BackendRequest& request) override;

    /// Closed form used both by complete() and as a test oracle.
    std::pair<double, double> predict(const UnitRecord& unit, const CovariateSchema& schema) const;

private:
    std::pair<double, double> intercept_;
    Coefficients coefficients_;
};

/// Independent standard-normal predictions keyed by (seed, unit_id).
class MockNoiseBackend final : public Backend {
public:
    explicit MockNoiseBackend(std::uint64_t seed) : seed_(seed) {}

    std::string tag() const override;
    std::string model_id() const override { return "mock"; }
    std::string complete(const BackendRequest& request) override;

private:
    std::uint64_t seed_;
};

struct RemoteBackendConfig {
    std::string endpoint;  // e.g. https://api.example.com/v1/chat/completions
    std::string model;
    std::string api_key;   // sent as a bearer token when nonempty
    double temperature = 0.0;
    std::chrono::seconds timeout{120};
};

/// Chat-completion style HTTP backend: POSTs
/// {"model", "temperature", "messages": [{"role": "user", "content": prompt}]}
/// and reads the completion text from the response.
class RemoteBackend final : public Backend {
public:
    explicit RemoteBackend(RemoteBackendConfig config);

    std::string tag() const override;
    std::string model_id() const override { return config_.model; }
    std::string complete(const BackendRequest& request) override;

    static std::string request_body(const RemoteBackendConfig& config, std::string_view prompt);
    static std::string extract_completion(std::string_view response_body);

private:
    RemoteBackendConfig config_;
    std::string scheme_host_port_;
    std::string path_;
};

std::string cache_key(std::string_view prompt, std::string_view backend_tag,
                      std::string_view model_id);

/// Append-only prediction cache, optionally persisted as JSON Lines.
class PredictionCache {
public:
    PredictionCache() = default;
    explicit PredictionCache(const std::filesystem::path& path);

    std::optional<PredictionPair> find(const std::string& key) const;
    /// No-op when the key is already present.
    void insert(const std::string& key, const PredictionPair& pair);
    std::size_t size() const;

private:
    mutable std::mutex mutex_;
    std::unordered_map<std::string, PredictionPair> entries_;
    std::optional<std::filesystem::path> path_;
    std::ofstream out_;
};

/// Audit trail for raw responses that could not be parsed.
class FailureLog {
public:
    FailureLog() = default;
    explicit FailureLog(const std::filesystem::path& path);

    void record(std::string_view unit_id, int attempt, std::string_view error,
                std::string_view raw_response);
    std::size_t size() const;

private:
    mutable std::mutex mutex_;
    std::size_t count_ = 0;
    std::ofstream out_;
};

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds base_delay{500};
};

struct PredictOptions {
    RetryPolicy retry;
    const PromptTemplate* prompt_template = nullptr;  // standard() when null
    FailureLog* failures = nullptr;
};

struct PredictStats {
    std::size_t units = 0;
    std::size_t cache_hits = 0;
    std::uint64_t backend_calls = 0;
    std::size_t failures = 0;
};

/// Raised by predict_dataset when any unit fails after retries.
class PredictionFailure : public Error {
public:
    explicit PredictionFailure(std::vector<std::pair<std::string, std::string>> failures);
    const std::vector<std::pair<std::string, std::string>>& failures() const noexcept {
        return failures_;
    }
    /// True when every failure was a transport problem.
    bool transport_only() const noexcept;

private:
    std::vector<std::pair<std::string, std::string>> failures_;
};

PredictionPair predict_unit(const UnitRecord& unit, const CovariateSchema& schema,
                            const ExperimentContext& ctx, Backend& backend,
                            PredictionCache& cache, const PredictOptions& options = {},
                            bool* cache_hit = nullptr);

/// One pair per unit in dataset order. At most `parallelism` requests are in
/// flight; successful units are cached even when others fail.
std::vector<PredictionPair> predict_dataset(const Dataset& dataset, const ExperimentContext& ctx,
                                            Backend& backend, PredictionCache& cache,
                                            std::size_t parallelism,
                                            const PredictOptions& options = {},
                                            PredictStats* stats = nullptr);

}  // namespace stratkit
