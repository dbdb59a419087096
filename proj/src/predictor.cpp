#include "stratkit/predictor.hpp"

#include <algorithm>
#include <random>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>

#include "stratkit/hash.hpp"
#include "stratkit/rng.hpp"

namespace stratkit {

using nlohmann::json;

namespace {

std::uint64_t hash64(std::string_view text) {
    const std::string hex = sha256_hex(text);
    return std::stoull(hex.substr(0, 16), nullptr, 16);
}

}  // namespace

// ---------------------------------------------------------------------------
// Mock backends

MockLinearBackend::MockLinearBackend(std::pair<double, double> intercept,
                                     Coefficients coefficients)
    : intercept_(intercept), coefficients_(std::move(coefficients)) {}

std::string MockLinearBackend::tag() const {
    std::string canon = fmt::format("{}|{}", format_number(intercept_.first),
                                    format_number(intercept_.second));
    for (const auto& [name, c] : coefficients_) {
        canon += fmt::format("|{}={},{}", name, format_number(c.first), format_number(c.second));
    }
    return "mock-linear:" + sha256_hex(canon).substr(0, 16);
}

std::pair<double, double> MockLinearBackend::predict(const UnitRecord& unit,
                                                     const CovariateSchema& schema) const {
    double y0 = intercept_.first;
    double y1 = intercept_.second;
    for (const auto& [name, c] : coefficients_) {
        auto idx = schema.index_of(name);
        if (!idx) throw Error(Errc::ConfigError, "mock-linear coefficient for unknown '" + name + "'", name);
        const double* x = std::get_if<double>(&unit.values.at(*idx));
        if (!x) {
            throw Error(Errc::ConfigError, "mock-linear coefficient on non-numeric '" + name + "'",
                        name);
        }
        y0 += c.first * *x;
        y1 += c.second * *x;
    }
    return {y0, y1};
}

std::string MockLinearBackend::complete(const BackendRequest& request) {
    count_call();
    auto [y0, y1] = predict(request.unit, request.schema);
    return format_prediction_response(y0, y1);
}

std::string MockNoiseBackend::tag() const { return fmt::format("mock-noise:{}", seed_); }

std::string MockNoiseBackend::complete(const BackendRequest& request) {
    count_call();
    auto gen = rng::stream(seed_, rng::Domain::MockNoise, hash64(request.unit.unit_id));
    std::normal_distribution<double> normal;
    const double y0 = normal(gen);
    const double y1 = normal(gen);
    return format_prediction_response(y0, y1);
}

// ---------------------------------------------------------------------------
// Remote backend

RemoteBackend::RemoteBackend(RemoteBackendConfig config) : config_(std::move(config)) {
    const std::string& url = config_.endpoint;
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw Error(Errc::ConfigError, "endpoint must be an absolute http(s) URL", url);
    }
    const auto path_start = url.find('/', scheme_end + 3);
    scheme_host_port_ = url.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
    if (config_.model.empty()) throw Error(Errc::ConfigError, "remote backend needs a model id");
}

std::string RemoteBackend::tag() const { return "remote:" + config_.endpoint; }

std::string RemoteBackend::request_body(const RemoteBackendConfig& config,
                                        std::string_view prompt) {
    json body = {
        {"model", config.model},
        {"temperature", config.temperature},
        {"messages", json::array({{{"role", "user"}, {"content", std::string(prompt)}}})},
    };
    return body.dump();
}

std::string RemoteBackend::extract_completion(std::string_view response_body) {
    json doc = json::parse(response_body, nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded()) {
        throw Error(Errc::BackendUnavailable, "response body is not JSON");
    }
    if (doc.contains("choices") && doc["choices"].is_array() && !doc["choices"].empty()) {
        const json& choice = doc["choices"][0];
        if (choice.contains("message") && choice["message"].contains("content") &&
            choice["message"]["content"].is_string()) {
            return choice["message"]["content"].get<std::string>();
        }
        if (choice.contains("text") && choice["text"].is_string()) {
            return choice["text"].get<std::string>();
        }
    }
    for (const char* key : {"completion", "output_text", "text", "content"}) {
        if (doc.contains(key) && doc[key].is_string()) return doc[key].get<std::string>();
    }
    throw Error(Errc::BackendUnavailable, "response JSON has no completion text");
}

std::string RemoteBackend::complete(const BackendRequest& request) {
    count_call();
    httplib::Client client(scheme_host_port_);
    const auto secs = static_cast<time_t>(config_.timeout.count());
    client.set_connection_timeout(secs, 0);
    client.set_read_timeout(secs, 0);
    client.set_write_timeout(secs, 0);
    httplib::Headers headers;
    if (!config_.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + config_.api_key);
    }
    auto res = client.Post(path_, headers, request_body(config_, request.prompt),
                           "application/json");
    if (!res) {
        throw Error(Errc::BackendUnavailable,
                    fmt::format("POST {} failed: {}", config_.endpoint,
                                httplib::to_string(res.error())));
    }
    if (res->status < 200 || res->status >= 300) {
        throw Error(Errc::BackendUnavailable,
                    fmt::format("POST {} returned HTTP {}", config_.endpoint, res->status));
    }
    return extract_completion(res->body);
}

// ---------------------------------------------------------------------------
// Cache

std::string cache_key(std::string_view prompt, std::string_view backend_tag,
                      std::string_view model_id) {
    std::string material;
    material.reserve(prompt.size() + backend_tag.size() + model_id.size() + 2);
    material.append(prompt);
    material.push_back('\x1f');
    material.append(backend_tag);
    material.push_back('\x1f');
    material.append(model_id);
    return sha256_hex(material);
}

PredictionCache::PredictionCache(const std::filesystem::path& path) : path_(path) {
    if (std::filesystem::exists(path)) {
        std::ifstream in(path);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            json doc = json::parse(line, nullptr, false);
            // A torn final line from an interrupted run is skipped.
            if (doc.is_discarded()) continue;
            try {
                PredictionPair pair;
                pair.unit_id = doc.at("unit_id").get<std::string>();
                pair.y0_hat = doc.at("y0_hat").get<double>();
                pair.y1_hat = doc.at("y1_hat").get<double>();
                pair.backend_tag = doc.at("backend_tag").get<std::string>();
                if (doc.contains("raw_response") && doc["raw_response"].is_string()) {
                    pair.raw_response = doc["raw_response"].get<std::string>();
                }
                entries_.emplace(doc.at("key").get<std::string>(), std::move(pair));
            } catch (const json::exception& e) {
                throw Error(Errc::IoFailure,
                            fmt::format("{}:{}: bad cache entry: {}", path.string(), line_no,
                                        e.what()));
            }
        }
    } else if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    out_.open(path, std::ios::app);
    if (!out_) throw Error(Errc::IoFailure, "cannot open cache " + path.string(), path.string());
}

std::optional<PredictionPair> PredictionCache::find(const std::string& key) const {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void PredictionCache::insert(const std::string& key, const PredictionPair& pair) {
    std::lock_guard lock(mutex_);
    if (!entries_.emplace(key, pair).second) return;
    if (out_.is_open()) {
        json doc = {{"key", key},
                    {"unit_id", pair.unit_id},
                    {"y0_hat", pair.y0_hat},
                    {"y1_hat", pair.y1_hat},
                    {"backend_tag", pair.backend_tag}};
        if (pair.raw_response) doc["raw_response"] = *pair.raw_response;
        out_ << doc.dump() << '\n';
        out_.flush();
    }
}

std::size_t PredictionCache::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

FailureLog::FailureLog(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    out_.open(path, std::ios::app);
    if (!out_) throw Error(Errc::IoFailure, "cannot open " + path.string(), path.string());
}

void FailureLog::record(std::string_view unit_id, int attempt, std::string_view error,
                        std::string_view raw_response) {
    std::lock_guard lock(mutex_);
    ++count_;
    if (!out_.is_open()) return;
    json doc = {{"unit_id", std::string(unit_id)},
                {"attempt", attempt},
                {"error", std::string(error)},
                {"raw_response", std::string(raw_response)}};
    out_ << doc.dump() << '\n';
    out_.flush();
}

std::size_t FailureLog::size() const {
    std::lock_guard lock(mutex_);
    return count_;
}

// ---------------------------------------------------------------------------
// Prediction

PredictionFailure::PredictionFailure(std::vector<std::pair<std::string, std::string>> failures)
    : Error(Errc::PredictionFailed,
            [&] {
                std::string ids;
                for (const auto& [id, _] : failures) ids += (ids.empty() ? "" : ", ") + id;
                return fmt::format("{} unit(s) failed: {}", failures.size(), ids);
            }(),
            failures.empty() ? std::string() : failures.front().first),
      failures_(std::move(failures)) {}

bool PredictionFailure::transport_only() const noexcept {
    return std::all_of(failures_.begin(), failures_.end(), [](const auto& f) {
        return f.second.starts_with(to_string(Errc::BackendUnavailable));
    });
}

PredictionPair predict_unit(const UnitRecord& unit, const CovariateSchema& schema,
                            const ExperimentContext& ctx, Backend& backend,
                            PredictionCache& cache, const PredictOptions& options,
                            bool* cache_hit) {
    const PromptTemplate& tmpl =
        options.prompt_template ? *options.prompt_template : PromptTemplate::standard();
    const std::string prompt = render_prompt(unit, schema, ctx, tmpl);
    const std::string tag = backend.tag();
    const std::string key = cache_key(prompt, tag, backend.model_id());

    if (auto hit = cache.find(key)) {
        if (cache_hit) *cache_hit = true;
        return *hit;
    }
    if (cache_hit) *cache_hit = false;

    const int attempts = std::max(1, options.retry.max_attempts);
    std::string last_error;
    Errc last_code = Errc::BackendUnavailable;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        if (attempt > 1 && options.retry.base_delay.count() > 0) {
            std::this_thread::sleep_for(options.retry.base_delay * (1 << (attempt - 2)));
        }
        std::string raw;
        try {
            raw = backend.complete(BackendRequest{unit, schema, prompt});
        } catch (const Error& e) {
            if (e.code() != Errc::BackendUnavailable) throw;
            last_code = Errc::BackendUnavailable;
            last_error = e.what();
            continue;
        }
        try {
            const ParsedPrediction parsed = parse_prediction(raw);
            PredictionPair pair{unit.unit_id, parsed.control, parsed.treatment, tag, raw};
            cache.insert(key, pair);
            return pair;
        } catch (const Error& e) {
            last_code = Errc::ParseFailure;
            last_error = e.what();
            if (options.failures) options.failures->record(unit.unit_id, attempt, e.what(), raw);
        }
    }
    throw Error(last_code,
                fmt::format("unit '{}' failed after {} attempt(s): {}", unit.unit_id, attempts,
                            last_error),
                unit.unit_id);
}

std::vector<PredictionPair> predict_dataset(const Dataset& dataset, const ExperimentContext& ctx,
                                            Backend& backend, PredictionCache& cache,
                                            std::size_t parallelism,
                                            const PredictOptions& options, PredictStats* stats) {
    if (parallelism == 0) throw Error(Errc::InvalidArgument, "parallelism must be >= 1");
    const std::size_t n = dataset.units.size();
    const std::uint64_t calls_before = backend.calls();

    std::vector<std::optional<PredictionPair>> results(n);
    std::vector<std::string> errors(n);
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> hits{0};

    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
            try {
                bool hit = false;
                results[i] = predict_unit(dataset.units[i], dataset.schema, ctx, backend, cache,
                                          options, &hit);
                if (hit) hits.fetch_add(1);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };

    const std::size_t workers = std::min(parallelism, std::max<std::size_t>(n, 1));
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    }

    std::vector<std::pair<std::string, std::string>> failed;
    std::vector<PredictionPair> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (results[i]) {
            out.push_back(std::move(*results[i]));
        } else {
            failed.emplace_back(dataset.units[i].unit_id, errors[i]);
        }
    }
    if (stats) {
        stats->units = n;
        stats->cache_hits = hits.load();
        stats->backend_calls = backend.calls() - calls_before;
        stats->failures = failed.size();
    }
    if (!failed.empty()) throw PredictionFailure(std::move(failed));
    return out;
}

}  // namespace stratkit
