#include "stratkit/scoring.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "stratkit/csv.hpp"

namespace stratkit {

double prognostic_score(const PredictionPair& pair) noexcept { return pair.y1_hat + pair.y0_hat; }

double weighted_prognostic_score(const PredictionPair& pair, double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw Error(Errc::InvalidProbability, fmt::format("p = {} is outside (0, 1)", p));
    }
    return pair.y1_hat / p + pair.y0_hat / (1.0 - p);
}

std::vector<ScoredUnit> score_predictions(std::span<const PredictionPair> pairs, double p) {
    std::vector<ScoredUnit> out;
    out.reserve(pairs.size());
    for (const auto& pair : pairs) {
        const double g = p == 0.5 ? prognostic_score(pair) : weighted_prognostic_score(pair, p);
        out.push_back({pair.unit_id, g, pair.y0_hat, pair.y1_hat});
    }
    return out;
}

namespace {

// Average ranks (1-based), ties share the mean rank.
std::vector<double> ranks(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
        i = j + 1;
    }
    return r;
}

double pearson(std::span<const double> a, std::span<const double> b) {
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) {
        throw Error(Errc::DegenerateVariance, "correlation undefined for a constant vector");
    }
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

}  // namespace

ScoreDiagnostics score_quality(std::span<const double> scores, std::span<const double> reference) {
    if (scores.size() != reference.size()) {
        throw Error(Errc::LengthMismatch, fmt::format("{} scores vs {} reference values",
                                                      scores.size(), reference.size()));
    }
    if (scores.size() < 3) throw Error(Errc::LengthMismatch, "need at least 3 units");
    ScoreDiagnostics d;
    d.pearson = pearson(scores, reference);
    const auto rs = ranks(scores);
    const auto rr = ranks(reference);
    d.spearman = pearson(rs, rr);
    d.r_squared = d.pearson * d.pearson;
    return d;
}

ScoreDiagnostics score_quality(std::span<const ScoredUnit> scores,
                               std::span<const double> reference) {
    std::vector<double> g(scores.size());
    std::transform(scores.begin(), scores.end(), g.begin(), [](const auto& s) { return s.g_hat; });
    return score_quality(std::span<const double>(g), reference);
}

std::string scores_to_csv(std::span<const ScoredUnit> scores, const std::string& header_comment) {
    std::string out;
    if (!header_comment.empty()) out += "# " + header_comment + "\n";
    out += csv::format_row({"unit_id", "y0_hat", "y1_hat", "g_hat"});
    for (const auto& s : scores) {
        out += csv::format_row({s.unit_id, format_number(s.y0_hat), format_number(s.y1_hat),
                                format_number(s.g_hat)});
    }
    return out;
}

std::vector<ScoredUnit> scores_from_csv(std::string_view text) {
    const auto table = csv::parse(text);
    const csv::Row expected{"unit_id", "y0_hat", "y1_hat", "g_hat"};
    if (table.header != expected) {
        throw Error(Errc::MissingColumn, "scores file must have columns unit_id,y0_hat,y1_hat,g_hat");
    }
    auto num = [](const std::string& s, std::size_t row, const char* col) {
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
            throw Error(Errc::TypeMismatch, fmt::format("scores row {}, column '{}': '{}'", row, col, s),
                        col);
        }
        return v;
    };
    std::vector<ScoredUnit> out;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        if (row.size() != 4) throw Error(Errc::TypeMismatch, fmt::format("scores row {} malformed", r + 1));
        out.push_back({row[0], num(row[3], r + 1, "g_hat"), num(row[1], r + 1, "y0_hat"),
                       num(row[2], r + 1, "y1_hat")});
    }
    return out;
}

}  // namespace stratkit
