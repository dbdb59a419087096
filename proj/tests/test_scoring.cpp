#include <cmath>
#include <random>

#include <doctest.h>

#include "stratkit/rng.hpp"
#include "stratkit/scoring.hpp"
#include "stratkit/stratification.hpp"
#include "test_util.hpp"

using namespace stratkit;

namespace {
PredictionPair pp(double y0, double y1, std::string id = "u") { return {std::move(id), y0, y1, "t", {}}; }
}  // namespace

TEST_CASE("prognostic score is the sum of the two predictions") {
    CHECK(prognostic_score(pp(2, 3)) == 5.0);
    CHECK(prognostic_score(pp(0, 0)) == 0.0);
    CHECK(prognostic_score(pp(-1.5, 1.5)) == 0.0);
}

TEST_CASE("weighted score") {
    CHECK(weighted_prognostic_score(pp(2, 3), 0.5) == 10.0);
    CHECK(weighted_prognostic_score(pp(2, 3), 0.25) == doctest::Approx(3 / 0.25 + 2 / 0.75).epsilon(1e-15));
    CHECK_ERRC(weighted_prognostic_score(pp(2, 3), 0.0), Errc::InvalidProbability);
    CHECK_ERRC(weighted_prognostic_score(pp(2, 3), 1.0), Errc::InvalidProbability);
    CHECK_ERRC(weighted_prognostic_score(pp(2, 3), std::nan("")), Errc::InvalidProbability);

    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 1000; ++i) {
        const auto p = pp(u(gen), u(gen));
        CHECK(weighted_prognostic_score(p, 0.5) == 2.0 * prognostic_score(p));
    }
}

TEST_CASE("score_predictions picks the formula from p") {
    const std::vector<PredictionPair> pairs{pp(1, 2, "a"), pp(3, 5, "b")};
    const auto plain = score_predictions(pairs);
    CHECK(plain[0] == ScoredUnit{"a", 3.0, 1.0, 2.0});
    CHECK(plain[1].g_hat == 8.0);
    const auto w = score_predictions(pairs, 0.25);
    CHECK(w[0].g_hat == weighted_prognostic_score(pairs[0], 0.25));
}

TEST_CASE("score_quality") {
    const std::vector<double> s{1, 2, 3, 4, 5.5};
    std::vector<double> neg;
    for (double v : s) neg.push_back(-v);
    const auto same = score_quality(std::span<const double>(s), s);
    CHECK(same.pearson == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(same.spearman == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(same.r_squared == doctest::Approx(1.0).epsilon(1e-12));
    const auto flip = score_quality(std::span<const double>(s), neg);
    CHECK(flip.pearson == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(flip.spearman == doctest::Approx(-1.0).epsilon(1e-12));

    std::vector<double> a(10000), b(10000);
    auto gen = rng::stream(2024, rng::Domain::Score, 0);
    std::normal_distribution<double> normal;
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = normal(gen);
        b[i] = normal(gen);
    }
    CHECK(std::abs(score_quality(std::span<const double>(a), b).pearson) < 0.05);

    const std::vector<double> two{1, 2};
    const std::vector<double> flat{3, 3, 3};
    const std::vector<double> three{1, 2, 3};
    CHECK_ERRC(score_quality(std::span<const double>(two), two), Errc::LengthMismatch);
    CHECK_ERRC(score_quality(std::span<const double>(three), two), Errc::LengthMismatch);
    CHECK_ERRC(score_quality(std::span<const double>(flat), three), Errc::DegenerateVariance);
    CHECK_ERRC(score_quality(std::span<const double>(three), flat), Errc::DegenerateVariance);
}

TEST_CASE("strictly increasing transforms keep the sorted order") {
    std::mt19937_64 gen(11);
    std::normal_distribution<double> normal;
    std::vector<double> g(200);
    for (auto& v : g) v = normal(gen);
    g[7] = g[3];
    std::vector<double> t;
    for (double v : g) t.push_back(std::exp(v) * 3.0 + 1.0);
    CHECK(score_order(g) == score_order(t));
    CHECK(sorted_block_strata(g, 2).strata == sorted_block_strata(t, 2).strata);
}

TEST_CASE("scores csv round trip") {
    const std::vector<ScoredUnit> units{{"a,b", 0.1 + 0.2, 0.1, 0.2}, {"c", -1e-300, 1e300, -2.5}};
    const std::string text = scores_to_csv(units, "run");
    CHECK(text.rfind("# run\nunit_id,y0_hat,y1_hat,g_hat\n", 0) == 0);
    CHECK(scores_from_csv(text) == units);
}
