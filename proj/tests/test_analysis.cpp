#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

#include "wmlab/analysis.hpp"
#include "wmlab/lm.hpp"
#include "wmlab/watermark.hpp"

using namespace wmlab;

namespace {

// Flat logits make every green mass computable by hand: softmax gives each
// token exactly 1/V, so the green mass is |G|/V regardless of context.
struct UniformModel : Model {
    Vocabulary v;
    explicit UniformModel(int size) { v.size = size; }
    const Vocabulary& vocab() const override { return v; }
    LogitVector logits(std::span<const TokenId>) const override {
        return LogitVector(v.size, 0.0);
    }
};

WatermarkScheme unigram_scheme() {
    WatermarkScheme s;
    s.kind = SchemeKind::unigram;
    s.key = 42;
    s.p0 = 0.5;
    s.gamma = 2.0;
    s.tau = 4.0;
    return s;
}

} // namespace

TEST_CASE("detection bound matches frozen values") {
    CHECK(detection_bound(230, 0.1) ==
          doctest::Approx(0.31663676937905316).epsilon(1e-12));
    CHECK(detection_bound(230, 0.2) ==
          doctest::Approx(0.010051835744633576).epsilon(1e-12));
    CHECK(detection_bound(5, 0.0) == 1.0);
    CHECK(detection_bound(1, 2.0) == doctest::Approx(std::exp(-2.0)).epsilon(1e-12));

    CHECK_THROWS_AS(detection_bound(0, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(detection_bound(10, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(detection_bound(10, std::nan("")), std::invalid_argument);
}

TEST_CASE("uniform model has green mass exactly one half") {
    UniformModel model(256);
    const WatermarkScheme s = unigram_scheme();
    const TokenSequence text = {3, 7, 250, 0, 128};

    // 128 green tokens at probability 1/256 each; both are powers of two,
    // so the sum is representable and the average is exact.
    const double p_bar =
        average_green_probability(model, s, {}, text, {}, 0.0, 0.7);
    CHECK(p_bar == 0.5);
}

TEST_CASE("biasing the true green set down shifts the mass by the logistic closed form") {
    UniformModel model(256);
    const WatermarkScheme s = unigram_scheme();
    const std::set<TokenId> greens = green_set(s, 256, {});
    REQUIRE(greens.size() == 128);
    const TokenSequence text = {10, 20, 30};

    // With flat logits and the bias aimed exactly at the green half, the
    // green mass is 1 / (1 + exp(-beta / T)) independent of position.
    const double beta = -2.0, temp = 0.7;
    const double expected = 1.0 / (1.0 + std::exp(-beta / temp));
    const double p_bar =
        average_green_probability(model, s, {}, text, greens, beta, temp);
    CHECK(p_bar == doctest::Approx(expected).epsilon(1e-12));
    CHECK(p_bar == doctest::Approx(0.05431326613264062).epsilon(1e-12));
}

TEST_CASE("uniform vanilla per-sample bound is exp(-2) at any length") {
    UniformModel model(256);
    const WatermarkScheme s = unigram_scheme();

    // p_bar = p0 makes delta_hat = tau * sqrt(p0 (1-p0) / n), so
    // n * delta_hat^2 = tau^2 p0 (1-p0) = 4 for every n.
    for (int len : {16, 50, 230}) {
        TokenSequence text;
        for (int i = 0; i < len; ++i) text.push_back(i % 256);
        const BoundReport r =
            per_sample_bound(model, s, {}, text, {}, 0.0, 0.7, "t");
        CHECK(r.id == "t");
        CHECK(r.n == len);
        CHECK(r.p_bar == 0.5);
        CHECK(r.p_tau == doctest::Approx(p_tau(0.5, 4.0, len)).epsilon(1e-15));
        CHECK(r.delta_hat == doctest::Approx(r.p_tau - 0.5).epsilon(1e-15));
        CHECK(r.bound == doctest::Approx(std::exp(-2.0)).epsilon(1e-12));
    }
}

TEST_CASE("strong bias on the true green set drives the bound toward zero") {
    UniformModel model(256);
    const WatermarkScheme s = unigram_scheme();
    const std::set<TokenId> greens = green_set(s, 256, {});
    TokenSequence text;
    for (int i = 0; i < 200; ++i) text.push_back((i * 7) % 256);

    const BoundReport r =
        per_sample_bound(model, s, {}, text, greens, -8.0, 0.7);
    CHECK(r.p_bar < 2e-5);
    CHECK(r.delta_hat > 0.6);
    CHECK(r.bound < 1e-9);
}

TEST_CASE("kgw skips the position with no previous token") {
    UniformModel model(64);
    WatermarkScheme s = unigram_scheme();
    s.kind = SchemeKind::kgw;

    const TokenSequence text = {5, 9};
    const BoundReport no_prompt = per_sample_bound(model, s, {}, text, {}, 0.0, 1.0);
    CHECK(no_prompt.n == 1);
    CHECK(no_prompt.p_tau == doctest::Approx(p_tau(0.5, 4.0, 1)).epsilon(1e-15));

    const TokenSequence prompt = {1};
    const BoundReport with_prompt =
        per_sample_bound(model, s, prompt, text, {}, 0.0, 1.0);
    CHECK(with_prompt.n == 2);

    // A single token with no context has no scorable position at all.
    const TokenSequence lone = {5};
    CHECK_THROWS_AS(average_green_probability(model, s, {}, lone, {}, 0.0, 1.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(
        average_green_probability(model, s, {}, TokenSequence{}, {}, 0.0, 1.0),
        std::invalid_argument);
}

TEST_CASE("proxy robustness compares suppression against the shrunk threshold") {
    // Dyadic constants so the inclusive boundary is exact: p_tau = 0.625,
    // delta = 0.125 means the attack needs suppression <= 0.5 - eps.
    const ProxyRobustness exact = proxy_robustness_check(0.0, 0.5, 0.625, 0.125);
    CHECK(exact.p_tau_eff == 0.625);
    CHECK(exact.satisfied); // boundary is inclusive

    const ProxyRobustness ok = proxy_robustness_check(0.0, 0.25, 0.625, 0.125);
    CHECK(ok.satisfied);

    const ProxyRobustness shrunk =
        proxy_robustness_check(0.0625, 0.5, 0.625, 0.125);
    CHECK(shrunk.p_tau_eff == 0.5625);
    CHECK_FALSE(shrunk.satisfied); // 0.5 > 0.5625 - 0.125

    CHECK_THROWS_AS(proxy_robustness_check(-0.01, 0.5, 0.6, 0.05),
                    std::invalid_argument);
    CHECK_THROWS_AS(proxy_robustness_check(0.0, 0.5, 0.6, 0.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(proxy_robustness_check(0.0, 1.5, 0.6, 0.05),
                    std::invalid_argument);
    CHECK_THROWS_AS(proxy_robustness_check(0.0, -0.5, 0.6, 0.05),
                    std::invalid_argument);
}

TEST_CASE("monte carlo parallel tally equals the serial reference") {
    const std::vector<double> schedule = {0.45, 0.5, 0.55, 0.4};
    const int n = 120;
    const double pt = 0.6, delta = 0.1;
    const long trials = 20000;
    const std::uint64_t seed = 901;

    const MonteCarloResult ref =
        monte_carlo_theorem2_serial(n, schedule, pt, delta, trials, seed);
    CHECK(ref.trials == trials);
    CHECK(ref.bound == doctest::Approx(detection_bound(n, delta)).epsilon(1e-15));
    CHECK(ref.empirical_rate ==
          doctest::Approx(static_cast<double>(ref.detected) / trials).epsilon(1e-15));

    for (int jobs : {0, 1, 3}) {
        const MonteCarloResult par =
            monte_carlo_theorem2(n, schedule, pt, delta, trials, seed, jobs);
        CHECK(par.detected == ref.detected);
        CHECK(par.empirical_rate == ref.empirical_rate);
        CHECK(par.bound == ref.bound);
    }
}

TEST_CASE("monte carlo empirical rate respects the bound here") {
    // Comfortable margin below the threshold: at n = 400 the true detection
    // rate is around 1e-9 while the bound is about 1.1e-2, so 40k trials sit
    // far under bound + noise. This is a sanity check, not the
    // acceptance-grade comparison.
    const std::vector<double> schedule = {0.45};
    const MonteCarloResult r =
        monte_carlo_theorem2_serial(400, schedule, 0.6, 0.15, 40000, 77);
    CHECK(r.empirical_rate <= r.bound + 3e-3);
}

TEST_CASE("monte carlo rejects schedules that violate the premise") {
    const std::vector<double> ok = {0.45};
    const std::vector<double> hot = {0.55};
    // mean 0.55 > p_tau - delta = 0.5
    CHECK_THROWS_AS(monte_carlo_theorem2_serial(10, hot, 0.6, 0.1, 5, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(monte_carlo_theorem2(10, hot, 0.6, 0.1, 5, 1, 1),
                    std::invalid_argument);

    CHECK_THROWS_AS(monte_carlo_theorem2_serial(0, ok, 0.6, 0.1, 5, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(monte_carlo_theorem2_serial(10, ok, 0.6, 0.1, 0, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(
        monte_carlo_theorem2_serial(10, std::vector<double>{}, 0.6, 0.1, 5, 1),
        std::invalid_argument);
    CHECK_THROWS_AS(
        monte_carlo_theorem2_serial(10, std::vector<double>{1.2}, 0.6, 0.1, 5, 1),
        std::invalid_argument);
    CHECK_THROWS_AS(monte_carlo_theorem2(10, ok, 0.6, 0.1, 5, 1, -1),
                    std::invalid_argument);
}

TEST_CASE("deterministic zero-one schedule pins the tally") {
    // p = 0 never fires (draws lie in (0, 1]) and p = 1 always does, so a
    // four-token text scores exactly two greens in every trial. The rate
    // decision 0.5 >= 0.5 is inclusive, hence every trial detects.
    const std::vector<double> schedule = {0.0, 1.0};
    const MonteCarloResult r =
        monte_carlo_theorem2_serial(4, schedule, 0.5, 0.0, 64, 5);
    CHECK(r.detected == 64);
    CHECK(r.empirical_rate == 1.0);
    CHECK(r.bound == 1.0);
}
