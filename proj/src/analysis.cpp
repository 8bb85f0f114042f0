#include "wmlab/analysis.hpp"

#include <omp.h>

#include <cmath>
#include <stdexcept>

#include "wmlab/bira.hpp"

namespace wmlab {

double detection_bound(int n, double delta) {
    if (n < 1)
        throw std::invalid_argument("detection_bound: n must be >= 1");
    if (!(delta >= 0.0) || !std::isfinite(delta))
        throw std::invalid_argument("detection_bound: delta must be >= 0");
    return std::exp(-static_cast<double>(n) * delta * delta / 2.0);
}

double average_green_probability(const Model& model, const WatermarkScheme& scheme,
                                 std::span<const TokenId> prompt,
                                 std::span<const TokenId> text,
                                 const std::set<TokenId>& biased_ids, double beta,
                                 double temperature) {
    if (text.empty())
        throw std::invalid_argument("average_green_probability: empty text");
    const int v = model.vocab().size;

    TokenSequence prefix(prompt.begin(), prompt.end());
    prefix.reserve(prompt.size() + text.size());

    std::vector<std::vector<std::uint8_t>> cache(
        scheme.kind == SchemeKind::unigram ? 1 : v);

    double total = 0.0;
    int scored = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (scheme.kind == SchemeKind::kgw && prefix.empty()) {
            // No previous token, no green list; the detector skips this
            // position too, so it cannot contribute to p_bar.
            prefix.push_back(text[i]);
            continue;
        }
        const std::uint64_t slot =
            scheme.kind == SchemeKind::unigram
                ? 0
                : static_cast<std::uint64_t>(prefix.back());
        auto& mask = cache[scheme.kind == SchemeKind::unigram ? 0 : slot];
        if (mask.empty()) mask = green_mask(scheme, v, slot);

        // Full post-bias distribution at the sampler's temperature. No
        // nucleus truncation here: the bound tracks the conditional green
        // mass of the model the sampler is built from.
        const LogitVector l = biased_logits(model.logits(prefix), biased_ids, beta);
        const std::vector<double> p = softmax(l, temperature);
        double green = 0.0;
        for (int k = 0; k < v; ++k)
            if (mask[k]) green += p[k];
        total += green;
        ++scored;
        prefix.push_back(text[i]);
    }
    if (scored == 0)
        throw std::invalid_argument("average_green_probability: no scorable positions");
    return total / scored;
}

BoundReport per_sample_bound(const Model& model, const WatermarkScheme& scheme,
                             std::span<const TokenId> prompt,
                             std::span<const TokenId> text,
                             const std::set<TokenId>& biased_ids, double beta,
                             double temperature, std::string id) {
    BoundReport r;
    r.id = std::move(id);
    r.p_bar = average_green_probability(model, scheme, prompt, text, biased_ids,
                                        beta, temperature);
    // Scored position count mirrors the detector's skip rule.
    int scored = static_cast<int>(text.size());
    if (scheme.kind == SchemeKind::kgw && prompt.empty()) scored -= 1;
    r.n = scored;
    r.p_tau = p_tau(scheme.p0, scheme.tau, scored);
    r.delta_hat = std::max(0.0, r.p_tau - r.p_bar);
    r.bound = detection_bound(scored, r.delta_hat);
    return r;
}

ProxyRobustness proxy_robustness_check(double epsilon, double suppression,
                                       double p_tau, double delta) {
    if (!(epsilon >= 0.0))
        throw std::invalid_argument("proxy_robustness_check: epsilon must be >= 0");
    if (!(delta > 0.0))
        throw std::invalid_argument("proxy_robustness_check: delta must be > 0");
    if (!(suppression >= 0.0) || suppression > 1.0)
        throw std::invalid_argument(
            "proxy_robustness_check: suppression must be in [0, 1]");
    ProxyRobustness r;
    r.epsilon = epsilon;
    r.p_tau_eff = p_tau - epsilon;
    r.satisfied = suppression <= r.p_tau_eff - delta;
    return r;
}

namespace {

void check_mc_inputs(int n, std::span<const double> p_schedule, double p_tau,
                     double delta, long trials) {
    if (n < 1)
        throw std::invalid_argument("monte_carlo: n must be >= 1");
    if (trials < 1)
        throw std::invalid_argument("monte_carlo: trials must be >= 1");
    if (p_schedule.empty())
        throw std::invalid_argument("monte_carlo: empty schedule");
    for (double p : p_schedule)
        if (!(p >= 0.0) || p > 1.0)
            throw std::invalid_argument("monte_carlo: probabilities must be in [0, 1]");
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += p_schedule[i % p_schedule.size()];
    mean /= n;
    // The bound only speaks about samplers whose average conditional green
    // probability sits delta below the threshold.
    if (mean > p_tau - delta + 1e-12)
        throw std::invalid_argument(
            "monte_carlo: schedule mean exceeds p_tau - delta");
}

// One simulated text: count green indicators drawn from the schedule and
// apply the rate-form decision.
inline bool mc_trial(int n, std::span<const double> p, double p_tau,
                     std::uint64_t trial_seed) {
    SplitMix64 rng(trial_seed);
    int greens = 0;
    const std::size_t m = p.size();
    for (int i = 0; i < n; ++i)
        greens += rng.next_double() <= p[i % m];
    return static_cast<double>(greens) / n >= p_tau;
}

} // namespace

MonteCarloResult monte_carlo_theorem2(int n, std::span<const double> p_schedule,
                                      double p_tau, double delta, long trials,
                                      std::uint64_t seed, int jobs) {
    check_mc_inputs(n, p_schedule, p_tau, delta, trials);
    if (jobs < 0)
        throw std::invalid_argument("monte_carlo: jobs must be >= 0");
    long detected = 0;
    // Trials are seeded independently via mix(seed, t), so the tally is
    // identical for any thread count, including the serial reference.
#pragma omp parallel for schedule(static) reduction(+ : detected) \
    num_threads(jobs > 0 ? jobs : omp_get_max_threads())
    for (long t = 0; t < trials; ++t)
        detected += mc_trial(n, p_schedule, p_tau,
                             mix(seed, static_cast<std::uint64_t>(t)));

    MonteCarloResult r;
    r.trials = trials;
    r.detected = detected;
    r.empirical_rate = static_cast<double>(detected) / static_cast<double>(trials);
    r.bound = detection_bound(n, delta);
    return r;
}

MonteCarloResult monte_carlo_theorem2_serial(int n, std::span<const double> p_schedule,
                                             double p_tau, double delta, long trials,
                                             std::uint64_t seed) {
    check_mc_inputs(n, p_schedule, p_tau, delta, trials);
    long detected = 0;
    for (long t = 0; t < trials; ++t)
        detected += mc_trial(n, p_schedule, p_tau,
                             mix(seed, static_cast<std::uint64_t>(t)));
    MonteCarloResult r;
    r.trials = trials;
    r.detected = detected;
    r.empirical_rate = static_cast<double>(detected) / static_cast<double>(trials);
    r.bound = detection_bound(n, delta);
    return r;
}

} // namespace wmlab
