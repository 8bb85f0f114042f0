#pragma once
// White-box analysis of detection probability. Unlike the attack module,
// everything here may read the watermark scheme: the point is to compute
// the concentration bound exp(-N delta^2 / 2) on the detection rate of a
// (possibly attacked) sampler whose average conditional green probability
// sits delta below the decision threshold p_tau, and to check it against
// simulation.

#include <cstdint>
#include <set>
#include <span>
#include <string>

#include "wmlab/lm.hpp"
#include "wmlab/watermark.hpp"

namespace wmlab {

struct BoundReport {
    std::string id;
    int n = 0;             // scored positions
    double p_bar = 0.0;    // average conditional green probability
    double p_tau = 0.0;    // decision threshold at this n
    double delta_hat = 0.0; // max(0, p_tau - p_bar)
    double bound = 1.0;    // exp(-n delta_hat^2 / 2)
};

struct ProxyRobustness {
    double epsilon = 0.0;   // proxy bias shortfall
    double p_tau_eff = 0.0; // p_tau - epsilon
    bool satisfied = false; // suppression clears p_tau_eff - delta
};

struct MonteCarloResult {
    long trials = 0;
    long detected = 0;
    double empirical_rate = 0.0;
    double bound = 1.0; // exp(-n delta^2 / 2)
};

// exp(-n delta^2 / 2). Requires n >= 1, delta >= 0.
double detection_bound(int n, double delta);

// Average over text positions of the green-mass of the sampler's actual
// next-token distribution: softmax((logits + beta on biased_ids) / T).
// Positions with no green list (KGW, empty total context) are skipped,
// mirroring the detector. Requires at least one scorable position.
double average_green_probability(const Model& model, const WatermarkScheme& scheme,
                                 std::span<const TokenId> prompt,
                                 std::span<const TokenId> text,
                                 const std::set<TokenId>& biased_ids, double beta,
                                 double temperature);

// Bound for one concrete sample: p_bar over `text`, threshold at n = |text|
// positions scored, delta_hat = max(0, p_tau - p_bar).
BoundReport per_sample_bound(const Model& model, const WatermarkScheme& scheme,
                             std::span<const TokenId> prompt,
                             std::span<const TokenId> text,
                             const std::set<TokenId>& biased_ids, double beta,
                             double temperature, std::string id = {});

// Detectability margin when the proxy set misses part of the true green
// set: the effective threshold shrinks to p_tau - epsilon, and the attack
// still certifies evasion iff suppression <= (p_tau - epsilon) - delta.
ProxyRobustness proxy_robustness_check(double epsilon, double suppression,
                                       double p_tau, double delta);

// Simulate `trials` texts of n tokens whose conditional green probabilities
// cycle through p_schedule, count detections at rate threshold p_tau, and
// report the empirical rate next to detection_bound(n, delta). The schedule
// mean must sit at or below p_tau - delta or the premise of the bound is
// violated. jobs = 0 uses the OpenMP default thread count.
MonteCarloResult monte_carlo_theorem2(int n, std::span<const double> p_schedule,
                                      double p_tau, double delta, long trials,
                                      std::uint64_t seed, int jobs = 0);

// Plain-loop reference implementation; same inputs, bitwise-equal results.
MonteCarloResult monte_carlo_theorem2_serial(int n, std::span<const double> p_schedule,
                                             double p_tau, double delta, long trials,
                                             std::uint64_t seed);

} // namespace wmlab
