#pragma once
// Bias-inversion rewriting attack. Strictly black-box: nothing in this
// header takes a watermark scheme or key. The attacker sees one watermarked
// token sequence, estimates a proxy green set from self-information under
// its own model, and rewrites with a negative bias on that proxy, restarting
// with a weaker bias whenever the rewrite degenerates.

#include <cstdint>
#include <set>
#include <span>

#include "wmlab/lm.hpp"

namespace wmlab {

struct ProxyGreenSet {
    std::set<TokenId> ids;
    double eta = 0.0; // self-information cutoff actually used
    double q = 0.0;   // percentile that produced it
};

struct AttackConfig {
    double beta0 = -4.0;   // initial bias (<= 0)
    double lr = 0.125;     // bias step added after a degenerate restart
    double q = 0.5;        // surprisal percentile for the proxy set
    int restarts = 10;     // max rewrite attempts R
    int max_length = 1500; // rewrite length cap
    int window = 450;      // degeneration window h
    double rho = 0.25;     // distinct-ratio floor
    SamplingConfig sampling;
};

struct AttackOutcome {
    TokenSequence text;
    double final_beta = 0.0;     // bias that produced `text`
    int attempts = 0;            // rewrites performed
    int degeneration_events = 0; // rewrites rejected as degenerate
    bool degenerate = false;     // every restart degenerated
    ProxyGreenSet proxy;
};

struct Beta0Calibration {
    double beta0 = 0.0;
    bool hit_grid_start = false; // degeneration already at the mildest bias
};

// Proxy green set: ids of text tokens whose self-information under `model`
// reaches the q-th percentile cutoff (percentile() convention, lm.hpp).
ProxyGreenSet build_proxy_set(const Model& model, std::span<const TokenId> text,
                              double q);

// Logits with beta added on `ids`. Requires beta <= 0.
LogitVector biased_logits(const LogitVector& l, const std::set<TokenId>& ids,
                          double beta);

// distinct / |window| over the trailing window of `text`, the window
// clamped to the text length. Empty text counts as ratio 1 (not degenerate).
double distinct_ratio(std::span<const TokenId> text, int window);

// Degenerate iff the trailing-window distinct ratio falls strictly below rho.
bool is_degenerated(std::span<const TokenId> text, int window, double rho);

// One biased rewrite: continue from `source` under the model with beta on
// the proxy ids, up to cfg.max_length tokens or the model's end-of-sequence
// token. The caller picks the seed so restarts draw fresh randomness.
TokenSequence rewrite_once(const Model& model, std::span<const TokenId> source,
                           const ProxyGreenSet& proxy, double beta,
                           const AttackConfig& cfg, std::uint64_t seed);

// Full attack: proxy estimation, then up to cfg.restarts rewrites with the
// bias relaxed by +lr (capped at 0) after each degenerate attempt. If every
// attempt degenerates the last rewrite is returned with degenerate = true.
// The proxy set comes from info_model, the rewrites from rewriter; services
// that hide their token probabilities get a local auxiliary model here.
AttackOutcome attack(const Model& rewriter, const Model& info_model,
                     std::span<const TokenId> watermarked, const AttackConfig& cfg);

// Single-model wiring: the rewriter scores its own self-information.
AttackOutcome attack(const Model& model, std::span<const TokenId> watermarked,
                     const AttackConfig& cfg);

// Scan `grid` (default -1, -2, ..., -12) from mildest to strongest bias and
// return the most negative value that produced no degenerate rewrite across
// one rewrite per calibration text. If even grid[0] degenerates, returns
// grid[0] with hit_grid_start = true.
Beta0Calibration calibrate_beta0(const Model& model,
                                 const std::vector<TokenSequence>& texts,
                                 const AttackConfig& cfg,
                                 std::span<const double> grid = {});

} // namespace wmlab
