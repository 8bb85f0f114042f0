#pragma once
// Green/red-list watermarking and its one-proportion z-test detector.
//
// A scheme splits the vocabulary into a green set of size floor(p0 * V)
// and its red complement, re-derived per context slot from a keyed
// permutation. Generation adds a logit bias gamma to green tokens; the
// detector counts green hits and tests p_hat against the null rate p0.
// The z decision and the equivalent green-rate decision share one
// integer-count implementation so they can never disagree at the boundary.

#include <cstdint>
#include <set>
#include <span>

#include "wmlab/lm.hpp"

namespace wmlab {

enum class SchemeKind {
    unigram, // one fixed green set for the whole text
    kgw      // green set keyed on the immediately preceding token
};

struct WatermarkScheme {
    SchemeKind kind = SchemeKind::unigram;
    std::uint64_t key = 0;
    double p0 = 0.5;    // green fraction of the vocabulary
    double gamma = 2.0; // logit bias applied to green tokens
    double tau = 4.0;   // detection threshold on the z statistic
};

struct DetectionReport {
    int scored = 0; // N: positions that had a green list
    int green_count = 0;
    double p_hat = 0.0;
    double z = 0.0;
    double tau = 0.0;
    double p_tau = 0.0; // rate-form threshold for this N
    bool decision = false;
};

// Green membership mask for one context slot (1 = green). The mask is the
// first floor(p0 * V) entries of a Fisher-Yates permutation seeded with
// mix(key, slot); see README for the exact recipe.
std::vector<std::uint8_t> green_mask(const WatermarkScheme& scheme, int vocab_size,
                                     std::uint64_t ctx_slot);

// Green set for a concrete context. Unigram ignores the context; KGW keys
// on context.back() and rejects an empty context.
std::set<TokenId> green_set(const WatermarkScheme& scheme, int vocab_size,
                            std::span<const TokenId> context);

// Logits with +gamma on the green set for this context.
LogitVector watermarked_logits(const WatermarkScheme& scheme, const LogitVector& l,
                               std::span<const TokenId> context);

// Autoregressive generation with the watermark bias applied at every step.
// Under KGW with an empty prompt the first step has no previous token, so
// it samples unbiased; the detector skips the same position.
TokenSequence generate_watermarked(const Model& model, const WatermarkScheme& scheme,
                                   std::span<const TokenId> prompt, int length,
                                   const SamplingConfig& cfg);

// Green-rate threshold equivalent to z >= tau at sample size n:
// p_tau = p0 + tau * sqrt(p0 (1 - p0) / n).
double p_tau(double p0, double tau, int n);

// Canonical detector decision from the integer green count. Evaluated in
// extended precision via a squared comparison, so the z form and the rate
// form of the test agree exactly even when n * p_tau lands on an integer.
bool detect_from_count(int green, int n, double p0, double tau);

// Score `text`, skipping positions that have no green list (KGW position 0
// when both text and prompt context are missing). Throws if nothing is
// scorable. `prompt` supplies the context for the first text token under
// KGW when available.
DetectionReport z_score(std::span<const TokenId> text, const WatermarkScheme& scheme,
                        int vocab_size, std::span<const TokenId> prompt = {});

// Same scoring with an overriding threshold.
bool detect(std::span<const TokenId> text, const WatermarkScheme& scheme,
            int vocab_size, double tau, std::span<const TokenId> prompt = {});

} // namespace wmlab
