#include "wmlab/watermark.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace wmlab {

namespace {

void check_scheme(const WatermarkScheme& s, int vocab_size) {
    if (vocab_size < 2)
        throw std::invalid_argument("watermark: vocab_size must be >= 2");
    if (!(s.p0 > 0.0) || !(s.p0 < 1.0))
        throw std::invalid_argument("watermark: p0 must be in (0, 1)");
    if (!std::isfinite(s.gamma) || s.gamma < 0.0)
        throw std::invalid_argument("watermark: gamma must be finite and >= 0");
    if (!std::isfinite(s.tau))
        throw std::invalid_argument("watermark: tau must be finite");
    if (static_cast<int>(s.p0 * vocab_size) < 1)
        throw std::invalid_argument("watermark: green set would be empty");
}

// Context slot for one position. Unigram always hashes slot 0. KGW hashes
// the previous token id; nullopt means the position has no green list.
std::optional<std::uint64_t> context_slot(const WatermarkScheme& s,
                                          std::span<const TokenId> context) {
    if (s.kind == SchemeKind::unigram) return 0;
    if (context.empty()) return std::nullopt;
    return static_cast<std::uint64_t>(context.back());
}

} // namespace

std::vector<std::uint8_t> green_mask(const WatermarkScheme& scheme, int vocab_size,
                                     std::uint64_t ctx_slot) {
    check_scheme(scheme, vocab_size);
    const int g = static_cast<int>(scheme.p0 * vocab_size);
    // Seeded Fisher-Yates; the first g entries of the permutation are green.
    std::vector<TokenId> perm(vocab_size);
    std::iota(perm.begin(), perm.end(), 0);
    SplitMix64 gen(mix(scheme.key, ctx_slot));
    for (int i = vocab_size - 1; i > 0; --i) {
        const auto j = gen.next_below(static_cast<std::uint64_t>(i) + 1);
        std::swap(perm[i], perm[j]);
    }
    std::vector<std::uint8_t> mask(vocab_size, 0);
    for (int k = 0; k < g; ++k) mask[perm[k]] = 1;
    return mask;
}

std::set<TokenId> green_set(const WatermarkScheme& scheme, int vocab_size,
                            std::span<const TokenId> context) {
    const auto slot = context_slot(scheme, context);
    if (!slot)
        throw std::invalid_argument("green_set: KGW needs a non-empty context");
    const auto mask = green_mask(scheme, vocab_size, *slot);
    std::set<TokenId> out;
    for (int k = 0; k < vocab_size; ++k)
        if (mask[k]) out.insert(k);
    return out;
}

LogitVector watermarked_logits(const WatermarkScheme& scheme, const LogitVector& l,
                               std::span<const TokenId> context) {
    const auto slot = context_slot(scheme, context);
    if (!slot)
        throw std::invalid_argument(
            "watermarked_logits: KGW needs a non-empty context");
    const auto mask = green_mask(scheme, static_cast<int>(l.size()), *slot);
    LogitVector out = l;
    for (std::size_t k = 0; k < out.size(); ++k)
        if (mask[k]) out[k] += scheme.gamma;
    return out;
}

TokenSequence generate_watermarked(const Model& model, const WatermarkScheme& scheme,
                                   std::span<const TokenId> prompt, int length,
                                   const SamplingConfig& cfg) {
    check_scheme(scheme, model.vocab().size);
    if (length < 1)
        throw std::invalid_argument("generate_watermarked: length must be >= 1");
    for (TokenId t : prompt)
        if (!model.vocab().contains(t))
            throw std::invalid_argument("generate_watermarked: prompt token out of range");

    SplitMix64 rng(cfg.seed);
    TokenSequence prefix(prompt.begin(), prompt.end());
    TokenSequence out;
    out.reserve(length);
    for (int n = 0; n < length; ++n) {
        LogitVector l = model.logits(prefix);
        if (scheme.kind == SchemeKind::unigram || !prefix.empty())
            l = watermarked_logits(scheme, l, prefix);
        const TokenId t = sample_next(l, cfg, rng);
        if (model.eos() && t == *model.eos()) break;
        prefix.push_back(t);
        out.push_back(t);
    }
    return out;
}

double p_tau(double p0, double tau, int n) {
    if (n < 1)
        throw std::invalid_argument("p_tau: n must be >= 1");
    if (!(p0 > 0.0) || !(p0 < 1.0))
        throw std::invalid_argument("p_tau: p0 must be in (0, 1)");
    return p0 + tau * std::sqrt(p0 * (1.0 - p0) / n);
}

bool detect_from_count(int green, int n, double p0, double tau) {
    if (n < 1)
        throw std::invalid_argument("detect_from_count: n must be >= 1");
    if (green < 0 || green > n)
        throw std::invalid_argument("detect_from_count: green count out of range");
    // z >= tau  <=>  (g - n p0) >= tau * sqrt(n p0 (1 - p0)).
    // Squaring removes the square root so the comparison is exact in long
    // double for every integer count reachable at lab scale.
    const long double diff =
        static_cast<long double>(green) - static_cast<long double>(n) * p0;
    const long double rhs = static_cast<long double>(tau) * tau * n * p0 * (1.0L - p0);
    if (tau >= 0.0) return diff >= 0.0L && diff * diff >= rhs;
    // Negative threshold: reject only when g falls tau sigma below n p0.
    return diff >= 0.0L || diff * diff <= rhs;
}

DetectionReport z_score(std::span<const TokenId> text, const WatermarkScheme& scheme,
                        int vocab_size, std::span<const TokenId> prompt) {
    check_scheme(scheme, vocab_size);
    if (text.empty())
        throw std::invalid_argument("z_score: empty text");
    for (TokenId t : text)
        if (t < 0 || t >= vocab_size)
            throw std::invalid_argument("z_score: token id out of range");

    // Cache masks per context slot; Unigram touches one slot, KGW at most
    // one per distinct predecessor.
    std::vector<std::vector<std::uint8_t>> cache(
        scheme.kind == SchemeKind::unigram ? 1 : vocab_size);
    const auto mask_for = [&](std::uint64_t slot) -> const std::vector<std::uint8_t>& {
        auto& m = cache[scheme.kind == SchemeKind::unigram ? 0 : slot];
        if (m.empty()) m = green_mask(scheme, vocab_size, slot);
        return m;
    };

    int scored = 0;
    int green = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        std::optional<std::uint64_t> slot;
        if (scheme.kind == SchemeKind::unigram) {
            slot = 0;
        } else if (i > 0) {
            slot = static_cast<std::uint64_t>(text[i - 1]);
        } else if (!prompt.empty()) {
            slot = static_cast<std::uint64_t>(prompt.back());
        }
        if (!slot) continue; // no green list at this position
        ++scored;
        green += mask_for(*slot)[text[i]];
    }
    if (scored == 0)
        throw std::invalid_argument("z_score: no scorable positions");

    DetectionReport r;
    r.scored = scored;
    r.green_count = green;
    r.p_hat = static_cast<double>(green) / scored;
    r.z = (r.p_hat - scheme.p0) /
          std::sqrt(scheme.p0 * (1.0 - scheme.p0) / scored);
    r.tau = scheme.tau;
    r.p_tau = p_tau(scheme.p0, scheme.tau, scored);
    r.decision = detect_from_count(green, scored, scheme.p0, scheme.tau);
    return r;
}

bool detect(std::span<const TokenId> text, const WatermarkScheme& scheme,
            int vocab_size, double tau, std::span<const TokenId> prompt) {
    WatermarkScheme s = scheme;
    s.tau = tau;
    return z_score(text, s, vocab_size, prompt).decision;
}

} // namespace wmlab
