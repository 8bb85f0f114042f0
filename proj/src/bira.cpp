#include "wmlab/bira.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace wmlab {

namespace {

void check_attack_config(const AttackConfig& cfg) {
    if (!(cfg.beta0 <= 0.0))
        throw std::invalid_argument("attack: beta0 must be <= 0");
    if (!(cfg.lr > 0.0))
        throw std::invalid_argument("attack: lr must be > 0");
    if (!(cfg.q >= 0.0) || !(cfg.q < 1.0))
        throw std::invalid_argument("attack: q must be in [0, 1)");
    if (cfg.restarts < 1)
        throw std::invalid_argument("attack: restarts must be >= 1");
    if (cfg.max_length < 1)
        throw std::invalid_argument("attack: max_length must be >= 1");
    if (cfg.window < 1)
        throw std::invalid_argument("attack: window must be >= 1");
    if (!(cfg.rho >= 0.0) || cfg.rho > 1.0)
        throw std::invalid_argument("attack: rho must be in [0, 1]");
}

} // namespace

ProxyGreenSet build_proxy_set(const Model& model, std::span<const TokenId> text,
                              double q) {
    if (!(q >= 0.0) || !(q < 1.0))
        throw std::invalid_argument("build_proxy_set: q must be in [0, 1)");
    const std::vector<double> info = self_information(model, text);
    ProxyGreenSet proxy;
    proxy.q = q;
    proxy.eta = percentile(info, q);
    for (std::size_t n = 0; n < text.size(); ++n)
        if (info[n] >= proxy.eta) proxy.ids.insert(text[n]);
    return proxy;
}

LogitVector biased_logits(const LogitVector& l, const std::set<TokenId>& ids,
                          double beta) {
    if (!(beta <= 0.0))
        throw std::invalid_argument("biased_logits: beta must be <= 0");
    LogitVector out = l;
    const auto v = static_cast<TokenId>(l.size());
    for (TokenId id : ids) {
        if (id < 0 || id >= v)
            throw std::invalid_argument("biased_logits: id out of range");
        out[id] += beta;
    }
    return out;
}

double distinct_ratio(std::span<const TokenId> text, int window) {
    if (window < 1)
        throw std::invalid_argument("distinct_ratio: window must be >= 1");
    const std::size_t m = std::min<std::size_t>(text.size(), window);
    if (m == 0) return 1.0;
    std::unordered_set<TokenId> seen(text.end() - m, text.end());
    return static_cast<double>(seen.size()) / static_cast<double>(m);
}

bool is_degenerated(std::span<const TokenId> text, int window, double rho) {
    if (!(rho >= 0.0) || rho > 1.0)
        throw std::invalid_argument("is_degenerated: rho must be in [0, 1]");
    if (text.empty()) return false;
    return distinct_ratio(text, window) < rho;
}

TokenSequence rewrite_once(const Model& model, std::span<const TokenId> source,
                           const ProxyGreenSet& proxy, double beta,
                           const AttackConfig& cfg, std::uint64_t seed) {
    if (source.empty())
        throw std::invalid_argument("rewrite_once: empty source");
    if (!(beta <= 0.0))
        throw std::invalid_argument("rewrite_once: beta must be <= 0");
    SplitMix64 rng(seed);
    TokenSequence prefix(source.begin(), source.end());
    TokenSequence out;
    out.reserve(cfg.max_length);
    for (int n = 0; n < cfg.max_length; ++n) {
        LogitVector l = biased_logits(model.logits(prefix), proxy.ids, beta);
        const TokenId t = sample_next(l, cfg.sampling, rng);
        if (model.eos() && t == *model.eos()) break;
        prefix.push_back(t);
        out.push_back(t);
    }
    return out;
}

AttackOutcome attack(const Model& rewriter, const Model& info_model,
                     std::span<const TokenId> watermarked, const AttackConfig& cfg) {
    check_attack_config(cfg);
    if (watermarked.empty())
        throw std::invalid_argument("attack: empty watermarked text");

    AttackOutcome out;
    out.proxy = build_proxy_set(info_model, watermarked, cfg.q);
    double beta = cfg.beta0;
    for (int r = 0; r < cfg.restarts; ++r) {
        ++out.attempts;
        out.text = rewrite_once(rewriter, watermarked, out.proxy, beta, cfg,
                                mix(cfg.sampling.seed, static_cast<std::uint64_t>(r)));
        out.final_beta = beta;
        if (!is_degenerated(out.text, cfg.window, cfg.rho)) {
            out.degenerate = false;
            return out;
        }
        ++out.degeneration_events;
        beta = std::min(0.0, beta + cfg.lr);
    }
    // Every restart degenerated; hand back the last attempt and say so.
    out.degenerate = true;
    return out;
}

AttackOutcome attack(const Model& model, std::span<const TokenId> watermarked,
                     const AttackConfig& cfg) {
    return attack(model, model, watermarked, cfg);
}

Beta0Calibration calibrate_beta0(const Model& model,
                                 const std::vector<TokenSequence>& texts,
                                 const AttackConfig& cfg,
                                 std::span<const double> grid) {
    check_attack_config(cfg);
    if (texts.empty())
        throw std::invalid_argument("calibrate_beta0: no calibration texts");
    static constexpr double kDefaultGrid[] = {-1, -2, -3, -4,  -5,  -6,
                                              -7, -8, -9, -10, -11, -12};
    if (grid.empty()) grid = kDefaultGrid;
    for (double b : grid)
        if (!(b <= 0.0))
            throw std::invalid_argument("calibrate_beta0: grid values must be <= 0");

    // Proxy sets depend only on the text, not on the bias under test.
    std::vector<ProxyGreenSet> proxies;
    proxies.reserve(texts.size());
    for (const auto& t : texts) proxies.push_back(build_proxy_set(model, t, cfg.q));

    double best = grid[0];
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
        bool degenerated = false;
        for (std::size_t t = 0; t < texts.size(); ++t) {
            const auto seed =
                mix(cfg.sampling.seed, gi * texts.size() + t);
            const TokenSequence y =
                rewrite_once(model, texts[t], proxies[t], grid[gi], cfg, seed);
            if (is_degenerated(y, cfg.window, cfg.rho)) {
                degenerated = true;
                break;
            }
        }
        if (degenerated)
            return {gi == 0 ? grid[0] : best, gi == 0};
        best = grid[gi];
    }
    return {best, false};
}

} // namespace wmlab
