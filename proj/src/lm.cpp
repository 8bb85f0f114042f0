#include "wmlab/lm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace wmlab {

namespace {

void check_prefix(const Vocabulary& v, std::span<const TokenId> prefix,
                  const char* who) {
    for (TokenId t : prefix)
        if (!v.contains(t))
            throw std::invalid_argument(std::string(who) +
                                        ": token id out of range: " +
                                        std::to_string(t));
}

} // namespace

MarkovModel::MarkovModel(int vocab_size, std::uint64_t seed, double concentration)
    : seed_(seed), concentration_(concentration) {
    if (vocab_size < 2)
        throw std::invalid_argument("MarkovModel: vocab_size must be >= 2");
    if (!(concentration > 0.0) || !std::isfinite(concentration))
        throw std::invalid_argument("MarkovModel: concentration must be positive");
    vocab_.size = vocab_size;

    const int v = vocab_size;
    rows_.resize(v + 1);
    log_rows_.resize(v + 1);
    // Row `v` serves the empty prefix; rows 0..v-1 condition on the
    // previous token. Each row is keyed independently so that changing one
    // context never perturbs another.
    for (int prev = 0; prev <= v; ++prev) {
        SplitMix64 gen(mix(seed, static_cast<std::uint64_t>(prev)));
        std::vector<double>& row = rows_[prev];
        row.resize(v);
        double total = 0.0;
        for (int k = 0; k < v; ++k) {
            // next_double() is in (0,1], so the weight and its log stay finite.
            row[k] = std::pow(gen.next_double(), 1.0 / concentration);
            total += row[k];
        }
        std::vector<double>& lrow = log_rows_[prev];
        lrow.resize(v);
        for (int k = 0; k < v; ++k) {
            row[k] /= total;
            lrow[k] = std::log(row[k]);
        }
    }
}

const std::vector<double>& MarkovModel::row(TokenId prev) const {
    if (prev < 0 || prev > vocab_.size)
        throw std::invalid_argument("MarkovModel::row: prev out of range");
    return rows_[prev];
}

LogitVector MarkovModel::logits(std::span<const TokenId> prefix) const {
    check_prefix(vocab_, prefix, "MarkovModel::logits");
    const int slot = prefix.empty() ? vocab_.size : prefix.back();
    return log_rows_[slot];
}

ParaphraseModel::ParaphraseModel(const Model& base, std::span<const TokenId> source,
                                 double overlap_bonus)
    : base_(&base), bonus_(overlap_bonus) {
    if (!(overlap_bonus >= 0.0) || !std::isfinite(overlap_bonus))
        throw std::invalid_argument("ParaphraseModel: bonus must be >= 0");
    check_prefix(base.vocab(), source, "ParaphraseModel");
    emphasized_.assign(base.vocab().size, 0);
    if (source.empty()) return;
    // Content tokens: the upper half of the source by surprisal under the
    // base model (interpolated median cutoff, inclusive).
    const std::vector<double> info = self_information(base, source);
    const double eta = percentile(info, 0.5);
    for (std::size_t n = 0; n < source.size(); ++n)
        if (info[n] >= eta) emphasized_[source[n]] = 1;
}

LogitVector ParaphraseModel::logits(std::span<const TokenId> prefix) const {
    LogitVector l = base_->logits(prefix);
    if (bonus_ != 0.0)
        for (std::size_t k = 0; k < l.size(); ++k)
            if (emphasized_[k]) l[k] += bonus_;
    return l;
}

bool ParaphraseModel::emphasizes(TokenId id) const {
    return id >= 0 && id < static_cast<TokenId>(emphasized_.size()) &&
           emphasized_[id] != 0;
}

double percentile(std::vector<double> values, double q) {
    if (values.empty())
        throw std::invalid_argument("percentile: empty input");
    if (!(q >= 0.0) || q > 1.0)
        throw std::invalid_argument("percentile: q must be in [0, 1]");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= values.size()) return values.back();
    const double lo_v = values[lo], hi_v = values[lo + 1];
    // Equal neighbors need no interpolation; this also keeps infinite
    // surprisal values (zero-probability tokens) from producing NaN.
    if (lo_v == hi_v) return lo_v;
    const double frac = pos - static_cast<double>(lo);
    return lo_v + frac * (hi_v - lo_v);
}

std::vector<double> softmax(std::span<const double> logits, double temperature) {
    if (logits.empty())
        throw std::invalid_argument("softmax: empty logit vector");
    if (!(temperature > 0.0) || !std::isfinite(temperature))
        throw std::invalid_argument("softmax: temperature must be positive");
    double hi = logits[0];
    for (double x : logits) {
        if (!std::isfinite(x))
            throw std::invalid_argument("softmax: non-finite logit");
        hi = std::max(hi, x);
    }
    std::vector<double> p(logits.size());
    double total = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        p[k] = std::exp((logits[k] - hi) / temperature);
        total += p[k];
    }
    for (double& x : p) x /= total;
    return p;
}

std::vector<TokenId> top_p_nucleus(std::span<const double> probs, double top_p) {
    if (!(top_p > 0.0) || top_p > 1.0)
        throw std::invalid_argument("top_p_nucleus: top_p must be in (0, 1]");
    std::vector<TokenId> order(probs.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](TokenId a, TokenId b) {
        if (probs[a] != probs[b]) return probs[a] > probs[b];
        return a < b;
    });
    std::vector<TokenId> nucleus;
    double cum = 0.0;
    for (TokenId id : order) {
        nucleus.push_back(id);
        cum += probs[id];
        if (cum >= top_p) break;
    }
    return nucleus;
}

TokenId sample_next(std::span<const double> logits, const SamplingConfig& cfg,
                    SplitMix64& rng) {
    const std::vector<double> p = softmax(logits, cfg.temperature);
    const std::vector<TokenId> nucleus = top_p_nucleus(p, cfg.top_p);
    double mass = 0.0;
    for (TokenId id : nucleus) mass += p[id];
    // u is in (0, mass]; the walk below therefore always terminates on a
    // nucleus member with probability proportional to its mass.
    const double u = rng.next_double() * mass;
    double acc = 0.0;
    for (TokenId id : nucleus) {
        acc += p[id];
        if (u <= acc) return id;
    }
    return nucleus.back();
}

TokenSequence sample_sequence(const Model& model, std::span<const TokenId> prompt,
                              int length, const SamplingConfig& cfg) {
    if (length < 0)
        throw std::invalid_argument("sample_sequence: negative length");
    check_prefix(model.vocab(), prompt, "sample_sequence");
    SplitMix64 rng(cfg.seed);
    TokenSequence prefix(prompt.begin(), prompt.end());
    TokenSequence out;
    out.reserve(length);
    for (int n = 0; n < length; ++n) {
        const TokenId t = sample_next(model.logits(prefix), cfg, rng);
        if (model.eos() && t == *model.eos()) break;
        prefix.push_back(t);
        out.push_back(t);
    }
    return out;
}

std::vector<double> self_information(const Model& model,
                                     std::span<const TokenId> text,
                                     std::span<const TokenId> prompt) {
    if (text.empty())
        throw std::invalid_argument("self_information: empty text");
    check_prefix(model.vocab(), text, "self_information");
    check_prefix(model.vocab(), prompt, "self_information");
    TokenSequence prefix(prompt.begin(), prompt.end());
    prefix.reserve(prompt.size() + text.size());
    std::vector<double> info(text.size());
    for (std::size_t n = 0; n < text.size(); ++n) {
        const std::vector<double> p = softmax(model.logits(prefix), 1.0);
        info[n] = -std::log(p[text[n]]);
        prefix.push_back(text[n]);
    }
    return info;
}

double perplexity(const Model& model, std::span<const TokenId> text,
                  std::span<const TokenId> prompt) {
    const std::vector<double> info = self_information(model, text, prompt);
    const double mean =
        std::accumulate(info.begin(), info.end(), 0.0) / info.size();
    return std::exp(mean);
}

} // namespace wmlab
