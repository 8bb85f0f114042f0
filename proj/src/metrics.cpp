#include "wmlab/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace wmlab {

double attack_success_rate(const std::vector<bool>& detected) {
    if (detected.empty())
        throw std::invalid_argument("attack_success_rate: no samples");
    std::size_t missed = 0;
    for (bool d : detected) missed += !d;
    return static_cast<double>(missed) / static_cast<double>(detected.size());
}

double calibrate_threshold(std::vector<double> human_scores, double target_fpr) {
    if (human_scores.empty())
        throw std::invalid_argument("calibrate_threshold: no human scores");
    if (!(target_fpr >= 0.0) || target_fpr > 1.0)
        throw std::invalid_argument("calibrate_threshold: target_fpr must be in [0, 1]");
    std::sort(human_scores.begin(), human_scores.end());
    const std::size_t n = human_scores.size();
    const auto allowed = static_cast<std::size_t>(
        std::floor(target_fpr * static_cast<double>(n)));
    // Ascending scan: the first order statistic flagging at most `allowed`
    // human scores is the lowest admissible threshold. Duplicates are
    // handled by counting from the first occurrence.
    for (std::size_t i = 0; i < n; ++i) {
        const auto first = static_cast<std::size_t>(
            std::lower_bound(human_scores.begin(), human_scores.end(),
                             human_scores[i]) -
            human_scores.begin());
        if (n - first <= allowed) return human_scores[i];
    }
    return std::nextafter(human_scores.back(),
                          std::numeric_limits<double>::infinity());
}

double tpr_at_threshold(std::span<const double> scores, double threshold) {
    if (scores.empty())
        throw std::invalid_argument("tpr_at_threshold: no scores");
    std::size_t hits = 0;
    for (double s : scores) hits += s >= threshold;
    return static_cast<double>(hits) / static_cast<double>(scores.size());
}

F1Point best_f1(std::span<const double> positive, std::span<const double> negative) {
    if (positive.empty() || negative.empty())
        throw std::invalid_argument("best_f1: both classes must be non-empty");

    std::vector<double> cand(positive.begin(), positive.end());
    cand.insert(cand.end(), negative.begin(), negative.end());
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());

    std::vector<double> pos(positive.begin(), positive.end());
    std::vector<double> neg(negative.begin(), negative.end());
    std::sort(pos.begin(), pos.end());
    std::sort(neg.begin(), neg.end());
    const auto count_ge = [](const std::vector<double>& v, double t) {
        return static_cast<double>(
            v.end() - std::lower_bound(v.begin(), v.end(), t));
    };

    F1Point best;
    best.threshold = cand.front();
    // Ascending scan with strict improvement keeps the lowest threshold on
    // ties.
    for (double t : cand) {
        const double tp = count_ge(pos, t);
        const double fp = count_ge(neg, t);
        if (tp == 0.0) continue;
        const double precision = tp / (tp + fp);
        const double recall = tp / static_cast<double>(pos.size());
        const double f1 = 2.0 * precision * recall / (precision + recall);
        if (f1 > best.f1) best = {t, precision, recall, f1};
    }
    return best;
}

namespace {

// Key for n-grams up to order 4 over 32-bit ids: pack into 16 bytes.
struct NgramKey {
    std::array<TokenId, 4> t{};
    int n = 0;
    bool operator<(const NgramKey& o) const {
        if (n != o.n) return n < o.n;
        return t < o.t;
    }
};

std::map<NgramKey, int> ngram_counts(std::span<const TokenId> text, int n) {
    std::map<NgramKey, int> counts;
    if (static_cast<int>(text.size()) < n) return counts;
    for (std::size_t i = 0; i + n <= text.size(); ++i) {
        NgramKey k;
        k.n = n;
        for (int j = 0; j < n; ++j) k.t[j] = text[i + j];
        ++counts[k];
    }
    return counts;
}

} // namespace

double self_bleu(std::span<const TokenId> candidate, std::span<const TokenId> reference) {
    if (candidate.empty() || reference.empty())
        throw std::invalid_argument("self_bleu: empty input");
    const int max_order = std::min<int>(
        4, static_cast<int>(std::min(candidate.size(), reference.size())));

    double log_sum = 0.0;
    for (int n = 1; n <= max_order; ++n) {
        const auto cand = ngram_counts(candidate, n);
        const auto ref = ngram_counts(reference, n);
        long clipped = 0;
        long total = 0;
        for (const auto& [k, c] : cand) {
            total += c;
            const auto it = ref.find(k);
            if (it != ref.end()) clipped += std::min(c, it->second);
        }
        const double p =
            clipped > 0 ? static_cast<double>(clipped) / static_cast<double>(total)
                        : 1e-9;
        log_sum += std::log(p);
    }
    double bleu = std::exp(log_sum / max_order);
    const auto c = static_cast<double>(candidate.size());
    const auto r = static_cast<double>(reference.size());
    if (c < r) bleu *= std::exp(1.0 - r / c);
    return bleu;
}

double distinct_n(std::span<const TokenId> text, int n) {
    if (n < 1)
        throw std::invalid_argument("distinct_n: n must be >= 1");
    if (static_cast<int>(text.size()) < n)
        throw std::invalid_argument("distinct_n: text shorter than n");
    const auto counts = ngram_counts(text, n);
    const auto total = static_cast<double>(text.size() - n + 1);
    return static_cast<double>(counts.size()) / total;
}

EfficacyReport efficacy(const std::vector<bool>& attacked_detected,
                        std::span<const double> attacked_z,
                        std::span<const double> human_z,
                        std::span<const double> target_fprs) {
    EfficacyReport r;
    r.asr = attack_success_rate(attacked_detected);
    std::vector<double> human(human_z.begin(), human_z.end());
    for (double fpr : target_fprs) {
        const double tau = calibrate_threshold(human, fpr);
        r.threshold_at_fpr[fpr] = tau;
        r.tpr_at_fpr[fpr] = tpr_at_threshold(attacked_z, tau);
    }
    r.best = best_f1(attacked_z, human_z);
    return r;
}

} // namespace wmlab
