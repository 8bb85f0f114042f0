#pragma once
// Attack efficacy and text quality metrics: attack success rate, detector
// threshold calibration at a target false-positive rate, TPR and best-F1
// over z scores, Self-BLEU against the source text, and distinct-n.

#include <map>
#include <span>
#include <vector>

#include "wmlab/lm.hpp"

namespace wmlab {

struct F1Point {
    double threshold = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct EfficacyReport {
    double asr = 0.0;                          // fraction evading detection
    std::map<double, double> threshold_at_fpr; // target fpr -> calibrated tau
    std::map<double, double> tpr_at_fpr;       // target fpr -> TPR on attacked
    F1Point best;                              // best F1 attacked vs. human
};

// Fraction of attacked samples the detector misses.
double attack_success_rate(const std::vector<bool>& detected);

// Smallest human-score order statistic t such that the fraction of human
// scores >= t stays within target_fpr. If no score qualifies (e.g. target
// 0), returns the next representable double above the human maximum, which
// flags nothing. Threshold semantics everywhere: score >= t is "flagged".
double calibrate_threshold(std::vector<double> human_scores, double target_fpr);

// Fraction of scores >= threshold.
double tpr_at_threshold(std::span<const double> scores, double threshold);

// Best F1 for separating positive from negative scores, scanning every
// observed score as a candidate threshold (score >= t flags positive).
// Ties prefer the lower threshold. Fully overlapping balanced classes
// bottom out at F1 = 2/3 (the all-positive classifier).
F1Point best_f1(std::span<const double> positive, std::span<const double> negative);

// Self-BLEU of a rewrite against its source, n-gram orders 1..4 with
// uniform weights, modified (clipped) precision and brevity penalty
// exp(1 - r/c) when the candidate is shorter. Orders longer than either
// text are dropped from the geometric mean, so identical texts score 1.0
// exactly; a zero clipped count for a kept order falls back to 1e-9.
double self_bleu(std::span<const TokenId> candidate, std::span<const TokenId> reference);

// Distinct n-grams / total n-grams. Requires |text| >= n.
double distinct_n(std::span<const TokenId> text, int n);

// Convenience bundle: ASR from the scheme-threshold decisions, calibrated
// thresholds and TPR at each target FPR, best-F1 attacked vs. human.
EfficacyReport efficacy(const std::vector<bool>& attacked_detected,
                        std::span<const double> attacked_z,
                        std::span<const double> human_z,
                        std::span<const double> target_fprs);

} // namespace wmlab
