#pragma once
// Corpus-level experiment pipeline: generate watermarked samples, attack
// them, detect, analyze bounds, and emit CSV reports. Every per-record
// kernel is OpenMP-parallel with a plain-loop serial reference kept next to
// it; records are seeded individually (mix of the master seed, a stream
// tag and the record index), so parallel and serial runs produce identical
// bytes at any thread count.

#include <filesystem>
#include <string>
#include <vector>

#include "wmlab/analysis.hpp"
#include "wmlab/bira.hpp"
#include "wmlab/corpus.hpp"
#include "wmlab/metrics.hpp"
#include "wmlab/watermark.hpp"

namespace wmlab {

// Stream tags separating the independent randomness lanes of one master
// seed. Part of the reproducibility contract (README).
enum SeedStream : std::uint64_t {
    kStreamPrompt = 1,
    kStreamGenerate = 2,
    kStreamAttack = 3,
    kStreamHuman = 4,
    kStreamVanilla = 5,
    kStreamSweepBeta = 6,
    kStreamSweepQ = 7,
};

struct AttackLogRow {
    std::string id;
    double final_beta = 0.0;
    int attempts = 0;
    int degeneration_events = 0;
    bool degenerate = false;
    double eta = 0.0;
    int proxy_size = 0;
};

struct DetectRow {
    std::string id;
    std::string field; // "watermarked" or "attacked"
    DetectionReport report;
};

struct SweepRow {
    double x = 0.0; // beta or q
    double mean_z = 0.0;
    double asr = 0.0;
    double mean_self_bleu = 0.0;
    double mean_distinct1 = 0.0;
    long degeneration_events = 0;
};

MarkovModel make_model(const ModelConfig& mc);

// Fresh corpus: per record an unwatermarked prompt and a watermarked
// continuation of cfg.gen_length tokens.
Corpus generate_corpus(const ExperimentConfig& cfg, int jobs);
Corpus generate_corpus_serial(const ExperimentConfig& cfg);

// BIRA over every record's watermarked text; fills record.attacked and
// returns one log row per record. Provenance keeps the final bias so later
// analysis can reconstruct the attacked sampler exactly.
std::vector<AttackLogRow> attack_corpus(const ExperimentConfig& cfg, Corpus& corpus,
                                        int jobs);
std::vector<AttackLogRow> attack_corpus_serial(const ExperimentConfig& cfg,
                                               Corpus& corpus);

// Standalone detection (no prompt context) of the chosen field.
std::vector<DetectRow> detect_corpus(const ExperimentConfig& cfg, const Corpus& corpus,
                                     const std::string& field, int jobs);

// Per-sample concentration bounds. Attacked rows rebuild each record's
// rewrite sampler from provenance; vanilla rows rewrite with beta = 0 on
// the fly and bound that sampler instead.
std::vector<BoundReport> bound_corpus_attacked(const ExperimentConfig& cfg,
                                               const Corpus& corpus, int jobs);
std::vector<BoundReport> bound_corpus_vanilla(const ExperimentConfig& cfg,
                                              const Corpus& corpus, int jobs);

// z scores of unwatermarked model text, one per count, for calibration.
std::vector<double> human_z_scores(const ExperimentConfig& cfg, int count, int jobs);

// Re-attack the corpus once per sweep value.
std::vector<SweepRow> sweep_beta(const ExperimentConfig& cfg, const Corpus& corpus,
                                 int jobs);
std::vector<SweepRow> sweep_q(const ExperimentConfig& cfg, const Corpus& corpus,
                              int jobs);

// CSV emission, stable column orders (see README).
void write_detect_csv(const std::filesystem::path& path,
                      const std::vector<DetectRow>& rows);
void write_bounds_csv(const std::filesystem::path& path,
                      const std::vector<BoundReport>& rows);
void write_attack_log_csv(const std::filesystem::path& path,
                          const std::vector<AttackLogRow>& rows);
void write_sweep_csv(const std::filesystem::path& path, const std::string& x_name,
                     const std::vector<SweepRow>& rows);
void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<std::pair<std::string, double>>& rows);

} // namespace wmlab
