#pragma once
// Corpus and experiment-config serialization. Corpora are JSON Lines, one
// record per line; configs are a single JSON document with every knob the
// pipeline reads. Unknown config keys are rejected so typos fail loudly
// instead of silently running defaults.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wmlab/bira.hpp"
#include "wmlab/lm.hpp"
#include "wmlab/watermark.hpp"

namespace wmlab {

struct CorpusRecord {
    std::string id;
    TokenSequence prompt;
    std::optional<TokenSequence> watermarked;
    std::optional<TokenSequence> attacked;
    std::map<std::string, std::string> provenance;
};

using Corpus = std::vector<CorpusRecord>;

struct ModelConfig {
    int vocab_size = 256;
    std::uint64_t seed = 11;
    double concentration = 2.0;
};

struct ExperimentConfig {
    ModelConfig model;
    WatermarkScheme scheme;
    AttackConfig attack;
    double overlap_bonus = 2.5; // paraphraser lexical-reuse strength
    int sample_count = 500;
    int gen_length = 230;
    int prompt_length = 8;
    std::uint64_t seed = 1;
    int jobs = 0;
    std::vector<double> beta_sweep = {0, -1, -2, -3, -4, -5, -6, -7, -8, -9};
    std::vector<double> q_sweep = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
};

// JSONL corpus. Loading validates ids (present, unique), token ranges when
// vocab_size > 0, and reports parse failures with 1-based line numbers.
Corpus load_corpus(const std::filesystem::path& path, int vocab_size = 0);
void save_corpus(const std::filesystem::path& path, const Corpus& corpus);

// Config round trip. load applies defaults for absent keys and rejects
// unknown ones.
ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const ExperimentConfig& cfg);

// Stable-format helpers shared by every CSV the pipeline emits: floats at
// max round-trip precision, booleans as 0/1, LF line endings.
std::string csv_double(double x);

} // namespace wmlab
