#pragma once
// Small autoregressive language models over integer token ids, plus the
// sampling primitives shared by generation, watermarking and rewriting.
// The models are synthetic (seeded Markov chains): cheap enough to run
// thousands of generations in a test suite, structured enough to exercise
// every statistical property the lab measures.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "wmlab/prng.hpp"

namespace wmlab {

using TokenId = std::int32_t;
using TokenSequence = std::vector<TokenId>;
using LogitVector = std::vector<double>;

struct Vocabulary {
    int size = 0;
    // Optional surface forms; only the remote bridge needs them.
    std::unordered_map<TokenId, std::string> surface;

    bool contains(TokenId id) const { return id >= 0 && id < size; }
};

struct SamplingConfig {
    double temperature = 0.7;
    double top_p = 0.95;
    std::uint64_t seed = 0;
};

// Abstract next-token model. Implementations must return finite logits of
// length vocab().size for any valid prefix.
class Model {
  public:
    virtual ~Model() = default;
    virtual const Vocabulary& vocab() const = 0;
    virtual LogitVector logits(std::span<const TokenId> prefix) const = 0;
    // End-of-sequence id if the model defines one; the synthetic chains
    // run open-ended.
    virtual std::optional<TokenId> eos() const { return std::nullopt; }
};

// Order-1 Markov chain. Row i is drawn once at construction from a seeded
// Dirichlet-like recipe: u_k ~ splitmix64 uniforms, w_k = u_k^(1/conc),
// normalized. concentration > 1 flattens rows (higher entropy), < 1 makes
// them spiky. Rows, and therefore all downstream statistics, are a pure
// function of (vocab_size, seed, concentration).
class MarkovModel : public Model {
  public:
    MarkovModel(int vocab_size, std::uint64_t seed, double concentration = 1.0);

    const Vocabulary& vocab() const override { return vocab_; }
    LogitVector logits(std::span<const TokenId> prefix) const override;

    std::uint64_t seed() const { return seed_; }
    double concentration() const { return concentration_; }

    // Transition row as probabilities; prev == vocab_size selects the row
    // used for an empty prefix.
    const std::vector<double>& row(TokenId prev) const;

  private:
    Vocabulary vocab_;
    std::uint64_t seed_;
    double concentration_;
    std::vector<std::vector<double>> rows_;     // probabilities
    std::vector<std::vector<double>> log_rows_; // cached ln(p)
};

// Stand-in for an instruction-following paraphraser: the base model with a
// fixed logit bonus on the source's content tokens, the ids observed at
// positions whose self-information under the base model reaches the median
// over the source. Real paraphrases keep the distinctive words of a
// passage and re-derive the common ones from their own language model; the
// split reproduces that at desk scale. Common low-surprisal tokens need no
// bonus because the base model emits them anyway. bonus = 0 degrades to
// the base model exactly.
class ParaphraseModel : public Model {
  public:
    ParaphraseModel(const Model& base, std::span<const TokenId> source,
                    double overlap_bonus);

    const Vocabulary& vocab() const override { return base_->vocab(); }
    LogitVector logits(std::span<const TokenId> prefix) const override;
    std::optional<TokenId> eos() const override { return base_->eos(); }

    double overlap_bonus() const { return bonus_; }
    // True iff the bonus applies to this id.
    bool emphasizes(TokenId id) const;

  private:
    const Model* base_;
    std::vector<std::uint8_t> emphasized_;
    double bonus_;
};

// q-th percentile with linear interpolation between order statistics
// (q = 0.5 over {1,2,3,4} gives 2.5). Requires non-empty values, q in [0,1].
double percentile(std::vector<double> values, double q);

// Numerically safe softmax at temperature T: subtracts the max logit before
// exponentiating. Requires T > 0 and finite logits.
std::vector<double> softmax(std::span<const double> logits, double temperature);

// Ids of the top-p nucleus: probabilities sorted descending (ties broken by
// ascending id), kept until cumulative mass first reaches top_p. The token
// that crosses the boundary is included. Requires 0 < top_p <= 1.
std::vector<TokenId> top_p_nucleus(std::span<const double> probs, double top_p);

// One nucleus-sampling draw from the given logits.
TokenId sample_next(std::span<const double> logits, const SamplingConfig& cfg,
                    SplitMix64& rng);

// Plain autoregressive sampling (no watermark, no bias) for `length` steps.
TokenSequence sample_sequence(const Model& model, std::span<const TokenId> prompt,
                              int length, const SamplingConfig& cfg);

// Per-token self-information -ln P(text[n] | prompt, text[:n]) under the
// model's unmodified distribution (temperature 1, no truncation).
std::vector<double> self_information(const Model& model,
                                     std::span<const TokenId> text,
                                     std::span<const TokenId> prompt = {});

// exp(mean self-information) over the text.
double perplexity(const Model& model, std::span<const TokenId> text,
                  std::span<const TokenId> prompt = {});

} // namespace wmlab
