#pragma once
// HTTP adapter for a hosted generation service that accepts per-token
// logit-bias maps, so the same rewriting recipe can drive a real model
// instead of the synthetic one. Nothing in the attack or analysis modules
// depends on this; the library builds and tests fully without it
// (WMLAB_ENABLE_REMOTE=OFF). Services that expose no log-probabilities get
// self-information from a local auxiliary model instead; the bridge below
// carries the resulting ids across tokenizers.

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "wmlab/lm.hpp"

namespace wmlab {

struct RemoteConfig {
    std::string host = "localhost";
    int port = 8080;
    std::string path = "/v1/generate";
    std::string api_key;        // sent as a bearer token when non-empty
    int max_attempts = 3;       // total tries per request
    int backoff_ms = 100;       // doubles after every failed try
    int timeout_sec = 30;       // per-request connect/read timeout
    int max_bias_entries = 300; // provider-side cap on the bias map
    int max_concurrency = 4;    // bounded worker pool for batch calls
};

struct RemoteRequest {
    std::string prompt;
    int max_tokens = 256;
    double temperature = 0.7;
    double top_p = 0.95;
    std::map<TokenId, double> logit_bias; // target-tokenizer ids
};

struct RemoteResult {
    std::string text;
    std::vector<TokenId> tokens;  // empty when the service omits them
    std::vector<double> logprobs; // empty when the service exposes none
};

class RemoteError : public std::runtime_error {
  public:
    enum class Kind { network, malformed, bias_overflow };
    RemoteError(Kind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

  private:
    Kind kind_;
};

// The request body sent over the wire: prompt, sampling parameters and the
// bias map, nothing else. Watermark material never crosses this boundary.
std::string build_request_json(const RemoteRequest& req);

// Parses {"text": ..., "tokens": [...], "logprobs": [...]}, arrays
// optional. Throws RemoteError{malformed} on anything else.
RemoteResult parse_response_json(const std::string& body);

// One generation call with bounded retries and exponential backoff. The
// bias-map size is validated before the first connection attempt, and
// retries re-send the identical body.
RemoteResult remote_generate(const RemoteConfig& cfg, const RemoteRequest& req);

// Batch variant: at most cfg.max_concurrency requests in flight at once.
// Results keep the input order; the first error wins and is rethrown.
std::vector<RemoteResult> remote_generate_many(const RemoteConfig& cfg,
                                               const std::vector<RemoteRequest>& reqs);

struct RetokenizeResult {
    std::set<TokenId> ids; // target-tokenizer ids, deduplicated
    int skipped = 0;       // proxy ids with no usable mapping
};

// Proxy ids -> surface strings -> target ids. Proxy ids without a surface
// form, and surfaces absent from the target map, are counted and skipped.
// Overlapping multi-token expansions collapse into one id set.
RetokenizeResult retokenize_bridge(
    const std::set<TokenId>& proxy_ids, const Vocabulary& proxy_vocab,
    const std::map<std::string, std::vector<TokenId>>& target_tokens);

// Reads a prompt asset such as assets/paraphrase_prompt.txt, the default
// rewriting instruction shipped with the repo.
std::string load_prompt_asset(const std::filesystem::path& path);

} // namespace wmlab
