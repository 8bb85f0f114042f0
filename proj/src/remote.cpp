#include "wmlab/remote.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace wmlab {

using nlohmann::json;

std::string build_request_json(const RemoteRequest& req) {
    json j;
    j["prompt"] = req.prompt;
    j["max_tokens"] = req.max_tokens;
    j["temperature"] = req.temperature;
    j["top_p"] = req.top_p;
    // Bias keys are serialized as strings, the usual wire convention for
    // integer-keyed maps.
    json bias = json::object();
    for (const auto& [id, b] : req.logit_bias) bias[std::to_string(id)] = b;
    j["logit_bias"] = std::move(bias);
    return j.dump();
}

RemoteResult parse_response_json(const std::string& body) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception& e) {
        throw RemoteError(RemoteError::Kind::malformed,
                          std::string("response is not JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("text") || !j["text"].is_string())
        throw RemoteError(RemoteError::Kind::malformed,
                          "response lacks a string \"text\" field");
    RemoteResult r;
    r.text = j["text"].get<std::string>();
    try {
        if (j.contains("tokens"))
            r.tokens = j["tokens"].get<std::vector<TokenId>>();
        if (j.contains("logprobs"))
            r.logprobs = j["logprobs"].get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw RemoteError(RemoteError::Kind::malformed,
                          std::string("bad tokens/logprobs arrays: ") + e.what());
    }
    // Log-probabilities pair with token ids one to one; an array without
    // its partner (or of a different length) is unusable.
    if (!r.logprobs.empty() && r.logprobs.size() != r.tokens.size())
        throw RemoteError(RemoteError::Kind::malformed,
                          "tokens and logprobs lengths disagree");
    return r;
}

RemoteResult remote_generate(const RemoteConfig& cfg, const RemoteRequest& req) {
    if (static_cast<int>(req.logit_bias.size()) > cfg.max_bias_entries) {
        std::ostringstream os;
        os << "bias map has " << req.logit_bias.size() << " entries, cap is "
           << cfg.max_bias_entries;
        throw RemoteError(RemoteError::Kind::bias_overflow, os.str());
    }
    if (cfg.max_attempts < 1)
        throw std::invalid_argument("remote_generate: max_attempts must be >= 1");

    const std::string body = build_request_json(req);
    std::string last_error = "no attempt made";
    for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
        if (attempt > 0) {
            // 100ms, 200ms, 400ms, ... between idempotent re-sends.
            const auto wait =
                std::chrono::milliseconds(cfg.backoff_ms) * (1 << (attempt - 1));
            std::this_thread::sleep_for(wait);
        }
        httplib::Client client(cfg.host, cfg.port);
        client.set_connection_timeout(cfg.timeout_sec, 0);
        client.set_read_timeout(cfg.timeout_sec, 0);
        client.set_write_timeout(cfg.timeout_sec, 0);
        if (!cfg.api_key.empty())
            client.set_default_headers(
                {{"Authorization", "Bearer " + cfg.api_key}});

        const httplib::Result res = client.Post(cfg.path, body, "application/json");
        if (!res) {
            last_error = "connection failed: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500) {
            // Server-side trouble is the transient case worth retrying.
            last_error = "server returned status " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw RemoteError(RemoteError::Kind::network,
                              "server returned status " +
                                  std::to_string(res->status));
        return parse_response_json(res->body);
    }
    std::ostringstream os;
    os << "giving up after " << cfg.max_attempts << " attempts: " << last_error;
    throw RemoteError(RemoteError::Kind::network, os.str());
}

std::vector<RemoteResult> remote_generate_many(const RemoteConfig& cfg,
                                               const std::vector<RemoteRequest>& reqs) {
    if (cfg.max_concurrency < 1)
        throw std::invalid_argument("remote_generate_many: max_concurrency must be >= 1");
    std::vector<RemoteResult> results(reqs.size());
    if (reqs.empty()) return results;

    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    const auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= reqs.size() || failed.load()) return;
            try {
                results[i] = remote_generate(cfg, reqs[i]);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!failed.exchange(true)) first_error = std::current_exception();
                return;
            }
        }
    };

    const std::size_t pool =
        std::min<std::size_t>(reqs.size(), cfg.max_concurrency);
    std::vector<std::thread> threads;
    threads.reserve(pool);
    for (std::size_t t = 0; t < pool; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();

    if (failed.load()) std::rethrow_exception(first_error);
    return results;
}

RetokenizeResult retokenize_bridge(
    const std::set<TokenId>& proxy_ids, const Vocabulary& proxy_vocab,
    const std::map<std::string, std::vector<TokenId>>& target_tokens) {
    RetokenizeResult out;
    for (TokenId id : proxy_ids) {
        const auto sit = proxy_vocab.surface.find(id);
        if (sit == proxy_vocab.surface.end()) {
            ++out.skipped;
            continue;
        }
        const auto tit = target_tokens.find(sit->second);
        if (tit == target_tokens.end()) {
            ++out.skipped;
            continue;
        }
        out.ids.insert(tit->second.begin(), tit->second.end());
    }
    return out;
}

std::string load_prompt_asset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open prompt asset: " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

} // namespace wmlab
