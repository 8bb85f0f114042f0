#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "wmlab/remote.hpp"

using namespace wmlab;
using nlohmann::json;

namespace {

// A mock provider bound to an ephemeral port. The handler runs under the
// server's own lock-free dispatch, so anything it records for later
// inspection goes through atomics or is only read after stop().
class MockServer {
  public:
    explicit MockServer(httplib::Server::Handler handler) {
        server_.Post("/v1/generate", std::move(handler));
        port_ = server_.bind_to_any_port("127.0.0.1");
        REQUIRE(port_ > 0);
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~MockServer() {
        server_.stop();
        thread_.join();
    }

    RemoteConfig config() const {
        RemoteConfig cfg;
        cfg.host = "127.0.0.1";
        cfg.port = port_;
        cfg.backoff_ms = 1;
        cfg.timeout_sec = 5;
        return cfg;
    }

  private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

std::string ok_body(const std::string& text) {
    json j;
    j["text"] = text;
    return j.dump();
}

} // namespace

TEST_CASE("request body carries the sampling surface and nothing else") {
    RemoteRequest req;
    req.prompt = "rewrite this";
    req.max_tokens = 64;
    req.temperature = 0.9;
    req.top_p = 0.8;
    req.logit_bias = {{3, -4.0}, {17, -4.0}};

    const json j = json::parse(build_request_json(req));
    CHECK(j.size() == 5);
    CHECK(j.at("prompt") == "rewrite this");
    CHECK(j.at("max_tokens") == 64);
    CHECK(j.at("temperature").get<double>() == doctest::Approx(0.9));
    CHECK(j.at("top_p").get<double>() == doctest::Approx(0.8));

    const json& bias = j.at("logit_bias");
    CHECK(bias.is_object());
    CHECK(bias.size() == 2);
    CHECK(bias.at("3").get<double>() == doctest::Approx(-4.0));
    CHECK(bias.at("17").get<double>() == doctest::Approx(-4.0));

    // The watermark key stays on our side of the wire in every case.
    for (const auto& [key, value] : j.items()) {
        CHECK(key.find("key") == std::string::npos);
        CHECK(key.find("scheme") == std::string::npos);
        CHECK(key.find("green") == std::string::npos);
    }

    RemoteRequest bare;
    bare.prompt = "p";
    const json b = json::parse(build_request_json(bare));
    CHECK(b.at("logit_bias").is_object());
    CHECK(b.at("logit_bias").empty());
}

TEST_CASE("response parser accepts the documented shapes") {
    const RemoteResult full = parse_response_json(
        R"({"text":"out","tokens":[5,9,1],"logprobs":[-0.25,-1.5,-0.125]})");
    CHECK(full.text == "out");
    CHECK(full.tokens == std::vector<TokenId>{5, 9, 1});
    CHECK(full.logprobs == std::vector<double>{-0.25, -1.5, -0.125});

    const RemoteResult bare = parse_response_json(R"({"text":"only"})");
    CHECK(bare.text == "only");
    CHECK(bare.tokens.empty());
    CHECK(bare.logprobs.empty());

    auto kind_of = [](const std::string& body) {
        try {
            parse_response_json(body);
        } catch (const RemoteError& e) {
            return e.kind();
        }
        return RemoteError::Kind::network; // wrong on purpose: must not reach
    };
    CHECK(kind_of("not json at all") == RemoteError::Kind::malformed);
    CHECK(kind_of(R"({"tokens":[1]})") == RemoteError::Kind::malformed);
    CHECK(kind_of(R"({"text":42})") == RemoteError::Kind::malformed);
    CHECK(kind_of(R"({"text":"x","tokens":"nope"})") ==
          RemoteError::Kind::malformed);
    CHECK(kind_of(R"({"text":"x","tokens":[1,2],"logprobs":[-0.5]})") ==
          RemoteError::Kind::malformed);
    CHECK(kind_of(R"({"text":"x","logprobs":[-0.5]})") ==
          RemoteError::Kind::malformed);
}

TEST_CASE("bias cap rejects the request before any connection attempt") {
    std::atomic<int> hits{0};
    MockServer server([&](const httplib::Request&, httplib::Response& res) {
        hits.fetch_add(1);
        res.set_content(ok_body("x"), "application/json");
    });

    RemoteConfig cfg = server.config();
    cfg.max_bias_entries = 2;

    RemoteRequest req;
    req.prompt = "p";
    req.logit_bias = {{1, -1.0}, {2, -1.0}, {3, -1.0}};

    try {
        remote_generate(cfg, req);
        FAIL("expected RemoteError");
    } catch (const RemoteError& e) {
        CHECK(e.kind() == RemoteError::Kind::bias_overflow);
        CHECK(std::string(e.what()).find("3") != std::string::npos);
    }
    CHECK(hits.load() == 0);
}

TEST_CASE("mock round trip carries auth header and request body") {
    std::string seen_auth;
    std::string seen_body;
    MockServer server([&](const httplib::Request& q, httplib::Response& res) {
        seen_auth = q.get_header_value("Authorization");
        seen_body = q.body;
        json j;
        j["text"] = "rewritten";
        j["tokens"] = {7, 8};
        j["logprobs"] = {-0.5, -0.75};
        res.set_content(j.dump(), "application/json");
    });

    RemoteConfig cfg = server.config();
    cfg.api_key = "sk-test";

    RemoteRequest req;
    req.prompt = "hello";
    req.max_tokens = 16;
    req.logit_bias = {{4, -2.5}};

    const RemoteResult out = remote_generate(cfg, req);
    CHECK(out.text == "rewritten");
    CHECK(out.tokens == std::vector<TokenId>{7, 8});
    CHECK(out.logprobs == std::vector<double>{-0.5, -0.75});

    CHECK(seen_auth == "Bearer sk-test");
    const json echoed = json::parse(seen_body);
    CHECK(echoed.at("prompt") == "hello");
    CHECK(echoed.at("max_tokens") == 16);
    CHECK(echoed.at("logit_bias").at("4").get<double>() ==
          doctest::Approx(-2.5));
}

TEST_CASE("transient 5xx responses are retried, the body unchanged") {
    std::atomic<int> hits{0};
    std::string first_body;
    std::string last_body;
    MockServer server([&](const httplib::Request& q, httplib::Response& res) {
        const int n = hits.fetch_add(1);
        if (n == 0) first_body = q.body;
        last_body = q.body;
        if (n < 2) {
            res.status = 503;
            res.set_content("busy", "text/plain");
        } else {
            res.set_content(ok_body("eventually"), "application/json");
        }
    });

    RemoteConfig cfg = server.config();
    cfg.max_attempts = 3;

    RemoteRequest req;
    req.prompt = "try again";

    const RemoteResult out = remote_generate(cfg, req);
    CHECK(out.text == "eventually");
    CHECK(hits.load() == 3);
    CHECK(first_body == last_body);
}

TEST_CASE("retry budget exhaustion surfaces as a network error") {
    std::atomic<int> hits{0};
    MockServer server([&](const httplib::Request&, httplib::Response& res) {
        hits.fetch_add(1);
        res.status = 500;
        res.set_content("down", "text/plain");
    });

    RemoteConfig cfg = server.config();
    cfg.max_attempts = 2;

    RemoteRequest req;
    req.prompt = "p";
    try {
        remote_generate(cfg, req);
        FAIL("expected RemoteError");
    } catch (const RemoteError& e) {
        CHECK(e.kind() == RemoteError::Kind::network);
    }
    CHECK(hits.load() == 2);
}

TEST_CASE("client errors fail immediately without a retry") {
    std::atomic<int> hits{0};
    MockServer server([&](const httplib::Request&, httplib::Response& res) {
        hits.fetch_add(1);
        res.status = 404;
        res.set_content("no such route", "text/plain");
    });

    RemoteConfig cfg = server.config();
    cfg.max_attempts = 5;

    RemoteRequest req;
    req.prompt = "p";
    CHECK_THROWS_AS(remote_generate(cfg, req), RemoteError);
    CHECK(hits.load() == 1);
}

TEST_CASE("malformed 200 bodies are not retried") {
    std::atomic<int> hits{0};
    MockServer server([&](const httplib::Request&, httplib::Response& res) {
        hits.fetch_add(1);
        res.set_content("{\"no_text\":true}", "application/json");
    });

    RemoteConfig cfg = server.config();
    cfg.max_attempts = 4;

    RemoteRequest req;
    req.prompt = "p";
    try {
        remote_generate(cfg, req);
        FAIL("expected RemoteError");
    } catch (const RemoteError& e) {
        CHECK(e.kind() == RemoteError::Kind::malformed);
    }
    CHECK(hits.load() == 1);
}

TEST_CASE("batch calls keep input order under a bounded pool") {
    MockServer server([&](const httplib::Request& q, httplib::Response& res) {
        const json j = json::parse(q.body);
        res.set_content(ok_body("echo:" + j.at("prompt").get<std::string>()),
                        "application/json");
    });

    RemoteConfig cfg = server.config();
    cfg.max_concurrency = 2;

    std::vector<RemoteRequest> reqs(5);
    for (int i = 0; i < 5; ++i) reqs[i].prompt = "p" + std::to_string(i);

    const std::vector<RemoteResult> out = remote_generate_many(cfg, reqs);
    REQUIRE(out.size() == 5);
    for (int i = 0; i < 5; ++i)
        CHECK(out[i].text == "echo:p" + std::to_string(i));

    CHECK(remote_generate_many(cfg, {}).empty());
}

TEST_CASE("batch errors propagate out of the pool") {
    MockServer server([&](const httplib::Request& q, httplib::Response& res) {
        const json j = json::parse(q.body);
        if (j.at("prompt") == "bad") {
            res.status = 400;
            res.set_content("rejected", "text/plain");
        } else {
            res.set_content(ok_body("fine"), "application/json");
        }
    });

    std::vector<RemoteRequest> reqs(3);
    reqs[0].prompt = "ok";
    reqs[1].prompt = "bad";
    reqs[2].prompt = "ok";
    CHECK_THROWS_AS(remote_generate_many(server.config(), reqs), RemoteError);
}

TEST_CASE("retokenize bridge maps surfaces and counts the misses") {
    Vocabulary proxy;
    proxy.size = 4;
    proxy.surface = {{0, "alpha"}, {1, "beta"}, {2, "gamma"}};
    // id 3 has no surface form on purpose

    const std::map<std::string, std::vector<TokenId>> target = {
        {"alpha", {10}},
        {"beta", {11, 12}},
        {"gamma", {12, 13}},
    };

    SUBCASE("identity-style single expansions") {
        const RetokenizeResult r = retokenize_bridge({0}, proxy, target);
        CHECK(r.ids == std::set<TokenId>{10});
        CHECK(r.skipped == 0);
    }
    SUBCASE("overlapping expansions collapse into one set") {
        const RetokenizeResult r = retokenize_bridge({1, 2}, proxy, target);
        CHECK(r.ids == std::set<TokenId>{11, 12, 13});
        CHECK(r.skipped == 0);
    }
    SUBCASE("a missing surface form is skipped") {
        const RetokenizeResult r = retokenize_bridge({0, 3}, proxy, target);
        CHECK(r.ids == std::set<TokenId>{10});
        CHECK(r.skipped == 1);
    }
    SUBCASE("a surface absent from the target map is skipped") {
        Vocabulary extra = proxy;
        extra.size = 5;
        extra.surface[4] = "delta";
        const RetokenizeResult r = retokenize_bridge({2, 4}, extra, target);
        CHECK(r.ids == std::set<TokenId>{12, 13});
        CHECK(r.skipped == 1);
    }
    SUBCASE("empty input maps to an empty result") {
        const RetokenizeResult r = retokenize_bridge({}, proxy, target);
        CHECK(r.ids.empty());
        CHECK(r.skipped == 0);
    }
}

TEST_CASE("prompt assets load verbatim") {
    namespace fs = std::filesystem;
    const fs::path path = fs::temp_directory_path() / "wmlab_prompt_asset.txt";
    {
        std::ofstream f(path, std::ios::binary);
        f << "Rewrite the passage.\nKeep every fact.\n";
    }
    CHECK(load_prompt_asset(path) == "Rewrite the passage.\nKeep every fact.\n");
    fs::remove(path);

    CHECK_THROWS_AS(load_prompt_asset(fs::path("/nonexistent/nope.txt")),
                    std::runtime_error);
}
