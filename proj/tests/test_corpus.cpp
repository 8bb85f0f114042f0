#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "wmlab/corpus.hpp"

using namespace wmlab;
namespace fs = std::filesystem;

namespace {

fs::path test_dir() {
    const fs::path dir = fs::temp_directory_path() / "wmlab_test_corpus";
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p);
    out << content;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// Expect `load_corpus` to fail and return the message for inspection.
template <typename Fn>
std::string capture_error(Fn&& fn) {
    try {
        fn();
    } catch (const std::exception& e) {
        return e.what();
    }
    FAIL("expected an exception");
    return {};
}

} // namespace

TEST_CASE("corpus survives a save/load/save round trip byte for byte") {
    Corpus corpus;
    CorpusRecord full;
    full.id = "gen-000";
    full.prompt = {1, 2, 3};
    full.watermarked = TokenSequence{4, 5, 6, 7};
    full.attacked = TokenSequence{8, 9};
    full.provenance["final_beta"] = "-4.875";
    full.provenance["note"] = "caf\xc3\xa9 \xe2\x9c\x93"; // value stays verbatim
    corpus.push_back(full);

    CorpusRecord minimal;
    minimal.id = "gen-001";
    minimal.prompt = {0};
    corpus.push_back(minimal);

    CorpusRecord empty_prompt;
    empty_prompt.id = "gen-002";
    empty_prompt.watermarked = TokenSequence{1, 1, 2};
    corpus.push_back(empty_prompt);

    const fs::path a = test_dir() / "round_a.jsonl";
    const fs::path b = test_dir() / "round_b.jsonl";
    save_corpus(a, corpus);
    const Corpus loaded = load_corpus(a, 16);

    REQUIRE(loaded.size() == 3);
    CHECK(loaded[0].id == "gen-000");
    CHECK(loaded[0].prompt == full.prompt);
    CHECK(loaded[0].watermarked == full.watermarked);
    CHECK(loaded[0].attacked == full.attacked);
    CHECK(loaded[0].provenance == full.provenance);
    CHECK(loaded[1].id == "gen-001");
    CHECK_FALSE(loaded[1].watermarked.has_value());
    CHECK_FALSE(loaded[1].attacked.has_value());
    CHECK(loaded[1].provenance.empty());
    CHECK(loaded[2].prompt.empty());

    save_corpus(b, loaded);
    CHECK(read_file(a) == read_file(b));
}

TEST_CASE("corpus loader reports the failing line number") {
    const fs::path p = test_dir() / "bad_json.jsonl";
    write_file(p,
               "{\"id\":\"a\",\"prompt\":[1]}\n"
               "{this is not json\n");
    const std::string msg = capture_error([&] { load_corpus(p); });
    CHECK(msg.find(":2:") != std::string::npos);
    CHECK(msg.find("bad JSON") != std::string::npos);
}

TEST_CASE("corpus loader rejects malformed records") {
    const fs::path p = test_dir() / "bad_records.jsonl";

    SUBCASE("duplicate id") {
        write_file(p,
                   "{\"id\":\"a\",\"prompt\":[]}\n"
                   "{\"id\":\"a\",\"prompt\":[]}\n");
        const std::string msg = capture_error([&] { load_corpus(p); });
        CHECK(msg.find("duplicate id") != std::string::npos);
        CHECK(msg.find(":2:") != std::string::npos);
    }
    SUBCASE("unknown key") {
        write_file(p, "{\"id\":\"a\",\"prompt\":[],\"promt\":[]}\n");
        const std::string msg = capture_error([&] { load_corpus(p); });
        CHECK(msg.find("unknown key") != std::string::npos);
        CHECK(msg.find("promt") != std::string::npos);
    }
    SUBCASE("missing id") {
        write_file(p, "{\"prompt\":[]}\n");
        CHECK(capture_error([&] { load_corpus(p); }).find("id") !=
              std::string::npos);
    }
    SUBCASE("missing prompt") {
        write_file(p, "{\"id\":\"a\"}\n");
        CHECK(capture_error([&] { load_corpus(p); }).find("prompt") !=
              std::string::npos);
    }
    SUBCASE("non-integer tokens") {
        write_file(p, "{\"id\":\"a\",\"prompt\":[1.5]}\n");
        CHECK(capture_error([&] { load_corpus(p); }).find("integers") !=
              std::string::npos);
    }
    SUBCASE("non-string provenance value") {
        write_file(p, "{\"id\":\"a\",\"prompt\":[],\"provenance\":{\"k\":3}}\n");
        CHECK(capture_error([&] { load_corpus(p); }).find("strings") !=
              std::string::npos);
    }
    SUBCASE("non-object record") {
        write_file(p, "[1,2,3]\n");
        CHECK(capture_error([&] { load_corpus(p); }).find("object") !=
              std::string::npos);
    }
}

TEST_CASE("corpus loader checks token ranges only when asked") {
    const fs::path p = test_dir() / "range.jsonl";
    write_file(p, "{\"id\":\"a\",\"prompt\":[0,15],\"watermarked\":[16]}\n");

    // vocab_size = 0 disables the check entirely.
    CHECK(load_corpus(p).size() == 1);
    CHECK(load_corpus(p, 17).size() == 1);
    const std::string msg = capture_error([&] { load_corpus(p, 16); });
    CHECK(msg.find("outside vocab") != std::string::npos);
}

TEST_CASE("corpus loader skips blank lines and missing files throw") {
    const fs::path p = test_dir() / "blank.jsonl";
    write_file(p, "\n{\"id\":\"a\",\"prompt\":[]}\n\n");
    CHECK(load_corpus(p).size() == 1);
    CHECK_THROWS_AS(load_corpus(test_dir() / "no_such_file.jsonl"),
                    std::runtime_error);
}

TEST_CASE("empty config file yields the documented defaults") {
    const fs::path p = test_dir() / "empty_config.json";
    write_file(p, "{}");
    const ExperimentConfig cfg = load_config(p);

    CHECK(cfg.model.vocab_size == 256);
    CHECK(cfg.model.seed == 11);
    CHECK(cfg.model.concentration == 2.0);
    CHECK(cfg.scheme.kind == SchemeKind::unigram);
    CHECK(cfg.scheme.p0 == 0.5);
    CHECK(cfg.scheme.gamma == 2.0);
    CHECK(cfg.scheme.tau == 4.0);
    CHECK(cfg.attack.sampling.temperature == 0.7);
    CHECK(cfg.attack.sampling.top_p == 0.95);
    CHECK(cfg.attack.beta0 == -4.0);
    CHECK(cfg.attack.lr == 0.125);
    CHECK(cfg.attack.q == 0.5);
    CHECK(cfg.attack.restarts == 10);
    CHECK(cfg.attack.window == 450);
    CHECK(cfg.attack.rho == 0.25);
    CHECK(cfg.overlap_bonus == 2.5);
    CHECK(cfg.sample_count == 500);
    CHECK(cfg.gen_length == 230);
    CHECK(cfg.prompt_length == 8);
    CHECK(cfg.seed == 1);
    CHECK(cfg.jobs == 0);
    CHECK(cfg.beta_sweep.size() == 10);
    CHECK(cfg.q_sweep.size() == 10);
}

TEST_CASE("partial config overrides only the named keys") {
    const fs::path p = test_dir() / "partial_config.json";
    write_file(p, R"({
        "scheme": {"kind": "kgw", "tau": 2.0},
        "sampling": {"seed": 9},
        "attack": {"beta0": -6.5},
        "sample_count": 12
    })");
    const ExperimentConfig cfg = load_config(p);
    CHECK(cfg.scheme.kind == SchemeKind::kgw);
    CHECK(cfg.scheme.tau == 2.0);
    CHECK(cfg.scheme.p0 == 0.5); // untouched
    CHECK(cfg.attack.sampling.seed == 9);
    CHECK(cfg.attack.sampling.temperature == 0.7);
    CHECK(cfg.attack.beta0 == -6.5);
    CHECK(cfg.attack.lr == 0.125);
    CHECK(cfg.sample_count == 12);
    CHECK(cfg.gen_length == 230);
}

TEST_CASE("config loader rejects unknown keys at every level") {
    const fs::path p = test_dir() / "bad_config.json";

    SUBCASE("top level") {
        write_file(p, R"({"atack": {}})");
        CHECK(capture_error([&] { load_config(p); }).find("atack") !=
              std::string::npos);
    }
    SUBCASE("nested") {
        write_file(p, R"({"model": {"vocabsize": 4}})");
        CHECK(capture_error([&] { load_config(p); }).find("vocabsize") !=
              std::string::npos);
    }
    SUBCASE("bad scheme kind") {
        write_file(p, R"({"scheme": {"kind": "banana"}})");
        CHECK(capture_error([&] { load_config(p); }).find("unigram") !=
              std::string::npos);
    }
    SUBCASE("bad JSON") {
        write_file(p, "{");
        CHECK(capture_error([&] { load_config(p); }).find("bad JSON") !=
              std::string::npos);
    }
}

TEST_CASE("config survives a save/load round trip") {
    ExperimentConfig cfg;
    cfg.model.vocab_size = 64;
    cfg.model.seed = 77;
    cfg.model.concentration = 1.25;
    cfg.scheme.kind = SchemeKind::kgw;
    cfg.scheme.key = 1234;
    cfg.scheme.p0 = 0.25;
    cfg.scheme.gamma = 1.5;
    cfg.scheme.tau = 3.0;
    cfg.attack.sampling = {0.9, 0.8, 5};
    cfg.attack.beta0 = -7.25;
    cfg.attack.lr = 0.5;
    cfg.attack.q = 0.3;
    cfg.attack.restarts = 4;
    cfg.attack.max_length = 99;
    cfg.attack.window = 50;
    cfg.attack.rho = 0.4;
    cfg.overlap_bonus = 1.75;
    cfg.sample_count = 7;
    cfg.gen_length = 33;
    cfg.prompt_length = 2;
    cfg.seed = 909;
    cfg.jobs = 3;
    cfg.beta_sweep = {0.0, -2.5};
    cfg.q_sweep = {0.1, 0.9};

    const fs::path p = test_dir() / "round_config.json";
    save_config(p, cfg);
    const ExperimentConfig back = load_config(p);

    CHECK(back.model.vocab_size == cfg.model.vocab_size);
    CHECK(back.model.seed == cfg.model.seed);
    CHECK(back.model.concentration == cfg.model.concentration);
    CHECK(back.scheme.kind == cfg.scheme.kind);
    CHECK(back.scheme.key == cfg.scheme.key);
    CHECK(back.scheme.p0 == cfg.scheme.p0);
    CHECK(back.scheme.gamma == cfg.scheme.gamma);
    CHECK(back.scheme.tau == cfg.scheme.tau);
    CHECK(back.attack.sampling.temperature == cfg.attack.sampling.temperature);
    CHECK(back.attack.sampling.top_p == cfg.attack.sampling.top_p);
    CHECK(back.attack.sampling.seed == cfg.attack.sampling.seed);
    CHECK(back.attack.beta0 == cfg.attack.beta0);
    CHECK(back.attack.lr == cfg.attack.lr);
    CHECK(back.attack.q == cfg.attack.q);
    CHECK(back.attack.restarts == cfg.attack.restarts);
    CHECK(back.attack.max_length == cfg.attack.max_length);
    CHECK(back.attack.window == cfg.attack.window);
    CHECK(back.attack.rho == cfg.attack.rho);
    CHECK(back.overlap_bonus == cfg.overlap_bonus);
    CHECK(back.sample_count == cfg.sample_count);
    CHECK(back.gen_length == cfg.gen_length);
    CHECK(back.prompt_length == cfg.prompt_length);
    CHECK(back.seed == cfg.seed);
    CHECK(back.jobs == cfg.jobs);
    CHECK(back.beta_sweep == cfg.beta_sweep);
    CHECK(back.q_sweep == cfg.q_sweep);
}

TEST_CASE("csv doubles round trip at full precision") {
    CHECK(csv_double(-4.875) == "-4.875");
    CHECK(csv_double(1.0) == "1");
    CHECK(csv_double(0.1) == "0.10000000000000001");
    const double third = 1.0 / 3.0;
    CHECK(std::stod(csv_double(third)) == third);
}
