#include "wmlab/corpus.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace wmlab {

using nlohmann::json;

namespace {

[[noreturn]] void fail_line(const std::filesystem::path& path, std::size_t line,
                            const std::string& what) {
    throw std::runtime_error(path.string() + ":" + std::to_string(line) + ": " + what);
}

TokenSequence tokens_from_json(const json& j, const char* field) {
    if (!j.is_array())
        throw std::runtime_error(std::string(field) + " must be an array");
    TokenSequence out;
    out.reserve(j.size());
    for (const auto& v : j) {
        if (!v.is_number_integer())
            throw std::runtime_error(std::string(field) + " must hold integers");
        out.push_back(v.get<TokenId>());
    }
    return out;
}

void check_range(const TokenSequence& seq, int vocab_size, const char* field) {
    if (vocab_size <= 0) return;
    for (TokenId t : seq)
        if (t < 0 || t >= vocab_size)
            throw std::runtime_error(std::string(field) + ": token id " +
                                     std::to_string(t) + " outside vocab of " +
                                     std::to_string(vocab_size));
}

void reject_unknown_keys(const json& j, std::initializer_list<const char*> known,
                         const char* where) {
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* k : known)
            if (key == k) { ok = true; break; }
        if (!ok)
            throw std::runtime_error(std::string("unknown key \"") + key +
                                     "\" in " + where);
    }
}

} // namespace

Corpus load_corpus(const std::filesystem::path& path, int vocab_size) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open corpus: " + path.string());
    Corpus corpus;
    std::set<std::string> seen_ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            fail_line(path, lineno, std::string("bad JSON: ") + e.what());
        }
        try {
            if (!j.is_object()) throw std::runtime_error("record must be an object");
            reject_unknown_keys(
                j, {"id", "prompt", "watermarked", "attacked", "provenance"},
                "corpus record");
            CorpusRecord rec;
            if (!j.contains("id") || !j["id"].is_string())
                throw std::runtime_error("missing string field \"id\"");
            rec.id = j["id"].get<std::string>();
            if (rec.id.empty()) throw std::runtime_error("empty id");
            if (!seen_ids.insert(rec.id).second)
                throw std::runtime_error("duplicate id \"" + rec.id + "\"");
            if (!j.contains("prompt"))
                throw std::runtime_error("missing field \"prompt\"");
            rec.prompt = tokens_from_json(j["prompt"], "prompt");
            check_range(rec.prompt, vocab_size, "prompt");
            if (j.contains("watermarked")) {
                rec.watermarked = tokens_from_json(j["watermarked"], "watermarked");
                check_range(*rec.watermarked, vocab_size, "watermarked");
            }
            if (j.contains("attacked")) {
                rec.attacked = tokens_from_json(j["attacked"], "attacked");
                check_range(*rec.attacked, vocab_size, "attacked");
            }
            if (j.contains("provenance")) {
                if (!j["provenance"].is_object())
                    throw std::runtime_error("provenance must be an object");
                for (const auto& [k, v] : j["provenance"].items()) {
                    if (!v.is_string())
                        throw std::runtime_error("provenance values must be strings");
                    rec.provenance[k] = v.get<std::string>();
                }
            }
            corpus.push_back(std::move(rec));
        } catch (const std::runtime_error& e) {
            fail_line(path, lineno, e.what());
        }
    }
    return corpus;
}

void save_corpus(const std::filesystem::path& path, const Corpus& corpus) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write corpus: " + path.string());
    for (const CorpusRecord& rec : corpus) {
        json j;
        j["id"] = rec.id;
        j["prompt"] = rec.prompt;
        // Absent optional fields stay absent, so a load/save round trip is
        // byte-identical.
        if (rec.watermarked) j["watermarked"] = *rec.watermarked;
        if (rec.attacked) j["attacked"] = *rec.attacked;
        if (!rec.provenance.empty()) j["provenance"] = rec.provenance;
        out << j.dump() << "\n";
    }
    if (!out)
        throw std::runtime_error("write failed: " + path.string());
}

namespace {

SchemeKind scheme_kind_from(const std::string& s) {
    if (s == "unigram") return SchemeKind::unigram;
    if (s == "kgw") return SchemeKind::kgw;
    throw std::runtime_error("scheme.kind must be \"unigram\" or \"kgw\"");
}

const char* scheme_kind_name(SchemeKind k) {
    return k == SchemeKind::unigram ? "unigram" : "kgw";
}

} // namespace

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open config: " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw std::runtime_error(path.string() + ": bad JSON: " + e.what());
    }

    ExperimentConfig cfg;
    try {
        reject_unknown_keys(j,
                            {"model", "scheme", "sampling", "attack",
                             "overlap_bonus", "sample_count", "gen_length",
                             "prompt_length", "seed", "jobs", "beta_sweep",
                             "q_sweep"},
                            "config");
        if (j.contains("model")) {
            const auto& m = j["model"];
            reject_unknown_keys(m, {"vocab_size", "seed", "concentration"},
                                "config.model");
            if (m.contains("vocab_size")) cfg.model.vocab_size = m["vocab_size"];
            if (m.contains("seed")) cfg.model.seed = m["seed"].get<std::uint64_t>();
            if (m.contains("concentration"))
                cfg.model.concentration = m["concentration"];
        }
        if (j.contains("scheme")) {
            const auto& s = j["scheme"];
            reject_unknown_keys(s, {"kind", "key", "p0", "gamma", "tau"},
                                "config.scheme");
            if (s.contains("kind"))
                cfg.scheme.kind = scheme_kind_from(s["kind"].get<std::string>());
            if (s.contains("key")) cfg.scheme.key = s["key"].get<std::uint64_t>();
            if (s.contains("p0")) cfg.scheme.p0 = s["p0"];
            if (s.contains("gamma")) cfg.scheme.gamma = s["gamma"];
            if (s.contains("tau")) cfg.scheme.tau = s["tau"];
        }
        if (j.contains("sampling")) {
            const auto& s = j["sampling"];
            reject_unknown_keys(s, {"temperature", "top_p", "seed"},
                                "config.sampling");
            if (s.contains("temperature"))
                cfg.attack.sampling.temperature = s["temperature"];
            if (s.contains("top_p")) cfg.attack.sampling.top_p = s["top_p"];
            if (s.contains("seed"))
                cfg.attack.sampling.seed = s["seed"].get<std::uint64_t>();
        }
        if (j.contains("attack")) {
            const auto& a = j["attack"];
            reject_unknown_keys(a,
                                {"beta0", "lr", "q", "restarts", "max_length",
                                 "window", "rho"},
                                "config.attack");
            if (a.contains("beta0")) cfg.attack.beta0 = a["beta0"];
            if (a.contains("lr")) cfg.attack.lr = a["lr"];
            if (a.contains("q")) cfg.attack.q = a["q"];
            if (a.contains("restarts")) cfg.attack.restarts = a["restarts"];
            if (a.contains("max_length")) cfg.attack.max_length = a["max_length"];
            if (a.contains("window")) cfg.attack.window = a["window"];
            if (a.contains("rho")) cfg.attack.rho = a["rho"];
        }
        if (j.contains("overlap_bonus")) cfg.overlap_bonus = j["overlap_bonus"];
        if (j.contains("sample_count")) cfg.sample_count = j["sample_count"];
        if (j.contains("gen_length")) cfg.gen_length = j["gen_length"];
        if (j.contains("prompt_length")) cfg.prompt_length = j["prompt_length"];
        if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("jobs")) cfg.jobs = j["jobs"];
        if (j.contains("beta_sweep"))
            cfg.beta_sweep = j["beta_sweep"].get<std::vector<double>>();
        if (j.contains("q_sweep"))
            cfg.q_sweep = j["q_sweep"].get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
    return cfg;
}

void save_config(const std::filesystem::path& path, const ExperimentConfig& cfg) {
    json j;
    j["model"] = {{"vocab_size", cfg.model.vocab_size},
                  {"seed", cfg.model.seed},
                  {"concentration", cfg.model.concentration}};
    j["scheme"] = {{"kind", scheme_kind_name(cfg.scheme.kind)},
                   {"key", cfg.scheme.key},
                   {"p0", cfg.scheme.p0},
                   {"gamma", cfg.scheme.gamma},
                   {"tau", cfg.scheme.tau}};
    j["sampling"] = {{"temperature", cfg.attack.sampling.temperature},
                     {"top_p", cfg.attack.sampling.top_p},
                     {"seed", cfg.attack.sampling.seed}};
    j["attack"] = {{"beta0", cfg.attack.beta0},
                   {"lr", cfg.attack.lr},
                   {"q", cfg.attack.q},
                   {"restarts", cfg.attack.restarts},
                   {"max_length", cfg.attack.max_length},
                   {"window", cfg.attack.window},
                   {"rho", cfg.attack.rho}};
    j["overlap_bonus"] = cfg.overlap_bonus;
    j["sample_count"] = cfg.sample_count;
    j["gen_length"] = cfg.gen_length;
    j["prompt_length"] = cfg.prompt_length;
    j["seed"] = cfg.seed;
    j["jobs"] = cfg.jobs;
    j["beta_sweep"] = cfg.beta_sweep;
    j["q_sweep"] = cfg.q_sweep;

    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write config: " + path.string());
    out << j.dump(2) << "\n";
}

std::string csv_double(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

} // namespace wmlab
