#include "wmlab/pipeline.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace wmlab {

namespace {

// Run body(i) for i in [0, n), OpenMP-parallel. Exceptions cannot cross a
// parallel region, so the first failure is captured and rethrown after the
// join.
template <class F>
void parallel_for(std::size_t n, int jobs, F&& body) {
    if (jobs < 0) throw std::invalid_argument("jobs must be >= 0");
    std::string error;
    bool failed = false;
#pragma omp parallel for schedule(dynamic) \
    num_threads(jobs > 0 ? jobs : omp_get_max_threads())
    for (long i = 0; i < static_cast<long>(n); ++i) {
        try {
            body(static_cast<std::size_t>(i));
        } catch (const std::exception& e) {
#pragma omp critical
            {
                if (!failed) {
                    failed = true;
                    error = e.what();
                }
            }
        }
    }
    if (failed) throw std::runtime_error(error);
}

std::string record_id(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "s%05zu", i);
    return buf;
}

std::uint64_t stream_seed(const ExperimentConfig& cfg, SeedStream tag) {
    return mix(cfg.seed, static_cast<std::uint64_t>(tag));
}

CorpusRecord make_record(const ExperimentConfig& cfg, const MarkovModel& model,
                         std::size_t i) {
    CorpusRecord rec;
    rec.id = record_id(i);
    // Prompts are plain model text at temperature 1 so they spread over the
    // whole vocabulary; the continuation uses the experiment's sampler.
    SamplingConfig prompt_cfg{1.0, 1.0, mix(stream_seed(cfg, kStreamPrompt), i)};
    rec.prompt = sample_sequence(model, {}, cfg.prompt_length, prompt_cfg);
    SamplingConfig gen_cfg = cfg.attack.sampling;
    gen_cfg.seed = mix(stream_seed(cfg, kStreamGenerate), i);
    rec.watermarked =
        generate_watermarked(model, cfg.scheme, rec.prompt, cfg.gen_length, gen_cfg);
    rec.provenance["generator"] = "markov";
    rec.provenance["scheme"] =
        cfg.scheme.kind == SchemeKind::unigram ? "unigram" : "kgw";
    return rec;
}

AttackLogRow run_attack(const ExperimentConfig& cfg, const MarkovModel& model,
                        CorpusRecord& rec, std::uint64_t seed) {
    if (!rec.watermarked || rec.watermarked->empty())
        throw std::invalid_argument("attack: record " + rec.id +
                                    " has no watermarked text");
    ParaphraseModel pm(model, *rec.watermarked, cfg.overlap_bonus);
    AttackConfig ac = cfg.attack;
    ac.sampling.seed = seed;
    // Auxiliary-model wiring: surprisal for the proxy set comes from the
    // plain chain, not from the paraphraser's source-conditioned logits.
    const AttackOutcome out = attack(pm, model, *rec.watermarked, ac);
    rec.attacked = out.text;
    rec.provenance["attack"] = "bira";
    rec.provenance["final_beta"] = csv_double(out.final_beta);
    rec.provenance["degenerate"] = out.degenerate ? "1" : "0";
    AttackLogRow row;
    row.id = rec.id;
    row.final_beta = out.final_beta;
    row.attempts = out.attempts;
    row.degeneration_events = out.degeneration_events;
    row.degenerate = out.degenerate;
    row.eta = out.proxy.eta;
    row.proxy_size = static_cast<int>(out.proxy.ids.size());
    return row;
}

} // namespace

MarkovModel make_model(const ModelConfig& mc) {
    return MarkovModel(mc.vocab_size, mc.seed, mc.concentration);
}

Corpus generate_corpus(const ExperimentConfig& cfg, int jobs) {
    const MarkovModel model = make_model(cfg.model);
    Corpus corpus(cfg.sample_count);
    parallel_for(corpus.size(), jobs,
                 [&](std::size_t i) { corpus[i] = make_record(cfg, model, i); });
    return corpus;
}

Corpus generate_corpus_serial(const ExperimentConfig& cfg) {
    const MarkovModel model = make_model(cfg.model);
    Corpus corpus(cfg.sample_count);
    for (std::size_t i = 0; i < corpus.size(); ++i)
        corpus[i] = make_record(cfg, model, i);
    return corpus;
}

std::vector<AttackLogRow> attack_corpus(const ExperimentConfig& cfg, Corpus& corpus,
                                        int jobs) {
    const MarkovModel model = make_model(cfg.model);
    const std::uint64_t stream = stream_seed(cfg, kStreamAttack);
    std::vector<AttackLogRow> log(corpus.size());
    parallel_for(corpus.size(), jobs, [&](std::size_t i) {
        log[i] = run_attack(cfg, model, corpus[i], mix(stream, i));
    });
    return log;
}

std::vector<AttackLogRow> attack_corpus_serial(const ExperimentConfig& cfg,
                                               Corpus& corpus) {
    const MarkovModel model = make_model(cfg.model);
    const std::uint64_t stream = stream_seed(cfg, kStreamAttack);
    std::vector<AttackLogRow> log(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i)
        log[i] = run_attack(cfg, model, corpus[i], mix(stream, i));
    return log;
}

std::vector<DetectRow> detect_corpus(const ExperimentConfig& cfg, const Corpus& corpus,
                                     const std::string& field, int jobs) {
    if (field != "watermarked" && field != "attacked")
        throw std::invalid_argument("detect_corpus: field must be "
                                    "\"watermarked\" or \"attacked\"");
    const int v = cfg.model.vocab_size;
    std::vector<DetectRow> rows(corpus.size());
    parallel_for(corpus.size(), jobs, [&](std::size_t i) {
        const CorpusRecord& rec = corpus[i];
        const auto& text =
            field == "watermarked" ? rec.watermarked : rec.attacked;
        if (!text || text->empty())
            throw std::invalid_argument("detect_corpus: record " + rec.id +
                                        " has no " + field + " text");
        rows[i] = {rec.id, field, z_score(*text, cfg.scheme, v)};
    });
    return rows;
}

namespace {

double provenance_beta(const ExperimentConfig& cfg, const CorpusRecord& rec) {
    const auto it = rec.provenance.find("final_beta");
    if (it == rec.provenance.end()) return cfg.attack.beta0;
    return std::stod(it->second);
}

} // namespace

std::vector<BoundReport> bound_corpus_attacked(const ExperimentConfig& cfg,
                                               const Corpus& corpus, int jobs) {
    const MarkovModel model = make_model(cfg.model);
    std::vector<BoundReport> rows(corpus.size());
    parallel_for(corpus.size(), jobs, [&](std::size_t i) {
        const CorpusRecord& rec = corpus[i];
        if (!rec.watermarked || !rec.attacked || rec.attacked->empty())
            throw std::invalid_argument("bounds: record " + rec.id +
                                        " is missing watermarked or attacked text");
        // Reconstruct the sampler that produced the attacked text: the
        // paraphrase model plus the final bias on the record's proxy set
        // (surprisal under the plain chain, as in the attack itself).
        ParaphraseModel pm(model, *rec.watermarked, cfg.overlap_bonus);
        const ProxyGreenSet proxy =
            build_proxy_set(model, *rec.watermarked, cfg.attack.q);
        rows[i] = per_sample_bound(pm, cfg.scheme, *rec.watermarked, *rec.attacked,
                                   proxy.ids, provenance_beta(cfg, rec),
                                   cfg.attack.sampling.temperature, rec.id);
    });
    return rows;
}

std::vector<BoundReport> bound_corpus_vanilla(const ExperimentConfig& cfg,
                                              const Corpus& corpus, int jobs) {
    const MarkovModel model = make_model(cfg.model);
    const std::uint64_t stream = stream_seed(cfg, kStreamVanilla);
    std::vector<BoundReport> rows(corpus.size());
    parallel_for(corpus.size(), jobs, [&](std::size_t i) {
        const CorpusRecord& rec = corpus[i];
        if (!rec.watermarked || rec.watermarked->empty())
            throw std::invalid_argument("bounds: record " + rec.id +
                                        " has no watermarked text");
        ParaphraseModel pm(model, *rec.watermarked, cfg.overlap_bonus);
        // Vanilla paraphrase: same rewriting model, no bias at all.
        AttackConfig ac = cfg.attack;
        const TokenSequence text = rewrite_once(pm, *rec.watermarked, ProxyGreenSet{},
                                                0.0, ac, mix(stream, i));
        rows[i] = per_sample_bound(pm, cfg.scheme, *rec.watermarked, text, {}, 0.0,
                                   cfg.attack.sampling.temperature, rec.id);
    });
    return rows;
}

std::vector<double> human_z_scores(const ExperimentConfig& cfg, int count, int jobs) {
    if (count < 1)
        throw std::invalid_argument("human_z_scores: count must be >= 1");
    const MarkovModel model = make_model(cfg.model);
    const std::uint64_t stream = stream_seed(cfg, kStreamHuman);
    std::vector<double> z(count);
    parallel_for(static_cast<std::size_t>(count), jobs, [&](std::size_t i) {
        SamplingConfig prompt_cfg{1.0, 1.0, mix(stream, 2 * i)};
        const TokenSequence prompt =
            sample_sequence(model, {}, cfg.prompt_length, prompt_cfg);
        SamplingConfig gen_cfg = cfg.attack.sampling;
        gen_cfg.seed = mix(stream, 2 * i + 1);
        const TokenSequence text =
            sample_sequence(model, prompt, cfg.gen_length, gen_cfg);
        z[i] = z_score(text, cfg.scheme, cfg.model.vocab_size).z;
    });
    return z;
}

namespace {

SweepRow sweep_point(const ExperimentConfig& cfg, const Corpus& corpus, int jobs,
                     double x, const AttackConfig& ac_base, std::uint64_t stream) {
    const MarkovModel model = make_model(cfg.model);
    const int v = cfg.model.vocab_size;
    const std::size_t n = corpus.size();
    std::vector<double> zs(n), bleus(n), d1(n);
    std::vector<bool> detected(n);
    std::vector<long> events(n, 0);
    parallel_for(n, jobs, [&](std::size_t i) {
        const CorpusRecord& rec = corpus[i];
        if (!rec.watermarked || rec.watermarked->empty())
            throw std::invalid_argument("sweep: record " + rec.id +
                                        " has no watermarked text");
        ParaphraseModel pm(model, *rec.watermarked, cfg.overlap_bonus);
        AttackConfig ac = ac_base;
        ac.sampling.seed = mix(stream, i);
        const AttackOutcome out = attack(pm, model, *rec.watermarked, ac);
        const DetectionReport det = z_score(out.text, cfg.scheme, v);
        zs[i] = det.z;
        detected[i] = det.decision;
        bleus[i] = self_bleu(out.text, *rec.watermarked);
        d1[i] = distinct_n(out.text, 1);
        events[i] = out.degeneration_events;
    });
    const auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    SweepRow row;
    row.x = x;
    row.mean_z = mean(zs);
    row.asr = attack_success_rate(detected);
    row.mean_self_bleu = mean(bleus);
    row.mean_distinct1 = mean(d1);
    for (long e : events) row.degeneration_events += e;
    return row;
}

} // namespace

std::vector<SweepRow> sweep_beta(const ExperimentConfig& cfg, const Corpus& corpus,
                                 int jobs) {
    std::vector<SweepRow> rows;
    rows.reserve(cfg.beta_sweep.size());
    for (std::size_t bi = 0; bi < cfg.beta_sweep.size(); ++bi) {
        AttackConfig ac = cfg.attack;
        ac.beta0 = cfg.beta_sweep[bi];
        rows.push_back(sweep_point(cfg, corpus, jobs, ac.beta0, ac,
                                   mix(stream_seed(cfg, kStreamSweepBeta), bi)));
    }
    return rows;
}

std::vector<SweepRow> sweep_q(const ExperimentConfig& cfg, const Corpus& corpus,
                              int jobs) {
    std::vector<SweepRow> rows;
    rows.reserve(cfg.q_sweep.size());
    for (std::size_t qi = 0; qi < cfg.q_sweep.size(); ++qi) {
        AttackConfig ac = cfg.attack;
        ac.q = cfg.q_sweep[qi];
        rows.push_back(sweep_point(cfg, corpus, jobs, ac.q, ac,
                                   mix(stream_seed(cfg, kStreamSweepQ), qi)));
    }
    return rows;
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write: " + path.string());
    return out;
}

} // namespace

void write_detect_csv(const std::filesystem::path& path,
                      const std::vector<DetectRow>& rows) {
    auto out = open_csv(path);
    out << "id,field,n,green_count,p_hat,z,tau,p_tau,decision\n";
    for (const DetectRow& r : rows)
        out << r.id << ',' << r.field << ',' << r.report.scored << ','
            << r.report.green_count << ',' << csv_double(r.report.p_hat) << ','
            << csv_double(r.report.z) << ',' << csv_double(r.report.tau) << ','
            << csv_double(r.report.p_tau) << ',' << (r.report.decision ? 1 : 0)
            << '\n';
}

void write_bounds_csv(const std::filesystem::path& path,
                      const std::vector<BoundReport>& rows) {
    auto out = open_csv(path);
    out << "id,n,p_bar,delta_hat,bound\n";
    for (const BoundReport& r : rows)
        out << r.id << ',' << r.n << ',' << csv_double(r.p_bar) << ','
            << csv_double(r.delta_hat) << ',' << csv_double(r.bound) << '\n';
}

void write_attack_log_csv(const std::filesystem::path& path,
                          const std::vector<AttackLogRow>& rows) {
    auto out = open_csv(path);
    out << "id,final_beta,attempts,degeneration_events,degenerate,eta,proxy_size\n";
    for (const AttackLogRow& r : rows)
        out << r.id << ',' << csv_double(r.final_beta) << ',' << r.attempts << ','
            << r.degeneration_events << ',' << (r.degenerate ? 1 : 0) << ','
            << csv_double(r.eta) << ',' << r.proxy_size << '\n';
}

void write_sweep_csv(const std::filesystem::path& path, const std::string& x_name,
                     const std::vector<SweepRow>& rows) {
    auto out = open_csv(path);
    out << x_name << ",mean_z,asr,mean_self_bleu,mean_distinct1,degeneration_events\n";
    for (const SweepRow& r : rows)
        out << csv_double(r.x) << ',' << csv_double(r.mean_z) << ','
            << csv_double(r.asr) << ',' << csv_double(r.mean_self_bleu) << ','
            << csv_double(r.mean_distinct1) << ',' << r.degeneration_events << '\n';
}

void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<std::pair<std::string, double>>& rows) {
    auto out = open_csv(path);
    out << "metric,value\n";
    for (const auto& [name, value] : rows)
        out << name << ',' << csv_double(value) << '\n';
}

} // namespace wmlab
