#include "wmlab/verify.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "wmlab/pipeline.hpp"

namespace wmlab {

namespace {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------
// Pinned acceptance setup: the synthetic benchmark every stochastic check
// runs on. Small enough for CI, large enough for stable trends.
// ---------------------------------------------------------------------

ExperimentConfig acceptance_config(std::uint64_t seed) {
    ExperimentConfig cfg;
    cfg.model = {256, 11, 2.0};
    cfg.scheme = {SchemeKind::unigram, 42, 0.5, 2.0, 4.0};
    cfg.attack.sampling = {0.7, 0.95, 0};
    cfg.attack.max_length = 230;
    cfg.sample_count = 200;
    cfg.gen_length = 230;
    cfg.prompt_length = 8;
    cfg.seed = seed;
    cfg.beta_sweep = {0, -1, -2, -3, -4, -5, -6, -7, -8};
    return cfg;
}

std::string fmt(double x) { return csv_double(x); }

// ---------------------------------------------------------------------
// Scripted model for the adaptive-bias check: rewriting from source [2]
// collapses into a one-token loop iff the proxy bias beta <= -5, and walks
// a 200-token cycle otherwise.
// ---------------------------------------------------------------------

class ScriptedDegenModel : public Model {
  public:
    ScriptedDegenModel() { vocab_.size = 256; }
    const Vocabulary& vocab() const override { return vocab_; }

    LogitVector logits(std::span<const TokenId> prefix) const override {
        LogitVector l(vocab_.size, -1e9);
        if (prefix.size() <= 1) {
            // Probe row: token 2 vs token 1. With top-p 0.5 the nucleus is
            // {2} while logit(2) = 5 + beta stays above logit(1) = 0, and
            // {1} once the bias drags them level or below (ties resolve to
            // the lower id).
            l[2] = 5.0;
            l[1] = 0.0;
            return l;
        }
        const TokenId last = prefix.back();
        if (last == 1) {
            l[1] = 50.0; // repetition sink
        } else {
            // Deterministic diverse cycle over ids 3..202.
            const TokenId next = (last >= 3 && last < 202) ? last + 1 : 3;
            l[next] = 50.0;
        }
        return l;
    }

  private:
    Vocabulary vocab_;
};

// ---------------------------------------------------------------------
// Stochastic artifacts, written once and replayed for the determinism
// check. Everything below is a pure function of (seed, jobs-independent
// per-record seeding).
// ---------------------------------------------------------------------

struct ArtifactBundle {
    double det_rate_unigram = 0.0;
    double det_rate_kgw = 0.0;
    std::vector<SweepRow> beta_rows;
    MonteCarloResult mc_const, mc_alt;
    std::vector<BoundReport> attacked_bounds, vanilla_bounds;
    std::vector<fs::path> files; // relative to the artifact dir
};

double detection_rate(const std::vector<DetectRow>& rows) {
    std::size_t hits = 0;
    for (const auto& r : rows) hits += r.report.decision;
    return static_cast<double>(hits) / static_cast<double>(rows.size());
}

ArtifactBundle write_artifacts(const fs::path& dir, std::uint64_t seed, int jobs) {
    fs::create_directories(dir);
    ArtifactBundle b;
    const ExperimentConfig cfg = acceptance_config(seed);

    // Unigram corpus, attacked at the default beta0 = -4.
    Corpus corpus = generate_corpus(cfg, jobs);
    const auto attack_log = attack_corpus(cfg, corpus, jobs);
    save_corpus(dir / "corpus.jsonl", corpus);
    write_attack_log_csv(dir / "attack_log.csv", attack_log);

    const auto det_w = detect_corpus(cfg, corpus, "watermarked", jobs);
    const auto det_a = detect_corpus(cfg, corpus, "attacked", jobs);
    write_detect_csv(dir / "detect_watermarked.csv", det_w);
    write_detect_csv(dir / "detect_attacked.csv", det_a);
    b.det_rate_unigram = detection_rate(det_w);

    // KGW variant, generation and detection only.
    ExperimentConfig kgw = cfg;
    kgw.scheme.kind = SchemeKind::kgw;
    const Corpus kgw_corpus = generate_corpus(kgw, jobs);
    const auto det_kgw = detect_corpus(kgw, kgw_corpus, "watermarked", jobs);
    write_detect_csv(dir / "detect_kgw.csv", det_kgw);
    b.det_rate_kgw = detection_rate(det_kgw);

    // Bias sweep for the attack-trend check.
    b.beta_rows = sweep_beta(cfg, corpus, jobs);
    write_sweep_csv(dir / "sweep_beta.csv", "beta", b.beta_rows);

    // Monte Carlo vs. the concentration bound, constant and alternating
    // schedules, both with suppression margin delta = 0.1 around the
    // headline threshold 0.632.
    const double schedule_const[] = {0.532};
    const double schedule_alt[] = {0.432, 0.632};
    b.mc_const = monte_carlo_theorem2(230, schedule_const, 0.632, 0.1, 100000,
                                      mix(seed, 1001), jobs);
    b.mc_alt = monte_carlo_theorem2(230, schedule_alt, 0.632, 0.1, 100000,
                                    mix(seed, 1002), jobs);
    {
        std::ofstream mc(dir / "montecarlo.csv");
        mc << "schedule,n,p_tau,delta,trials,detected,empirical_rate,bound\n";
        mc << "constant,230,0.632,0.1," << b.mc_const.trials << ','
           << b.mc_const.detected << ',' << fmt(b.mc_const.empirical_rate) << ','
           << fmt(b.mc_const.bound) << "\n";
        mc << "alternating,230,0.632,0.1," << b.mc_alt.trials << ','
           << b.mc_alt.detected << ',' << fmt(b.mc_alt.empirical_rate) << ','
           << fmt(b.mc_alt.bound) << "\n";
    }

    // Per-sample bounds on the first 50 records, attacked vs. vanilla.
    Corpus head(corpus.begin(), corpus.begin() + 50);
    b.attacked_bounds = bound_corpus_attacked(cfg, head, jobs);
    b.vanilla_bounds = bound_corpus_vanilla(cfg, head, jobs);
    write_bounds_csv(dir / "bounds_attacked.csv", b.attacked_bounds);
    write_bounds_csv(dir / "bounds_vanilla.csv", b.vanilla_bounds);
    {
        // Figure-style curve: samples ordered by the attacked bound, the
        // vanilla bound carried along per sample.
        std::vector<std::size_t> order(b.attacked_bounds.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) {
            if (b.attacked_bounds[a].bound != b.attacked_bounds[c].bound)
                return b.attacked_bounds[a].bound < b.attacked_bounds[c].bound;
            return a < c;
        });
        std::ofstream curve(dir / "bounds_curve.csv");
        curve << "rank,id,attacked_bound,vanilla_bound\n";
        for (std::size_t r = 0; r < order.size(); ++r)
            curve << r << ',' << b.attacked_bounds[order[r]].id << ','
                  << fmt(b.attacked_bounds[order[r]].bound) << ','
                  << fmt(b.vanilla_bounds[order[r]].bound) << "\n";
    }

    // Headline fixtures.
    write_metrics_csv(dir / "fixtures.csv",
                      {{"detection_rate_unigram", b.det_rate_unigram},
                       {"detection_rate_kgw", b.det_rate_kgw},
                       {"mc_rate_constant", b.mc_const.empirical_rate},
                       {"mc_rate_alternating", b.mc_alt.empirical_rate},
                       {"asr_beta_0", b.beta_rows.front().asr},
                       {"asr_beta_-4", b.beta_rows[4].asr}});

    b.files = {"corpus.jsonl",          "attack_log.csv",
               "detect_watermarked.csv", "detect_attacked.csv",
               "detect_kgw.csv",         "sweep_beta.csv",
               "montecarlo.csv",         "bounds_attacked.csv",
               "bounds_vanilla.csv",     "bounds_curve.csv",
               "fixtures.csv"};
    return b;
}

bool same_bytes(const fs::path& a, const fs::path& b) {
    std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
    if (!fa || !fb) return false;
    std::ostringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    return sa.str() == sb.str();
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Exhaustive best-F1 oracle: plain loops, no shared code with the library
// implementation.
double oracle_best_f1(const std::vector<double>& pos, const std::vector<double>& neg) {
    std::vector<double> cand = pos;
    cand.insert(cand.end(), neg.begin(), neg.end());
    double best = 0.0;
    for (double t : cand) {
        int tp = 0, fp = 0;
        for (double s : pos) tp += s >= t;
        for (double s : neg) fp += s >= t;
        if (tp == 0) continue;
        const double prec = double(tp) / (tp + fp);
        const double rec = double(tp) / double(pos.size());
        best = std::max(best, 2.0 * prec * rec / (prec + rec));
    }
    return best;
}

} // namespace

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts) {
    std::vector<CriterionResult> results;
    const auto add = [&](int num, std::string name, bool pass, std::string detail) {
        results.push_back({num, std::move(name), pass, std::move(detail)});
    };

    // 1. z-form and rate-form decisions agree at every reachable count.
    {
        bool ok = true;
        std::string fail;
        for (int n : {10, 50, 230})
            for (double p0 : {0.25, 0.5})
                for (double tau : {2.0, 4.0})
                    for (int g = 0; g <= n; ++g) {
                        const double sigma = std::sqrt(p0 * (1.0 - p0) / n);
                        const double p_hat = static_cast<double>(g) / n;
                        const bool z_dec = (p_hat - p0) / sigma >= tau;
                        const bool rate_dec = p_hat >= p_tau(p0, tau, n);
                        const bool canon = detect_from_count(g, n, p0, tau);
                        if (z_dec != rate_dec || z_dec != canon) {
                            ok = false;
                            fail = "mismatch at n=" + std::to_string(n) +
                                   " g=" + std::to_string(g);
                        }
                    }
        add(1, "theorem1-equivalence", ok,
            ok ? "all 1172 count decisions agree across 12 grids" : fail);
    }

    // 2. Rate threshold at the headline operating point.
    {
        const double v = p_tau(0.5, 4.0, 230);
        const bool ok = std::fabs(v - 0.632) <= 1e-3;
        add(2, "p-tau-numeric", ok, "p_tau(0.5,4,230) = " + fmt(v));
    }

    // 3. Concentration bound at delta = 0.1 and 0.2.
    {
        const double b1 = detection_bound(230, 0.1);
        const double b2 = detection_bound(230, 0.2);
        const bool ok =
            std::fabs(b1 - 0.3166) <= 1e-3 && std::fabs(b2 - 0.0100) <= 1e-3;
        add(3, "bound-numeric", ok,
            "bound(230,0.1) = " + fmt(b1) + ", bound(230,0.2) = " + fmt(b2));
    }

    // Stochastic artifacts (also used by criteria 4-6 and 10).
    const fs::path art = opts.out_dir / "artifacts";
    const ArtifactBundle bundle = write_artifacts(art, opts.seed, opts.jobs);

    // 4. Monte Carlo never beats the bound beyond binomial noise.
    {
        const auto slack = [](const MonteCarloResult& r) {
            return r.bound + 3.0 * std::sqrt(r.bound * (1.0 - r.bound) /
                                             static_cast<double>(r.trials));
        };
        const bool ok = bundle.mc_const.empirical_rate <= slack(bundle.mc_const) &&
                        bundle.mc_alt.empirical_rate <= slack(bundle.mc_alt);
        add(4, "theorem2-monte-carlo", ok,
            "constant rate = " + fmt(bundle.mc_const.empirical_rate) +
                ", alternating rate = " + fmt(bundle.mc_alt.empirical_rate) +
                ", bound = " + fmt(bundle.mc_const.bound));
    }

    // 5. Both schemes detect their own output nearly always.
    {
        const bool ok =
            bundle.det_rate_unigram >= 0.95 && bundle.det_rate_kgw >= 0.95;
        add(5, "watermark-efficacy", ok,
            "unigram rate = " + fmt(bundle.det_rate_unigram) +
                ", kgw rate = " + fmt(bundle.det_rate_kgw));
    }

    // 6. Stronger bias, weaker watermark: mean z strictly decreasing over
    //    beta = 0..-4 and ASR(-4) clears ASR(0) by 0.3 absolute.
    {
        bool decreasing = true;
        for (int i = 1; i <= 4; ++i)
            decreasing &= bundle.beta_rows[i].mean_z < bundle.beta_rows[i - 1].mean_z;
        const double asr0 = bundle.beta_rows[0].asr;
        const double asr4 = bundle.beta_rows[4].asr;
        const bool ok = decreasing && asr4 >= asr0 + 0.3;
        std::string zs = "mean z:";
        for (int i = 0; i <= 4; ++i) zs += " " + fmt(bundle.beta_rows[i].mean_z);
        add(6, "attack-efficacy-trend", ok,
            zs + "; asr(0) = " + fmt(asr0) + ", asr(-4) = " + fmt(asr4));
    }

    // 7. Degeneration detector on constructed windows.
    {
        TokenSequence repetitive, boundary, diverse;
        for (int i = 0; i < 450; ++i) repetitive.push_back(i % 112);
        for (int i = 0; i < 448; ++i) boundary.push_back(i % 112); // ratio 0.25
        for (int i = 0; i < 450; ++i) diverse.push_back(i);
        const bool ok = is_degenerated(repetitive, 450, 0.25) &&
                        !is_degenerated(boundary, 450, 0.25) &&
                        !is_degenerated(diverse, 450, 0.25) &&
                        !is_degenerated(TokenSequence{}, 450, 0.25);
        add(7, "degeneration-detector", ok,
            "repetitive ratio = " + fmt(distinct_ratio(repetitive, 450)) +
                ", boundary ratio = " + fmt(distinct_ratio(boundary, 450)));
    }

    // 8. Adaptive bias on the scripted model.
    {
        ScriptedDegenModel model;
        AttackConfig ac;
        ac.beta0 = -5.0;
        ac.lr = 0.125;
        ac.q = 0.5;
        ac.restarts = 10;
        ac.max_length = 230;
        ac.window = 450;
        ac.rho = 0.25;
        ac.sampling = {1.0, 0.5, 77};
        const TokenSequence watermarked = {2};
        const AttackOutcome out = attack(model, watermarked, ac);
        const bool ok = std::fabs(out.final_beta - (-4.875)) < 1e-12 &&
                        out.degeneration_events == 1 && out.attempts == 2 &&
                        !out.degenerate;
        add(8, "adaptive-bias", ok,
            "final beta = " + fmt(out.final_beta) +
                ", attempts = " + std::to_string(out.attempts) +
                ", events = " + std::to_string(out.degeneration_events));
    }

    // 9. Metric calibration properties on random score sets.
    {
        bool ok = true;
        std::string why = "1000 calibration sets + 200 best-F1 oracles";
        SplitMix64 rng(mix(opts.seed, 0x9u));
        for (int rep = 0; rep < 1000 && ok; ++rep) {
            const int n = 20 + static_cast<int>(rng.next_below(181));
            std::vector<double> human(n);
            for (double& s : human) s = rng.next_double() * 10.0 - 5.0;
            const double targets[] = {0.0, 0.01, 0.05, 0.1, 0.25};
            for (double target : targets) {
                const double t = calibrate_threshold(human, target);
                std::size_t flagged = 0;
                for (double s : human) flagged += s >= t;
                if (static_cast<double>(flagged) / n > target) {
                    ok = false;
                    why = "calibration exceeded target fpr";
                }
            }
        }
        for (int rep = 0; rep < 200 && ok; ++rep) {
            const int np = 5 + static_cast<int>(rng.next_below(36));
            const int nn = 5 + static_cast<int>(rng.next_below(36));
            std::vector<double> pos(np), neg(nn);
            for (double& s : pos) s = rng.next_double() * 8.0 - 2.0;
            for (double& s : neg) s = rng.next_double() * 8.0 - 4.0;
            const double lib = best_f1(pos, neg).f1;
            const double oracle = oracle_best_f1(pos, neg);
            if (std::fabs(lib - oracle) > 1e-12) {
                ok = false;
                why = "best_f1 disagrees with exhaustive oracle";
            }
        }
        if (ok) {
            // Fully overlapping balanced classes bottom out at 2/3.
            std::vector<double> same(100);
            for (int i = 0; i < 100; ++i) same[i] = i * 0.1;
            const double f1 = best_f1(same, same).f1;
            if (std::fabs(f1 - 2.0 / 3.0) > 1e-9) {
                ok = false;
                why = "overlap floor = " + fmt(f1) + ", expected 2/3";
            }
        }
        add(9, "metrics", ok, why);
    }

    // 10. Attacked bounds sit below vanilla bounds.
    {
        std::vector<double> att, van;
        for (const auto& r : bundle.attacked_bounds) att.push_back(r.bound);
        for (const auto& r : bundle.vanilla_bounds) van.push_back(r.bound);
        const double m_att = median(att);
        const double m_van = median(van);
        add(10, "per-sample-bounds", m_att < m_van,
            "median attacked = " + fmt(m_att) + ", median vanilla = " + fmt(m_van));
    }

    // 11. Byte-identical artifacts on a replay with the same seed.
    {
        const fs::path replay = opts.out_dir / "replay";
        write_artifacts(replay, opts.seed, opts.jobs);
        bool ok = true;
        std::string first_diff = "all files identical";
        for (const auto& rel : bundle.files)
            if (!same_bytes(art / rel, replay / rel)) {
                ok = false;
                first_diff = "differs: " + rel.string();
                break;
            }
        add(11, "determinism", ok, first_diff);
    }

    return results;
}

bool all_passed(const std::vector<CriterionResult>& results) {
    for (const auto& r : results)
        if (!r.pass) return false;
    return true;
}

} // namespace wmlab
