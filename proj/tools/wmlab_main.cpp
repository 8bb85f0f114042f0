// Command-line front end for the watermarking lab. Subcommands mirror the
// experiment stages: generate -> attack -> detect / analyze / report, plus
// verify for the acceptance gate. Every command takes --config/--seed/--out;
// --seed and --jobs override the config when given.

#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "wmlab/pipeline.hpp"
#include "wmlab/verify.hpp"

namespace {

using namespace wmlab;
namespace fs = std::filesystem;

struct CommonOpts {
    std::string config;
    std::string in;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
};

void add_common(CLI::App* sub, CommonOpts& o, bool needs_in) {
    sub->add_option("--config", o.config, "experiment config JSON");
    sub->add_option("--seed", o.seed, "master seed (overrides config)");
    sub->add_option("--jobs", o.jobs, "worker threads, 0 = library default");
    sub->add_option("--out", o.out, "output directory")->required();
    if (needs_in)
        sub->add_option("--in", o.in, "input corpus JSONL")->required();
}

ExperimentConfig resolve(const CommonOpts& o) {
    ExperimentConfig cfg =
        o.config.empty() ? ExperimentConfig{} : load_config(o.config);
    if (o.seed) cfg.seed = *o.seed;
    if (o.jobs) cfg.jobs = *o.jobs;
    return cfg;
}

fs::path prepare_out(const CommonOpts& o) {
    fs::path dir(o.out);
    fs::create_directories(dir);
    return dir;
}

int cmd_generate(const CommonOpts& o) {
    const ExperimentConfig cfg = resolve(o);
    const fs::path out = prepare_out(o);
    const Corpus corpus = generate_corpus(cfg, cfg.jobs);
    save_corpus(out / "corpus.jsonl", corpus);
    save_config(out / "config_used.json", cfg);
    std::cout << "generated " << corpus.size() << " records -> "
              << (out / "corpus.jsonl").string() << "\n";
    return 0;
}

int cmd_attack(const CommonOpts& o) {
    const ExperimentConfig cfg = resolve(o);
    const fs::path out = prepare_out(o);
    Corpus corpus = load_corpus(o.in, cfg.model.vocab_size);
    const auto log = attack_corpus(cfg, corpus, cfg.jobs);
    save_corpus(out / "corpus.jsonl", corpus);
    write_attack_log_csv(out / "attack_log.csv", log);
    save_config(out / "config_used.json", cfg);
    long events = 0;
    for (const auto& row : log) events += row.degeneration_events;
    std::cout << "attacked " << corpus.size() << " records ("
              << events << " degeneration events) -> "
              << (out / "corpus.jsonl").string() << "\n";
    return 0;
}

int cmd_detect(const CommonOpts& o, const std::string& field) {
    const ExperimentConfig cfg = resolve(o);
    const fs::path out = prepare_out(o);
    const Corpus corpus = load_corpus(o.in, cfg.model.vocab_size);
    const auto run_one = [&](const std::string& f) {
        const auto rows = detect_corpus(cfg, corpus, f, cfg.jobs);
        write_detect_csv(out / ("detect_" + f + ".csv"), rows);
        std::size_t hits = 0;
        for (const auto& r : rows) hits += r.report.decision;
        std::cout << f << ": " << hits << "/" << rows.size()
                  << " detected at tau = " << cfg.scheme.tau << "\n";
    };
    if (field == "both") {
        run_one("watermarked");
        run_one("attacked");
    } else {
        run_one(field);
    }
    save_config(out / "config_used.json", cfg);
    return 0;
}

int cmd_analyze(const CommonOpts& o) {
    const ExperimentConfig cfg = resolve(o);
    const fs::path out = prepare_out(o);
    const Corpus corpus = load_corpus(o.in, cfg.model.vocab_size);

    const bool has_attacked =
        !corpus.empty() && corpus.front().attacked.has_value();
    std::vector<BoundReport> attacked;
    if (has_attacked) {
        attacked = bound_corpus_attacked(cfg, corpus, cfg.jobs);
        write_bounds_csv(out / "bounds_attacked.csv", attacked);
    }
    const auto vanilla = bound_corpus_vanilla(cfg, corpus, cfg.jobs);
    write_bounds_csv(out / "bounds_vanilla.csv", vanilla);

    // Simulation fixture at the experiment's operating point: constant and
    // alternating schedules sitting delta = 0.1 below p_tau.
    const double pt = p_tau(cfg.scheme.p0, cfg.scheme.tau, cfg.gen_length);
    if (pt - 0.2 >= 0.0 && pt <= 1.0) {
        const double sched_const[] = {pt - 0.1};
        const double sched_alt[] = {pt - 0.2, pt};
        const auto mc_c = monte_carlo_theorem2(cfg.gen_length, sched_const, pt, 0.1,
                                               100000, mix(cfg.seed, 1001), cfg.jobs);
        const auto mc_a = monte_carlo_theorem2(cfg.gen_length, sched_alt, pt, 0.1,
                                               100000, mix(cfg.seed, 1002), cfg.jobs);
        std::ofstream mc(out / "montecarlo.csv");
        mc << "schedule,n,p_tau,delta,trials,detected,empirical_rate,bound\n"
           << "constant," << cfg.gen_length << ',' << csv_double(pt) << ",0.1,"
           << mc_c.trials << ',' << mc_c.detected << ','
           << csv_double(mc_c.empirical_rate) << ',' << csv_double(mc_c.bound)
           << "\n"
           << "alternating," << cfg.gen_length << ',' << csv_double(pt) << ",0.1,"
           << mc_a.trials << ',' << mc_a.detected << ','
           << csv_double(mc_a.empirical_rate) << ',' << csv_double(mc_a.bound)
           << "\n";
    }

    if (has_attacked) {
        // Proxy-robustness margins around the measured suppression level.
        double suppression = 0.0;
        for (const auto& r : attacked) suppression += r.p_bar;
        suppression /= static_cast<double>(attacked.size());
        const double delta = 0.05;
        std::ofstream pr(out / "proxy_robustness.csv");
        pr << "epsilon,p_tau,p_tau_eff,delta,suppression,satisfied\n";
        for (double eps : {0.0, 0.01, 0.02, 0.05, 0.1, 0.15, 0.2}) {
            const auto r = proxy_robustness_check(eps, suppression, pt, delta);
            pr << csv_double(eps) << ',' << csv_double(pt) << ','
               << csv_double(r.p_tau_eff) << ',' << csv_double(delta) << ','
               << csv_double(suppression) << ',' << (r.satisfied ? 1 : 0) << "\n";
        }
    }
    save_config(out / "config_used.json", cfg);
    std::cout << "analyzed " << corpus.size() << " records -> " << out.string()
              << "\n";
    return 0;
}

int cmd_report(const CommonOpts& o, bool skip_sweeps) {
    const ExperimentConfig cfg = resolve(o);
    const fs::path out = prepare_out(o);
    const Corpus corpus = load_corpus(o.in, cfg.model.vocab_size);
    for (const auto& rec : corpus)
        if (!rec.watermarked || !rec.attacked)
            throw std::runtime_error("report: record " + rec.id +
                                     " lacks watermarked or attacked text");

    const auto det_w = detect_corpus(cfg, corpus, "watermarked", cfg.jobs);
    const auto det_a = detect_corpus(cfg, corpus, "attacked", cfg.jobs);
    const auto human_z = human_z_scores(cfg, static_cast<int>(corpus.size()),
                                        cfg.jobs);

    std::vector<double> attacked_z, watermarked_z;
    std::vector<bool> attacked_detected;
    std::size_t wm_hits = 0;
    for (const auto& r : det_a) {
        attacked_z.push_back(r.report.z);
        attacked_detected.push_back(r.report.decision);
    }
    for (const auto& r : det_w) {
        watermarked_z.push_back(r.report.z);
        wm_hits += r.report.decision;
    }

    const double fprs[] = {0.01, 0.10};
    const EfficacyReport eff = efficacy(attacked_detected, attacked_z, human_z, fprs);

    double mean_bleu = 0.0, mean_d1 = 0.0, mean_d2 = 0.0;
    double mean_wz = 0.0, mean_az = 0.0, mean_hz = 0.0;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        mean_bleu += self_bleu(*corpus[i].attacked, *corpus[i].watermarked);
        mean_d1 += distinct_n(*corpus[i].attacked, 1);
        mean_d2 += distinct_n(*corpus[i].attacked, 2);
        mean_wz += watermarked_z[i];
        mean_az += attacked_z[i];
        mean_hz += human_z[i];
    }
    const auto n = static_cast<double>(corpus.size());
    mean_bleu /= n; mean_d1 /= n; mean_d2 /= n;
    mean_wz /= n; mean_az /= n; mean_hz /= n;

    write_metrics_csv(
        out / "metrics.csv",
        {{"asr", eff.asr},
         {"watermark_detection_rate", wm_hits / n},
         {"threshold_at_fpr_0.01", eff.threshold_at_fpr.at(0.01)},
         {"threshold_at_fpr_0.10", eff.threshold_at_fpr.at(0.10)},
         {"tpr_at_fpr_0.01", eff.tpr_at_fpr.at(0.01)},
         {"tpr_at_fpr_0.10", eff.tpr_at_fpr.at(0.10)},
         {"best_f1", eff.best.f1},
         {"best_f1_threshold", eff.best.threshold},
         {"best_f1_precision", eff.best.precision},
         {"best_f1_recall", eff.best.recall},
         {"mean_self_bleu", mean_bleu},
         {"mean_distinct_1", mean_d1},
         {"mean_distinct_2", mean_d2},
         {"mean_z_watermarked", mean_wz},
         {"mean_z_attacked", mean_az},
         {"mean_z_human", mean_hz}});

    if (!skip_sweeps) {
        write_sweep_csv(out / "sweep_beta.csv", "beta",
                        sweep_beta(cfg, corpus, cfg.jobs));
        write_sweep_csv(out / "sweep_q.csv", "q", sweep_q(cfg, corpus, cfg.jobs));
    }
    save_config(out / "config_used.json", cfg);
    std::cout << "report for " << corpus.size() << " records -> " << out.string()
              << "\n";
    return 0;
}

int cmd_verify(const CommonOpts& o) {
    AcceptanceOptions opts;
    opts.out_dir = prepare_out(o);
    if (o.seed) opts.seed = *o.seed;
    if (o.jobs) opts.jobs = *o.jobs;
    const auto results = run_acceptance(opts);
    for (const auto& r : results)
        std::cout << (r.pass ? "PASS" : "FAIL") << " criterion-" << r.number
                  << " " << r.name << " (" << r.detail << ")\n";
    const bool ok = all_passed(results);
    std::cout << (ok ? "acceptance: all criteria passed"
                     : "acceptance: FAILURES present")
              << "\n";
    return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"token-level watermarking lab: embed, attack, detect, analyze"};
    app.require_subcommand(1);

    CommonOpts gen_o, att_o, det_o, ana_o, rep_o, ver_o;
    std::string det_field = "both";
    bool skip_sweeps = false;

    CLI::App* gen = app.add_subcommand("generate", "sample a watermarked corpus");
    add_common(gen, gen_o, false);

    CLI::App* att = app.add_subcommand("attack", "run the rewriting attack");
    add_common(att, att_o, true);

    CLI::App* det = app.add_subcommand("detect", "score texts with the z-test");
    add_common(det, det_o, true);
    det->add_option("--field", det_field,
                    "watermarked, attacked, or both (default both)")
        ->check(CLI::IsMember({"watermarked", "attacked", "both"}));

    CLI::App* ana = app.add_subcommand("analyze", "per-sample bounds and simulation");
    add_common(ana, ana_o, true);

    CLI::App* rep = app.add_subcommand("report", "efficacy metrics and sweeps");
    add_common(rep, rep_o, true);
    rep->add_flag("--skip-sweeps", skip_sweeps, "metrics only, no sweep CSVs");

    CLI::App* ver = app.add_subcommand("verify", "run the acceptance criteria");
    add_common(ver, ver_o, false);

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_generate(gen_o);
        if (att->parsed()) return cmd_attack(att_o);
        if (det->parsed()) return cmd_detect(det_o, det_field);
        if (ana->parsed()) return cmd_analyze(ana_o);
        if (rep->parsed()) return cmd_report(rep_o, skip_sweeps);
        if (ver->parsed()) return cmd_verify(ver_o);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
