// Acceptance gate runner: one PASS/FAIL line per criterion, nonzero exit on
// any failure. Run by ctest; also useful standalone when tuning.
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <string>

#include "wmlab/verify.hpp"

int main(int argc, char** argv) {
    wmlab::AcceptanceOptions opts;
    opts.out_dir = "acceptance_out";

    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        const bool has_value = i + 1 < argc;
        if (arg == "--out" && has_value) {
            opts.out_dir = argv[++i];
        } else if (arg == "--seed" && has_value) {
            opts.seed = std::strtoull(argv[++i], nullptr, 10);
        } else if (arg == "--jobs" && has_value) {
            opts.jobs = std::atoi(argv[++i]);
        } else {
            std::fprintf(stderr,
                         "usage: %s [--out DIR] [--seed N] [--jobs N]\n",
                         argv[0]);
            return 2;
        }
    }

    try {
        const auto results = wmlab::run_acceptance(opts);
        for (const auto& r : results)
            std::printf("[%s] criterion %2d: %s (%s)\n", r.pass ? "PASS" : "FAIL",
                        r.number, r.name.c_str(), r.detail.c_str());
        const bool ok = wmlab::all_passed(results);
        std::printf("%s\n", ok ? "acceptance: all criteria passed"
                               : "acceptance: FAILURES above");
        return ok ? 0 : 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "acceptance: error: %s\n", e.what());
        return 2;
    }
}
