#pragma once
// Acceptance gate. Eleven numbered checks covering the statistical core
// (exact boundary equivalence, bound numerics, Monte Carlo), the end-to-end
// behavior of watermarking and the rewriting attack on the synthetic model,
// the supporting metrics, and byte-level determinism of the result files.
// The CLI `verify` subcommand and the acceptance test binary both run this.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace wmlab {

struct CriterionResult {
    int number = 0;
    std::string name;
    bool pass = false;
    std::string detail; // measured values, for the log line
};

struct AcceptanceOptions {
    std::filesystem::path out_dir;
    std::uint64_t seed = 20240501;
    int jobs = 0;
};

// Runs all criteria in order, writing result files under out_dir. Never
// throws on a failed check (the result carries it); throws only on I/O or
// setup errors.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts);

// True iff every criterion passed.
bool all_passed(const std::vector<CriterionResult>& results);

} // namespace wmlab
