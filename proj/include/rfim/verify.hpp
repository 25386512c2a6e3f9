#pragma once

#include <string>
#include <vector>

namespace rfim {

enum class VerifyLevel { Quick, Full };

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

// Runs the verification suite: solver-oracle equivalence, samplewise
// inequalities, identities, monotonicity sweeps, statistical bound checks,
// and reproducibility. Quick trims replica counts for a smoke run; Full runs
// the release configuration.
std::vector<CriterionResult> run_verification(VerifyLevel level, int threads);

// One line per criterion; returns true iff everything passed.
bool print_verification(const std::vector<CriterionResult>& results);

}  // namespace rfim
