#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace deltagas {

struct CheckRecord {
    std::string name;
    double observed = 0.0;
    double bound = 0.0; // pass iff observed <= bound
    bool pass = false;
};

struct VerifyReport {
    std::string suite;
    std::uint64_t seed = 0;
    std::vector<CheckRecord> checks;
    bool pass = false;
};

/// 100 random draws per identity; observed values are relative residuals.
VerifyReport run_identity_suite(std::uint64_t seed);

/// Classifies every apparent singularity of the cluster-expansion integrand
/// for n <= 3 against the expected zero/finite/pole catalogue.
VerifyReport run_pole_suite();

/// Small-time normalization for the two-body propagator at kappa = +-1.
VerifyReport run_completeness_suite();

/// Long-time decay slopes at x = y = 0 for n = 2, 3 against the string energy.
VerifyReport run_decay_suite();

/// suite in {identities, poles, completeness, decay}
VerifyReport run_suite(const std::string& suite, std::uint64_t seed);

std::string report_to_json(const VerifyReport& report);

} // namespace deltagas
