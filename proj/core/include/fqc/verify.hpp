#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fqc {

struct SuiteResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct VerifyOptions {
    std::uint64_t seed = 7;
    // Test hook: added to every projection output coordinate so a broken
    // projection path can be simulated end to end.
    double projection_perturbation = 0.0;
};

std::vector<SuiteResult> run_verification_suites(const VerifyOptions& opts = {});

}  // namespace fqc
