#pragma once

#include <string>
#include <vector>

namespace simfilm {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    /// Measured values behind the verdict.
    std::string detail;
    double seconds = 0.0;
};

/// Number of acceptance criteria.
inline constexpr int kCriteria = 12;

/// Criteria that skip the two-dimensional branching assembly.
std::vector<int> quick_criteria();

/// Runs the listed criteria (all when empty) in order. A criterion that throws
/// fails with the error text as its detail.
std::vector<CriterionResult> run_acceptance(const std::vector<int>& ids = {});

/// "[PASS] 3 envelope law: ..." style line.
std::string format_line(const CriterionResult& r);

}  // namespace simfilm
