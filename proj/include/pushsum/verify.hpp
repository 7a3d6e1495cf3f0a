#pragma once

// Self-check suite behind `pushsum verify`: cross-checks the rate bound, the
// operator iteration and the optimizer against independent computations on a
// few built-in graphs and, optionally, a user instance.

#include <cstdint>
#include <string>
#include <vector>

#include "pushsum/graph.hpp"
#include "pushsum/rate.hpp"

namespace pushsum {

struct VerifyInstance {
    std::string name;
    Graph graph;
    MixingMatrix mix;
    CorrelationParams params;
    CoefficientForm form = CoefficientForm::theorem;
    /// Params come from a concrete protocol, so Phi* is a true covariance map
    /// and its properties can be checked.
    bool realizable = false;
};

/// K3 (hand instance), C6 with broadcast moments, Petersen with unicast moments.
std::vector<VerifyInstance> builtin_instances();

struct VerifyOptions {
    std::uint64_t seed = 1;
    /// Merge tolerance used by the root finder under test. Raising it is a
    /// fault-injection hook: distinct Delta_j get merged and the companion
    /// check must catch it.
    double merge_tolerance = 1e-13;
    bool timing = true;
    std::size_t property_trials = 20;
};

struct CheckResult {
    std::string name; // "<instance>/<check>"
    bool passed = false;
    double value = 0.0; // worst error, or elapsed seconds for timing checks
    std::string detail;
};

struct VerifyReport {
    std::vector<CheckResult> checks;
    bool ok() const;
    std::vector<std::string> failing() const;
};

VerifyReport run_verify(const std::vector<VerifyInstance>& instances, const VerifyOptions& opts = {});

} // namespace pushsum
