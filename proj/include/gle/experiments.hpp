#pragma once

#include <string>
#include <vector>

#include "gle/config.hpp"

namespace gle {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct ExperimentReport {
    std::vector<CheckResult> checks;
    bool numerical_failure = false;  // a level (or the whole ensemble) fully diverged
    std::vector<std::string> notes;

    bool all_pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
};

// Each runner writes its CSV outputs plus the resolved-config echo into
// cfg.out_dir and reports its built-in checks.
ExperimentReport run_converge(const RunConfig& cfg);
ExperimentReport run_ergodic(const RunConfig& cfg);
ExperimentReport run_distribution(const RunConfig& cfg);
ExperimentReport run_malliavin(const RunConfig& cfg);
ExperimentReport run_simulate(const RunConfig& cfg);

ExperimentReport run_experiment(const RunConfig& cfg);

}  // namespace gle
