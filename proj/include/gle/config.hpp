#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gle/model.hpp"

namespace gle {

// One structured configuration file drives one experiment. Unknown keys are
// rejected everywhere; defaults are materialized at load time and echoed next
// to the outputs so a run can be reproduced from the echo alone.

struct ConvergeConfig {
    double T = 1.0;
    int n_paths = 2000;
    std::vector<double> levels = {1.0 / 64, 1.0 / 128, 1.0 / 256, 1.0 / 512, 1.0 / 1024};
    std::vector<double> initial;  // defaults to all ones
    std::string weak_observable = "sin_vx_radius";
};

struct ErgodicConfig {
    double T = 512.0;
    double h = 0.125;
    int n_paths = 2000;
    std::vector<std::vector<double>> initials;  // defaults to the four reference starts (k=3)
    std::vector<std::string> labels;
    std::vector<std::string> observables = {"cos_norm2", "exp_neg_half_norm2", "sin_norm2"};
    int64_t oracle_samples = 1000000;
    int burn_in = 0;
    int stride = 0;  // 0: pick ~512 output rows
};

struct DistributionConfig {
    double T = 512.0;
    double h = 0.125;
    int n_paths = 2000;
    std::vector<double> times = {2.0, 16.0, 128.0, 512.0};
    std::vector<double> initial;
    int bins = 128;
    double vmin = -3.0, vmax = 3.0, xmin = -3.0, xmax = 3.0;
    int baseline_replicates = 50;
};

struct MalliavinConfig {
    double T = 1.0;
    std::vector<double> h_list = {1.0 / 16, 1.0 / 32, 1.0 / 64, 1.0 / 128, 1.0 / 256};
    int n_paths = 100;
    std::vector<double> initial;
    int fd_states = 100;
    int det_draws = 10000;
};

struct SimulateConfig {
    double T = 1.0;
    double h = 0.125;
    int n_paths = 1;
    int stride = 1;
    std::vector<double> initial;
    std::string method = "avf";  // or "em"
};

struct RunConfig {
    std::string experiment;
    ModelParams model;
    uint64_t seed = 12345;
    int workers = 0;  // 0 = logical cores
    std::string out_dir = ".";
    bool override_hstar = false;
    bool zero_noise = false;

    ConvergeConfig converge;
    ErgodicConfig ergodic;
    DistributionConfig distribution;
    MalliavinConfig malliavin;
    SimulateConfig simulate;
};

// Throws std::invalid_argument with context on parse or validation problems.
RunConfig load_run_config(const std::string& path);

// The fully resolved configuration as a JSON string (defaults materialized).
std::string resolved_config_json(const RunConfig& cfg);

}  // namespace gle
