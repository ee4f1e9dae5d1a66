#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gle/integrator.hpp"
#include "gle/observables.hpp"

namespace gle {

// Runs fn(block) for block = 0..n_blocks-1 on up to `workers` threads. Work
// items are fixed-size, so which thread runs a block never affects results.
void parallel_blocks(int n_blocks, int workers, const std::function<void(int)>& fn);

// Paths per work block; fixed so reductions merge in a worker-count-free order.
inline constexpr int kPathBlock = 32;

struct EnsembleConfig {
    int n_paths = 0;
    double T = 0.0;
    std::vector<double> levels;  // step sizes, descending, each exactly 2x the next
    uint64_t master_seed = 0;
    State initial_state;
    bool zero_noise = false;
    int workers = 0;  // 0 = hardware concurrency
    StepperOptions stepper_opts;
};

// Throws unless every level divides T into an integer step count and
// consecutive levels differ by exactly a factor of two.
void validate_levels(const EnsembleConfig& cfg);

struct PathResult {
    std::vector<State> terminal;     // one per level
    std::vector<uint8_t> diverged;   // one per level
    int64_t newton_evals = 0;
    int max_newton_evals = 0;
};

// Coupled-path ensemble: the finest level draws counter-keyed noise blocks;
// every coarser level consumes the same blocks recombined dyadically, so all
// levels ride one underlying noise path. Deterministic given the config.
std::vector<PathResult> run_coupled_paths(const ModelParams& model, const EnsembleConfig& cfg);

struct ErrorEstimate {
    double value = 0.0;
    double std_error = 0.0;  // nonparametric bootstrap, 200 resamples
    int n_effective = 0;
};

// RMS over common non-diverged paths of |Y_a(T) - Y_b(T)|. Needs >= 100
// common paths.
ErrorEstimate strong_error(const std::vector<PathResult>& results, int level_a, int level_b,
                           uint64_t master_seed);

// |mean over common paths of g(v,x at level a) - g(v,x at level b)|.
ErrorEstimate weak_error(const std::vector<PathResult>& results, int level_a, int level_b,
                         const Observable& g, uint64_t master_seed);

struct ErrorRow {
    double h = 0.0;
    double strong_error = 0.0;
    double strong_se = 0.0;
    double strong_order = 0.0;  // NaN in the last row
    double weak_error = 0.0;
    double weak_se = 0.0;
    double weak_order = 0.0;  // NaN in the last row
    int n_effective = 0;
};

struct ErrorTable {
    std::vector<ErrorRow> rows;
    double strong_ls_slope = 0.0;  // least-squares slope of log2 err vs log2 h
    double weak_ls_slope = 0.0;
};

ErrorTable build_error_table(const std::vector<PathResult>& results,
                             const std::vector<double>& levels, const Observable& weak_g,
                             uint64_t master_seed);

double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y);

// Running mean of a per-step series after burn_in (steps 1..N); element m is
// the average of entries burn_in..burn_in+m.
std::vector<double> temporal_average(const std::vector<double>& ensemble_means, int burn_in);

struct TemporalAverageSeries {
    std::vector<double> t;                          // output times (step stride)
    std::vector<std::vector<double>> running_mean;  // [observable][output index]
    std::vector<std::vector<double>> std_error;     // spread over paths of per-path averages
    int n_paths_effective = 0;
    int n_diverged = 0;
};

// Single-level ensemble, per-step ensemble averages of the observables and
// running temporal means with path-wise standard errors. The series at output
// index m aggregates steps 1..(m+1)*stride.
TemporalAverageSeries run_temporal_averages(const ModelParams& model, const StepperConfig& step,
                                            const State& initial, int n_paths, int n_steps,
                                            uint64_t master_seed, uint32_t stream_offset,
                                            const std::vector<Observable>& observables,
                                            int workers, int stride = 1, bool zero_noise = false,
                                            int burn_in = 0);

struct SnapshotSet {
    std::vector<int> steps;
    // snapshots[s] holds (v, x) per surviving path at steps[s]
    std::vector<std::vector<std::pair<double, double>>> vx;
    int n_diverged = 0;
};

SnapshotSet run_vx_snapshots(const ModelParams& model, const StepperConfig& step,
                             const State& initial, int n_paths, const std::vector<int>& steps,
                             uint64_t master_seed, int workers, bool zero_noise = false);

}  // namespace gle
