#include "gle/montecarlo.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace gle {

void parallel_blocks(int n_blocks, int workers, const std::function<void(int)>& fn) {
    if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
    workers = std::max(1, std::min(workers, n_blocks));
    if (workers == 1) {
        for (int b = 0; b < n_blocks; ++b) fn(b);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (;;) {
                const int b = next.fetch_add(1);
                if (b >= n_blocks || failed.load()) break;
                try {
                    fn(b);
                } catch (...) {
                    std::lock_guard<std::mutex> lk(error_mutex);
                    if (!error) error = std::current_exception();
                    failed.store(true);
                    break;
                }
            }
        });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

void validate_levels(const EnsembleConfig& cfg) {
    if (cfg.levels.empty()) throw std::invalid_argument("levels must be nonempty");
    if (!(cfg.T > 0.0)) throw std::invalid_argument("T must be positive");
    if (cfg.n_paths <= 0) throw std::invalid_argument("n_paths must be positive");
    for (size_t i = 0; i < cfg.levels.size(); ++i) {
        const double h = cfg.levels[i];
        if (!(h > 0.0)) throw std::invalid_argument("levels must be positive");
        const double steps = cfg.T / h;
        if (std::abs(steps - std::round(steps)) > 1e-9 * steps)
            throw std::invalid_argument("T/h must be an integer for every level");
        if (i + 1 < cfg.levels.size() && std::abs(h - 2.0 * cfg.levels[i + 1]) > 1e-12 * h)
            throw std::invalid_argument("consecutive levels must differ by exactly a factor 2");
    }
}

namespace {

// Noise block for step n of level `lvl`, rebuilt on demand from the finest
// level's counter-keyed blocks by dyadic recombination. Regeneration is cheap
// and keeps every level a pure function of (seed, path, fine step).
NoiseBlock level_noise(const std::vector<StepperConfig>& cfgs, const CounterRng& rng,
                       uint32_t path, int lvl, uint32_t step) {
    const int finest = static_cast<int>(cfgs.size()) - 1;
    if (lvl == finest) return noise_block_at(cfgs[lvl], rng, path, step);
    const NoiseBlock first = level_noise(cfgs, rng, path, lvl + 1, 2 * step);
    const NoiseBlock second = level_noise(cfgs, rng, path, lvl + 1, 2 * step + 1);
    return coarsen_noise(first, second, cfgs[lvl + 1], cfgs[lvl]);
}

}  // namespace

std::vector<PathResult> run_coupled_paths(const ModelParams& model, const EnsembleConfig& cfg) {
    validate_levels(cfg);
    if (static_cast<int>(cfg.initial_state.y.size()) != model.dim())
        throw std::invalid_argument("initial state dimension mismatch");
    const int n_levels = static_cast<int>(cfg.levels.size());
    std::vector<StepperConfig> steppers;
    steppers.reserve(n_levels);
    for (double h : cfg.levels) steppers.push_back(make_stepper(model, h, cfg.stepper_opts));

    std::vector<PathResult> results(cfg.n_paths);
    const CounterRng rng(cfg.master_seed);
    const int n_blocks = (cfg.n_paths + kPathBlock - 1) / kPathBlock;

    parallel_blocks(n_blocks, cfg.workers, [&](int block) {
        detail::StepScratch ws;
        std::vector<double> zero(static_cast<size_t>(model.k) + 1, 0.0);
        for (int j = block * kPathBlock; j < std::min((block + 1) * kPathBlock, cfg.n_paths);
             ++j) {
            PathResult& pr = results[j];
            pr.terminal.assign(n_levels, State(model.k));
            pr.diverged.assign(n_levels, 0);
            for (int lvl = 0; lvl < n_levels; ++lvl) {
                const StepperConfig& sc = steppers[lvl];
                const auto n_steps = static_cast<uint32_t>(std::llround(cfg.T / sc.h));
                std::vector<double> y = cfg.initial_state.y;
                bool alive = true;
                for (uint32_t n = 0; n < n_steps && alive; ++n) {
                    int iters = 0;
                    if (cfg.zero_noise) {
                        alive = detail::split_step_inplace(sc, y, zero, ws, &iters);
                    } else {
                        const NoiseBlock nb =
                            level_noise(steppers, rng, static_cast<uint32_t>(j), lvl, n);
                        alive = detail::split_step_inplace(sc, y, nb.g, ws, &iters);
                    }
                    pr.newton_evals += iters;
                    pr.max_newton_evals = std::max(pr.max_newton_evals, iters);
                }
                pr.diverged[lvl] = alive ? 0 : 1;
                pr.terminal[lvl].y = std::move(y);
            }
        }
    });
    return results;
}

namespace {

std::vector<int> common_paths(const std::vector<PathResult>& results, int a, int b) {
    std::vector<int> idx;
    for (size_t j = 0; j < results.size(); ++j) {
        const auto& r = results[j];
        if (a < static_cast<int>(r.terminal.size()) && b < static_cast<int>(r.terminal.size()) &&
            !r.diverged[a] && !r.diverged[b])
            idx.push_back(static_cast<int>(j));
    }
    return idx;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double c : v) s += c;
    return s / static_cast<double>(v.size());
}

// Bootstrap SE of a statistic over per-path values. stat_tag separates the
// bootstrap counter lanes of different statistics under one seed.
double bootstrap_se(const std::vector<double>& per_path, uint64_t master_seed, uint32_t stat_tag,
                    const std::function<double(const std::vector<double>&)>& stat) {
    const int resamples = 200;
    const auto n = static_cast<uint32_t>(per_path.size());
    const CounterRng rng(master_seed);
    std::vector<double> stats(resamples);
    std::vector<double> draw(per_path.size());
    for (int r = 0; r < resamples; ++r) {
        for (uint32_t i = 0; i < n; ++i) {
            const double u = rng.uniform(stat_tag, static_cast<uint32_t>(r),
                                         RngPurpose::bootstrap, 0, i);
            draw[i] = per_path[std::min(n - 1, static_cast<uint32_t>(u * n))];
        }
        stats[r] = stat(draw);
    }
    const double m = mean_of(stats);
    double var = 0.0;
    for (double s : stats) var += (s - m) * (s - m);
    return std::sqrt(var / (resamples - 1));
}

}  // namespace

ErrorEstimate strong_error(const std::vector<PathResult>& results, int level_a, int level_b,
                           uint64_t master_seed) {
    const std::vector<int> idx = common_paths(results, level_a, level_b);
    if (idx.size() < 100)
        throw std::runtime_error("strong_error: fewer than 100 common non-diverged paths");
    std::vector<double> sq(idx.size());
    for (size_t m = 0; m < idx.size(); ++m) {
        const auto& r = results[idx[m]];
        double s = 0.0;
        for (size_t c = 0; c < r.terminal[level_a].y.size(); ++c) {
            const double d = r.terminal[level_a].y[c] - r.terminal[level_b].y[c];
            s += d * d;
        }
        sq[m] = s;
    }
    const auto rms = [](const std::vector<double>& v) { return std::sqrt(mean_of(v)); };
    ErrorEstimate est;
    est.value = rms(sq);
    est.n_effective = static_cast<int>(idx.size());
    est.std_error = bootstrap_se(sq, master_seed, 1000u + static_cast<uint32_t>(level_a), rms);
    return est;
}

ErrorEstimate weak_error(const std::vector<PathResult>& results, int level_a, int level_b,
                         const Observable& g, uint64_t master_seed) {
    const std::vector<int> idx = common_paths(results, level_a, level_b);
    if (idx.size() < 100)
        throw std::runtime_error("weak_error: fewer than 100 common non-diverged paths");
    std::vector<double> diff(idx.size());
    for (size_t m = 0; m < idx.size(); ++m) {
        const auto& r = results[idx[m]];
        diff[m] = g(r.terminal[level_a]) - g(r.terminal[level_b]);
    }
    const auto abs_mean = [](const std::vector<double>& v) { return std::abs(mean_of(v)); };
    ErrorEstimate est;
    est.value = abs_mean(diff);
    est.n_effective = static_cast<int>(idx.size());
    est.std_error = bootstrap_se(diff, master_seed, 2000u + static_cast<uint32_t>(level_a), abs_mean);
    return est;
}

double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("least_squares_slope: need >= 2 points");
    const double mx = mean_of(x), my = mean_of(y);
    double sxx = 0.0, sxy = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    return sxy / sxx;
}

ErrorTable build_error_table(const std::vector<PathResult>& results,
                             const std::vector<double>& levels, const Observable& weak_g,
                             uint64_t master_seed) {
    if (levels.size() < 2) throw std::invalid_argument("build_error_table: need >= 2 levels");
    ErrorTable table;
    const int pairs = static_cast<int>(levels.size()) - 1;
    std::vector<double> log2h, log2s, log2w;
    for (int i = 0; i < pairs; ++i) {
        const ErrorEstimate se = strong_error(results, i, i + 1, master_seed);
        const ErrorEstimate we = weak_error(results, i, i + 1, weak_g, master_seed);
        ErrorRow row;
        row.h = levels[i];
        row.strong_error = se.value;
        row.strong_se = se.std_error;
        row.weak_error = we.value;
        row.weak_se = we.std_error;
        row.n_effective = std::min(se.n_effective, we.n_effective);
        row.strong_order = std::nan("");
        row.weak_order = std::nan("");
        table.rows.push_back(row);
        log2h.push_back(std::log2(levels[i]));
        log2s.push_back(std::log2(se.value));
        log2w.push_back(std::log2(we.value));
    }
    for (int i = 0; i + 1 < pairs; ++i) {
        table.rows[i].strong_order = log2s[i] - log2s[i + 1];
        table.rows[i].weak_order = log2w[i] - log2w[i + 1];
    }
    table.strong_ls_slope = least_squares_slope(log2h, log2s);
    table.weak_ls_slope = least_squares_slope(log2h, log2w);
    return table;
}

std::vector<double> temporal_average(const std::vector<double>& ensemble_means, int burn_in) {
    if (burn_in < 0 || burn_in >= static_cast<int>(ensemble_means.size()))
        throw std::invalid_argument("temporal_average: burn_in out of range");
    std::vector<double> out;
    out.reserve(ensemble_means.size() - burn_in);
    double acc = 0.0;
    for (size_t i = burn_in; i < ensemble_means.size(); ++i) {
        acc += ensemble_means[i];
        out.push_back(acc / static_cast<double>(i - burn_in + 1));
    }
    return out;
}

TemporalAverageSeries run_temporal_averages(const ModelParams& model, const StepperConfig& step,
                                            const State& initial, int n_paths, int n_steps,
                                            uint64_t master_seed, uint32_t stream_offset,
                                            const std::vector<Observable>& observables,
                                            int workers, int stride, bool zero_noise,
                                            int burn_in) {
    if (stride < 1) throw std::invalid_argument("stride must be >= 1");
    if (burn_in < 0 || burn_in >= n_steps) throw std::invalid_argument("burn_in out of range");
    const int n_obs = static_cast<int>(observables.size());
    const int n_out = (n_steps - burn_in) / stride;
    const int n_blocks = (n_paths + kPathBlock - 1) / kPathBlock;
    const CounterRng rng(master_seed);

    // Per block: sums over paths of the running per-path average and its
    // square at every output step; merged in block order afterwards.
    std::vector<std::vector<double>> blk_sum(n_blocks), blk_sumsq(n_blocks);
    std::vector<int> blk_alive(n_blocks, 0);

    parallel_blocks(n_blocks, workers, [&](int block) {
        blk_sum[block].assign(static_cast<size_t>(n_obs) * n_out, 0.0);
        blk_sumsq[block].assign(static_cast<size_t>(n_obs) * n_out, 0.0);
        detail::StepScratch ws;
        std::vector<double> zero(static_cast<size_t>(model.k) + 1, 0.0);
        std::vector<double> gvals(static_cast<size_t>(n_obs) * n_out);
        State s(model.k);
        for (int j = block * kPathBlock; j < std::min((block + 1) * kPathBlock, n_paths); ++j) {
            std::vector<double> y = initial.y;
            std::vector<double> acc(n_obs, 0.0);
            bool alive = true;
            int out_i = 0;
            for (int n = 1; n <= n_steps && alive; ++n) {
                if (zero_noise) {
                    alive = detail::split_step_inplace(step, y, zero, ws, nullptr);
                } else {
                    const NoiseBlock nb = noise_block_at(
                        step, rng, stream_offset + static_cast<uint32_t>(j),
                        static_cast<uint32_t>(n - 1));
                    alive = detail::split_step_inplace(step, y, nb.g, ws, nullptr);
                }
                if (!alive) break;
                if (n <= burn_in) continue;
                s.y = y;
                const int m = n - burn_in;
                for (int o = 0; o < n_obs; ++o) acc[o] += observables[o](s);
                if (m % stride == 0 && out_i < n_out) {
                    for (int o = 0; o < n_obs; ++o)
                        gvals[static_cast<size_t>(o) * n_out + out_i] = acc[o] / m;
                    ++out_i;
                }
            }
            if (!alive) continue;
            ++blk_alive[block];
            for (size_t q = 0; q < gvals.size(); ++q) {
                blk_sum[block][q] += gvals[q];
                blk_sumsq[block][q] += gvals[q] * gvals[q];
            }
        }
    });

    TemporalAverageSeries out;
    out.t.resize(n_out);
    for (int m = 0; m < n_out; ++m) out.t[m] = (burn_in + (m + 1) * stride) * step.h;
    out.running_mean.assign(n_obs, std::vector<double>(n_out, 0.0));
    out.std_error.assign(n_obs, std::vector<double>(n_out, 0.0));
    int alive = 0;
    std::vector<double> tot(static_cast<size_t>(n_obs) * n_out, 0.0);
    std::vector<double> totsq(static_cast<size_t>(n_obs) * n_out, 0.0);
    for (int b = 0; b < n_blocks; ++b) {
        alive += blk_alive[b];
        for (size_t q = 0; q < tot.size(); ++q) {
            tot[q] += blk_sum[b][q];
            totsq[q] += blk_sumsq[b][q];
        }
    }
    out.n_paths_effective = alive;
    out.n_diverged = n_paths - alive;
    if (alive == 0) throw std::runtime_error("run_temporal_averages: all paths diverged");
    for (int o = 0; o < n_obs; ++o)
        for (int m = 0; m < n_out; ++m) {
            const size_t q = static_cast<size_t>(o) * n_out + m;
            const double mean = tot[q] / alive;
            const double var = std::max(0.0, totsq[q] / alive - mean * mean);
            out.running_mean[o][m] = mean;
            out.std_error[o][m] = std::sqrt(var / alive);
        }
    return out;
}

SnapshotSet run_vx_snapshots(const ModelParams& model, const StepperConfig& step,
                             const State& initial, int n_paths, const std::vector<int>& steps,
                             uint64_t master_seed, int workers, bool zero_noise) {
    if (steps.empty()) throw std::invalid_argument("run_vx_snapshots: empty step list");
    const int n_snap = static_cast<int>(steps.size());
    int max_step = 0;
    for (int s : steps) {
        if (s <= 0) throw std::invalid_argument("snapshot steps must be positive");
        max_step = std::max(max_step, s);
    }
    const int n_blocks = (n_paths + kPathBlock - 1) / kPathBlock;
    const CounterRng rng(master_seed);
    constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::vector<std::pair<double, double>>> snaps(
        n_snap, std::vector<std::pair<double, double>>(n_paths, {kNaN, kNaN}));
    std::vector<int> blk_diverged(n_blocks, 0);

    parallel_blocks(n_blocks, workers, [&](int block) {
        detail::StepScratch ws;
        std::vector<double> zero(static_cast<size_t>(model.k) + 1, 0.0);
        for (int j = block * kPathBlock; j < std::min((block + 1) * kPathBlock, n_paths); ++j) {
            std::vector<double> y = initial.y;
            bool alive = true;
            for (int n = 1; n <= max_step && alive; ++n) {
                if (zero_noise) {
                    alive = detail::split_step_inplace(step, y, zero, ws, nullptr);
                } else {
                    const NoiseBlock nb = noise_block_at(step, rng, static_cast<uint32_t>(j),
                                                         static_cast<uint32_t>(n - 1));
                    alive = detail::split_step_inplace(step, y, nb.g, ws, nullptr);
                }
                if (!alive) break;
                for (int s = 0; s < n_snap; ++s)
                    if (steps[s] == n) snaps[s][j] = {y.front(), y.back()};
            }
            if (!alive) ++blk_diverged[block];
        }
    });

    SnapshotSet out;
    out.steps = steps;
    out.vx.resize(n_snap);
    for (int s = 0; s < n_snap; ++s) {
        out.vx[s].reserve(n_paths);
        for (int j = 0; j < n_paths; ++j)
            if (std::isfinite(snaps[s][j].first)) out.vx[s].push_back(snaps[s][j]);
    }
    for (int b = 0; b < n_blocks; ++b) out.n_diverged += blk_diverged[b];
    return out;
}

}  // namespace gle
