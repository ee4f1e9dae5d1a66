#include "gle/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "gle/csv.hpp"
#include "gle/density.hpp"
#include "gle/integrator.hpp"
#include "gle/linalg.hpp"
#include "gle/malliavin.hpp"
#include "gle/montecarlo.hpp"

namespace gle {

namespace {

namespace fs = std::filesystem;

std::string out_path(const RunConfig& cfg, const std::string& name) {
    return (fs::path(cfg.out_dir) / name).string();
}

void write_echo(const RunConfig& cfg) {
    fs::create_directories(cfg.out_dir);
    std::ofstream out(out_path(cfg, "config_resolved.json"));
    out << resolved_config_json(cfg);
}

StepperOptions stepper_options(const RunConfig& cfg) {
    StepperOptions opts;
    opts.allow_large_h = cfg.override_hstar;
    return opts;
}

State to_state(const std::vector<double>& v) {
    State s(static_cast<int>(v.size()) - 2);
    s.y = v;
    return s;
}

int steps_for(double T, double h, const std::string& what) {
    const double n = T / h;
    if (std::abs(n - std::round(n)) > 1e-9 * std::max(1.0, n))
        throw std::invalid_argument(what + ": T/h must be an integer");
    if (n < 1.0) throw std::invalid_argument(what + ": T must cover at least one step");
    return static_cast<int>(std::llround(n));
}

std::string num_label(double t) {
    if (t == std::floor(t)) return std::to_string(static_cast<long long>(t));
    std::string s = csv_num(t);
    std::replace(s.begin(), s.end(), '.', 'p');
    return s;
}

CheckResult check(const std::string& name, bool pass, const std::string& detail) {
    return {name, pass, detail};
}

std::string fmt(double v) { return csv_num(v); }

}  // namespace

ExperimentReport run_converge(const RunConfig& cfg) {
    ExperimentReport report;
    const ConvergeConfig& cc = cfg.converge;
    if (cc.levels.size() < 3) throw std::invalid_argument("converge: need >= 3 levels");
    write_echo(cfg);

    EnsembleConfig ens;
    ens.n_paths = cc.n_paths;
    ens.T = cc.T;
    ens.levels = cc.levels;
    ens.master_seed = cfg.seed;
    ens.initial_state = to_state(cc.initial);
    ens.zero_noise = cfg.zero_noise;
    ens.workers = cfg.workers;
    ens.stepper_opts = stepper_options(cfg);
    const auto results = run_coupled_paths(cfg.model, ens);

    std::vector<int> diverged(cc.levels.size(), 0);
    for (const auto& r : results)
        for (size_t l = 0; l < cc.levels.size(); ++l) diverged[l] += r.diverged[l];
    for (size_t l = 0; l < cc.levels.size(); ++l)
        if (diverged[l] == cc.n_paths) report.numerical_failure = true;
    if (report.numerical_failure) {
        report.notes.push_back("a level diverged on every path");
        return report;
    }

    const Observable weak_g = make_observable(cc.weak_observable, cfg.model);
    const ErrorTable table = build_error_table(results, cc.levels, weak_g, cfg.seed);

    {
        CsvWriter w(out_path(cfg, "error_table.csv"));
        w.row({"h", "strong_error", "strong_order", "weak_error", "weak_order", "n_effective"});
        for (const auto& r : table.rows)
            w.row({fmt(r.h), fmt(r.strong_error),
                   std::isnan(r.strong_order) ? "" : fmt(r.strong_order), fmt(r.weak_error),
                   std::isnan(r.weak_order) ? "" : fmt(r.weak_order),
                   std::to_string(r.n_effective)});
    }

    double weak_mean_order = 0.0;
    int n_orders = 0;
    for (const auto& r : table.rows)
        if (!std::isnan(r.weak_order)) {
            weak_mean_order += r.weak_order;
            ++n_orders;
        }
    weak_mean_order /= std::max(1, n_orders);

    {
        CsvWriter w(out_path(cfg, "converge_summary.csv"));
        w.row({"key", "value"});
        w.row({"strong_ls_slope", fmt(table.strong_ls_slope)});
        w.row({"weak_ls_slope", fmt(table.weak_ls_slope)});
        w.row({"weak_mean_successive_order", fmt(weak_mean_order)});
        for (size_t i = 0; i < table.rows.size(); ++i) {
            w.row({"strong_se_" + fmt(table.rows[i].h), fmt(table.rows[i].strong_se)});
            w.row({"weak_se_" + fmt(table.rows[i].h), fmt(table.rows[i].weak_se)});
        }
        for (size_t l = 0; l < cc.levels.size(); ++l)
            w.row({"diverged_" + fmt(cc.levels[l]), std::to_string(diverged[l])});
    }

    if (!cfg.zero_noise) {
        report.checks.push_back(check(
            "strong_order_regression",
            table.strong_ls_slope >= 0.85 && table.strong_ls_slope <= 1.15,
            "least-squares slope " + fmt(table.strong_ls_slope) + " target [0.85, 1.15]"));
        report.checks.push_back(check(
            "weak_order_mean", weak_mean_order >= 0.7 && weak_mean_order <= 1.4,
            "mean successive weak order " + fmt(weak_mean_order) + " target [0.7, 1.4]"));
        report.checks.push_back(check("weak_order_regression", table.weak_ls_slope >= 0.8,
                                      "least-squares slope " + fmt(table.weak_ls_slope) +
                                          " target >= 0.8"));
    } else {
        report.notes.push_back("zero-noise run: observed deterministic strong slope " +
                               fmt(table.strong_ls_slope));
    }
    return report;
}

ExperimentReport run_ergodic(const RunConfig& cfg) {
    ExperimentReport report;
    const ErgodicConfig& ec = cfg.ergodic;
    write_echo(cfg);
    const StepperConfig step = make_stepper(cfg.model, ec.h, stepper_options(cfg));
    const int n_steps = steps_for(ec.T, ec.h, "ergodic");
    int stride = ec.stride;
    if (stride <= 0) {
        stride = std::max(1, n_steps / 512);
        while (n_steps % stride) --stride;
    }

    // Observables; the Lyapunov-function series rides along for the
    // stationarity diagnostic.
    std::vector<std::string> names = ec.observables;
    if (std::find(names.begin(), names.end(), "H") == names.end()) names.push_back("H");
    std::vector<Observable> obs;
    for (const auto& n : names) obs.push_back(make_observable(n, cfg.model));

    // Invariant-law oracle per observable.
    const GibbsReference ref = make_gibbs_reference(cfg.model.potential);
    std::vector<MonteCarloEstimate> oracle(names.size());
    {
        CsvWriter w(out_path(cfg, "ergodic_reference.csv"));
        w.row({"g_name", "reference", "std_error", "n_samples"});
        for (size_t o = 0; o < names.size(); ++o) {
            RngStream s(cfg.seed, static_cast<uint32_t>(o), RngPurpose::gibbs);
            oracle[o] = gibbs_expectation(ref, cfg.model, obs[o], ec.oracle_samples, s);
            w.row({names[o], fmt(oracle[o].mean), fmt(oracle[o].std_error),
                   std::to_string(oracle[o].n)});
        }
    }

    std::vector<TemporalAverageSeries> series;
    for (size_t i = 0; i < ec.initials.size(); ++i) {
        series.push_back(run_temporal_averages(
            cfg.model, step, to_state(ec.initials[i]), ec.n_paths, n_steps, cfg.seed,
            static_cast<uint32_t>(i) * static_cast<uint32_t>(ec.n_paths), obs, cfg.workers,
            stride, cfg.zero_noise, ec.burn_in));
        if (series.back().n_paths_effective == 0) report.numerical_failure = true;
    }

    {
        CsvWriter w(out_path(cfg, "temporal_averages.csv"));
        w.row({"t", "g_name", "initial_label", "running_mean", "std_error"});
        for (size_t i = 0; i < series.size(); ++i)
            for (size_t o = 0; o < names.size(); ++o)
                for (size_t m = 0; m < series[i].t.size(); ++m)
                    w.row({fmt(series[i].t[m]), names[o], ec.labels[i],
                           fmt(series[i].running_mean[o][m]), fmt(series[i].std_error[o][m])});
    }

    for (size_t o = 0; o < ec.observables.size(); ++o) {
        for (size_t i = 0; i < series.size(); ++i) {
            const double mean = series[i].running_mean[o].back();
            const double se = series[i].std_error[o].back();
            const double tol =
                3.0 * std::sqrt(se * se + oracle[o].std_error * oracle[o].std_error);
            report.checks.push_back(
                check("limit_" + names[o] + "_" + ec.labels[i],
                      std::abs(mean - oracle[o].mean) <= tol,
                      fmt(mean) + " vs reference " + fmt(oracle[o].mean) + " tol " + fmt(tol)));
            for (size_t j = i + 1; j < series.size(); ++j) {
                const double mj = series[j].running_mean[o].back();
                const double sj = series[j].std_error[o].back();
                const double tolp = 3.0 * std::sqrt(se * se + sj * sj);
                report.checks.push_back(check(
                    "pairwise_" + names[o] + "_" + ec.labels[i] + "_" + ec.labels[j],
                    std::abs(mean - mj) <= tolp,
                    fmt(mean) + " vs " + fmt(mj) + " tol " + fmt(tolp)));
            }
        }
    }

    // Lyapunov surrogate: the running mean of the ensemble-mean Hamiltonian
    // stays finite and settles to within 5% once t >= 10.
    {
        const size_t oh = names.size() - 1;
        bool finite = true;
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (size_t i = 0; i < series.size(); ++i)
            for (size_t m = 0; m < series[i].t.size(); ++m) {
                const double v = series[i].running_mean[oh][m];
                finite = finite && std::isfinite(v);
                if (series[i].t[m] >= 10.0) {
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
            }
        const double rel = (hi - lo) / std::max(1e-12, std::abs(series[0].running_mean[oh].back()));
        report.checks.push_back(check("mean_H_stationarity", finite && rel < 0.05,
                                      "relative spread after t=10: " + fmt(rel)));
    }

    int total_diverged = 0;
    for (const auto& s : series) total_diverged += s.n_diverged;
    if (total_diverged > 0)
        report.notes.push_back(std::to_string(total_diverged) + " paths diverged (excluded)");
    return report;
}

ExperimentReport run_distribution(const RunConfig& cfg) {
    ExperimentReport report;
    const DistributionConfig& dc = cfg.distribution;
    write_echo(cfg);
    if (dc.times.empty()) throw std::invalid_argument("distribution: empty time list");
    const StepperConfig step = make_stepper(cfg.model, dc.h, stepper_options(cfg));
    std::vector<int> snap_steps;
    for (double t : dc.times) {
        if (t > dc.T + 1e-9) throw std::invalid_argument("distribution: time beyond horizon");
        snap_steps.push_back(steps_for(t, dc.h, "distribution time " + fmt(t)));
    }

    const SnapshotSet snaps = run_vx_snapshots(cfg.model, step, to_state(dc.initial), dc.n_paths,
                                               snap_steps, cfg.seed, cfg.workers,
                                               cfg.zero_noise);
    if (snaps.n_diverged == dc.n_paths) {
        report.numerical_failure = true;
        return report;
    }

    auto write_grid = [&](const std::string& name,
                          const std::vector<std::pair<double, double>>& vx) {
        const Grid2D hist = histogram2d(vx, dc.bins, dc.bins, dc.vmin, dc.vmax, dc.xmin, dc.xmax);
        const Grid2D kde = kde2d(vx, dc.bins, dc.bins, dc.vmin, dc.vmax, dc.xmin, dc.xmax);
        CsvWriter w(out_path(cfg, name));
        w.row({"v_center", "x_center", "histogram", "kde"});
        for (int i = 0; i < hist.nx; ++i)
            for (int j = 0; j < hist.ny; ++j)
                w.row({fmt(hist.x_center(i)), fmt(hist.y_center(j)), fmt(hist.at(i, j)),
                       fmt(kde.at(i, j))});
        return hist;
    };

    // Exact invariant-law reference with the same sample count.
    const GibbsReference gref = make_gibbs_reference(cfg.model.potential);
    auto draw_reference = [&](uint32_t stream) {
        RngStream s(cfg.seed, stream, RngPurpose::gibbs);
        std::vector<std::pair<double, double>> vx(dc.n_paths);
        for (auto& q : vx) {
            const State y = gibbs_sample(gref, cfg.model, s);
            q = {y.v(), y.x()};
        }
        return vx;
    };
    const Grid2D ref_hist = write_grid("distribution_reference.csv", draw_reference(1u << 20));

    std::vector<double> tv(dc.times.size());
    for (size_t s = 0; s < dc.times.size(); ++s) {
        const Grid2D hist = write_grid("distribution_t" + num_label(dc.times[s]) + ".csv",
                                       snaps.vx[s]);
        tv[s] = tv_distance(hist, ref_hist);
    }

    // Same-law bootstrap baseline: TV between two independent exact-law
    // sample sets of the same size.
    double baseline = 0.0;
    for (int r = 0; r < dc.baseline_replicates; ++r) {
        const Grid2D a = histogram2d(draw_reference(2 * r + 1), dc.bins, dc.bins, dc.vmin,
                                     dc.vmax, dc.xmin, dc.xmax);
        const Grid2D b = histogram2d(draw_reference(2 * r + 2), dc.bins, dc.bins, dc.vmin,
                                     dc.vmax, dc.xmin, dc.xmax);
        baseline += tv_distance(a, b);
    }
    baseline /= dc.baseline_replicates;

    {
        CsvWriter w(out_path(cfg, "distribution_summary.csv"));
        w.row({"key", "value"});
        for (size_t s = 0; s < dc.times.size(); ++s)
            w.row({"tv_t" + num_label(dc.times[s]), fmt(tv[s])});
        w.row({"tv_same_law_baseline", fmt(baseline)});
        w.row({"n_diverged", std::to_string(snaps.n_diverged)});
    }

    report.checks.push_back(check("stationary_tv", tv.back() < 3.0 * baseline,
                                  "tv " + fmt(tv.back()) + " vs 3x baseline " +
                                      fmt(3.0 * baseline)));
    report.checks.push_back(check("transient_tv_decreases", tv.front() > tv.back(),
                                  "tv(" + num_label(dc.times.front()) + ") = " + fmt(tv.front()) +
                                      " vs tv(" + num_label(dc.times.back()) + ") = " +
                                      fmt(tv.back())));
    return report;
}

ExperimentReport run_malliavin(const RunConfig& cfg) {
    ExperimentReport report;
    const MalliavinConfig& mc = cfg.malliavin;
    write_echo(cfg);
    const State init = to_state(mc.initial);
    const CounterRng rng(cfg.seed);

    CsvWriter diag(out_path(cfg, "malliavin_diagnostics.csv"));
    diag.row({"h", "path", "step", "lambda_min", "det_closed_form", "det_lu"});

    bool positive = true;
    double det_worst_rel = 0.0;
    std::vector<double> median_lmin;
    int diverged = 0;
    for (double h : mc.h_list) {
        const StepperConfig step = make_stepper(cfg.model, h, stepper_options(cfg));
        const int n_steps = steps_for(mc.T, h, "malliavin");
        std::vector<double> terminal_lmin;
        for (int path = 0; path < mc.n_paths; ++path) {
            State y = init;
            MalliavinCovariance cov = covariance_init(step);
            bool alive = true;
            for (int n = 0; n < n_steps; ++n) {
                const NoiseBlock nb =
                    cfg.zero_noise ? zero_noise(step)
                                   : noise_block_at(step, rng, static_cast<uint32_t>(path),
                                                    static_cast<uint32_t>(n));
                const StepRecord rec = split_step(y, nb, step);
                if (!rec.ok) {
                    alive = false;
                    break;
                }
                const StepJacobians jac = jacobians(rec.y_bar, y, step);
                cov = covariance_step(cov, jac, step);
                const double lmin = min_eigenvalue(cov.gamma);
                const double lu = determinant_lu(jac.dG_dYbar);
                det_worst_rel = std::max(det_worst_rel,
                                         std::abs(jac.det_dG_dYbar - lu) / std::abs(lu));
                if (cov.n >= 2 && lmin <= 0.0) positive = false;
                diag.row({fmt(h), std::to_string(path), std::to_string(cov.n), fmt(lmin),
                          fmt(jac.det_dG_dYbar), fmt(lu)});
                if (n + 1 == n_steps) terminal_lmin.push_back(lmin);
                y = rec.y_next;
            }
            if (!alive) ++diverged;
        }
        if (terminal_lmin.empty()) {
            report.numerical_failure = true;
            return report;
        }
        std::sort(terminal_lmin.begin(), terminal_lmin.end());
        median_lmin.push_back(terminal_lmin[terminal_lmin.size() / 2]);
    }

    std::vector<double> log2h, log2l;
    for (size_t i = 0; i < mc.h_list.size(); ++i) {
        log2h.push_back(std::log2(mc.h_list[i]));
        log2l.push_back(std::log2(median_lmin[i]));
    }
    const double slope = mc.h_list.size() >= 2 ? least_squares_slope(log2h, log2l) : 0.0;

    // Frozen-noise transfer-matrix check against central finite differences.
    const StepperConfig fd_step = make_stepper(cfg.model, mc.h_list.front(), stepper_options(cfg));
    RngStream fd_rng(cfg.seed, 1u << 24);
    const NoiseBlock fd_noise = sample_noise(fd_step, fd_rng);
    double fd_worst = 0.0;
    for (int s = 0; s < mc.fd_states; ++s) {
        State y(cfg.model.k);
        for (auto& c : y.y) c = -3.0 + 6.0 * fd_rng.next_uniform();
        const StepRecord rec = split_step(y, fd_noise, fd_step);
        if (!rec.ok) continue;
        const StepJacobians jac = jacobians(rec.y_bar, y, fd_step);
        StepperConfig tight = fd_step;
        tight.opts.newton_tol = 1e-14;
        for (int c = 0; c < cfg.model.dim(); ++c) {
            State hi = y, lo = y;
            hi.y[c] += 1e-5;
            lo.y[c] -= 1e-5;
            const State fhi = split_step(hi, fd_noise, tight).y_next;
            const State flo = split_step(lo, fd_noise, tight).y_next;
            for (int r = 0; r < cfg.model.dim(); ++r)
                fd_worst = std::max(fd_worst,
                                    std::abs((fhi.y[r] - flo.y[r]) / 2e-5 - jac.A(r, c)));
        }
    }

    // Determinant identity over random (state, h) draws below the threshold.
    RngStream det_rng(cfg.seed, 1u << 25);
    const double hs = h_star(cfg.model);
    for (int d = 0; d < mc.det_draws; ++d) {
        const double h = 1e-4 + 0.95 * hs * det_rng.next_uniform();
        const StepperConfig sc = make_stepper(cfg.model, h, stepper_options(cfg));
        State a(cfg.model.k), b(cfg.model.k);
        for (auto& c : a.y) c = -3.0 + 6.0 * det_rng.next_uniform();
        for (auto& c : b.y) c = -3.0 + 6.0 * det_rng.next_uniform();
        const StepJacobians jac = jacobians(a, b, sc);
        const double lu = determinant_lu(jac.dG_dYbar);
        det_worst_rel =
            std::max(det_worst_rel, std::abs(jac.det_dG_dYbar - lu) / std::abs(lu));
    }

    {
        CsvWriter w(out_path(cfg, "malliavin_summary.csv"));
        w.row({"key", "value"});
        for (size_t i = 0; i < mc.h_list.size(); ++i)
            w.row({"median_lambda_min_" + fmt(mc.h_list[i]), fmt(median_lmin[i])});
        w.row({"lambda_min_loglog_slope", fmt(slope)});
        w.row({"det_identity_max_rel_err", fmt(det_worst_rel)});
        w.row({"transfer_matrix_fd_max_err", fmt(fd_worst)});
        w.row({"n_diverged", std::to_string(diverged)});
    }

    report.checks.push_back(check("covariance_positive", positive,
                                  "lambda_min(gamma_n) > 0 for all n >= 2"));
    report.checks.push_back(
        check("lambda_min_slope", slope >= -3.5, "log-log slope " + fmt(slope) + " >= -3.5"));
    report.checks.push_back(check("det_identity", det_worst_rel <= 1e-12,
                                  "max relative error " + fmt(det_worst_rel)));
    report.checks.push_back(
        check("transfer_matrix_fd", fd_worst <= 1e-6, "max entry error " + fmt(fd_worst)));
    return report;
}

ExperimentReport run_simulate(const RunConfig& cfg) {
    ExperimentReport report;
    const SimulateConfig& sc = cfg.simulate;
    write_echo(cfg);
    if (sc.stride < 1) throw std::invalid_argument("simulate: stride must be >= 1");
    StepperOptions opts = stepper_options(cfg);
    if (sc.method == "em") opts.allow_large_h = true;  // the baseline has no solver threshold
    const StepperConfig step = make_stepper(cfg.model, sc.h, opts);
    const int n_steps = steps_for(sc.T, sc.h, "simulate");
    const CounterRng rng(cfg.seed);
    const int k = cfg.model.k;

    CsvWriter w(out_path(cfg, "trajectory.csv"));
    std::vector<std::string> header = {"path", "step", "t", "v"};
    for (int l = 1; l <= k; ++l) header.push_back("z" + std::to_string(l));
    header.push_back("x");
    header.push_back("diverged");
    w.row(header);

    auto write_state = [&](int path, int n, const State& y, bool div) {
        std::vector<std::string> row = {std::to_string(path), std::to_string(n),
                                        fmt(n * step.h)};
        for (double c : y.y) row.push_back(fmt(c));
        row.push_back(div ? "1" : "0");
        w.row(row);
    };

    int diverged_paths = 0;
    for (int path = 0; path < sc.n_paths; ++path) {
        State y = to_state(sc.initial);
        write_state(path, 0, y, false);
        bool alive = true;
        for (int n = 1; n <= n_steps && alive; ++n) {
            if (sc.method == "em") {
                std::vector<double> dw(static_cast<size_t>(k) + 1, 0.0);
                if (!cfg.zero_noise)
                    for (int c = 0; c <= k; ++c)
                        dw[c] = std::sqrt(step.h) *
                                rng.normal(static_cast<uint32_t>(path),
                                           static_cast<uint32_t>(n - 1), RngPurpose::em_noise,
                                           static_cast<uint32_t>(c));
                y = em_step(y, dw, step);
                alive = !state_diverged(y);
            } else {
                const NoiseBlock nb =
                    cfg.zero_noise ? zero_noise(step)
                                   : noise_block_at(step, rng, static_cast<uint32_t>(path),
                                                    static_cast<uint32_t>(n - 1));
                const StepRecord rec = split_step(y, nb, step);
                alive = rec.ok;
                y = rec.y_next;
            }
            if (!alive) {
                write_state(path, n, y, true);  // diverged marker row, then stop the path
                ++diverged_paths;
            } else if (n % sc.stride == 0) {
                write_state(path, n, y, false);
            }
        }
    }
    if (diverged_paths == sc.n_paths && sc.method == "avf") report.numerical_failure = true;
    if (diverged_paths > 0)
        report.notes.push_back(std::to_string(diverged_paths) + " paths diverged");
    return report;
}

ExperimentReport run_experiment(const RunConfig& cfg) {
    if (cfg.experiment == "converge") return run_converge(cfg);
    if (cfg.experiment == "ergodic") return run_ergodic(cfg);
    if (cfg.experiment == "distribution") return run_distribution(cfg);
    if (cfg.experiment == "malliavin") return run_malliavin(cfg);
    if (cfg.experiment == "simulate") return run_simulate(cfg);
    throw std::invalid_argument("unknown experiment " + cfg.experiment);
}

}  // namespace gle
