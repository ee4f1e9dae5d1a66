#include "gle/integrator.hpp"

#include <cmath>
#include <stdexcept>

#include "gle/malliavin.hpp"

namespace gle {

bool state_diverged(const State& s) {
    for (double c : s.y)
        if (!std::isfinite(c) || std::abs(c) > kDivergenceLimit) return true;
    return false;
}

StepperConfig make_stepper(const ModelParams& params, double h, StepperOptions opts) {
    if (!(h > 0.0)) throw std::invalid_argument("step size must be positive");
    StepperConfig cfg;
    cfg.params = params;
    cfg.h = h;
    cfg.opts = opts;
    const double hs = h_star(params);
    if (h >= hs) {
        if (!opts.allow_large_h)
            throw std::invalid_argument("h >= h_star; pass allow_large_h to override");
        cfg.hstar_warning = true;
    }
    cfg.decay_v = std::exp(-0.5 * params.gamma * h);
    cfg.sigma_v = std::sqrt(-2.0 * std::expm1(-params.gamma * h));
    cfg.decay_z.resize(params.k);
    cfg.couple_zx.resize(params.k);
    cfg.sigma_z.resize(params.k);
    for (int l = 0; l < params.k; ++l) {
        const double al = params.alpha[l], ll = params.lambda[l];
        cfg.decay_z[l] = std::exp(-al * h);
        cfg.sigma_z[l] = std::sqrt(-std::expm1(-2.0 * al * h));
        if (std::abs(2.0 * al - params.gamma) < 1e-6 * params.gamma)
            cfg.couple_zx[l] = 0.5 * params.gamma * ll * h * cfg.decay_v;
        else
            cfg.couple_zx[l] =
                params.gamma * ll * (cfg.decay_v - cfg.decay_z[l]) / (2.0 * al - params.gamma);
    }
    return cfg;
}

NoiseBlock zero_noise(const StepperConfig& cfg) {
    return {std::vector<double>(static_cast<size_t>(cfg.params.k) + 1, 0.0)};
}

NoiseBlock sample_noise(const StepperConfig& cfg, RngStream& rng) {
    NoiseBlock nb = zero_noise(cfg);
    nb.g[0] = cfg.sigma_v * rng.next_normal();
    for (int l = 0; l < cfg.params.k; ++l) nb.g[l + 1] = cfg.sigma_z[l] * rng.next_normal();
    return nb;
}

NoiseBlock noise_block_at(const StepperConfig& cfg, const CounterRng& rng, uint32_t path,
                          uint32_t step) {
    NoiseBlock nb = zero_noise(cfg);
    nb.g[0] = cfg.sigma_v * rng.normal(path, step, RngPurpose::path_noise, 0);
    for (int l = 0; l < cfg.params.k; ++l)
        nb.g[l + 1] =
            cfg.sigma_z[l] * rng.normal(path, step, RngPurpose::path_noise, static_cast<uint32_t>(l) + 1);
    return nb;
}

NoiseBlock coarsen_noise(const NoiseBlock& first, const NoiseBlock& second,
                         const StepperConfig& fine, const StepperConfig& coarse) {
    if (std::abs(coarse.h - 2.0 * fine.h) > 1e-14 * coarse.h)
        throw std::invalid_argument("coarsen_noise: coarse.h must equal 2*fine.h");
    if (fine.params.k != coarse.params.k)
        throw std::invalid_argument("coarsen_noise: mismatched models");
    NoiseBlock nb = zero_noise(fine);
    nb.g[0] = fine.decay_v * first.g[0] + second.g[0];
    for (int l = 0; l < fine.params.k; ++l)
        nb.g[l + 1] = fine.decay_z[l] * first.g[l + 1] + second.g[l + 1];
    return nb;
}

namespace detail {

void avf_residual_into(const StepperConfig& cfg, const std::vector<double>& ybar,
                       const std::vector<double>& yn, std::vector<double>& out) {
    const ModelParams& p = cfg.params;
    const int k = p.k;
    const double h = cfg.h;
    const double sv = ybar[0] + yn[0];
    const double sx = ybar[k + 1] + yn[k + 1];
    double slz = 0.0;
    for (int l = 0; l < k; ++l) slz += p.lambda[l] * (ybar[l + 1] + yn[l + 1]);
    const double dg = discrete_gradient(p.potential, yn[k + 1], ybar[k + 1]);

    out.resize(static_cast<size_t>(k) + 2);
    out[0] = ybar[0] - yn[0] + 0.25 * p.gamma * h * sv + h * dg - 0.5 * h * slz;
    for (int l = 0; l < k; ++l)
        out[l + 1] = ybar[l + 1] - yn[l + 1] + 0.5 * p.lambda[l] * h * sv +
                     0.25 * p.gamma * p.lambda[l] * h * sx;
    out[k + 1] = ybar[k + 1] - yn[k + 1] - 0.25 * p.gamma * h * sx - 0.5 * h * sv;
}

namespace {

double inf_norm(const std::vector<double>& v) {
    double r = 0.0;
    for (double c : v) r = std::max(r, std::abs(c));
    return r;
}

bool finite_all(const std::vector<double>& v) {
    for (double c : v)
        if (!std::isfinite(c)) return false;
    return true;
}

}  // namespace

int avf_solve(const StepperConfig& cfg, const std::vector<double>& yn,
              std::vector<double>& ybar, std::vector<double>& resid,
              std::vector<double>& rhs, double& out_resid) {
    const int n = cfg.dim();
    const int kx = n - 1;
    ybar = yn;
    if (cfg.opts.explicit_predictor) {
        // One explicit pass through the stage map as a warm start.
        avf_residual_into(cfg, ybar, yn, resid);
        for (int i = 0; i < n; ++i) ybar[i] -= resid[i];
    }
    int evals = 0;
    for (int it = 0; it < cfg.opts.newton_max_iter; ++it) {
        avf_residual_into(cfg, ybar, yn, resid);
        ++evals;
        out_resid = inf_norm(resid);
        if (!std::isfinite(out_resid)) break;
        if (out_resid <= cfg.opts.newton_tol) return evals;
        const double f1 = chord_hessian_moments(cfg.params.potential, yn[kx], ybar[kx]).f1;
        rhs = resid;
        solve_dG_dYbar(cfg, f1, rhs);
        if (!finite_all(rhs)) break;
        for (int i = 0; i < n; ++i) ybar[i] -= rhs[i];
    }
    // Damped fixed-point fallback; the stage map is contractive for h < h_star.
    ybar = yn;
    for (int it = 0; it < cfg.opts.fixed_point_max_iter; ++it) {
        avf_residual_into(cfg, ybar, yn, resid);
        ++evals;
        out_resid = inf_norm(resid);
        if (!std::isfinite(out_resid)) return -1;
        if (out_resid <= cfg.opts.newton_tol) return evals;
        for (int i = 0; i < n; ++i) ybar[i] -= 0.5 * resid[i];
    }
    avf_residual_into(cfg, ybar, yn, resid);
    out_resid = inf_norm(resid);
    return out_resid <= cfg.opts.newton_tol ? evals + 1 : -1;
}

void ou_apply(const StepperConfig& cfg, const std::vector<double>& ybar,
              const std::vector<double>& noise, std::vector<double>& out) {
    const int k = cfg.params.k;
    out.resize(static_cast<size_t>(k) + 2);
    const double xbar = ybar[k + 1];
    out[0] = cfg.decay_v * ybar[0] + noise[0];
    for (int l = 0; l < k; ++l)
        out[l + 1] = cfg.decay_z[l] * ybar[l + 1] + cfg.couple_zx[l] * xbar + noise[l + 1];
    out[k + 1] = cfg.decay_v * xbar;
}

bool split_step_inplace(const StepperConfig& cfg, std::vector<double>& y,
                        const std::vector<double>& noise, StepScratch& ws, int* iters) {
    double rn = 0.0;
    const int it = avf_solve(cfg, y, ws.ybar, ws.resid, ws.rhs, rn);
    if (iters) *iters = it;
    if (it < 0) return false;
    ou_apply(cfg, ws.ybar, noise, y);
    for (double c : y)
        if (!std::isfinite(c) || std::abs(c) > kDivergenceLimit) return false;
    return true;
}

}  // namespace detail

std::vector<double> avf_residual(const State& y_bar, const State& y_n,
                                 const StepperConfig& cfg) {
    std::vector<double> out;
    detail::avf_residual_into(cfg, y_bar.y, y_n.y, out);
    return out;
}

StepRecord avf_substep(const State& y_n, const StepperConfig& cfg) {
    StepRecord rec;
    rec.y_bar = State(cfg.params.k);
    std::vector<double> resid, rhs;
    double rn = 0.0;
    const int it = detail::avf_solve(cfg, y_n.y, rec.y_bar.y, resid, rhs, rn);
    rec.newton_iters = std::max(it, 0);
    rec.residual = rn;
    rec.ok = it >= 0 && !state_diverged(rec.y_bar);
    rec.y_next = rec.y_bar;
    return rec;
}

State ou_substep(const State& y_bar, const NoiseBlock& noise, const StepperConfig& cfg) {
    State out(cfg.params.k);
    detail::ou_apply(cfg, y_bar.y, noise.g, out.y);
    return out;
}

StepRecord split_step(const State& y_n, const NoiseBlock& noise, const StepperConfig& cfg) {
    StepRecord rec = avf_substep(y_n, cfg);
    if (!rec.ok) return rec;
    rec.y_next = ou_substep(rec.y_bar, noise, cfg);
    rec.ok = !state_diverged(rec.y_next);
    return rec;
}

State em_step(const State& y_n, const std::vector<double>& dW, const StepperConfig& cfg) {
    const ModelParams& p = cfg.params;
    if (dW.size() != static_cast<size_t>(p.k) + 1)
        throw std::invalid_argument("em_step: dW must have k+1 entries");
    State out(p.k);
    const double h = cfg.h;
    double lz = 0.0;
    for (int l = 0; l < p.k; ++l) lz += p.lambda[l] * y_n.z(l);
    const double gradU = potential_eval(p.potential, y_n.x()).grad;
    out.v() = y_n.v() + h * (-p.gamma * y_n.v() - gradU + lz) + std::sqrt(2.0 * p.gamma) * dW[0];
    for (int l = 0; l < p.k; ++l)
        out.z(l) = y_n.z(l) + h * (-p.alpha[l] * y_n.z(l) - p.lambda[l] * y_n.v()) +
                   std::sqrt(2.0 * p.alpha[l]) * dW[l + 1];
    out.x() = y_n.x() + h * y_n.v();
    return out;
}

}  // namespace gle
