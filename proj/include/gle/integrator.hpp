#pragma once

#include <vector>

#include "gle/model.hpp"
#include "gle/rng.hpp"

namespace gle {

// Components with magnitude beyond this (or non-finite) mark a diverged path.
inline constexpr double kDivergenceLimit = 1e10;

bool state_diverged(const State& s);

struct StepperOptions {
    double newton_tol = 1e-12;        // infinity norm on the residual
    int newton_max_iter = 50;
    int fixed_point_max_iter = 400;   // damped fallback, damping 1/2
    bool allow_large_h = false;       // unlock h >= h_star (experiments only)
    bool explicit_predictor = false;  // one explicit Euler predictor before Newton
};

// One-step configuration: model, step size, solver knobs, and the decay /
// coupling / noise factors of the exact flow of the linear stochastic part,
//   decay_v   = exp(-gamma h / 2)
//   decay_z_l = exp(-alpha_l h)
//   couple_zx_l = gamma lambda_l (decay_v - decay_z_l) / (2 alpha_l - gamma)
//   sigma_v   = sqrt(2 - 2 exp(-gamma h)),  sigma_z_l = sqrt(1 - exp(-2 alpha_l h)).
// couple_zx uses the removable-singularity limit (gamma lambda_l h / 2) decay_v
// when |2 alpha_l - gamma| < 1e-6 gamma.
struct StepperConfig {
    ModelParams params;
    double h = 0.0;
    StepperOptions opts;
    bool hstar_warning = false;  // set when allow_large_h admitted h >= h_star

    double decay_v = 0.0;
    std::vector<double> decay_z;
    std::vector<double> couple_zx;
    double sigma_v = 0.0;
    std::vector<double> sigma_z;

    int dim() const { return params.dim(); }
};

// Validates 0 < h < h_star(params) unless opts.allow_large_h.
StepperConfig make_stepper(const ModelParams& params, double h, StepperOptions opts = {});

// The k+1 exact stochastic-convolution increments over one step, one per
// driving noise; independent centered Gaussians with the sigma factors above.
struct NoiseBlock {
    std::vector<double> g;
};

NoiseBlock zero_noise(const StepperConfig& cfg);
NoiseBlock sample_noise(const StepperConfig& cfg, RngStream& rng);

// Counter-keyed variant used by ensembles: the block for (path, step) is a
// pure function of (rng.seed, path, step).
NoiseBlock noise_block_at(const StepperConfig& cfg, const CounterRng& rng, uint32_t path,
                          uint32_t step);

// Exact recombination of two consecutive fine blocks into the block of the
// doubled step: component 0 picks up decay_v(fine), component l decay_z_l(fine).
// The x-coupling term is deterministic and lives in the substep, not here.
NoiseBlock coarsen_noise(const NoiseBlock& first, const NoiseBlock& second,
                         const StepperConfig& fine, const StepperConfig& coarse);

// Residual of the implicit averaged-chord substep: zero exactly when y_bar is
// the stage value for the deterministic half-flow started at y_n.
std::vector<double> avf_residual(const State& y_bar, const State& y_n,
                                 const StepperConfig& cfg);

struct StepRecord {
    State y_bar;
    State y_next;
    int newton_iters = 0;   // residual evaluations across Newton + fallback
    double residual = 0.0;  // infinity norm at exit
    bool ok = false;
};

// Solves the implicit substep by Newton with the closed-form Jacobian
// (damped fixed-point fallback), initial guess y_n. ok=false on
// non-convergence or divergence; y_next is left equal to y_bar.
StepRecord avf_substep(const State& y_n, const StepperConfig& cfg);

// Exact one-step flow of the linear stochastic part.
State ou_substep(const State& y_bar, const NoiseBlock& noise, const StepperConfig& cfg);

// Full step: stochastic flow applied to the substep output.
StepRecord split_step(const State& y_n, const NoiseBlock& noise, const StepperConfig& cfg);

// Explicit Euler-Maruyama step of the lifted system, the blow-up-prone
// baseline. dW holds k+1 Brownian increments of variance h.
State em_step(const State& y_n, const std::vector<double>& dW, const StepperConfig& cfg);

// ---- allocation-free kernels used by the ensemble drivers ------------------
namespace detail {

struct StepScratch {
    std::vector<double> ybar;
    std::vector<double> resid;
    std::vector<double> rhs;
};

// Returns residual-evaluation count, or -1 on non-convergence. ybar holds the
// solution (or last iterate) on exit; out_resid the final residual norm.
int avf_solve(const StepperConfig& cfg, const std::vector<double>& yn,
              std::vector<double>& ybar, std::vector<double>& resid,
              std::vector<double>& rhs, double& out_resid);

void avf_residual_into(const StepperConfig& cfg, const std::vector<double>& ybar,
                       const std::vector<double>& yn, std::vector<double>& out);

void ou_apply(const StepperConfig& cfg, const std::vector<double>& ybar,
              const std::vector<double>& noise, std::vector<double>& out);

// In-place full step; returns false on solver failure or divergence.
bool split_step_inplace(const StepperConfig& cfg, std::vector<double>& y,
                        const std::vector<double>& noise, StepScratch& ws,
                        int* iters = nullptr);

}  // namespace detail

}  // namespace gle
