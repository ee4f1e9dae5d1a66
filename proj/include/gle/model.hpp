#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gle/rng.hpp"

namespace gle {

// Univariate polynomial confining potential U, coefficients in ascending
// degree. Even degree >= 4 with positive leading coefficient; K is a declared
// lower bound for U'' (U''(x) >= -K everywhere), verified on a grid at
// construction. The quadratic escape hatch exists only for linear-model
// cross-checks in tests.
struct PotentialSpec {
    std::vector<double> coefficients;
    double hessian_lower_bound = 0.0;  // K
    bool quadratic_override = false;

    int degree() const { return static_cast<int>(coefficients.size()) - 1; }
};

PotentialSpec make_potential(std::vector<double> coefficients, double hessian_lower_bound,
                             bool allow_quadratic = false);

// U(x) = x^4/4 - x^2/2, the double-well used throughout the experiments; K = 1.
PotentialSpec double_well();

struct PotentialEval {
    double value;
    double grad;
    double hess;
};

// U, U', U'' at x (Horner).
PotentialEval potential_eval(const PotentialSpec& p, double x);

// Average of U' along the chord from a to b:  integral_0^1 U'(a + t(b-a)) dt.
// Equals (U(b) - U(a)) / (b - a); evaluated in product form so there is no
// cancellation, and reduces to U'((a+b)/2) below the coincidence threshold
// eps = 1e-8 * max(1, |a|, |b|).
double discrete_gradient(const PotentialSpec& p, double a, double b);

// Weighted averages of U'' along the same chord:
//   f1 = integral_0^1 U''(a + t(b-a)) t dt,
//   f2 = integral_0^1 U''(a + t(b-a)) (1-t) dt.
// Gauss-Legendre with ceil(degree/2) nodes, exact for polynomials.
// f1, f2 >= -K/2, and f1 + f2 = discrete gradient slope of U'.
struct ChordHessianMoments {
    double f1;
    double f2;
};
ChordHessianMoments chord_hessian_moments(const PotentialSpec& p, double a, double b);

// Model of the lifted memory-kernel Langevin system: friction gamma, k
// auxiliary modes with decay rates alpha and couplings lambda, potential U.
struct ModelParams {
    double gamma = 1.0;
    int k = 1;
    std::vector<double> alpha;
    std::vector<double> lambda;
    PotentialSpec potential;

    int dim() const { return k + 2; }
};

ModelParams make_model(double gamma, std::vector<double> alpha, std::vector<double> lambda,
                       PotentialSpec potential);

// State layout mirrors the solution vector (v, z_1..z_k, x).
struct State {
    std::vector<double> y;

    State() = default;
    explicit State(int k) : y(static_cast<size_t>(k) + 2, 0.0) {}
    State(double v, std::vector<double> z, double x);

    int k() const { return static_cast<int>(y.size()) - 2; }
    double v() const { return y.front(); }
    double& v() { return y.front(); }
    double x() const { return y.back(); }
    double& x() { return y.back(); }
    double z(int l) const { return y[static_cast<size_t>(l) + 1]; }
    double& z(int l) { return y[static_cast<size_t>(l) + 1]; }
};

bool state_finite(const State& s);

// H0 = |v|^2/2 + |z|^2/2 + U(x); the invariant density is  exp(-H0)/Z.
double hamiltonian_H0(const ModelParams& p, const State& s);

// H = H0 + (gamma/2) v x, conserved exactly by the deterministic substep.
double hamiltonian_H(const ModelParams& p, const State& s);

// Step-size threshold below which the implicit substep is uniquely solvable:
// min{ 4/(K+1), min_l 8/(gamma lambda_l^2), 8/(2 gamma + 2(K+1) + gamma k) }.
double h_star(const ModelParams& p);

// Tabulated inverse CDF of the x-marginal density exp(-U(x))/Z_x on [-L, L].
// L grows until the neglected tail is below 1e-12 relative; the CDF is a
// composite-Simpson table on 2^14 uniform cells, inverted by bisection plus
// linear interpolation.
struct GibbsReference {
    std::vector<double> x_nodes;
    std::vector<double> cdf;    // strictly increasing, cdf.front()=0, cdf.back()=1
    double normalizer = 0.0;    // Z_x
    double tail_bound = 0.0;    // neglected mass (absolute)
    double truncation = 0.0;    // L

    double sample_x(double u) const;  // inverse-CDF lookup, u in (0,1)
};

GibbsReference make_gibbs_reference(const PotentialSpec& p);

// Exact draw from the invariant law: v and every z_l standard normal, x by
// inverse CDF from the table.
State gibbs_sample(const GibbsReference& ref, const ModelParams& p, RngStream& rng);

struct MonteCarloEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    int64_t n = 0;
};

// Plain Monte Carlo over exact invariant-law samples; the ergodic-limit
// oracle. Throws if g returns a non-finite value (the message names the
// offending sample index).
MonteCarloEstimate gibbs_expectation(const GibbsReference& ref, const ModelParams& p,
                                     const std::function<double(const State&)>& g,
                                     int64_t n_samples, RngStream& rng);

}  // namespace gle
