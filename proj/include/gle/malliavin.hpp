#pragma once

#include "gle/integrator.hpp"
#include "gle/linalg.hpp"

namespace gle {

// Closed-form pieces of the implicit-system Jacobian dG/dYbar. With
// a = gamma h/4, b_l = lambda_l h/2, d_l = gamma lambda_l h/4, e = h/2 and
// f1 the t-weighted chord average of U'':
//   det(dG/dYbar) = 1 + h^2 ( sum lambda_l^2 / 4 + f1/2 - gamma^2/16 ),
// and the adjugate is sparse enough to apply in O(k).
double det_dG_dYbar(const StepperConfig& cfg, double f1);

// Solves (dG/dYbar) x = rhs in place via adjugate/determinant.
void solve_dG_dYbar(const StepperConfig& cfg, double f1, std::vector<double>& rhs);

// Dense closed-form adjugate of dG/dYbar (diagnostics; the solver above
// never materializes it).
Mat adjugate_dG_dYbar(const StepperConfig& cfg, double f1);

// One-step Jacobians of the scheme at a solved stage pair (y_bar, y_n):
// dG/dYbar and dG/dYn of the residual, the linear map M of the stochastic
// flow, and the transfer matrix A = -M (dG/dYbar)^{-1} dG/dYn, which is the
// derivative of the full step map in y_n with the noise frozen.
struct StepJacobians {
    Mat dG_dYbar;
    Mat dG_dYn;
    Mat M;
    Mat A;
    double det_dG_dYbar = 0.0;  // closed form
    double f1 = 0.0;
    double f2 = 0.0;
};

StepJacobians jacobians(const State& y_bar, const State& y_n, const StepperConfig& cfg);

// Pushes a derivative block one step: returns A * D. D has one column per
// driving noise (k+1) or anything shape-compatible.
Mat propagate_derivative(const Mat& D, const StepJacobians& jac);

// Derivative of the step output with respect to noise entering within the
// step, evaluated at the start of the interval: a (k+2) x (k+1) matrix with
// decay_c * sqrt(2 rate_c) on the top diagonal and a zero last row.
Mat fresh_derivative(const StepperConfig& cfg);

// Running noise-sensitivity covariance of the chain. The recursion is
//   gamma_{n+1} = A_n gamma_n A_n^T + gamma_fresh,
// with gamma_fresh = diag(2 - 2 e^{-gamma h}, 1 - e^{-2 alpha_l h}, ..., 0);
// symmetrized after each update. Positive definite from n = 2 on.
struct MalliavinCovariance {
    Mat gamma;
    int n = 0;
};

MalliavinCovariance covariance_init(const StepperConfig& cfg);
Mat covariance_fresh(const StepperConfig& cfg);
MalliavinCovariance covariance_step(const MalliavinCovariance& st, const StepJacobians& jac,
                                    const StepperConfig& cfg);

}  // namespace gle
