#include "gle/malliavin.hpp"

#include <cmath>
#include <stdexcept>

namespace gle {

namespace {

struct Factors {
    double a;        // gamma h / 4
    double e;        // h / 2
    double c;        // h f1
    double b2_sum;   // sum b_l^2
    double bd_sum;   // sum b_l d_l
    double q;        // 1 + a + b2_sum
    double cbd;      // c + bd_sum
    double det;
};

Factors factors(const StepperConfig& cfg, double f1) {
    const ModelParams& p = cfg.params;
    const double h = cfg.h;
    Factors f;
    f.a = 0.25 * p.gamma * h;
    f.e = 0.5 * h;
    f.c = h * f1;
    f.b2_sum = 0.0;
    f.bd_sum = 0.0;
    for (int l = 0; l < p.k; ++l) {
        const double b = 0.5 * p.lambda[l] * h;
        const double d = 0.25 * p.gamma * p.lambda[l] * h;
        f.b2_sum += b * b;
        f.bd_sum += b * d;
    }
    f.q = 1.0 + f.a + f.b2_sum;
    f.cbd = f.c + f.bd_sum;
    double l2 = 0.0;
    for (double ll : p.lambda) l2 += ll * ll;
    f.det = 1.0 + h * h * (0.25 * l2 + 0.5 * f1 - p.gamma * p.gamma / 16.0);
    return f;
}

}  // namespace

double det_dG_dYbar(const StepperConfig& cfg, double f1) { return factors(cfg, f1).det; }

void solve_dG_dYbar(const StepperConfig& cfg, double f1, std::vector<double>& rhs) {
    const ModelParams& p = cfg.params;
    const int k = p.k;
    const Factors f = factors(cfg, f1);
    double sz = 0.0;
    for (int l = 0; l < k; ++l) sz += 0.5 * p.lambda[l] * cfg.h * rhs[l + 1];
    const double rv = rhs[0], rx = rhs[k + 1];
    const double inv = 1.0 / f.det;
    rhs[0] = ((1.0 - f.a) * (rv + sz) - f.cbd * rx) * inv;
    for (int l = 0; l < k; ++l) {
        const double b = 0.5 * p.lambda[l] * cfg.h;
        const double d = 0.25 * p.gamma * p.lambda[l] * cfg.h;
        rhs[l + 1] = (-b * rv + f.det * rhs[l + 1] - b * sz + (b * f.cbd - d * f.q) * rx) * inv;
    }
    rhs[k + 1] = (f.e * (rv + sz) + f.q * rx) * inv;
}

Mat adjugate_dG_dYbar(const StepperConfig& cfg, double f1) {
    const ModelParams& p = cfg.params;
    const int k = p.k;
    const Factors f = factors(cfg, f1);
    Mat adj(k + 2, k + 2);
    adj(0, 0) = 1.0 - f.a;
    adj(0, k + 1) = -f.cbd;
    adj(k + 1, 0) = f.e;
    adj(k + 1, k + 1) = f.q;
    for (int j = 0; j < k; ++j) {
        const double bj = 0.5 * p.lambda[j] * cfg.h;
        const double dj = 0.25 * p.gamma * p.lambda[j] * cfg.h;
        adj(0, j + 1) = bj * (1.0 - f.a);
        adj(j + 1, 0) = -bj;
        adj(j + 1, k + 1) = bj * f.cbd - dj * f.q;
        adj(k + 1, j + 1) = f.e * bj;
        for (int l = 0; l < k; ++l) {
            const double bl = 0.5 * p.lambda[l] * cfg.h;
            adj(l + 1, j + 1) = (l == j ? f.det : 0.0) - bl * bj;
        }
    }
    return adj;
}

StepJacobians jacobians(const State& y_bar, const State& y_n, const StepperConfig& cfg) {
    const ModelParams& p = cfg.params;
    const int k = p.k;
    const int n = k + 2;
    const double h = cfg.h;
    StepJacobians out;
    const ChordHessianMoments m = chord_hessian_moments(p.potential, y_n.x(), y_bar.x());
    out.f1 = m.f1;
    out.f2 = m.f2;
    out.det_dG_dYbar = det_dG_dYbar(cfg, m.f1);
    if (std::abs(out.det_dG_dYbar) < 1e-12)
        throw std::runtime_error("jacobians: singular dG/dYbar");

    const double a = 0.25 * p.gamma * h;
    const double e = 0.5 * h;
    out.dG_dYbar = Mat(n, n);
    out.dG_dYn = Mat(n, n);
    out.dG_dYbar(0, 0) = 1.0 + a;
    out.dG_dYbar(0, n - 1) = h * m.f1;
    out.dG_dYbar(n - 1, 0) = -e;
    out.dG_dYbar(n - 1, n - 1) = 1.0 - a;
    out.dG_dYn(0, 0) = -(1.0 - a);
    out.dG_dYn(0, n - 1) = h * m.f2;
    out.dG_dYn(n - 1, 0) = -e;
    out.dG_dYn(n - 1, n - 1) = -(1.0 + a);
    for (int l = 0; l < k; ++l) {
        const double b = 0.5 * p.lambda[l] * h;
        const double d = 0.25 * p.gamma * p.lambda[l] * h;
        out.dG_dYbar(0, l + 1) = -b;
        out.dG_dYbar(l + 1, 0) = b;
        out.dG_dYbar(l + 1, l + 1) = 1.0;
        out.dG_dYbar(l + 1, n - 1) = d;
        out.dG_dYn(0, l + 1) = -b;
        out.dG_dYn(l + 1, 0) = b;
        out.dG_dYn(l + 1, l + 1) = -1.0;
        out.dG_dYn(l + 1, n - 1) = d;
    }

    out.M = Mat(n, n);
    out.M(0, 0) = cfg.decay_v;
    out.M(n - 1, n - 1) = cfg.decay_v;
    for (int l = 0; l < k; ++l) {
        out.M(l + 1, l + 1) = cfg.decay_z[l];
        out.M(l + 1, n - 1) = cfg.couple_zx[l];
    }

    // A = -M (dG/dYbar)^{-1} dG/dYn, column by column through the closed-form
    // adjugate solve.
    Mat w(n, n);
    std::vector<double> col(n);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) col[i] = out.dG_dYn(i, j);
        solve_dG_dYbar(cfg, m.f1, col);
        for (int i = 0; i < n; ++i) w(i, j) = col[i];
    }
    out.A = out.M * w;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) out.A(i, j) = -out.A(i, j);
    return out;
}

Mat propagate_derivative(const Mat& D, const StepJacobians& jac) {
    if (D.rows() != jac.A.cols()) throw std::invalid_argument("propagate_derivative: shape");
    return jac.A * D;
}

Mat fresh_derivative(const StepperConfig& cfg) {
    const int k = cfg.params.k;
    Mat d(k + 2, k + 1);
    d(0, 0) = cfg.decay_v * std::sqrt(2.0 * cfg.params.gamma);
    for (int l = 0; l < k; ++l)
        d(l + 1, l + 1) = cfg.decay_z[l] * std::sqrt(2.0 * cfg.params.alpha[l]);
    return d;
}

MalliavinCovariance covariance_init(const StepperConfig& cfg) {
    return {Mat(cfg.dim(), cfg.dim()), 0};
}

Mat covariance_fresh(const StepperConfig& cfg) {
    const int k = cfg.params.k;
    Mat g(k + 2, k + 2);
    g(0, 0) = cfg.sigma_v * cfg.sigma_v;
    for (int l = 0; l < k; ++l) g(l + 1, l + 1) = cfg.sigma_z[l] * cfg.sigma_z[l];
    return g;
}

MalliavinCovariance covariance_step(const MalliavinCovariance& st, const StepJacobians& jac,
                                    const StepperConfig& cfg) {
    Mat g = jac.A * st.gamma * jac.A.transposed() + covariance_fresh(cfg);
    for (int i = 0; i < g.rows(); ++i)
        for (int j = i + 1; j < g.cols(); ++j) {
            const double s = 0.5 * (g(i, j) + g(j, i));
            g(i, j) = s;
            g(j, i) = s;
        }
    return {std::move(g), st.n + 1};
}

}  // namespace gle
