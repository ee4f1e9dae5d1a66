#include "gle/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gle {

namespace {

// Gauss-Legendre nodes/weights on [0,1], computed once per node count by
// Newton iteration on the Legendre recurrence.
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

GaussRule gauss_legendre_01(int n) {
    GaussRule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        // Root of P_n on [-1,1], Chebyshev initial guess.
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int j = 2; j <= n; ++j) {
                const double p2 = ((2 * j - 1) * x * p1 - (j - 1) * p0) / j;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        r.nodes[i] = 0.5 * (1.0 + x);
        r.weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    return r;
}

const GaussRule& gauss_rule(int n) {
    static std::vector<GaussRule> cache;
    if (n >= static_cast<int>(cache.size())) cache.resize(n + 1);
    if (cache[n].nodes.empty()) cache[n] = gauss_legendre_01(n);
    return cache[n];
}

double horner(const std::vector<double>& c, double x) {
    double r = 0.0;
    for (size_t i = c.size(); i-- > 0;) r = r * x + c[i];
    return r;
}

}  // namespace

PotentialSpec make_potential(std::vector<double> coefficients, double hessian_lower_bound,
                             bool allow_quadratic) {
    while (coefficients.size() > 1 && coefficients.back() == 0.0) coefficients.pop_back();
    const int deg = static_cast<int>(coefficients.size()) - 1;
    const int min_deg = allow_quadratic ? 2 : 4;
    if (deg < min_deg) throw std::invalid_argument("potential degree must be >= 4 and even");
    if (deg % 2 != 0) throw std::invalid_argument("potential degree must be even");
    if (coefficients.back() <= 0.0)
        throw std::invalid_argument("potential leading coefficient must be positive");
    if (hessian_lower_bound < 0.0)
        throw std::invalid_argument("hessian lower bound K must be nonnegative");
    PotentialSpec p{std::move(coefficients), hessian_lower_bound, allow_quadratic};

    // Certify U'' >= -K - 1e-8 on a dense grid covering everything the Gibbs
    // tabulation can ever touch; outside that range the leading term dominates.
    double span = 1.0;
    while (span < 1e6) {
        const double tail = std::exp(-potential_eval(p, span).value) * 2.0 * span;
        if (tail < 1e-14) break;
        span *= 1.25;
    }
    const int grid = 10000;
    for (int i = 0; i <= grid; ++i) {
        const double x = -span + 2.0 * span * i / grid;
        if (potential_eval(p, x).hess < -p.hessian_lower_bound - 1e-8)
            throw std::invalid_argument("declared hessian lower bound K is violated");
    }
    return p;
}

PotentialSpec double_well() { return make_potential({0.0, 0.0, -0.5, 0.0, 0.25}, 1.0); }

PotentialEval potential_eval(const PotentialSpec& p, double x) {
    const auto& c = p.coefficients;
    const size_t n = c.size();
    double u = 0.0, du = 0.0, d2u = 0.0;
    for (size_t i = n; i-- > 0;) {
        d2u = d2u * x + 2.0 * du;
        du = du * x + u;
        u = u * x + c[i];
    }
    return {u, du, d2u};
}

double discrete_gradient(const PotentialSpec& p, double a, double b) {
    const double eps = 1e-8 * std::max({1.0, std::abs(a), std::abs(b)});
    if (std::abs(b - a) <= eps) return potential_eval(p, 0.5 * (a + b)).grad;
    // (U(b)-U(a))/(b-a) = sum_n c_n (b^n - a^n)/(b - a)
    //                   = sum_n c_n sum_{i<n} a^i b^{n-1-i},
    // with S_m = sum_{i<=m} a^i b^{m-i} built from S_m = b S_{m-1} + a^m.
    // Sorting the endpoints makes the result bitwise symmetric in (a, b).
    if (a > b) std::swap(a, b);
    const auto& c = p.coefficients;
    double s = 1.0;       // S_0
    double apow = 1.0;    // a^m
    double r = c.size() > 1 ? c[1] * s : 0.0;
    for (size_t n = 2; n < c.size(); ++n) {
        apow *= a;
        s = b * s + apow;  // S_{n-1}
        r += c[n] * s;
    }
    return r;
}

ChordHessianMoments chord_hessian_moments(const PotentialSpec& p, double a, double b) {
    const int nodes = std::max(1, (p.degree() + 1) / 2);
    const GaussRule& rule = gauss_rule(nodes);
    double f1 = 0.0, f2 = 0.0;
    for (int i = 0; i < nodes; ++i) {
        const double t = rule.nodes[i];
        const double hess = potential_eval(p, a + t * (b - a)).hess;
        f1 += rule.weights[i] * hess * t;
        f2 += rule.weights[i] * hess * (1.0 - t);
    }
    return {f1, f2};
}

ModelParams make_model(double gamma, std::vector<double> alpha, std::vector<double> lambda,
                       PotentialSpec potential) {
    if (gamma <= 0.0) throw std::invalid_argument("gamma must be positive");
    if (alpha.empty() || alpha.size() != lambda.size())
        throw std::invalid_argument("alpha and lambda must be nonempty and equally sized");
    for (double a : alpha)
        if (a <= 0.0) throw std::invalid_argument("every alpha must be positive");
    for (double l : lambda)
        if (l <= 0.0) throw std::invalid_argument("every lambda must be positive");
    ModelParams p{gamma, static_cast<int>(alpha.size()), std::move(alpha), std::move(lambda),
                  std::move(potential)};
    if (!(h_star(p) > 0.0)) throw std::invalid_argument("h_star must be positive");
    return p;
}

State::State(double v, std::vector<double> z, double x) {
    y.reserve(z.size() + 2);
    y.push_back(v);
    y.insert(y.end(), z.begin(), z.end());
    y.push_back(x);
}

bool state_finite(const State& s) {
    for (double c : s.y)
        if (!std::isfinite(c)) return false;
    return true;
}

double hamiltonian_H0(const ModelParams& p, const State& s) {
    double zsq = 0.0;
    for (int l = 0; l < p.k; ++l) zsq += s.z(l) * s.z(l);
    return 0.5 * s.v() * s.v() + 0.5 * zsq + potential_eval(p.potential, s.x()).value;
}

double hamiltonian_H(const ModelParams& p, const State& s) {
    return hamiltonian_H0(p, s) + 0.5 * p.gamma * s.v() * s.x();
}

double h_star(const ModelParams& p) {
    const double K = p.potential.hessian_lower_bound;
    double m = 4.0 / (K + 1.0);
    for (double l : p.lambda) m = std::min(m, 8.0 / (p.gamma * l * l));
    m = std::min(m, 8.0 / (2.0 * p.gamma + 2.0 * (K + 1.0) + p.gamma * p.k));
    return m;
}

GibbsReference make_gibbs_reference(const PotentialSpec& p) {
    // Grow the truncation radius until the crude tail bound drops below
    // 1e-12 of the running normalizer.
    double L = 1.0;
    double z_rough = 1.0;
    for (int it = 0; it < 200; ++it) {
        const int n = 512;
        z_rough = 0.0;
        for (int i = 0; i < n; ++i) {
            const double x = -L + 2.0 * L * (i + 0.5) / n;
            z_rough += std::exp(-potential_eval(p, x).value) * (2.0 * L / n);
        }
        const double tail = std::exp(-potential_eval(p, L).value) * 2.0 * L +
                            std::exp(-potential_eval(p, -L).value) * 2.0 * L;
        if (tail < 1e-12 * z_rough) break;
        L *= 1.25;
    }

    // Composite Simpson CDF on 2^14 uniform cells, accumulated in long double.
    // Cells whose increment is lost to rounding (deep-tail mass below the ulp
    // of the running total) are merged into their neighbour so the stored
    // table is strictly increasing.
    const int cells = 1 << 14;
    GibbsReference ref;
    ref.truncation = L;
    std::vector<double> dens(2 * cells + 1);
    for (int i = 0; i <= 2 * cells; ++i) {
        const double x = -L + 2.0 * L * i / (2.0 * cells);
        dens[i] = std::exp(-potential_eval(p, x).value);
    }
    const double hx = 2.0 * L / cells;
    std::vector<double> node(cells + 1), cdf(cells + 1);
    long double acc = 0.0L;
    node[0] = -L;
    cdf[0] = 0.0;
    for (int i = 0; i < cells; ++i) {
        acc += static_cast<long double>(hx) / 6.0L *
               (dens[2 * i] + 4.0L * dens[2 * i + 1] + dens[2 * i + 2]);
        node[i + 1] = -L + hx * (i + 1);
        cdf[i + 1] = static_cast<double>(acc);
    }
    ref.normalizer = static_cast<double>(acc);
    ref.tail_bound = (std::exp(-potential_eval(p, L).value) +
                      std::exp(-potential_eval(p, -L).value)) * L / ref.normalizer;
    cdf.back() = ref.normalizer;
    ref.x_nodes.reserve(cells + 1);
    ref.cdf.reserve(cells + 1);
    for (int i = 0; i <= cells; ++i) {
        const double c = cdf[i] / ref.normalizer;
        if (i == 0 || c > ref.cdf.back()) {
            ref.x_nodes.push_back(node[i]);
            ref.cdf.push_back(c);
        } else if (c == 0.0) {
            ref.x_nodes.back() = node[i];  // advance the left edge over dead mass
        }
    }
    ref.cdf.back() = 1.0;
    for (size_t i = 1; i < ref.cdf.size(); ++i)
        if (!(ref.cdf[i] > ref.cdf[i - 1]))
            throw std::runtime_error("gibbs reference: CDF not strictly increasing");
    return ref;
}

double GibbsReference::sample_x(double u) const {
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    size_t j = std::min(cdf.size() - 1, static_cast<size_t>(it - cdf.begin()));
    if (j == 0) j = 1;
    const double c0 = cdf[j - 1], c1 = cdf[j];
    const double t = (u - c0) / (c1 - c0);
    return x_nodes[j - 1] + t * (x_nodes[j] - x_nodes[j - 1]);
}

State gibbs_sample(const GibbsReference& ref, const ModelParams& p, RngStream& rng) {
    State s(p.k);
    s.v() = rng.next_normal();
    for (int l = 0; l < p.k; ++l) s.z(l) = rng.next_normal();
    s.x() = ref.sample_x(rng.next_uniform());
    return s;
}

MonteCarloEstimate gibbs_expectation(const GibbsReference& ref, const ModelParams& p,
                                     const std::function<double(const State&)>& g,
                                     int64_t n_samples, RngStream& rng) {
    if (n_samples < 10000) throw std::invalid_argument("gibbs_expectation: need >= 1e4 samples");
    double sum = 0.0, sumsq = 0.0;
    for (int64_t i = 0; i < n_samples; ++i) {
        const State s = gibbs_sample(ref, p, rng);
        const double gi = g(s);
        if (!std::isfinite(gi))
            throw std::runtime_error("gibbs_expectation: non-finite observable at sample " +
                                     std::to_string(i));
        sum += gi;
        sumsq += gi * gi;
    }
    const double mean = sum / n_samples;
    const double var = std::max(0.0, sumsq / n_samples - mean * mean);
    return {mean, std::sqrt(var / n_samples), n_samples};
}

}  // namespace gle
