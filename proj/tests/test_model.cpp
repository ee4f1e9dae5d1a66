#include <cmath>
#include <complex>

#include "doctest.h"
#include "gle/model.hpp"
#include "support.hpp"

using namespace gle;

namespace {

ModelParams params_experiment() {
    return make_model(5.0, {3.0, 3.0, 3.0}, {2.0, 2.0, 2.0}, double_well());
}

}  // namespace

TEST_CASE("double-well point values") {
    const PotentialSpec p = double_well();
    auto e = potential_eval(p, 0.0);
    CHECK(e.value == 0.0);
    CHECK(e.grad == 0.0);
    CHECK(e.hess == -1.0);
    e = potential_eval(p, 1.0);
    CHECK(e.value == doctest::Approx(-0.25).epsilon(1e-15));
    CHECK(e.grad == doctest::Approx(0.0));
    CHECK(e.hess == doctest::Approx(2.0).epsilon(1e-15));
    e = potential_eval(p, 2.0);
    CHECK(e.value == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(e.grad == doctest::Approx(6.0).epsilon(1e-15));
    CHECK(e.hess == doctest::Approx(11.0).epsilon(1e-15));
}

TEST_CASE("potential validation") {
    CHECK_THROWS(make_potential({0, 0, 1, 0.5}, 1.0));        // odd degree
    CHECK_THROWS(make_potential({0, 0, 0.5}, 0.0));           // quadratic without override
    CHECK_THROWS(make_potential({0, 0, -0.5, 0, -0.25}, 1.0));  // negative leading
    CHECK_THROWS(make_potential({0, 0, -0.5, 0, 0.25}, 0.5));   // K too small for double well
    CHECK_NOTHROW(make_potential({0, 0, 0.5}, 0.0, true));      // quadratic with override
}

TEST_CASE("discrete gradient point values and properties") {
    const PotentialSpec p = double_well();
    CHECK(discrete_gradient(p, 0.0, 2.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(discrete_gradient(p, 1.0, 1.0) == doctest::Approx(0.0));
    CHECK(discrete_gradient(p, -1.0, 1.0) == doctest::Approx(0.0));

    RngStream s(5, 0);
    for (int i = 0; i < 1000; ++i) {
        const double a = -5.0 + 10.0 * s.next_uniform();
        const double b = -5.0 + 10.0 * s.next_uniform();
        const double ab = discrete_gradient(p, a, b);
        CHECK(ab == discrete_gradient(p, b, a));  // divided difference is symmetric
        // Independent route: composite Simpson is exact for the cubic U'.
        const double ref =
            oracle::simpson([&](double t) { return potential_eval(p, a + t * (b - a)).grad; },
                            0.0, 1.0);
        CHECK(ab == doctest::Approx(ref).epsilon(1e-12));
    }
}

TEST_CASE("chord hessian moments") {
    const PotentialSpec p = double_well();
    auto m = chord_hessian_moments(p, 1.0, 1.0);
    CHECK(m.f1 == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(m.f2 == doctest::Approx(1.0).epsilon(1e-14));
    m = chord_hessian_moments(p, 0.0, 0.0);
    CHECK(m.f1 == doctest::Approx(-0.5).epsilon(1e-14));
    CHECK(m.f2 == doctest::Approx(-0.5).epsilon(1e-14));

    // Quadrature oracle at (0, 1): integrands (3t^2-1) t and (3t^2-1)(1-t).
    m = chord_hessian_moments(p, 0.0, 1.0);
    const double f1_ref =
        oracle::simpson([](double t) { return (3.0 * t * t - 1.0) * t; }, 0.0, 1.0);
    const double f2_ref =
        oracle::simpson([](double t) { return (3.0 * t * t - 1.0) * (1.0 - t); }, 0.0, 1.0);
    CHECK(m.f1 == doctest::Approx(f1_ref).epsilon(1e-13));
    CHECK(m.f2 == doctest::Approx(f2_ref).epsilon(1e-13));
    CHECK(m.f1 == doctest::Approx(0.25).epsilon(1e-13));
    CHECK(m.f2 == doctest::Approx(-0.25).epsilon(1e-13));

    RngStream s(6, 0);
    for (int i = 0; i < 1000; ++i) {
        const double a = -5.0 + 10.0 * s.next_uniform();
        const double b = -5.0 + 10.0 * s.next_uniform();
        m = chord_hessian_moments(p, a, b);
        CHECK(m.f1 >= -0.5 - 1e-12);
        CHECK(m.f2 >= -0.5 - 1e-12);
        if (std::abs(b - a) > 1e-6) {
            const double slope =
                (potential_eval(p, b).grad - potential_eval(p, a).grad) / (b - a);
            CHECK(m.f1 + m.f2 == doctest::Approx(slope).epsilon(1e-12));
        }
    }
}

TEST_CASE("hamiltonians") {
    const ModelParams p = params_experiment();
    State s0(3);
    CHECK(hamiltonian_H0(p, s0) == doctest::Approx(0.0));
    CHECK(hamiltonian_H(p, s0) == doctest::Approx(0.0));

    const State s1(1.0, {1.0, 1.0, 1.0}, 1.0);
    CHECK(hamiltonian_H0(p, s1) == doctest::Approx(1.75).epsilon(1e-15));
    CHECK(hamiltonian_H(p, s1) == doctest::Approx(4.25).epsilon(1e-15));

    const State s2(1.0, {0.0, 0.0, 0.0}, -1.0);
    CHECK(hamiltonian_H(p, s2) == doctest::Approx(-2.25).epsilon(1e-15));

    RngStream s(7, 0);
    for (int i = 0; i < 200; ++i) {
        State r(3);
        for (auto& c : r.y) c = -3.0 + 6.0 * s.next_uniform();
        CHECK(hamiltonian_H(p, r) - hamiltonian_H0(p, r) ==
              doctest::Approx(0.5 * p.gamma * r.v() * r.x()).epsilon(1e-14));
    }
}

TEST_CASE("h_star") {
    CHECK(h_star(params_experiment()) == doctest::Approx(8.0 / 29.0).epsilon(1e-15));
    const ModelParams simple =
        make_model(1.0, {1.0}, {1.0}, make_potential({0, 0, 0, 0, 0.25}, 0.0));
    CHECK(h_star(simple) == doctest::Approx(1.6).epsilon(1e-15));

    // Decreasing in the coupling strengths.
    double prev = h_star(params_experiment());
    for (double lam = 3.0; lam <= 20.0; lam += 2.0) {
        const ModelParams p = make_model(5.0, {3.0, 3.0, 3.0}, {lam, lam, lam}, double_well());
        CHECK(h_star(p) <= prev + 1e-15);
        prev = h_star(p);
    }
}

TEST_CASE("model validation") {
    CHECK_THROWS(make_model(0.0, {1.0}, {1.0}, double_well()));
    CHECK_THROWS(make_model(1.0, {}, {}, double_well()));
    CHECK_THROWS(make_model(1.0, {1.0, 2.0}, {1.0}, double_well()));
    CHECK_THROWS(make_model(1.0, {-1.0}, {1.0}, double_well()));
    CHECK_THROWS(make_model(1.0, {1.0}, {0.0}, double_well()));
}

TEST_CASE("gibbs reference table") {
    const GibbsReference ref = make_gibbs_reference(double_well());
    CHECK(ref.tail_bound < 1e-10);
    CHECK(ref.cdf.front() == 0.0);
    CHECK(ref.cdf.back() == 1.0);
    for (size_t i = 1; i < ref.cdf.size(); ++i) CHECK(ref.cdf[i] > ref.cdf[i - 1]);

    // Z_x against the quadrature oracle.
    const PotentialSpec p = double_well();
    const double z_ref = oracle::simpson(
        [&](double x) { return std::exp(-potential_eval(p, x).value); }, -8.0, 8.0);
    CHECK(ref.normalizer == doctest::Approx(z_ref).epsilon(1e-10));
}

TEST_CASE("gibbs sampling moments and KS") {
    const ModelParams p = params_experiment();
    const GibbsReference ref = make_gibbs_reference(p.potential);
    const PotentialSpec& pot = p.potential;

    const double z_ref = oracle::simpson(
        [&](double x) { return std::exp(-potential_eval(pot, x).value); }, -8.0, 8.0);
    const double x2_ref =
        oracle::simpson([&](double x) { return x * x * std::exp(-potential_eval(pot, x).value); },
                        -8.0, 8.0) / z_ref;
    const double x4_ref = oracle::simpson(
        [&](double x) {
            return x * x * x * x * std::exp(-potential_eval(pot, x).value);
        }, -8.0, 8.0) / z_ref;

    RngStream s(31, 0, RngPurpose::gibbs);
    const int n = 1000000;
    double sx = 0.0, sx2 = 0.0, sv = 0.0, sv2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const State y = gibbs_sample(ref, p, s);
        sx += y.x();
        sx2 += y.x() * y.x();
        sv += y.v();
        sv2 += y.v() * y.v();
    }
    const double mean_x = sx / n, mean_x2 = sx2 / n, var_v = sv2 / n - (sv / n) * (sv / n);
    const double se_x = std::sqrt(x2_ref / n);
    const double se_x2 = std::sqrt((x4_ref - x2_ref * x2_ref) / n);
    CHECK(std::abs(mean_x) < 4.0 * se_x);              // even potential, symmetric marginal
    CHECK(std::abs(mean_x2 - x2_ref) < 4.0 * se_x2);   // quadrature oracle
    CHECK(std::abs(var_v - 1.0) < 4.0 * std::sqrt(2.0 / n));

    std::vector<double> vs(100000);
    RngStream s2(31, 1, RngPurpose::gibbs);
    for (auto& v : vs) v = gibbs_sample(ref, p, s2).v();
    // KS acceptance at level 1e-3: c = sqrt(-ln(alpha/2)/2).
    const double crit = std::sqrt(-std::log(0.5e-3) / 2.0) / std::sqrt(100000.0);
    CHECK(oracle::ks_statistic_normal(vs) < crit);
}

TEST_CASE("gibbs expectation oracle") {
    const ModelParams p = params_experiment();
    const GibbsReference ref = make_gibbs_reference(p.potential);

    RngStream s(77, 0, RngPurpose::gibbs);
    const auto one = gibbs_expectation(ref, p, [](const State&) { return 1.0; }, 10000, s);
    CHECK(one.mean == doctest::Approx(1.0));
    CHECK(one.std_error == doctest::Approx(0.0));

    RngStream s2(77, 1, RngPurpose::gibbs);
    const auto ev = gibbs_expectation(ref, p, [](const State& y) { return y.v(); }, 200000, s2);
    CHECK(std::abs(ev.mean) < 4.0 * ev.std_error);

    // cos |y|^2 cross-checked two ways: a second independent seed, and the
    // factorized characteristic-function quadrature.
    auto g = [](const State& y) {
        double n2 = 0.0;
        for (double c : y.y) n2 += c * c;
        return std::cos(n2);
    };
    RngStream sa(77, 2, RngPurpose::gibbs), sb(991, 3, RngPurpose::gibbs);
    const auto ea = gibbs_expectation(ref, p, g, 1000000, sa);
    const auto eb = gibbs_expectation(ref, p, g, 1000000, sb);
    CHECK(std::abs(ea.mean - eb.mean) <
          4.0 * std::sqrt(ea.std_error * ea.std_error + eb.std_error * eb.std_error));

    const PotentialSpec& pot = p.potential;
    const double z_ref = oracle::simpson(
        [&](double x) { return std::exp(-potential_eval(pot, x).value); }, -8.0, 8.0);
    using cplx = std::complex<double>;
    const cplx ix = oracle::simpson_complex(
        [&](double x) {
            return std::exp(cplx(-potential_eval(pot, x).value, x * x));
        }, -8.0, 8.0) / z_ref;
    // E exp(i v^2) = (1 - 2i)^{-1/2} for each of the k+1 unit Gaussians.
    const cplx gauss_cf = std::pow(cplx(1.0, -2.0), -0.5 * (p.k + 1));
    const double ref_cos = (gauss_cf * ix).real();
    CHECK(std::abs(ea.mean - ref_cos) < 4.0 * ea.std_error);

    RngStream s3(77, 4, RngPurpose::gibbs);
    CHECK_THROWS(gibbs_expectation(ref, p, g, 100, s3));  // below the sample floor
    RngStream s4(77, 5, RngPurpose::gibbs);
    CHECK_THROWS(gibbs_expectation(
        ref, p, [](const State&) { return std::nan(""); }, 10000, s4));
}
