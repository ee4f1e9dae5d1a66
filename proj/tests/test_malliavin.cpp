#include <cmath>

#include "doctest.h"
#include "gle/integrator.hpp"
#include "gle/linalg.hpp"
#include "gle/malliavin.hpp"
#include "gle/model.hpp"
#include "support.hpp"

using namespace gle;

namespace {

ModelParams params_experiment() {
    return make_model(5.0, {3.0, 3.0, 3.0}, {2.0, 2.0, 2.0}, double_well());
}

State random_state(RngStream& s, int k, double lo = -3.0, double hi = 3.0) {
    State r(k);
    for (auto& c : r.y) c = lo + (hi - lo) * s.next_uniform();
    return r;
}

Mat fd_jacobian(const std::function<std::vector<double>(const std::vector<double>&)>& f,
                const std::vector<double>& at, double step = 1e-6) {
    const auto base = f(at);
    Mat j(static_cast<int>(base.size()), static_cast<int>(at.size()));
    for (size_t c = 0; c < at.size(); ++c) {
        auto hi = at, lo = at;
        hi[c] += step;
        lo[c] -= step;
        const auto fh = f(hi), fl = f(lo);
        for (size_t r = 0; r < base.size(); ++r)
            j(static_cast<int>(r), static_cast<int>(c)) = (fh[r] - fl[r]) / (2.0 * step);
    }
    return j;
}

}  // namespace

TEST_CASE("jacobian blocks match finite differences of the residual") {
    const ModelParams p = params_experiment();
    const StepperConfig cfg = make_stepper(p, 0.125);
    RngStream s(41, 0);
    for (int rep = 0; rep < 50; ++rep) {
        const State ybar = random_state(s, 3);
        const State yn = random_state(s, 3);
        const StepJacobians jac = jacobians(ybar, yn, cfg);

        const Mat fd_bar = fd_jacobian(
            [&](const std::vector<double>& v) {
                State q(3);
                q.y = v;
                return avf_residual(q, yn, cfg);
            },
            ybar.y);
        const Mat fd_n = fd_jacobian(
            [&](const std::vector<double>& v) {
                State q(3);
                q.y = v;
                return avf_residual(ybar, q, cfg);
            },
            yn.y);
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 5; ++j) {
                CHECK(jac.dG_dYbar(i, j) ==
                      doctest::Approx(fd_bar(i, j)).epsilon(1e-6).scale(1.0));
                CHECK(jac.dG_dYn(i, j) ==
                      doctest::Approx(fd_n(i, j)).epsilon(1e-6).scale(1.0));
            }
    }
}

TEST_CASE("closed-form determinant equals LU determinant") {
    const ModelParams p = params_experiment();
    RngStream s(43, 0);
    double worst = 0.0;
    for (int rep = 0; rep < 10000; ++rep) {
        const double h = 0.95 * h_star(p) * s.next_uniform() + 1e-4;
        const StepperConfig cfg = make_stepper(p, h);
        const State ybar = random_state(s, 3);
        const State yn = random_state(s, 3);
        const StepJacobians jac = jacobians(ybar, yn, cfg);
        const double lu = determinant_lu(jac.dG_dYbar);
        worst = std::max(worst, std::abs(jac.det_dG_dYbar - lu) / std::abs(lu));
        CHECK(jac.det_dG_dYbar >= 0.5);
    }
    CHECK(worst <= 1e-12);
}

TEST_CASE("determinant worked value at unit endpoints") {
    // h = 0.1, experiment parameters, both endpoints (1,...,1): f1 = 1, so
    // det = 1 + 0.01 (3 + 1/2 - 25/16) = 1.019375, confirmed by LU below.
    const ModelParams p = params_experiment();
    const StepperConfig cfg = make_stepper(p, 0.1);
    const State ones(1.0, {1.0, 1.0, 1.0}, 1.0);
    const StepJacobians jac = jacobians(ones, ones, cfg);
    CHECK(jac.f1 == doctest::Approx(1.0).epsilon(1e-14));
    const double lu = determinant_lu(jac.dG_dYbar);
    CHECK(jac.det_dG_dYbar == doctest::Approx(lu).epsilon(1e-13));
    CHECK(jac.det_dG_dYbar == doctest::Approx(1.019375).epsilon(1e-13));
}

TEST_CASE("adjugate identity") {
    const ModelParams p = params_experiment();
    RngStream s(47, 0);
    for (int rep = 0; rep < 200; ++rep) {
        const double h = 0.95 * h_star(p) * s.next_uniform() + 1e-4;
        const StepperConfig cfg = make_stepper(p, h);
        const State ybar = random_state(s, 3);
        const State yn = random_state(s, 3);
        const StepJacobians jac = jacobians(ybar, yn, cfg);
        const Mat adj = adjugate_dG_dYbar(cfg, jac.f1);
        const Mat prod = jac.dG_dYbar * adj;
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 5; ++j)
                CHECK(std::abs(prod(i, j) - (i == j ? jac.det_dG_dYbar : 0.0)) <= 1e-10);
    }
}

TEST_CASE("transfer matrix matches finite differences of the frozen-noise step") {
    const ModelParams p = params_experiment();
    const StepperConfig cfg = make_stepper(p, 0.125);
    RngStream s(53, 0);
    NoiseBlock nb = sample_noise(cfg, s);
    for (int rep = 0; rep < 100; ++rep) {
        const State yn = random_state(s, 3);
        const StepRecord rec = split_step(yn, nb, cfg);
        REQUIRE(rec.ok);
        const StepJacobians jac = jacobians(rec.y_bar, yn, cfg);
        const Mat fd = fd_jacobian(
            [&](const std::vector<double>& v) {
                State q(3);
                q.y = v;
                StepperConfig tight = cfg;
                tight.opts.newton_tol = 1e-14;
                return split_step(q, nb, tight).y_next.y;
            },
            yn.y, 1e-5);
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 5; ++j)
                CHECK(std::abs(jac.A(i, j) - fd(i, j)) < 1e-6);
    }
}

TEST_CASE("transfer matrix tends to identity with h") {
    const ModelParams p = params_experiment();
    const State ones(1.0, {1.0, 1.0, 1.0}, 1.0);
    for (double h : {1e-4, 1e-6, 1e-8}) {
        const StepperConfig cfg = make_stepper(p, h);
        const StepJacobians jac = jacobians(ones, ones, cfg);
        CHECK(max_abs(jac.A - Mat::identity(5)) < 20.0 * h);
        CHECK(max_abs(jac.dG_dYbar - Mat::identity(5)) < 20.0 * h);
        CHECK(max_abs(jac.M - Mat::identity(5)) < 20.0 * h);
    }
}

TEST_CASE("derivative propagation") {
    const ModelParams p = params_experiment();
    const StepperConfig cfg = make_stepper(p, 0.125);
    RngStream s(59, 0);
    const State ybar = random_state(s, 3), yn = random_state(s, 3);
    const StepJacobians jac = jacobians(ybar, yn, cfg);

    const Mat zero(5, 4);
    CHECK(max_abs(propagate_derivative(zero, jac)) == 0.0);

    // Identity-block columns come back as columns of A.
    Mat idblock(5, 5);
    for (int i = 0; i < 5; ++i) idblock(i, i) = 1.0;
    const Mat cols = propagate_derivative(idblock, jac);
    CHECK(max_abs(cols - jac.A) == 0.0);
}

TEST_CASE("fresh derivative structure") {
    const ModelParams p = params_experiment();
    const StepperConfig cfg = make_stepper(p, 0.125);
    const Mat d = fresh_derivative(cfg);
    CHECK(d.rows() == 5);
    CHECK(d.cols() == 4);
    CHECK(d(0, 0) == doctest::Approx(std::exp(-0.3125) * std::sqrt(10.0)).epsilon(1e-14));
    for (int j = 0; j < 4; ++j) {
        CHECK(d(4, j) == 0.0);  // position row receives no fresh noise
        int nonzero = 0;
        for (int i = 0; i < 5; ++i) nonzero += d(i, j) != 0.0;
        CHECK(nonzero == 1);
    }
    for (int l = 0; l < 3; ++l)
        CHECK(d(l + 1, l + 1) ==
              doctest::Approx(std::exp(-0.375) * std::sqrt(6.0)).epsilon(1e-14));
}

TEST_CASE("covariance recursion") {
    const ModelParams p = params_experiment();
    const StepperConfig cfg = make_stepper(p, 0.125);

    // Base case: one step from zero covariance gives the fresh diagonal.
    const Mat fresh = covariance_fresh(cfg);
    CHECK(fresh(0, 0) == doctest::Approx(2.0 - 2.0 * std::exp(-0.625)).epsilon(1e-14));
    for (int l = 0; l < 3; ++l)
        CHECK(fresh(l + 1, l + 1) == doctest::Approx(1.0 - std::exp(-0.75)).epsilon(1e-14));
    CHECK(fresh(4, 4) == 0.0);

    MalliavinCovariance st = covariance_init(cfg);
    RngStream s(61, 0);
    State y(1.0, {1.0, 1.0, 1.0}, 1.0);
    // Two steps along a simulated trajectory make the covariance positive
    // definite; it stays that way.
    for (int n = 0; n < 16; ++n) {
        const NoiseBlock nb = sample_noise(cfg, s);
        const StepRecord rec = split_step(y, nb, cfg);
        REQUIRE(rec.ok);
        const StepJacobians jac = jacobians(rec.y_bar, y, cfg);
        st = covariance_step(st, jac, cfg);
        if (n == 0) {
            for (int i = 0; i < 5; ++i)
                for (int j = 0; j < 5; ++j)
                    CHECK(st.gamma(i, j) == doctest::Approx(fresh(i, j)).epsilon(1e-14));
        }
        CHECK(max_abs_sym_defect(st.gamma) <= 1e-12 * std::max(1.0, max_abs(st.gamma)));
        if (st.n >= 2) CHECK(min_eigenvalue(st.gamma) > 0.0);
        y = rec.y_next;
    }
}
