#include <cmath>
#include <limits>

#include "doctest.h"
#include "lnared/analysis.hpp"

using namespace lnared;

namespace {

SingularPerturbedLNA phospho_sp() {
    const auto net = build_example_phospho(PhosphoParams{});
    return transform_to_sp(assemble_lna(net), phospho_transform(), net);
}

Vec vec2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

OriginalMomentState slow_state(double x, double m, double M) {
    OriginalMomentState s;
    s.x = Vec::Constant(1, x);
    s.m_x = Vec::Constant(1, m);
    s.M_xx = Mat::Constant(1, 1, M);
    return s;
}

ReducedMomentState red_state(double x, double m, double M) {
    ReducedMomentState s;
    s.xbar = Vec::Constant(1, x);
    s.m_x = Vec::Constant(1, m);
    s.M_xx = Mat::Constant(1, 1, M);
    return s;
}

} // namespace

TEST_SUITE("analysis") {

    TEST_CASE("log-log fit recovers an exact power law") {
        std::vector<std::pair<double, double>> pairs;
        for (const double eps : {0.1, 0.05, 0.02, 0.01}) {
            pairs.emplace_back(eps, 3.0 * std::sqrt(eps));
        }
        const auto fit = fit_loglog_slope(pairs);
        CHECK_FALSE(fit.degenerate);
        CHECK(fit.slope == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(fit.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-12));
        CHECK(fit.max_residual < 1e-12);
    }

    TEST_CASE("log-log fit tolerates a few percent of jitter") {
        const std::vector<double> eps = {0.1, 0.05, 0.02, 0.01};
        const std::vector<double> wiggle = {1.05, 0.95, 1.03, 0.98};
        std::vector<std::pair<double, double>> pairs;
        for (size_t i = 0; i < eps.size(); ++i) {
            pairs.emplace_back(eps[i], 0.7 * eps[i] * wiggle[i]);
        }
        const auto fit = fit_loglog_slope(pairs);
        CHECK(fit.slope > 0.9);
        CHECK(fit.slope < 1.1);
        CHECK(fit.max_residual < 0.1);
    }

    TEST_CASE("log-log fit rejects unusable inputs") {
        CHECK_THROWS_AS(fit_loglog_slope({{0.1, 1.0}}), ValidationError);
        CHECK_THROWS_AS(fit_loglog_slope({{0.1, 1.0}, {-0.05, 0.5}}), ValidationError);
        CHECK_THROWS_AS(fit_loglog_slope({{0.1, 1.0}, {0.05, 0.0}}), ValidationError);
        CHECK_THROWS_AS(fit_loglog_slope({{0.1, 1.0}, {0.05, -2.0}}), ValidationError);
        CHECK_THROWS_AS(fit_loglog_slope({{0.1, 1.0}, {0.1, 2.0}}), ValidationError);
    }

    TEST_CASE("moment error takes the sup over the grid") {
        OriginalMomentTrajectory o;
        o.t = {0.0, 1.0};
        o.states = {slow_state(1.0, 2.0, 4.0), slow_state(2.0, 0.5, 5.0)};
        ReducedMomentTrajectory r;
        r.t = {0.0, 1.0};
        r.states = {red_state(0.9, 1.8, 3.0), red_state(2.3, 0.45, 5.5)};

        const auto err = moment_error(o, r);
        CHECK(err.e_x == doctest::Approx(0.3).epsilon(1e-12));
        CHECK(err.e_m == doctest::Approx(0.2).epsilon(1e-12));
        CHECK(err.e_M == doctest::Approx(1.0).epsilon(1e-12));

        ReducedMomentTrajectory shifted = r;
        shifted.t[1] = 1.5;
        CHECK_THROWS_AS(moment_error(o, shifted), ValidationError);
        shifted.t = {0.0};
        shifted.states.resize(1);
        CHECK_THROWS_AS(moment_error(o, shifted), ValidationError);
    }

    TEST_CASE("epsilon sweep reports shrinking errors with a near-linear slope") {
        const auto sp = phospho_sp();
        SweepSetup setup;
        setup.x0 = Vec::Zero(2);
        setup.z0 = Vec::Zero(1);
        setup.psi_x0 = vec2(1.0, 1.0);
        setup.psi_z0 = Vec::Constant(1, 0.5);
        setup.t1 = 10.0;
        setup.t_grid = {0.0, 2.0, 4.0, 6.0, 8.0, 10.0};

        const auto res = epsilon_sweep(sp, {0.1, 0.05}, setup);
        REQUIRE(res.points.size() == 2);
        CHECK(res.points[0].eps == 0.1);
        CHECK(res.points[1].err.e_x < res.points[0].err.e_x);
        CHECK(res.points[1].err.e_m < res.points[0].err.e_m);
        CHECK(res.points[1].err.e_M < res.points[0].err.e_M);
        for (const auto* fit : {&res.fit_x, &res.fit_m, &res.fit_M}) {
            CHECK_FALSE(fit->degenerate);
            CHECK(fit->slope > 0.4);
            CHECK(fit->slope < 1.6);
        }

        CHECK_THROWS_AS(epsilon_sweep(sp, {0.05, 0.1}, setup), ValidationError);
        CHECK_THROWS_AS(epsilon_sweep(sp, {0.1}, setup), ValidationError);
    }

    TEST_CASE("zero fluctuation means make the first-moment family degenerate") {
        const auto sp = phospho_sp();
        SweepSetup setup;
        setup.x0 = Vec::Zero(2);
        setup.z0 = Vec::Zero(1);
        setup.psi_x0 = Vec::Zero(2);
        setup.psi_z0 = Vec::Zero(1);
        setup.t1 = 5.0;
        setup.t_grid = {0.0, 2.5, 5.0};

        const auto res = epsilon_sweep(sp, {0.1, 0.05}, setup);
        for (const auto& pt : res.points) {
            CHECK(pt.err.e_m == 0.0); // exactly zero, not merely small
        }
        CHECK(res.fit_m.degenerate);
        CHECK_FALSE(res.fit_M.degenerate);
        CHECK(res.fit_M.slope > 0.4);
    }

    TEST_CASE("gaussian distance handles the classical special cases") {
        const Vec m1 = vec2(1.0, 0.0), m2 = vec2(4.0, 4.0);
        // Point masses: the distance is the mean separation.
        CHECK(gaussian_distance(m1, m1 * m1.transpose(), m2, m2 * m2.transpose()) ==
              doctest::Approx(5.0).epsilon(1e-7));
        CHECK(gaussian_distance(m1, m1 * m1.transpose(), m1, m1 * m1.transpose()) < 1e-7);

        // Scalar zero-mean case: |sigma1 - sigma2|.
        const Vec z1 = Vec::Zero(1);
        CHECK(gaussian_distance(z1, Mat::Constant(1, 1, 4.0), z1, Mat::Constant(1, 1, 0.25)) ==
              doctest::Approx(1.5).epsilon(1e-9));

        // Commuting covariances: sqrt of the summed squared sigma differences.
        const Vec z2 = Vec::Zero(2);
        Mat C1(2, 2), C2(2, 2);
        C1 << 1, 0, 0, 4;
        C2 << 9, 0, 0, 16;
        CHECK(gaussian_distance(z2, C1, z2, C2) ==
              doctest::Approx(2.0 * std::sqrt(2.0)).epsilon(1e-9));
        CHECK(gaussian_distance(z2, C1, z2, C2) ==
              doctest::Approx(gaussian_distance(z2, C2, z2, C1)).epsilon(1e-9));

        // Roundoff-negative eigenvalues are clamped, genuine ones rejected.
        Mat tiny(2, 2);
        tiny << 1.0, 0.0, 0.0, -1e-12;
        CHECK(gaussian_distance(z2, tiny, z2, tiny) < 1e-5);
        CHECK_THROWS_AS(gaussian_distance(z2, -Mat::Identity(2, 2), z2, C1), ValidationError);
    }

    TEST_CASE("fluctuation laws converge in distribution as eps shrinks") {
        const auto sp = phospho_sp();
        auto red = reduce(sp, Vec::Zero(2), Vec::Zero(1));
        const auto init = OriginalMomentState::deterministic(Vec::Zero(2), Vec::Zero(1),
                                                             vec2(1, 1), Vec::Constant(1, 0.5));
        const std::vector<double> t_out = {10.0};
        const auto rt = integrate_reduced_moments(
            red, ReducedMomentState::deterministic(Vec::Zero(2), vec2(1, 1)), 0.0, 10.0, t_out);

        double prev = std::numeric_limits<double>::infinity();
        for (const double eps : {0.1, 0.02}) {
            const auto ot = integrate_original_moments(sp, init, 0.0, 10.0, t_out, eps);
            const double d = gaussian_distance(ot.states[0].m_x, ot.states[0].M_xx,
                                               rt.states[0].m_x, rt.states[0].M_xx);
            CHECK(d < prev);
            prev = d;
        }
        CHECK(prev < 0.2);
    }
}
