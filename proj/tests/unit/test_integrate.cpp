#include <cmath>

#include "doctest.h"
#include "lnared/integrate.hpp"

using namespace lnared;

TEST_SUITE("integrate") {

    TEST_CASE("relaxation moment equation hits the closed form") {
        // dM/dt = -2M + 2, M(0) = 0  =>  M(t) = 1 - exp(-2t).
        const auto rhs = [](double, const Vec& y, Vec& dy) { dy[0] = -2.0 * y[0] + 2.0; };
        IntegrateOptions opt;
        opt.rtol = 1e-10;
        opt.atol = 1e-12;
        const auto traj = integrate(rhs, Vec::Zero(1), 0.0, 1.0, {0.25, 1.0}, opt);
        REQUIRE(traj.t.size() == 2);
        CHECK(std::abs(traj.y[0][0] - (1.0 - std::exp(-0.5))) < 1e-8);
        CHECK(std::abs(traj.y[1][0] - (1.0 - std::exp(-2.0))) < 1e-8);
    }

    TEST_CASE("error decreases with the tolerance") {
        const auto rhs = [](double t, const Vec& y, Vec& dy) { dy[0] = std::cos(t) * y[0]; };
        Vec y0(1);
        y0[0] = 1.0;
        const double exact = std::exp(std::sin(10.0));
        double prev = 1.0;
        for (const double rtol : {1e-4, 1e-7, 1e-10}) {
            IntegrateOptions opt;
            opt.rtol = rtol;
            opt.atol = rtol * 1e-2;
            const auto traj = integrate(rhs, y0, 0.0, 10.0, {10.0}, opt);
            const double err = std::abs(traj.y[0][0] - exact) / exact;
            CHECK(err < prev);
            prev = err;
        }
        CHECK(prev < 1e-9);
    }

    TEST_CASE("requested output times are hit exactly") {
        const auto rhs = [](double, const Vec& y, Vec& dy) { dy = -y; };
        Vec y0(2);
        y0 << 1.0, 2.0;
        const std::vector<double> want = {0.0, 0.1, 1.0 / 3.0, 0.7, 2.0};
        const auto traj = integrate(rhs, y0, 0.0, 2.0, want);
        REQUIRE(traj.t.size() == want.size());
        for (size_t i = 0; i < want.size(); ++i) CHECK(traj.t[i] == want[i]);
        CHECK(traj.y[0][0] == 1.0); // t0 sample is the initial state itself
    }

    TEST_CASE("zero right-hand side preserves the state bitwise") {
        const auto rhs = [](double, const Vec&, Vec& dy) { dy.setZero(); };
        Vec y0(3);
        y0 << 0.1, -2.5, 1e8;
        const auto traj = integrate(rhs, y0, 0.0, 5.0, {1.0, 5.0});
        for (const auto& y : traj.y) CHECK((y - y0).norm() == 0.0);
    }

    TEST_CASE("post_accept hook is applied to reported states") {
        const auto rhs = [](double, const Vec&, Vec& dy) {
            dy[0] = 1.0;
            dy[1] = 0.0;
        };
        const auto mirror = [](Vec& y) { y[1] = y[0]; };
        const auto traj = integrate(rhs, Vec::Zero(2), 0.0, 1.0, {0.5, 1.0}, {}, mirror);
        for (const auto& y : traj.y) CHECK(y[1] == y[0]);
        CHECK(traj.y[1][0] == doctest::Approx(1.0).epsilon(1e-12));
    }

    TEST_CASE("invalid setups are rejected") {
        const auto rhs = [](double, const Vec&, Vec& dy) { dy.setZero(); };
        const Vec y0 = Vec::Zero(1);
        IntegrateOptions bad;
        bad.rtol = 0.0;
        CHECK_THROWS_AS(integrate(rhs, y0, 0.0, 1.0, {1.0}, bad), ConfigError);
        CHECK_THROWS_AS(integrate(rhs, y0, 1.0, 1.0, {1.0}), ConfigError);
        CHECK_THROWS_AS(integrate(rhs, y0, 0.0, 1.0, {2.0}), ConfigError);
        CHECK_THROWS_AS(integrate(rhs, y0, 0.0, 1.0, {0.5, 0.5}), ConfigError);
        CHECK_THROWS_AS(integrate(rhs, y0, 0.0, 1.0, {0.7, 0.4}), ConfigError);
    }

    TEST_CASE("step underflow raises a stiffness error") {
        // A jump no smooth step can cross: the error estimate stays O(1)
        // relative to tolerance at every h, so the controller underflows.
        const auto rhs = [](double t, const Vec&, Vec& dy) {
            dy[0] = t <= 0.5 ? 0.0 : 1e300;
        };
        CHECK_THROWS_AS(integrate(rhs, Vec::Zero(1), 0.0, 1.0, {1.0}), StiffnessError);
    }
}
