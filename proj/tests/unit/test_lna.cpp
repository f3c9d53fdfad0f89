#include <cmath>

#include "doctest.h"
#include "lnared/lna.hpp"

using namespace lnared;

namespace {

Vec vec2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

Vec vec1(double a) {
    Vec v(1);
    v << a;
    return v;
}

// Central finite difference of one block column, used to cross-check every
// analytic Jacobian block.
template <typename F>
Mat fd_jacobian(F f, const Vec& at) {
    const Vec f0 = f(at);
    Mat J(f0.size(), at.size());
    for (Eigen::Index j = 0; j < at.size(); ++j) {
        const double h = 1e-6 * std::max(1.0, std::abs(at[j]));
        Vec p = at, m = at;
        p[j] += h;
        m[j] -= h;
        J.col(j) = (f(p) - f(m)) / (2.0 * h);
    }
    return J;
}

} // namespace

TEST_SUITE("lna") {

    TEST_CASE("drift, jacobian and diffusion of the example") {
        const auto net = build_example_phospho(PhosphoParams{});
        const auto lna = assemble_lna(net);

        CHECK((lna.drift(Vec::Zero(3), 0.0) - (Vec(3) << 2, 0, 0).finished()).norm() < 1e-14);

        // y = (x*, c, g) = (10, 5, 2), eps = 0.1: fast rates scaled by 10.
        const Vec y = (Vec(3) << 10, 5, 2).finished();
        const Vec f = lna.drift(y, 0.0);
        CHECK(f[0] == doctest::Approx(1.85 - 2.0 - 19.0 + 10.0));
        CHECK(f[1] == doctest::Approx(19.0 - 10.0));
        CHECK(f[2] == doctest::Approx(0.5 - 0.2));

        const Mat J = lna.jacobian(y, 0.0);
        const Mat J_fd = fd_jacobian([&](const Vec& yy) { return lna.drift(yy, 0.0); }, y);
        CHECK((J - J_fd).cwiseAbs().maxCoeff() < 1e-6 * J.cwiseAbs().maxCoeff());

        const Mat S = lna.diffusion(y, 0.0);
        REQUIRE(S.cols() == 6);
        CHECK(S(0, 0) == doctest::Approx(std::sqrt(1.85)));
        CHECK(S(0, 2) == doctest::Approx(-std::sqrt(19.0)));
        CHECK(S(1, 3) == doctest::Approx(-std::sqrt(10.0)));
        CHECK(S(2, 5) == doctest::Approx(-std::sqrt(0.2)));
    }

    TEST_CASE("negative propensities clamp near zero and throw beyond") {
        ReactionNetwork net;
        net.species_names = {"a"};
        net.reactions.push_back({"tiny", vec1(1.0), Timescale::slow,
                                 std::make_shared<GenericRate>([](const Vec&, double) {
                                     return -5e-13; // roundoff-scale negative
                                 })});
        const auto lna = assemble_lna(net);
        CHECK(lna.drift(vec1(0.0), 0.0)[0] == 0.0);

        net.reactions[0].rate = std::make_shared<GenericRate>(
            [](const Vec&, double) { return -1e-3; });
        const auto bad = assemble_lna(net);
        CHECK_THROWS_AS(bad.drift(vec1(0.0), 0.0), DomainError);
    }

    TEST_CASE("transform round trip and structural checks") {
        const auto net = build_example_phospho(PhosphoParams{});
        const auto lna = assemble_lna(net);
        const auto sp = transform_to_sp(lna, phospho_transform(), net);
        CHECK(sp.n_s() == 2);
        CHECK(sp.n_f() == 1);
        CHECK(sp.m_s() == 4);
        CHECK(sp.m_f() == 2);

        const Vec y = (Vec(3) << 10, 5, 2).finished();
        const auto [x, z] = sp.from_original(y);
        CHECK((x - vec2(15, 2)).norm() < 1e-14);
        CHECK((z - vec1(5)).norm() < 1e-14);
        CHECK((sp.to_original(x, z) - y).norm() < 1e-12);

        // Picking x* itself as a slow coordinate breaks A_x v = 0 for binding.
        TransformMatrices bad = phospho_transform();
        bad.A_x.row(0) << 1, 0, 0;
        CHECK_THROWS_AS(transform_to_sp(lna, bad, net), ValidationError);

        TransformMatrices singular = phospho_transform();
        singular.A_z = singular.A_x.row(0) * 2.0; // dependent rows
        CHECK_THROWS_AS(transform_to_sp(lna, singular, net), TransformError);
    }

    TEST_CASE("block evaluation matches hand-derived formulas") {
        const auto net = build_example_phospho(PhosphoParams{});
        const auto sp = transform_to_sp(assemble_lna(net), phospho_transform(), net);
        const Vec x = vec2(15, 2);
        const Vec z = vec1(5);
        const double eps = 0.1;
        const auto b = sp.blocks(x, z, 0.0, eps);

        // Slow drift from slow reactions only: (a1 - a2, a5 - a6).
        CHECK(b.f_x[0] == doctest::Approx(1.85 - 2.0));
        CHECK(b.f_x[1] == doctest::Approx(0.5 - 0.2));
        // Fast drift: binding minus unbinding, unscaled.
        CHECK(b.f_z[0] == doctest::Approx(1.9 - 1.0));

        CHECK(b.A1(0, 0) == doctest::Approx(-0.21));
        CHECK(b.A1(0, 1) == doctest::Approx(0.0));
        CHECK(b.A1(1, 1) == doctest::Approx(-0.1));
        CHECK(b.A2(0, 0) == doctest::Approx(0.2));
        CHECK(b.A2(1, 0) == doctest::Approx(0.1));
        CHECK(b.B1(0, 0) == doctest::Approx(0.19));
        CHECK(b.B1(0, 1) == doctest::Approx(0.0));
        CHECK(b.B2(0, 0) == doctest::Approx(-0.41));

        REQUIRE(b.sigma_x.rows() == 2);
        REQUIRE(b.sigma_x.cols() == 4);
        CHECK(b.sigma_x(0, 0) == doctest::Approx(std::sqrt(1.85)));
        CHECK(b.sigma_x(0, 1) == doctest::Approx(-std::sqrt(2.0)));
        CHECK(b.sigma_x(1, 2) == doctest::Approx(std::sqrt(0.5)));
        CHECK(b.sigma_x(1, 3) == doctest::Approx(-std::sqrt(0.2)));

        REQUIRE(b.sigma_z.rows() == 1);
        REQUIRE(b.sigma_z.cols() == 6);
        CHECK(b.sigma_z.leftCols(4).norm() == 0.0); // no slow reaction moves c
        CHECK(b.sigma_z(0, 4) == doctest::Approx(std::sqrt(eps * 1.9)));
        CHECK(b.sigma_z(0, 5) == doctest::Approx(-std::sqrt(eps * 1.0)));
    }

    TEST_CASE("jacobian blocks agree with finite differences") {
        const auto net = build_example_phospho(PhosphoParams{});
        const auto sp = transform_to_sp(assemble_lna(net), phospho_transform(), net);
        const Vec x = vec2(40, 7);
        const Vec z = vec1(12);
        const double t = 0.0;
        for (const double eps : {0.1, 0.02}) {
            const auto b = sp.blocks(x, z, t, eps);
            const Mat A1_fd =
                fd_jacobian([&](const Vec& xx) { return sp.f_x(xx, z, t); }, x);
            const Mat A2_fd =
                fd_jacobian([&](const Vec& zz) { return sp.f_x(x, zz, t); }, z);
            const Mat B1_fd =
                fd_jacobian([&](const Vec& xx) { return sp.f_z(xx, z, t, eps); }, x);
            const Mat B2_fd =
                fd_jacobian([&](const Vec& zz) { return sp.f_z(x, zz, t, eps); }, z);
            CHECK((b.A1 - A1_fd).cwiseAbs().maxCoeff() < 1e-6 * (1.0 + b.A1.norm()));
            CHECK((b.A2 - A2_fd).cwiseAbs().maxCoeff() < 1e-6 * (1.0 + b.A2.norm()));
            CHECK((b.B1 - B1_fd).cwiseAbs().maxCoeff() < 1e-6 * (1.0 + b.B1.norm()));
            CHECK((b.B2 - B2_fd).cwiseAbs().maxCoeff() < 1e-6 * (1.0 + b.B2.norm()));
        }
    }

    TEST_CASE("fast noise vanishes with eps") {
        const auto net = build_example_phospho(PhosphoParams{});
        const auto sp = transform_to_sp(assemble_lna(net), phospho_transform(), net);
        const Vec x = vec2(15, 2);
        const Vec z = vec1(5);
        CHECK(sp.sigma_z(x, z, 0.0, 0.0).norm() == 0.0);
        // sigma_z sigma_z^T / eps approaches a finite limit as eps -> 0.
        const Mat da = sp.sigma_z(x, z, 0.0, 1e-2) * sp.sigma_z(x, z, 0.0, 1e-2).transpose() / 1e-2;
        const Mat db = sp.sigma_z(x, z, 0.0, 1e-4) * sp.sigma_z(x, z, 0.0, 1e-4).transpose() / 1e-4;
        CHECK((da - db).norm() < 1e-10 * (1.0 + db.norm()));
    }

    TEST_CASE("per-call eps overrides the stored default") {
        const auto net = build_example_phospho(PhosphoParams{});
        auto sp = transform_to_sp(assemble_lna(net), phospho_transform(), net);
        const Vec x = vec2(15, 2);
        const Vec z = vec1(5);
        const auto def_eps = sp.blocks(x, z, 0.0); // uses the network epsilon (0.1)
        CHECK(def_eps.sigma_z(0, 4) == doctest::Approx(std::sqrt(0.1 * 1.9)));
        sp.set_epsilon(0.05);
        CHECK(sp.blocks(x, z, 0.0).sigma_z(0, 4) == doctest::Approx(std::sqrt(0.05 * 1.9)));
        CHECK_THROWS_AS(sp.set_epsilon(0.0), ValidationError);
    }
}
