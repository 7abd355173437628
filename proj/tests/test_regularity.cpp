#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "cdmfg/errors.hpp"
#include "cdmfg/hjb_solver.hpp"
#include "cdmfg/regularity_diagnostics.hpp"

#include <cmath>
#include <numbers>

using namespace cdmfg;

namespace {

constexpr double kPi = std::numbers::pi;

TimeField static_field(const GridSpec& g, const std::function<double(Point)>& f) {
    TimeField u(g);
    for (int n = 0; n < g.levels(); ++n)
        for (int i = 0; i < g.nodes(); ++i) u(n, i) = f(g.coords(i));
    return u;
}

TimeField model_a_solve(int nx, double T) {
    GridSpec g{1, 1.0, nx, 1, T};
    g.nt = minimal_stable_nt(g, 2.0, 1.0);
    ModelSpec model = model_a_reference(1);
    model.horizon = T;
    std::vector<double> G(g.nodes());
    for (int i = 0; i < g.nodes(); ++i) G[i] = 0.3 * std::cos(2 * kPi * g.coords(i)[0]) + 0.1 * std::sin(4 * kPi * g.coords(i)[0]);
    return solve_hjb(model, TimeField(g), G, g);
}

}  // namespace

TEST_CASE("constants have zero constants") {
    const GridSpec g{2, 1.0, 16, 2, 1.0};
    const TimeField u(g, 3.0);
    CHECK(lipschitz_constant(u) == 0.0);
    CHECK(semiconcavity_constant(u) == 0.0);
}

TEST_CASE("closed forms on trigonometric fields") {
    const GridSpec g{1, 1.0, 128, 1, 1.0};
    const auto u = static_field(g, [](Point x) { return std::cos(2 * kPi * x[0]); });
    CHECK(lipschitz_constant(u) == doctest::Approx(2 * kPi).epsilon(0.02));
    CHECK(semiconcavity_constant(u) == doctest::Approx(4 * kPi * kPi).epsilon(0.02));
    const GridSpec g2{2, 2.0, 128, 1, 1.0};
    const auto v = static_field(g2, [](Point x) { return std::cos(kPi * x[0]) + 0.5 * std::cos(kPi * x[1]); });
    CHECK(lipschitz_constant(v) == doctest::Approx(kPi).epsilon(0.02));
    CHECK(semiconcavity_constant(v) == doctest::Approx(kPi * kPi).epsilon(0.02));
}

TEST_CASE("quadratics on the torus") {
    const GridSpec g{1, 1.0, 64, 1, 1.0};
    // the convex bowl has its concave kink on the seam, so the signed max is the interior value
    const auto bowl = static_field(g, [](Point x) { return (x[0] - 0.5) * (x[0] - 0.5); });
    CHECK(semiconcavity_constant(bowl) == doctest::Approx(2.0).epsilon(1e-9));
    // the cap's periodic extension has a convex kink at the seam
    const auto cap = static_field(g, [](Point x) { return -(x[0] - 0.5) * (x[0] - 0.5); });
    CHECK(semiconcavity_constant(cap) == doctest::Approx(2.0 / g.dx() - 2.0).epsilon(1e-9));
    auto v = cap.level(0);
    for (int i = 1; i < g.nx; ++i) {
        const double d2 = (v[g.neighbor(i, 0, 1)] + v[g.neighbor(i, 0, -1)] - 2 * v[i]) / (g.dx() * g.dx());
        CHECK(d2 == doctest::Approx(-2.0).epsilon(1e-9));
    }
}

TEST_CASE("three-point inequality") {
    const GridSpec g{1, 1.0, 64, 1, 1.0};
    const auto u = static_field(g, [](Point x) { return std::cos(2 * kPi * x[0]); });
    const double h = 2 * g.dx();
    SUBCASE("coincident points") {
        const PointTriple t{{0.25, 0}, {0.25, 0}, {0.25, 0}};
        CHECK(three_point_check(u, std::span(&t, 1), 0.1) == 0.0);
    }
    SUBCASE("symmetric triple reduces to the second difference") {
        const double z = 0.5;
        const PointTriple t{{z + h, 0}, {z - h, 0}, {z, 0}};
        const int iz = 32, ih = 2;
        const double d2 = u(0, iz + ih) + u(0, iz - ih) - 2 * u(0, iz);
        // delta + 2 h^4 / delta = 3 h^2
        const double expect = d2 / (3 * h * h);
        CHECK(three_point_check(u, std::span(&t, 1), h * h) == doctest::Approx(expect).epsilon(1e-12));
        CHECK(3 * expect == doctest::Approx(4 * kPi * kPi).epsilon(0.05));
    }
    SUBCASE("off-grid points are rejected") {
        const PointTriple t{{0.001, 0}, {0.0, 0}, {0.0, 0}};
        CHECK_THROWS_AS(three_point_check(u, std::span(&t, 1), 0.1), ConfigError);
        CHECK_THROWS_AS(three_point_check(u, {}, 0.0), ConfigError);
    }
}

TEST_CASE("differences only: invariance under constant shifts") {
    const auto u = model_a_solve(32, 0.05);
    TimeField w = u;
    for (auto& v : w.raw()) v += 7.25;
    const auto triples = sample_triples(u.grid(), 16, 50, 3, 4);
    CHECK(lipschitz_constant(w) == doctest::Approx(lipschitz_constant(u)).epsilon(1e-12));
    CHECK(semiconcavity_constant(w) == doctest::Approx(semiconcavity_constant(u)).epsilon(1e-9));
    CHECK(three_point_check(w, triples, 0.05) == doctest::Approx(three_point_check(u, triples, 0.05)).epsilon(1e-9));
}

TEST_CASE("refinement stability on a Model-A solve") {
    const double T = 0.1;
    const auto coarse = model_a_solve(64, T);
    const auto fine = model_a_solve(128, T);
    const double lip = lipschitz_constant(fine) / lipschitz_constant(coarse);
    const double semi = semiconcavity_constant(fine) / semiconcavity_constant(coarse);
    CHECK(lip >= 0.8);
    CHECK(lip <= 1.2);
    CHECK(semi >= 0.8);
    CHECK(semi <= 1.2);
    const auto triples = sample_triples(coarse.grid(), 32, 1000, 4, 11);
    const double a = three_point_check(coarse, triples, 0.05);
    const double b = three_point_check(fine, triples, 0.05);
    CHECK(std::isfinite(a));
    CHECK(b == doctest::Approx(a).epsilon(0.2));
}

TEST_CASE("class M audit on Model A") {
    for (int dim : {1, 2}) {
        const auto model = model_a_reference(dim);
        const auto samples = random_krylov_samples(model, 1000, 21 + dim);
        const auto report = class_M_check(model, samples);
        CHECK(report.all_pass());
        CHECK(report.find("homogeneity").worst <= 1e-10);
        CHECK(report.find("ellipticity").worst >= 0.5 * (1 - 1e-6));
        CHECK(report.find("ellipticity").worst <= 0.5 + 1e-6);
        CHECK(report.find("concavity_B").worst <= 1e-8);
        MESSAGE(report.summary());
    }
}

TEST_CASE("ellipticity slope equals the H2 derivative away from kinks") {
    const auto model = model_a_reference(1);
    KrylovSample k;
    k.beta = 2.0;
    k.B = {1.0, 0, 0, 0};  // q = 0.5, eta* = 0.75
    const double h = 1e-4 * 2;
    KrylovSample up = k, dn = k;
    up.B[0] += h;
    dn.B[0] -= h;
    const double slope = (krylov_M(model, up) - krylov_M(model, dn)) / (2 * h);
    CHECK(slope == doctest::Approx(eval_H2(model.hamiltonians, 0, {0, 0}, 0.5).derivative).epsilon(1e-9));
    CHECK(krylov_M(model, k) == doctest::Approx(2.0 * (eval_H2(model.hamiltonians, 0, {0, 0}, 0.5).value +
                                                      eval_H1(model.hamiltonians, 0, {0, 0}, {0, 0}).value)));
    k.beta = 0.0;
    CHECK_THROWS_AS(krylov_M(model, k), ConfigError);
}

TEST_CASE("class M audit on the single-control model") {
    const auto model = single_control_model(0.8);
    const auto report = class_M_check(model, random_krylov_samples(model, 200, 3));
    CHECK(report.find("homogeneity").pass);
    CHECK(report.find("ellipticity").worst == doctest::Approx(0.8).epsilon(1e-6));
}
