#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "cdmfg/errors.hpp"
#include "cdmfg/mfg_fixed_point.hpp"
#include "cdmfg/wasserstein.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace cdmfg;

namespace {

constexpr double kPi = std::numbers::pi;

ModelSpec coupled_model(double T, double cF = 0.5, double cG = 0.1) {
    ModelSpec m = model_a_reference(1);
    m.horizon = T;
    m.coupling_f = {cF, 0.1};
    m.terminal_g.kind = TerminalCost::Kind::cosine;
    m.terminal_g.amplitude = 0.2;
    m.terminal_g.gain = cG;
    m.m0 = {InitialDensity::Kind::gaussian, {0.5, 0.5}, 0.1};
    return m;
}

GridSpec stable_grid(int nx, double T) {
    GridSpec g{1, 1.0, nx, 1, T};
    g.nt = minimal_stable_nt(g, 2.0, 1.0);
    return g;
}

DensityPath perturbed_uniform(const GridSpec& g, double amp, double phase) {
    std::vector<double> s(g.nodes());
    for (int i = 0; i < g.nodes(); ++i) s[i] = 1.0 + amp * std::cos(2 * kPi * g.coords(i)[0] + phase);
    return DensityPath::constant(g, s);
}

DensityPath bump_path(const GridSpec& g, double centre, double width) {
    InitialDensity d{InitialDensity::Kind::gaussian, {centre, 0.5}, width};
    return DensityPath::constant(g, discretize_initial_density(d, g));
}

}  // namespace

TEST_CASE("Phi is constant when the couplings ignore gamma") {
    const double T = 0.1;
    const auto g = stable_grid(32, T);
    const auto model = coupled_model(T, 0.0, 0.0);
    const auto a = phi_map(perturbed_uniform(g, 0.5, 0.0), model, g);
    const auto b = phi_map(bump_path(g, 0.3, 0.05), model, g);
    CHECK(a.m.field().raw() == b.m.field().raw());
    CHECK(a.u.raw() == b.u.raw());
}

TEST_CASE("Phi smoke test from the uniform path") {
    const double T = 0.1;
    const auto g = stable_grid(32, T);
    const auto r = phi_map(perturbed_uniform(g, 0.0, 0.0), coupled_model(T), g);
    CHECK(r.m.mass().back() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.m.min_value() >= -1e-14);
}

TEST_CASE("Phi continuity is measured") {
    const double T = 0.1;
    const auto g = stable_grid(32, T);
    const auto model = coupled_model(T, 2.0, 1.0);
    const auto c = phi_continuity(model, g, perturbed_uniform(g, 0.2, 0.0), perturbed_uniform(g, 0.2, 0.3));
    CHECK(c.input_distance > 0.0);
    CHECK(std::isfinite(c.ratio));
    CHECK(c.output_distance > 0.0);
    MESSAGE("continuity K = " << c.ratio);
}

TEST_CASE("zero couplings converge in two undamped iterations") {
    const double T = 0.1;
    const auto g = stable_grid(32, T);
    FixedPointOptions opt;
    opt.theta = 1.0;
    const auto r = picard_solve(coupled_model(T, 0.0, 0.0), g, opt);
    CHECK(r.report.converged);
    CHECK(r.report.iterations == 2);
    CHECK(r.report.gap_history.size() == 2);
    CHECK(r.report.gap_history[0] > 0.0);
    CHECK(r.report.gap_history[1] == 0.0);
}

TEST_CASE("coupled Model A converges with self-consistent residuals") {
    const double T = 0.25;
    const auto g = stable_grid(32, T);
    const auto r = picard_solve(coupled_model(T), g);
    CHECK(r.report.converged);
    CHECK(r.report.iterations <= 50);
    CHECK(r.report.gap_history.back() < 1e-4);
    CHECK(r.report.final_hjb_residual <= 1e-10);
    CHECK(r.report.final_duality_gap <= 1e-10);
    CHECK(r.report.final_phi_defect <= 2 * 1e-4);
    for (double d : r.report.fp_mass_drift) CHECK(d <= 1e-12);
    for (double h : r.report.hjb_residual_sup) CHECK(h <= 1e-10);
    // eventually decreasing
    const auto& gaps = r.report.gap_history;
    for (std::size_t k = gaps.size() / 2; k + 1 < gaps.size(); ++k) CHECK(gaps[k + 1] <= gaps[k]);
    // Hoelder ratio of the iterates stays finite and settles
    for (double h : r.report.holder_ratio) CHECK(std::isfinite(h));
    CHECK(r.report.holder_ratio.back() == doctest::Approx(r.report.holder_ratio[r.report.holder_ratio.size() - 2]).epsilon(0.05));
    CHECK(r.m.min_value() >= -1e-14);
}

TEST_CASE("damping does not change the fixed point") {
    const double T = 0.25;
    const auto g = stable_grid(32, T);
    FixedPointOptions full, half;
    full.theta = 1.0;
    full.tol = half.tol = 1e-6;
    const auto a = picard_solve(coupled_model(T), g, full);
    const auto b = picard_solve(coupled_model(T), g, half);
    REQUIRE(a.report.converged);
    REQUIRE(b.report.converged);
    CHECK(sup_d1(a.m, b.m) <= 1e-3);
}

TEST_CASE("non-convergence is reported") {
    const double T = 0.25;
    const auto g = stable_grid(32, T);
    FixedPointOptions opt;
    opt.max_iter = 2;
    opt.tol = 1e-12;
    const auto r = picard_solve(coupled_model(T), g, opt);
    CHECK_FALSE(r.report.converged);
    CHECK(r.report.iterations == 2);
    opt.theta = 0.0;
    CHECK_THROWS_AS(picard_solve(coupled_model(T), g, opt), ConfigError);
}

TEST_CASE("monotonicity gap") {
    const double T = 0.1;
    const auto g = stable_grid(32, T);
    SUBCASE("equal inputs") {
        const auto m = bump_path(g, 0.4, 0.1);
        const auto gap = monotonicity_gap(coupled_model(T), m, m);
        CHECK(gap.gap_F == 0.0);
        CHECK(gap.gap_G == 0.0);
    }
    SUBCASE("positive-definite kernel on random pairs") {
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int trial = 0; trial < 10; ++trial) {
            std::vector<double> a(g.nodes()), b(g.nodes());
            double sa = 0, sb = 0;
            for (int i = 0; i < g.nodes(); ++i) {
                sa += a[i] = u(rng);
                sb += b[i] = u(rng);
            }
            for (int i = 0; i < g.nodes(); ++i) {
                a[i] /= sa * g.dx();
                b[i] /= sb * g.dx();
            }
            const auto gap = monotonicity_gap(coupled_model(T), DensityPath::constant(g, a), DensityPath::constant(g, b));
            CHECK(gap.gap_F >= -1e-12);
            CHECK(gap.gap_G >= -1e-12);
        }
    }
    SUBCASE("sign-flipped kernel is detected") {
        const auto model = coupled_model(T, -0.5, -0.1);
        const auto m1 = bump_path(g, 0.3, 0.05), m2 = bump_path(g, 0.7, 0.05);
        const auto gap = monotonicity_gap(model, m1, m2);
        // direct quadratic form: c_F * sum_ij rho(x_i - x_j) w_i w_j dx^2 with w = m1 - m2
        const PeriodicKernel k(g, 0.1);
        double q = 0.0;
        for (int i = 0; i < g.nodes(); ++i) {
            for (int j = 0; j < g.nodes(); ++j) {
                const int off = ((i - j) % g.nx + g.nx) % g.nx;
                q += k.weight(off) * (m1.level(0)[i] - m2.level(0)[i]) * (m1.level(0)[j] - m2.level(0)[j]);
            }
        }
        q *= -0.5 * g.dx() * g.dx();
        CHECK(gap.gap_F < 0.0);
        CHECK(gap.gap_F == doctest::Approx(q).epsilon(1e-10));
        CHECK(gap.gap_G < 0.0);
    }
}

TEST_CASE("uniqueness from two initializations") {
    const double T = 0.25;
    const auto g = stable_grid(32, T);
    SUBCASE("identical starts") {
        const auto init = perturbed_uniform(g, 0.0, 0.0);
        const auto r = uniqueness_crosscheck(coupled_model(T), g, init, init);
        CHECK(r.both_converged);
        CHECK(r.sup_d1 == 0.0);
        CHECK(r.lasry_lions == 0.0);
    }
    SUBCASE("uniform against a bump") {
        const auto r = uniqueness_crosscheck(coupled_model(T), g, perturbed_uniform(g, 0.0, 0.0), bump_path(g, 0.5, 0.1));
        CHECK(r.both_converged);
        CHECK(r.sup_d1 <= 1e-3);
        CHECK(std::abs(r.lasry_lions) <= 1e-6);
    }
    SUBCASE("zero couplings give identical limits") {
        FixedPointOptions opt;
        opt.theta = 1.0;
        const auto r = uniqueness_crosscheck(coupled_model(T, 0.0, 0.0), g, perturbed_uniform(g, 0.3, 0.0),
                                             bump_path(g, 0.3, 0.05), opt);
        CHECK(r.both_converged);
        CHECK(r.sup_d1 == 0.0);
    }
}

TEST_CASE("two-dimensional fixed point") {
    const double T = 0.1;
    GridSpec g{2, 1.0, 16, 1, T};
    g.nt = minimal_stable_nt(g, 2.0, 1.0);
    ModelSpec m = model_a_reference(2);
    m.horizon = T;
    m.coupling_f = {0.5, 0.1};
    m.terminal_g = {TerminalCost::Kind::cosine, 0.0, 0.2, 0.1};
    m.m0 = {InitialDensity::Kind::gaussian, {0.5, 0.5}, 0.1};
    const auto r = picard_solve(m, g);
    CHECK(r.report.converged);
    CHECK(r.report.final_duality_gap <= 1e-10);
}
