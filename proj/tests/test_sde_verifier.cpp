#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "cdmfg/errors.hpp"
#include "cdmfg/hjb_solver.hpp"
#include "cdmfg/sde_verifier.hpp"
#include "oracles.hpp"

#include <cmath>
#include <numbers>

using namespace cdmfg;

namespace {

struct Solved {
    ModelSpec model;
    GridSpec grid;
    TimeField u;
    DensityPath m;
};

// F = 0 and G = amplitude * cos(2 pi x) + offset, with m the uniform path.
Solved solve_uncoupled(ModelSpec model, int nx, double T, double amplitude, double offset = 0.0) {
    model.horizon = T;
    model.terminal_g = {TerminalCost::Kind::cosine, offset, amplitude, 0.0};
    GridSpec g{model.dim, 1.0, nx, 1, T};
    HjbOptions opt;
    g.nt = minimal_stable_nt(g, model.bounds.eta_max(), lax_friedrichs_theta(model, opt));
    g.nt = (g.nt + 7) / 8 * 8;
    const auto m = DensityPath::constant(g, std::vector<double>(g.nodes(), 1.0));
    const PeriodicKernel k(g, model.coupling_f.width);
    const auto G = terminal_G_slice(model, g, k, m.level(g.nt));
    auto u = solve_hjb(model, TimeField(g), G, g);
    return {model, g, std::move(u), m};
}

Solved heat_case() {
    ModelSpec model = single_control_model(0.5);
    return solve_uncoupled(model, 64, 0.1, 1.0);
}

McConfig config(int paths, std::uint64_t seed, double x0) {
    McConfig c;
    c.num_paths = paths;
    c.seed = seed;
    c.x0 = {x0, 0.5};
    return c;
}

}  // namespace

TEST_CASE("heat limit agrees with the separation-of-variables value") {
    const auto s = heat_case();
    const double x0 = 0.3;
    const double exact = oracle::heat_solution(0.5, 1.0, 0.1, 0.0, x0);
    const auto e = simulate_value(s.u, s.m, s.model, config(4000, 11, x0));
    CHECK(e.num_paths == 4000);
    CHECK(e.std_error > 0.0);
    CHECK(std::abs(e.mean - exact) <= 3 * e.std_error + 0.05);
    CHECK(std::abs(interpolate(s.grid, s.u.level(0), {x0, 0}) - exact) <= 0.01);
}

TEST_CASE("reproducibility and standard-error scaling") {
    const auto s = heat_case();
    const auto a = simulate_value(s.u, s.m, s.model, config(400, 5, 0.3));
    const auto b = simulate_value(s.u, s.m, s.model, config(400, 5, 0.3));
    CHECK(a.mean == b.mean);
    CHECK(a.std_error == b.std_error);
    const auto c = simulate_value(s.u, s.m, s.model, config(400, 6, 0.3));
    CHECK(c.mean != a.mean);
    const auto big = simulate_value(s.u, s.m, s.model, config(1600, 5, 0.3));
    const double ratio = a.std_error / big.std_error;
    CHECK(ratio >= 2.0 / 1.5);
    CHECK(ratio <= 2.0 * 1.5);
    CHECK(path_seed(5, 0) != path_seed(5, 1));
    CHECK(path_seed(5, 1) != path_seed(6, 0));
}

TEST_CASE("antithetic pairs do not inflate the variance") {
    const auto s = heat_case();
    for (double x0 : {0.25, 0.3}) {
        auto plain = config(2000, 3, x0);
        auto anti = plain;
        anti.antithetic = true;
        const auto p = simulate_value(s.u, s.m, s.model, plain);
        const auto a = simulate_value(s.u, s.m, s.model, anti);
        CHECK(a.num_paths == 2000);
        CHECK(a.std_error <= 1.05 * p.std_error);
    }
    // next to an extremum of the payoff the pair members are positively correlated;
    // the pair mean can then at worst match the plain variance with half the samples
    auto plain = config(2000, 3, 0.45);
    auto anti = plain;
    anti.antithetic = true;
    const double ratio = simulate_value(s.u, s.m, s.model, anti).std_error /
                         simulate_value(s.u, s.m, s.model, plain).std_error;
    CHECK(ratio <= 1.05 * std::sqrt(2.0));
    auto odd = config(201, 3, 0.3);
    odd.antithetic = true;
    CHECK_THROWS_AS(simulate_value(s.u, s.m, s.model, odd), ConfigError);
}

TEST_CASE("Model A value against the solver, and suboptimal controls") {
    const auto s = solve_uncoupled(model_a_reference(1), 32, 0.25, 0.5);
    const double x0 = 0.4;
    const double value = interpolate(s.grid, s.u.level(0), {x0, 0});
    const auto e = simulate_value(s.u, s.m, s.model, config(2000, 21, x0));
    CHECK(std::abs(e.mean - value) <= 3 * e.std_error + 0.05);
    for (Controls c : {Controls{{0.5, 0}, 1.0}, Controls{{-1.0, 0}, 0.5}, Controls{{0.0, 0}, 2.0}}) {
        const auto sub = simulate_policy(s.u, s.m, s.model, config(2000, 22, x0), constant_policy(s.model, c));
        CHECK(sub.mean >= value - 3 * sub.std_error - 0.05);
    }
    CHECK_THROWS_AS(constant_policy(s.model, Controls{{1.5, 0}, 1.0}), ConfigError);
    CHECK_THROWS_AS(constant_policy(s.model, Controls{{0.0, 0}, 3.0}), ConfigError);
}

TEST_CASE("dynamic programming principle") {
    const auto s = heat_case();
    SUBCASE("h = T/8") {
        const auto r = dpp_check(s.u, s.m, s.model, config(2000, 9, 0.3), s.grid.horizon / 8);
        CHECK(r.gap <= 3 * r.std_error + 0.05);
    }
    SUBCASE("h = T reduces to the value simulation") {
        const auto cfg = config(500, 9, 0.3);
        const auto r = dpp_check(s.u, s.m, s.model, cfg, s.grid.horizon);
        const auto e = simulate_value(s.u, s.m, s.model, cfg);
        CHECK(r.estimate == doctest::Approx(e.mean).epsilon(1e-12));
    }
    SUBCASE("constant data") {
        const auto c = solve_uncoupled(model_a_reference(1), 32, 0.25, 0.0, 1.75);
        const auto r = dpp_check(c.u, c.m, c.model, config(500, 2, 0.5), c.grid.horizon / 4);
        CHECK(r.gap <= 3 * r.std_error + 1e-8);
        CHECK(r.value == doctest::Approx(1.75).epsilon(1e-12));
    }
    SUBCASE("h must be a multiple of the step") {
        CHECK_THROWS_AS(dpp_check(s.u, s.m, s.model, config(500, 9, 0.3), s.grid.dt() * 1.5), ConfigError);
        CHECK_THROWS_AS(dpp_check(s.u, s.m, s.model, config(500, 9, 0.3), 2 * s.grid.horizon), ConfigError);
    }
}

TEST_CASE("trajectory modulus") {
    const auto model = model_a_reference(1);
    McConfig cfg = config(2000, 4, 0.5);
    cfg.dt_mc = 1e-5;
    SUBCASE("pure diffusion follows sqrt(h)") {
        const std::vector<double> hs{0.001, 0.002, 0.004, 0.008, 0.016};
        const auto r = modulus_check(model, cfg, hs, Controls{{0, 0}, 1.0});
        CHECK(r.exponent >= 0.4);
        CHECK(r.exponent <= 0.6);
        // reflection principle: E sup_{s<=h} |sqrt(2 eta) B_s| = sqrt(2 eta h) sqrt(pi/2)
        const double oracle = std::sqrt(2.0 * 0.016) * std::sqrt(std::numbers::pi / 2);
        CHECK(r.mean_sup.back() == doctest::Approx(oracle).epsilon(0.1));
    }
    SUBCASE("maximal drift with the smallest diffusion on short windows") {
        cfg.dt_mc = 0.1 / 1024;
        std::vector<double> hs;
        for (int k = 4; k >= 0; --k) hs.push_back(0.1 / std::pow(2.0, k));
        const auto r = modulus_check(model, cfg, hs, Controls{{1.0, 0}, 0.5});
        CHECK(r.exponent >= 0.4);
        CHECK(r.exponent <= 0.6);
    }
    SUBCASE("too few points") {
        const std::vector<double> hs{0.01};
        CHECK_THROWS_AS(modulus_check(model, cfg, hs, Controls{{0, 0}, 1.0}), ConfigError);
    }
}

TEST_CASE("configuration and sanity errors") {
    const auto s = heat_case();
    CHECK_THROWS_AS(simulate_value(s.u, s.m, s.model, config(50, 1, 0.3)), ConfigError);
    auto coarse = config(200, 1, 0.3);
    coarse.dt_mc = 2 * s.grid.dt();
    CHECK_THROWS_AS(simulate_value(s.u, s.m, s.model, coarse), ConfigError);
    const Policy wild = [](double, const Point&, const Point&, double) { return Controls{{0, 0}, 1e6}; };
    CHECK_THROWS_AS(simulate_policy(s.u, s.m, s.model, config(200, 1, 0.3), wild), NumericalError);
    std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
    CHECK(pairwise_sum(v) == 66.0);
}
