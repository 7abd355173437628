#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "cdmfg/errors.hpp"
#include "cdmfg/wasserstein.hpp"
#include "oracles.hpp"

#include <cmath>
#include <random>

using namespace cdmfg;

namespace {

std::vector<double> random_weights(int n, std::mt19937_64& rng, double zero_fraction = 0.0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> w(n);
    double total = 0.0;
    for (auto& v : w) {
        v = u(rng) < zero_fraction ? 0.0 : u(rng);
        total += v;
    }
    if (total == 0.0) w[0] = total = 1.0;
    for (auto& v : w) v /= total;
    return w;
}

// LP oracle over the full node sets with flat Euclidean cost.
double lp_distance(const GridSpec& g, const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<std::vector<double>> C(g.nodes(), std::vector<double>(g.nodes()));
    for (int i = 0; i < g.nodes(); ++i) {
        for (int j = 0; j < g.nodes(); ++j) {
            const Point x = g.coords(i), y = g.coords(j);
            C[i][j] = std::hypot(x[0] - y[0], x[1] - y[1]);
        }
    }
    return oracle::transport_lp(a, b, C);
}

std::vector<double> one_hot(const GridSpec& g, int node) {
    std::vector<double> w(g.nodes(), 0.0);
    w[node] = 1.0;
    return w;
}

DensityPath path_of(const GridSpec& g, std::vector<double> weights) {
    for (auto& v : weights) v /= g.cell_volume();
    return DensityPath::constant(g, weights);
}

TimeField heat_path(const GridSpec& g, double nu, int start) {
    // explicit pure diffusion from a discrete Dirac, written out directly
    TimeField f(g);
    f(0, start) = 1.0 / g.cell_volume();
    const double r = nu * g.dt() / (g.dx() * g.dx());
    for (int n = 0; n < g.nt; ++n) {
        for (int i = 0; i < g.nodes(); ++i) {
            double acc = f(n, i) * (1.0 - 2.0 * g.dim * r);
            for (int k = 0; k < g.dim; ++k) acc += r * (f(n, g.neighbor(i, k, 1)) + f(n, g.neighbor(i, k, -1)));
            f(n + 1, i) = acc;
        }
    }
    return f;
}

}  // namespace

TEST_CASE("identical measures are at distance zero") {
    std::mt19937_64 rng(1);
    for (int dim : {1, 2}) {
        const GridSpec g{dim, 1.0, 16, 1, 1.0};
        const auto w = random_weights(g.nodes(), rng);
        const auto m = GridMeasure::from_weights(g, w);
        CHECK(d1(m, m) == 0.0);
    }
}

TEST_CASE("two Diracs are at their flat distance") {
    const GridSpec g1{1, 1.0, 16, 1, 1.0};
    CHECK(d1(GridMeasure::from_weights(g1, one_hot(g1, 2)), GridMeasure::from_weights(g1, one_hot(g1, 13))) ==
          doctest::Approx(11.0 / 16).epsilon(1e-14));
    const GridSpec g2{2, 1.0, 16, 1, 1.0};
    const double got = d1(GridMeasure::from_weights(g2, one_hot(g2, g2.node_at(1, 2))),
                          GridMeasure::from_weights(g2, one_hot(g2, g2.node_at(13, 7))));
    CHECK(got == doctest::Approx(std::hypot(12.0, 5.0) / 16).epsilon(1e-14));
}

TEST_CASE("shifted uniform block in 1D costs s*dx") {
    const GridSpec g{1, 1.0, 16, 1, 1.0};
    for (int s = 1; s <= 4; ++s) {
        std::vector<double> a(16, 0.0), b(16, 0.0);
        for (int i = 3; i < 9; ++i) {
            a[i] = 1.0 / 6;
            b[i + s] = 1.0 / 6;
        }
        const double got = d1(GridMeasure::from_weights(g, a), GridMeasure::from_weights(g, b));
        CHECK(got == doctest::Approx(s * g.dx()).epsilon(1e-12));
        CHECK(got == doctest::Approx(lp_distance(g, a, b)).epsilon(1e-9));
    }
}

TEST_CASE("1D CDF formula matches the transportation LP") {
    std::mt19937_64 rng(2);
    for (int nx : {8, 12, 16}) {
        const GridSpec g{1, 1.0, nx, 1, 1.0};
        for (int trial = 0; trial < 5; ++trial) {
            const auto a = random_weights(nx, rng, 0.3), b = random_weights(nx, rng, 0.3);
            const double primal = d1(GridMeasure::from_weights(g, a), GridMeasure::from_weights(g, b));
            CHECK(primal == doctest::Approx(lp_distance(g, a, b)).epsilon(1e-9));
        }
    }
}

TEST_CASE("2D network simplex matches the transportation LP") {
    std::mt19937_64 rng(3);
    const GridSpec g{2, 1.0, 4, 1, 1.0};
    for (int trial = 0; trial < 6; ++trial) {
        const auto a = random_weights(g.nodes(), rng, 0.4), b = random_weights(g.nodes(), rng, 0.4);
        const double got = d1(GridMeasure::from_weights(g, a), GridMeasure::from_weights(g, b));
        CHECK(got == doctest::Approx(lp_distance(g, a, b)).epsilon(1e-9));
    }
    // scattered points with unequal counts
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 6; ++trial) {
        const int S = 5 + trial, D = 9 - trial / 2;
        std::vector<Point> from(S), to(D);
        for (auto& p : from) p = {u(rng), u(rng)};
        for (auto& p : to) p = {u(rng), u(rng)};
        const auto s = random_weights(S, rng), d = random_weights(D, rng);
        std::vector<std::vector<double>> C(S, std::vector<double>(D));
        for (int i = 0; i < S; ++i)
            for (int j = 0; j < D; ++j) C[i][j] = std::hypot(from[i][0] - to[j][0], from[i][1] - to[j][1]);
        CHECK(transport_cost(from, s, to, d) == doctest::Approx(oracle::transport_lp(s, d, C)).epsilon(1e-9));
    }
}

TEST_CASE("metric axioms on sampled triples") {
    std::mt19937_64 rng(4);
    for (int dim : {1, 2}) {
        const GridSpec g{dim, 1.0, dim == 1 ? 32 : 8, 1, 1.0};
        for (int trial = 0; trial < 10; ++trial) {
            const auto a = GridMeasure::from_weights(g, random_weights(g.nodes(), rng, 0.5));
            const auto b = GridMeasure::from_weights(g, random_weights(g.nodes(), rng, 0.5));
            const auto c = GridMeasure::from_weights(g, random_weights(g.nodes(), rng, 0.5));
            CHECK(d1(a, b) == d1(b, a));
            CHECK(d1(a, c) <= d1(a, b) + d1(b, c) + 1e-10);
            CHECK(d1(a, b) > 0.0);
        }
    }
}

TEST_CASE("translation in 2D") {
    const GridSpec g{2, 1.0, 16, 1, 1.0};
    std::mt19937_64 rng(6);
    std::vector<double> a(g.nodes(), 0.0), b(g.nodes(), 0.0), c(g.nodes(), 0.0);
    const auto w = random_weights(16, rng);
    const int s = 3;
    for (int k = 0; k < 16; ++k) {
        const int i = 4 + k % 4, j = 4 + k / 4;
        a[g.node_at(i, j)] = w[k];
        b[g.node_at(i + s, j)] = w[k];
        c[g.node_at(i + s, j + s)] = w[k];
    }
    const auto ma = GridMeasure::from_weights(g, a);
    CHECK(d1(ma, GridMeasure::from_weights(g, b)) == doctest::Approx(s * g.dx()).epsilon(1e-12));
    const double diag = d1(ma, GridMeasure::from_weights(g, c));
    CHECK(diag == doctest::Approx(std::sqrt(2.0) * s * g.dx()).epsilon(1e-12));
    CHECK(diag <= 2 * s * g.dx());
}

TEST_CASE("coarsening of fine 2D grids") {
    const GridSpec g{2, 1.0, 64, 1, 1.0};
    std::mt19937_64 rng(8);
    const auto m = GridMeasure::from_weights(g, random_weights(g.nodes(), rng));
    std::vector<Point> centres;
    const auto w = coarsen(m, 2, &centres);
    CHECK(w.size() == 32 * 32);
    double total = 0.0;
    for (double v : w) total += v;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(centres[1][0] == doctest::Approx(2.5 / 64));
    CHECK_THROWS_AS(coarsen(m, 3), ConfigError);
    // two Diracs: the coarse answer is within one fine diagonal per endpoint
    const auto p = GridMeasure::from_weights(g, one_hot(g, g.node_at(10, 11)));
    const auto q = GridMeasure::from_weights(g, one_hot(g, g.node_at(41, 50)));
    const double exact = std::hypot(31.0, 39.0) / 64;
    CHECK(std::abs(d1(p, q) - exact) <= std::sqrt(2.0) * g.dx());
}

TEST_CASE("dense 32x32 problem completes") {
    const GridSpec g{2, 1.0, 32, 1, 1.0};
    std::mt19937_64 rng(10);
    const auto a = GridMeasure::from_weights(g, random_weights(g.nodes(), rng));
    const auto b = GridMeasure::from_weights(g, random_weights(g.nodes(), rng));
    const double v = d1(a, b);
    CHECK(v > 0.0);
    CHECK(v < 0.2);
}

TEST_CASE("error paths") {
    const GridSpec g{1, 1.0, 16, 1, 1.0};
    const GridSpec h{1, 1.0, 32, 1, 1.0};
    std::vector<double> bad(16, 1.0 / 16);
    bad[0] += 1e-6;
    CHECK_THROWS_AS(GridMeasure::from_weights(g, bad), ContractError);
    bad[0] = -1.0 / 16;
    CHECK_THROWS_AS(GridMeasure::from_weights(g, bad), ContractError);
    const auto a = GridMeasure::from_weights(g, std::vector<double>(16, 1.0 / 16));
    const auto b = GridMeasure::from_weights(h, std::vector<double>(32, 1.0 / 32));
    CHECK_THROWS_AS(d1(a, b), ConfigError);
    CHECK_THROWS_AS(transport_cost({{0, 0}}, {1.0}, {{1, 0}}, {0.5}), ContractError);
}

TEST_CASE("Hoelder diagnostic") {
    SUBCASE("stationary uniform path is degenerate") {
        const GridSpec g{1, 1.0, 16, 64, 1.0};
        const auto fit = holder_half_diagnostic(path_of(g, std::vector<double>(16, 1.0 / 16)));
        CHECK(fit.degenerate);
        CHECK(fit.constant == 0.0);
        CHECK(fit.taus.size() == 5);
    }
    SUBCASE("too few separations") {
        const GridSpec g{1, 1.0, 16, 4, 1.0};
        CHECK_THROWS_AS(holder_half_diagnostic(path_of(g, std::vector<double>(16, 1.0 / 16))), ConfigError);
    }
    SUBCASE("pure diffusion from a Dirac in 1D") {
        const GridSpec g{1, 1.0, 256, 4096, 0.25};
        const DensityPath m(heat_path(g, 0.01, 128));
        const auto fit = holder_half_diagnostic(m);
        CHECK_FALSE(fit.degenerate);
        CHECK(fit.exponent >= 0.4);
        CHECK(fit.exponent <= 0.6);
        // E|B_tau| = sqrt(4 nu tau / pi)
        CHECK(fit.constant == doctest::Approx(std::sqrt(4 * 0.01 / std::numbers::pi)).epsilon(0.05));
        std::vector<double> tau(fit.taus), d(fit.distances);
        CHECK(std::isfinite(loglog_slope(tau, d)));
    }
    SUBCASE("pure diffusion from a Dirac in 2D") {
        const GridSpec g{2, 1.0, 32, 1024, 0.5};
        const DensityPath m(heat_path(g, 0.03, g.node_at(16, 16)));
        const auto fit = holder_half_diagnostic(m);
        CHECK(fit.exponent >= 0.4);
        CHECK(fit.exponent <= 0.6);
    }
}

TEST_CASE("sup over levels") {
    const GridSpec g{1, 1.0, 64, 256, 0.25};
    const DensityPath a(heat_path(g, 0.01, 20));
    const DensityPath b(heat_path(g, 0.01, 24));
    CHECK(sup_d1(a, b) == doctest::Approx(4 * g.dx()).epsilon(1e-6));
    CHECK(sup_d1(a, a, 7) == 0.0);
    CHECK_THROWS_AS(sup_d1(a, b, 0), ConfigError);
}
