#include "cdmfg/regularity_diagnostics.hpp"

#include "cdmfg/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace cdmfg {

namespace {

int on_grid_node(const GridSpec& grid, const Point& p) {
    const double dx = grid.dx();
    int idx[2] = {0, 0};
    for (int k = 0; k < grid.dim; ++k) {
        const long r = std::lround(p[k] / dx);
        if (std::abs(p[k] - r * dx) > 1e-9 * dx) throw ConfigError("three_point_check: point is not a grid node");
        idx[k] = static_cast<int>(((r % grid.nx) + grid.nx) % grid.nx);
    }
    return grid.node_at(idx[0], idx[1]);
}

double norm(const Point& p) { return std::hypot(p[0], p[1]); }

double fd_step(double v) { return 1e-4 * (1.0 + std::abs(v)); }

// Central first difference of f around its current argument.
template <class F>
double central(F&& f, double v) {
    const double h = fd_step(v);
    return (f(v + h) - f(v - h)) / (2 * h);
}

}  // namespace

double lipschitz_constant(const TimeField& u) {
    const GridSpec& g = u.grid();
    double worst = 0.0;
    for (int n = 0; n < g.levels(); ++n) {
        auto v = u.level(n);
        for (int i = 0; i < g.nodes(); ++i)
            for (int k = 0; k < g.dim; ++k) worst = std::max(worst, std::abs(forward_diff(g, v, i, k)));
    }
    return worst;
}

double semiconcavity_constant(const TimeField& u) {
    const GridSpec& g = u.grid();
    const double h2 = g.dx() * g.dx();
    double worst = -std::numeric_limits<double>::infinity();
    for (int n = 0; n < g.levels(); ++n) {
        auto v = u.level(n);
        for (int i = 0; i < g.nodes(); ++i) {
            for (int k = 0; k < g.dim; ++k) {
                const double d2 = v[g.neighbor(i, k, 1)] + v[g.neighbor(i, k, -1)] - 2 * v[i];
                worst = std::max(worst, d2 / h2);
            }
        }
    }
    return worst;
}

double three_point_check(const TimeField& u, std::span<const PointTriple> triples, double delta) {
    if (!(delta > 0.0)) throw ConfigError("three_point_check: delta must be positive");
    const GridSpec& g = u.grid();
    double worst = 0.0;
    for (const auto& tr : triples) {
        const int ix = on_grid_node(g, tr.x), iy = on_grid_node(g, tr.y), iz = on_grid_node(g, tr.z);
        const Point xz{tr.x[0] - tr.z[0], tr.x[1] - tr.z[1]};
        const Point yz{tr.y[0] - tr.z[0], tr.y[1] - tr.z[1]};
        const Point mid{xz[0] + yz[0], xz[1] + yz[1]};
        const double denom =
            delta + (std::pow(norm(xz), 4) + std::pow(norm(yz), 4) + std::pow(norm(mid), 2)) / delta;
        for (int n = 0; n < g.levels(); ++n) {
            const double num = u(n, ix) + u(n, iy) - 2 * u(n, iz);
            worst = std::max(worst, num / denom);
        }
    }
    return worst;
}

std::vector<PointTriple> sample_triples(const GridSpec& grid, int lattice_nx, int count,
                                        int max_steps, std::uint64_t seed) {
    if (lattice_nx < 1 || grid.nx % lattice_nx != 0) throw ConfigError("sample_triples: lattice must divide nx");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> centre(lattice_nx / 4, 3 * lattice_nx / 4);
    std::uniform_int_distribution<int> offset(-max_steps, max_steps);
    const double h = grid.box_length / lattice_nx;
    std::vector<PointTriple> out;
    for (int c = 0; c < count; ++c) {
        PointTriple tr{};
        for (int k = 0; k < grid.dim; ++k) {
            const int z = centre(rng);
            tr.z[k] = z * h;
            tr.x[k] = (z + offset(rng)) * h;
            tr.y[k] = (z + offset(rng)) * h;
        }
        out.push_back(tr);
    }
    return out;
}

double krylov_M(const ModelSpec& model, const KrylovSample& k) {
    if (!(k.beta > 0.0)) throw ConfigError("krylov_M: beta must be positive");
    const double trace = model.dim == 1 ? k.B[0] : k.B[0] + k.B[3];
    const Point p{k.p_under[0] / k.beta, model.dim == 1 ? 0.0 : k.p_under[1] / k.beta};
    const auto& H = model.hamiltonians;
    return k.beta * eval_H2(H, k.t, k.x, trace / k.beta).value + k.beta * eval_H1(H, k.t, k.x, p).value;
}

HypothesisReport class_M_check(const ModelSpec& model, std::span<const KrylovSample> samples,
                               double constant_bound, std::uint64_t seed) {
    const int d = model.dim;
    const double nu = model.bounds.eta_min();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;

    double homog = 0.0, ellip = std::numeric_limits<double>::infinity(), concave = -std::numeric_limits<double>::infinity();
    double directional = -std::numeric_limits<double>::infinity(), bounds = 0.0, growth = 0.0;
    int nonfinite = 0;
    auto M = [&](const KrylovSample& k) { return krylov_M(model, k); };

    for (const KrylovSample& k : samples) {
        const double base = M(k);
        if (!std::isfinite(base)) {
            ++nonfinite;
            continue;
        }
        // (i) positive homogeneity in (beta, B, p, s)
        for (double lam : {0.5, 2.0, 10.0}) {
            KrylovSample s = k;
            s.beta *= lam;
            for (auto& b : s.B) b *= lam;
            s.p_under = {lam * k.p_under[0], lam * k.p_under[1]};
            s.s *= lam;
            const double scale = std::max(std::abs(lam * base), lam * k.beta);
            homog = std::max(homog, std::abs(M(s) - lam * base) / scale);
        }
        // (iii) ellipticity along the diagonal
        for (int i = 0; i < d; ++i) {
            const int ii = i * d + i;
            const double slope = central([&](double v) { KrylovSample s = k; s.B[ii] = v; return M(s); }, k.B[ii]);
            ellip = std::min(ellip, slope);
        }
        // (iv) concavity in B along a random rank-one direction
        Point v{gauss(rng), d == 2 ? gauss(rng) : 0.0};
        const double vn = norm(v);
        v = {v[0] / vn, v[1] / vn};
        double bnorm = 0.0;
        for (int e = 0; e < d * d; ++e) bnorm += k.B[e] * k.B[e];
        const double h = fd_step(std::sqrt(bnorm));
        auto shifted_B = [&](double r) {
            KrylovSample s = k;
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b) s.B[a * d + b] += r * v[a] * v[b];
            return M(s);
        };
        concave = std::max(concave, shifted_B(h) + shifted_B(-h) - 2 * base);
        // (v) second directional derivative along (B0, p0, s0)
        std::array<double, 4> B0{};
        for (int a = 0; a < d; ++a)
            for (int b = a; b < d; ++b) B0[a * d + b] = B0[b * d + a] = gauss(rng);
        const Point p0{gauss(rng), d == 2 ? gauss(rng) : 0.0};
        const double s0 = gauss(rng);
        auto along = [&](double r) {
            KrylovSample s = k;
            for (int e = 0; e < d * d; ++e) s.B[e] += r * B0[e];
            s.p_under = {k.p_under[0] + r * p0[0], k.p_under[1] + r * p0[1]};
            s.s += r * s0;
            return M(s);
        };
        const double second = (along(h) + along(-h) - 2 * base) / (h * h);
        const double weight = (p0[0] * p0[0] + p0[1] * p0[1] + s0 * s0) / k.beta;
        directional = std::max(directional, second / weight);
        // (vi) first derivatives and their x-derivatives
        auto dM_dbeta = [&](const KrylovSample& at) {
            return central([&](double b) { KrylovSample s = at; s.beta = b; return M(s); }, at.beta);
        };
        auto dM_db11 = [&](const KrylovSample& at) {
            return central([&](double b) { KrylovSample s = at; s.B[0] = b; return M(s); }, at.B[0]);
        };
        double first = std::abs(dM_dbeta(k)) + std::abs(dM_db11(k));
        double pmax = 0.0;
        for (int i = 0; i < d; ++i) {
            pmax = std::max(pmax, std::abs(central(
                [&](double p) { KrylovSample s = k; s.p_under[i] = p; return M(s); }, k.p_under[i])));
        }
        first += pmax;
        for (int i = 0; i < d; ++i) {
            auto at_x = [&](double xi, auto&& f) { KrylovSample s = k; s.x[i] = xi; return f(s); };
            first += std::abs(central([&](double xi) { return at_x(xi, dM_db11); }, k.x[i]));
            first += std::abs(central([&](double xi) { return at_x(xi, dM_dbeta); }, k.x[i]));
        }
        bounds = std::max(bounds, first);
        // (vii) |M_t| + |M_xx| against C sqrt(beta^2 + s^2 + |p|^2 + |B|^2)
        const double mt = central([&](double t) { KrylovSample s = k; s.t = t; return M(s); }, k.t);
        double mxx = 0.0;
        for (int i = 0; i < d; ++i) {
            for (int j = 0; j < d; ++j) {
                const double hi = fd_step(k.x[i]), hj = fd_step(k.x[j]);
                auto at = [&](double a, double b) {
                    KrylovSample s = k;
                    s.x[i] += a;
                    s.x[j] += b;
                    return M(s);
                };
                mxx = std::max(mxx, std::abs((at(hi, hj) - at(hi, -hj) - at(-hi, hj) + at(-hi, -hj)) / (4 * hi * hj)));
            }
        }
        const double size = std::sqrt(k.beta * k.beta + k.s * k.s + norm(k.p_under) * norm(k.p_under) + bnorm);
        growth = std::max(growth, (std::abs(mt) + mxx) / size);
    }

    HypothesisReport report;
    report.nonfinite_samples = nonfinite;
    auto add = [&](std::string label, double worst, double bound, bool lower) {
        const bool pass = lower ? worst >= bound : worst <= bound;
        report.checks.push_back({std::move(label), worst, bound, lower, pass && nonfinite == 0});
    };
    add("homogeneity", homog, 1e-10, false);
    add("ellipticity", ellip, nu * (1.0 - 1e-6), true);
    add("concavity_B", concave, 1e-8, false);
    add("directional_second", directional, constant_bound, false);
    add("derivative_bounds", bounds, constant_bound, false);
    add("time_space_growth", growth, constant_bound, false);
    return report;
}

std::vector<KrylovSample> random_krylov_samples(const ModelSpec& model, int count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 3.0);
    std::vector<KrylovSample> out;
    for (int c = 0; c < count; ++c) {
        KrylovSample k;
        k.t = model.horizon * unit(rng);
        k.x = {unit(rng), model.dim == 2 ? unit(rng) : 0.0};
        k.beta = std::exp(std::log(0.1) + unit(rng) * std::log(50.0));
        const int d = model.dim;
        for (int a = 0; a < d; ++a)
            for (int b = a; b < d; ++b) k.B[a * d + b] = k.B[b * d + a] = gauss(rng);
        k.p_under = {gauss(rng), d == 2 ? gauss(rng) : 0.0};
        k.s = gauss(rng) / 3.0;
        out.push_back(k);
    }
    return out;
}

}  // namespace cdmfg
