#include "cdmfg/sde_verifier.hpp"

#include "cdmfg/errors.hpp"
#include "cdmfg/wasserstein.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <sstream>

namespace cdmfg {

namespace {

// Slices read along the paths: D_h u and Lap_h u per level, F per level, G.
struct PathFields {
    GridSpec grid;
    std::vector<std::vector<std::vector<double>>> grad;  // [level][axis][node]
    std::vector<std::vector<double>> lap;
    std::vector<std::vector<double>> F;
    std::vector<double> G;
};

PathFields precompute(const TimeField& u, const DensityPath& m, const ModelSpec& model) {
    const GridSpec& g = u.grid();
    if (!m.grid().same_lattice(g)) throw ConfigError("sde_verifier: u and m live on different grids");
    if (model.dim != g.dim) throw ConfigError("sde_verifier: model and grid dimensions differ");
    if (!u.all_finite()) throw ContractError("sde_verifier: u is not finite");
    PathFields f{g, {}, {}, {}, {}};
    const PeriodicKernel kernel(g, model.coupling_f.width);
    for (int n = 0; n < g.levels(); ++n) {
        std::vector<std::vector<double>> grad;
        for (int k = 0; k < g.dim; ++k) grad.push_back(gradient_component(g, u.level(n), k));
        f.grad.push_back(std::move(grad));
        f.lap.push_back(laplacian(g, u.level(n)));
        f.F.push_back(coupling_F_slice(model, kernel, m.level(n)));
    }
    f.G = terminal_G_slice(model, g, kernel, m.level(g.nt));
    return f;
}

// Bilinear stencil at a wrapped point; same weights as interpolate().
struct Stencil {
    std::array<int, 4> node{};
    std::array<double, 4> weight{};
    int size = 0;

    Stencil(const GridSpec& g, const Point& y) {
        const double sx = y[0] / g.dx();
        const int i0 = static_cast<int>(std::floor(sx));
        const double fx = sx - i0;
        if (g.dim == 1) {
            node = {g.node_at(i0), g.node_at(i0 + 1), 0, 0};
            weight = {1.0 - fx, fx, 0.0, 0.0};
            size = 2;
            return;
        }
        const double sy = y[1] / g.dx();
        const int j0 = static_cast<int>(std::floor(sy));
        const double fy = sy - j0;
        node = {g.node_at(i0, j0), g.node_at(i0 + 1, j0), g.node_at(i0, j0 + 1), g.node_at(i0 + 1, j0 + 1)};
        weight = {(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy};
        size = 4;
    }

    double operator()(const std::vector<double>& v) const {
        double s = weight[0] * v[node[0]] + weight[1] * v[node[1]];
        if (size == 4) s += weight[2] * v[node[2]] + weight[3] * v[node[3]];
        return s;
    }
};

int steps_for(double span, double h, const char* who) {
    const long k = std::lround(span / h);
    if (k < 1 || std::abs(k * h - span) > 1e-9 * std::max(span, h)) {
        std::ostringstream err;
        err << who << ": " << span << " is not a multiple of the MC step " << h;
        throw ConfigError(err.str());
    }
    return static_cast<int>(k);
}

double mc_step(const McConfig& cfg, const GridSpec& grid) {
    return cfg.dt_mc > 0.0 ? cfg.dt_mc : grid.dt();
}

McEstimate summarize(std::span<const double> samples, int num_paths) {
    const double n = static_cast<double>(samples.size());
    const double mean = pairwise_sum(samples) / n;
    std::vector<double> dev(samples.size());
    for (std::size_t k = 0; k < samples.size(); ++k) dev[k] = (samples[k] - mean) * (samples[k] - mean);
    const double var = samples.size() > 1 ? pairwise_sum(dev) / (n - 1) : 0.0;
    return {mean, std::sqrt(var / n), num_paths};
}

// Runs paths from (0, x0) over `steps` MC steps; `terminal` maps the end point to the
// terminal payoff. Antithetic pairs share a seed and flip the noise. Paths advance in
// blocks with time outermost so each level's slices stay in cache; every path keeps its
// own generator, so the result does not depend on the block size.
template <class Terminal>
McEstimate run_paths(const PathFields& f, const ModelSpec& model, const McConfig& cfg,
                     const Policy& policy, int steps, Terminal&& terminal) {
    constexpr int kBlock = 256;
    const GridSpec& g = f.grid;
    const double h = mc_step(cfg, g);
    const double dt_grid = g.dt();
    const auto& H = model.hamiltonians;
    const double eta_cap = model.bounds.eta_max();
    const double limit = 10.0 * std::sqrt(2.0 * eta_cap * h) + H.drift_sup() * h * std::sqrt(double(g.dim));
    const int groups = cfg.antithetic ? cfg.num_paths / 2 : cfg.num_paths;
    const int copies = cfg.antithetic ? 2 : 1;
    std::vector<double> samples(static_cast<std::size_t>(groups));

    struct Walker {
        std::mt19937_64 rng;
        std::normal_distribution<double> gauss;
        std::array<Point, 2> x;
        std::array<double, 2> cost{0.0, 0.0};
        std::array<int, 2> strikes{0, 0};
    };
    std::vector<Walker> block;
    block.reserve(kBlock);

    for (int first = 0; first < groups; first += kBlock) {
        const int count = std::min(kBlock, groups - first);
        block.clear();
        for (int b = 0; b < count; ++b) {
            Walker w{std::mt19937_64(path_seed(cfg.seed, static_cast<std::uint64_t>(first + b))), {}, {}};
            w.x = {wrap(g, cfg.x0), wrap(g, cfg.x0)};
            block.push_back(std::move(w));
        }
        for (int k = 0; k < steps; ++k) {
            const double t = k * h;
            const int level = std::min(g.nt, static_cast<int>(std::floor(t / dt_grid + 1e-9)) + 1);
            const double tl = g.time(level);
            for (int b = 0; b < count; ++b) {
                Walker& w = block[b];
                std::array<double, 2> z{0.0, 0.0};
                for (int a = 0; a < g.dim; ++a) z[a] = w.gauss(w.rng);
                for (int copy = 0; copy < copies; ++copy) {
                    const double sign = copy == 0 ? 1.0 : -1.0;
                    Point& x = w.x[copy];
                    const Stencil st(g, x);
                    Point p_at{0.0, 0.0};
                    for (int a = 0; a < g.dim; ++a) p_at[a] = st(f.grad[level][a]);
                    const double q_at = st(f.lap[level]);
                    const Controls c = policy(tl, x, p_at, q_at);
                    w.cost[copy] += h * (drift_lagrangian(H, tl, x, c.alpha) + diffusion_lagrangian(H, tl, x, c.eta) +
                                         st(f.F[level]));
                    const double sigma = std::sqrt(2.0 * c.eta * h);
                    Point next = x;
                    double move = 0.0;
                    for (int a = 0; a < g.dim; ++a) {
                        const double inc = c.alpha[a] * h + sign * sigma * z[a];
                        next[a] += inc;
                        move = std::max(move, std::abs(inc));
                    }
                    if (!(move <= limit)) {
                        if (!std::isfinite(move) || ++w.strikes[copy] > 3) {
                            std::ostringstream err;
                            err << "sde_verifier: path " << first + b << " left the sanity box at step " << k
                                << " (increment " << move << ", limit " << limit << ")";
                            throw NumericalError(err.str(), level, -1);
                        }
                    }
                    x = wrap(g, next);
                }
            }
        }
        for (int b = 0; b < count; ++b) {
            Walker& w = block[b];
            double group_total = 0.0;
            for (int copy = 0; copy < copies; ++copy) {
                const double cost = w.cost[copy] + terminal(w.x[copy]);
                if (!std::isfinite(cost)) throw NumericalError("sde_verifier: non-finite path cost", g.nt, -1);
                group_total += cost;
            }
            samples[first + b] = group_total / copies;
        }
    }
    return summarize(samples, groups * copies);
}

}  // namespace

void McConfig::validate(const GridSpec& grid) const {
    if (num_paths < 100) throw ConfigError("McConfig: num_paths must be at least 100");
    if (antithetic && num_paths % 2 != 0) throw ConfigError("McConfig: antithetic runs need an even num_paths");
    if (dt_mc < 0.0 || dt_mc > grid.dt() * (1.0 + 1e-12)) throw ConfigError("McConfig: dt_mc must not exceed the grid dt");
}

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace

std::uint64_t path_seed(std::uint64_t seed, std::uint64_t path) {
    return splitmix64(splitmix64(seed) + path);
}

double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

Policy optimal_policy(const ModelSpec& model) {
    const HamiltonianSpec H = model.hamiltonians;
    return [H](double t, const Point& x, const Point& p, double q) {
        return Controls{eval_H1(H, t, x, p).derivative, eval_H2(H, t, x, q).derivative};
    };
}

Policy constant_policy(const ModelSpec& model, Controls c) {
    const auto& b = model.bounds;
    for (int a = 0; a < model.dim; ++a) {
        if (std::abs(c.alpha[a]) > b.drift_bound()) throw ConfigError("constant_policy: drift outside the control set");
    }
    if (c.eta < b.eta_min() || c.eta > b.eta_max()) throw ConfigError("constant_policy: eta outside [lambda1^2/2, lambda2^2/2]");
    if (model.dim == 1) c.alpha[1] = 0.0;
    return [c](double, const Point&, const Point&, double) { return c; };
}

McEstimate simulate_policy(const TimeField& u, const DensityPath& m, const ModelSpec& model,
                           const McConfig& cfg, const Policy& policy) {
    cfg.validate(u.grid());
    const PathFields f = precompute(u, m, model);
    const GridSpec& g = f.grid;
    const int steps = steps_for(g.horizon, mc_step(cfg, g), "simulate_value");
    return run_paths(f, model, cfg, policy, steps, [&](const Point& x) { return interpolate(g, f.G, x); });
}

McEstimate simulate_value(const TimeField& u, const DensityPath& m, const ModelSpec& model,
                          const McConfig& cfg) {
    return simulate_policy(u, m, model, cfg, optimal_policy(model));
}

DppResult dpp_check(const TimeField& u, const DensityPath& m, const ModelSpec& model,
                    const McConfig& cfg, double h) {
    cfg.validate(u.grid());
    const GridSpec& g = u.grid();
    if (!(h > 0.0) || h > g.horizon * (1.0 + 1e-12)) throw ConfigError("dpp_check: h must lie in (0, T]");
    const double step = mc_step(cfg, g);
    const int steps = steps_for(h, step, "dpp_check");
    const int level = steps_for(steps * step, g.dt(), "dpp_check");
    const PathFields f = precompute(u, m, model);
    auto at_h = u.level(level);
    const std::vector<double> end(at_h.begin(), at_h.end());
    const McEstimate e = run_paths(f, model, cfg, optimal_policy(model), steps,
                                   [&](const Point& x) { return interpolate(g, end, x); });
    DppResult r;
    r.estimate = e.mean;
    r.std_error = e.std_error;
    r.value = interpolate(g, u.level(0), cfg.x0);
    r.gap = std::abs(r.estimate - r.value);
    return r;
}

ModulusResult modulus_check(const ModelSpec& model, const McConfig& cfg, std::span<const double> hs,
                            Controls controls) {
    if (hs.size() < 4) throw ConfigError("modulus_check: need at least four values of h");
    if (cfg.num_paths < 100) throw ConfigError("McConfig: num_paths must be at least 100");
    if (!(cfg.dt_mc > 0.0)) throw ConfigError("modulus_check: dt_mc must be positive");
    const Policy policy = constant_policy(model, controls);
    const Controls c = policy(0.0, cfg.x0, {0, 0}, 0.0);
    const int dim = model.dim;
    ModulusResult out;
    for (double h : hs) {
        if (!(h > 0.0)) throw ConfigError("modulus_check: h must be positive");
        const int steps = steps_for(h, cfg.dt_mc, "modulus_check");
        const double sigma = std::sqrt(2.0 * c.eta * cfg.dt_mc);
        std::vector<double> samples(static_cast<std::size_t>(cfg.num_paths));
        for (int p = 0; p < cfg.num_paths; ++p) {
            std::mt19937_64 rng(path_seed(cfg.seed, static_cast<std::uint64_t>(p)));
            std::normal_distribution<double> gauss;
            Point d{0.0, 0.0};
            double sup = 0.0;
            for (int k = 0; k < steps; ++k) {
                for (int a = 0; a < dim; ++a) d[a] += c.alpha[a] * cfg.dt_mc + sigma * gauss(rng);
                sup = std::max(sup, std::hypot(d[0], d[1]));
            }
            samples[p] = sup;
        }
        const McEstimate e = summarize(samples, cfg.num_paths);
        out.h.push_back(h);
        out.mean_sup.push_back(e.mean);
        out.std_error.push_back(e.std_error);
        out.constant = std::max(out.constant, e.mean / std::sqrt(h));
    }
    out.exponent = loglog_slope(out.h, out.mean_sup);
    return out;
}

}  // namespace cdmfg
