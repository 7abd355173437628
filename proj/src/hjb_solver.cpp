#include "cdmfg/hjb_solver.hpp"

#include "cdmfg/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace cdmfg {

namespace {

void require_same_grid(const GridSpec& a, const GridSpec& b, const char* what) {
    if (!a.same_lattice(b)) throw ConfigError(std::string(what) + ": grid mismatch");
}

void require_horizon(const ModelSpec& model, const GridSpec& grid) {
    if (std::abs(model.horizon - grid.horizon) > 1e-12 * model.horizon) {
        throw ConfigError("model.horizon and grid horizon differ");
    }
}

// H2(q) + H1_LF(p-, p+) at one node; `scale` = e^{lambda (T - t)} rescales the
// arguments and values for the discounted form (scale = 1 otherwise).
double hamiltonian_term(const ModelSpec& model, const GridSpec& grid, double theta, double t,
                        std::span<const double> v, int node, double scale) {
    const Point x = grid.coords(node);
    const double q = laplacian_at(grid, v, node);
    const Point p = gradient_at(grid, v, node);
    double visc = 0.0;
    for (int axis = 0; axis < grid.dim; ++axis) {
        const double pp = forward_diff(grid, v, node, axis);
        const double pm = backward_diff(grid, v, node, axis);
        visc += 0.5 * theta * (pp - pm);
    }
    if (scale == 1.0) {
        return eval_H2(model.hamiltonians, t, x, q).value +
               eval_H1(model.hamiltonians, t, x, p).value + visc;
    }
    const Point ps{scale * p[0], scale * p[1]};
    return (eval_H2(model.hamiltonians, t, x, scale * q).value +
            eval_H1(model.hamiltonians, t, x, ps).value) /
               scale +
           visc;
}

void check_inputs(const ModelSpec& model, const TimeField& F_path, std::span<const double> G,
                  const GridSpec& grid) {
    grid.validate();
    require_horizon(model, grid);
    require_same_grid(F_path.grid(), grid, "solve_hjb: F_path");
    if (static_cast<int>(G.size()) != grid.nodes()) {
        throw ConfigError("solve_hjb: terminal slice has the wrong size");
    }
}

TimeField march(const ModelSpec& model, const TimeField& F_path, std::span<const double> G,
                const GridSpec& grid, double lambda, const HjbOptions& options) {
    const double theta = lax_friedrichs_theta(model, options);
    const double dt = grid.dt();
    const double T = grid.horizon;
    TimeField u(grid);
    auto terminal = u.level(grid.nt);
    for (int k = 0; k < grid.nodes(); ++k) {
        if (!std::isfinite(G[k])) throw NumericalError("solve_hjb: non-finite terminal data", grid.nt, k);
        terminal[k] = G[k];
    }
    for (int n = grid.nt - 1; n >= 0; --n) {
        const double t = grid.time(n + 1);
        const double scale = lambda == 0.0 ? 1.0 : std::exp(lambda * (T - t));
        auto next = u.level(n + 1);
        auto cur = u.level(n);
        auto F = F_path.level(n + 1);
        for (int k = 0; k < grid.nodes(); ++k) {
            const double rhs = hamiltonian_term(model, grid, theta, t, next, k, scale) +
                               F[k] / scale - lambda * next[k];
            const double value = next[k] + dt * rhs;
            if (!std::isfinite(value)) {
                std::ostringstream err;
                err << "solve_hjb: non-finite value at level " << n << ", node " << k;
                throw NumericalError(err.str(), n, k);
            }
            cur[k] = value;
        }
    }
    return u;
}

}  // namespace

double lax_friedrichs_theta(const ModelSpec& model, const HjbOptions& options) {
    return options.theta_lf >= 0.0 ? options.theta_lf : model.hamiltonians.drift_sup();
}

void require_hjb_cfl(const ModelSpec& model, const GridSpec& grid, const HjbOptions& options) {
    require_cfl(grid, model.bounds.eta_max(), lax_friedrichs_theta(model, options));
}

TimeField solve_hjb(const ModelSpec& model, const TimeField& F_path, std::span<const double> G,
                    const GridSpec& grid, const HjbOptions& options) {
    check_inputs(model, F_path, G, grid);
    require_hjb_cfl(model, grid, options);
    return march(model, F_path, G, grid, 0.0, options);
}

TimeField solve_hjb_discounted(const ModelSpec& model, const TimeField& F_path,
                               std::span<const double> G, const GridSpec& grid, double lambda,
                               const HjbOptions& options) {
    check_inputs(model, F_path, G, grid);
    if (!(lambda >= 0.0)) throw ConfigError("solve_hjb_discounted: lambda must be >= 0");
    require_hjb_cfl(model, grid, options);
    const double h = grid.dx();
    const double theta = lax_friedrichs_theta(model, options);
    const double diag = grid.dt() * (2.0 * grid.dim * model.bounds.eta_max() / (h * h) +
                                     grid.dim * theta / h + lambda);
    if (diag > 1.0 + 1e-12) {
        throw CflError("solve_hjb_discounted: dt too large once the discount term is included",
                       static_cast<int>(std::ceil(grid.nt * diag)));
    }
    return march(model, F_path, G, grid, lambda, options);
}

TimeField lambda_transform(const TimeField& u, double lambda, TransformDirection direction) {
    const GridSpec& grid = u.grid();
    TimeField out(grid);
    const double sign = direction == TransformDirection::forward ? -1.0 : 1.0;
    for (int n = 0; n < grid.levels(); ++n) {
        const double factor = std::exp(sign * lambda * (grid.horizon - grid.time(n)));
        auto src = u.level(n);
        auto dst = out.level(n);
        for (int k = 0; k < grid.nodes(); ++k) dst[k] = factor * src[k];
    }
    return out;
}

TimeField hjb_residual(const TimeField& u, const ModelSpec& model, const TimeField& F_path,
                       const HjbOptions& options) {
    const GridSpec& grid = u.grid();
    require_same_grid(F_path.grid(), grid, "hjb_residual");
    const double theta = lax_friedrichs_theta(model, options);
    const double dt = grid.dt();
    TimeField r(grid);
    for (int n = 0; n < grid.nt; ++n) {
        const double t = grid.time(n + 1);
        auto next = u.level(n + 1);
        auto cur = u.level(n);
        auto F = F_path.level(n + 1);
        auto out = r.level(n);
        for (int k = 0; k < grid.nodes(); ++k) {
            out[k] = (next[k] - cur[k]) / dt +
                     hamiltonian_term(model, grid, theta, t, next, k, 1.0) + F[k];
        }
    }
    return r;
}

std::vector<std::pair<double, double>> gauss_legendre_unit(int order) {
    if (order < 1) throw ConfigError("quadrature order must be >= 1");
    std::vector<std::pair<double, double>> rule(static_cast<std::size_t>(order));
    const int n = order;
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 1; j <= n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
            }
            dp = n * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        const double w = 2.0 / ((1.0 - z * z) * dp * dp);
        // map [-1, 1] -> [0, 1]
        rule[i] = {0.5 * (1.0 - z), 0.5 * w};
        rule[n - 1 - i] = {0.5 * (1.0 + z), 0.5 * w};
    }
    return rule;
}

namespace {

template <class Integrand>
double integrate_unit(const std::vector<std::pair<double, double>>& rule,
                      const std::vector<double>& breaks, Integrand&& f) {
    double acc = 0.0;
    double a = 0.0;
    auto piece = [&](double lo, double hi) {
        const double len = hi - lo;
        if (len <= 0.0) return;
        for (const auto& [s, w] : rule) acc += len * w * f(lo + len * s);
    };
    for (double b : breaks) {
        piece(a, b);
        a = b;
    }
    piece(a, 1.0);
    return acc;
}

}  // namespace

LinearizedCoefficients linearize(const TimeField& u, const ModelSpec& model,
                                 const HjbOptions& options) {
    const GridSpec& grid = u.grid();
    const auto rule = gauss_legendre_unit(options.quadrature_order);
    const auto& H = model.hamiltonians;
    LinearizedCoefficients out{TimeField(grid), {}, TimeField(grid)};
    for (int a = 0; a < grid.dim; ++a) out.Z.emplace_back(grid);
    for (int n = 0; n < grid.levels(); ++n) {
        const double t = grid.time(n);
        auto v = u.level(n);
        for (int k = 0; k < grid.nodes(); ++k) {
            const Point x = grid.coords(k);
            const double q = laplacian_at(grid, v, k);
            const Point p = gradient_at(grid, v, k);
            out.V(n, k) = integrate_unit(rule, ray_breakpoints_H2(H, q), [&](double s) {
                return eval_H2(H, t, x, s * q).derivative;
            });
            const auto breaks = ray_breakpoints_H1(H, p);
            for (int a = 0; a < grid.dim; ++a) {
                out.Z[a](n, k) = integrate_unit(rule, breaks, [&](double s) {
                    return eval_H1(H, t, x, Point{s * p[0], s * p[1]}).derivative[a];
                });
            }
            out.c(n, k) = eval_H2(H, t, x, 0.0).value + eval_H1(H, t, x, Point{}).value;
        }
    }
    return out;
}

double linearization_defect(const TimeField& u, const ModelSpec& model,
                            const LinearizedCoefficients& coeffs) {
    const GridSpec& grid = u.grid();
    const auto& H = model.hamiltonians;
    double worst = 0.0;
    for (int n = 0; n < grid.levels(); ++n) {
        const double t = grid.time(n);
        auto v = u.level(n);
        for (int k = 0; k < grid.nodes(); ++k) {
            const Point x = grid.coords(k);
            const double q = laplacian_at(grid, v, k);
            const Point p = gradient_at(grid, v, k);
            double lin = coeffs.V(n, k) * q + coeffs.c(n, k);
            for (int a = 0; a < grid.dim; ++a) lin += coeffs.Z[a](n, k) * p[a];
            const double exact = eval_H2(H, t, x, q).value + eval_H1(H, t, x, p).value;
            worst = std::max(worst, std::abs(lin - exact));
        }
    }
    return worst;
}

MonotonicityCertificate monotonicity_certificate(const TimeField& u, const ModelSpec& model,
                                                 const HjbOptions& options) {
    const GridSpec& grid = u.grid();
    const double theta = lax_friedrichs_theta(model, options);
    const double dt = grid.dt();
    const double h = grid.dx();
    const auto& H = model.hamiltonians;
    MonotonicityCertificate cert{std::numeric_limits<double>::infinity(),
                                 std::numeric_limits<double>::infinity(),
                                 -std::numeric_limits<double>::infinity()};
    for (int n = 0; n < grid.nt; ++n) {
        const double t = grid.time(n + 1);
        auto v = u.level(n + 1);
        for (int k = 0; k < grid.nodes(); ++k) {
            const Point x = grid.coords(k);
            const double eta = eval_H2(H, t, x, laplacian_at(grid, v, k)).derivative;
            const Point alpha = eval_H1(H, t, x, gradient_at(grid, v, k)).derivative;
            double diag = 1.0;
            for (int a = 0; a < grid.dim; ++a) {
                const double up = dt * (eta / (h * h) + (alpha[a] + theta) / (2.0 * h));
                const double down = dt * (eta / (h * h) + (theta - alpha[a]) / (2.0 * h));
                cert.min_offdiagonal = std::min({cert.min_offdiagonal, up, down});
                diag -= dt * (2.0 * eta / (h * h) + theta / h);
            }
            cert.min_diagonal = std::min(cert.min_diagonal, diag);
            cert.max_diagonal = std::max(cert.max_diagonal, diag);
        }
    }
    return cert;
}

}  // namespace cdmfg
