#include "cdmfg/fp_solver.hpp"

#include "cdmfg/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cdmfg {

namespace {

constexpr double kNegativeTolerance = 1e-14;
constexpr double kMassTolerance = 1e-12;

std::vector<double> level_masses(const TimeField& f) {
    std::vector<double> out(static_cast<std::size_t>(f.levels()));
    for (int n = 0; n < f.levels(); ++n) out[n] = slice_mass(f.grid(), f.level(n));
    return out;
}

}  // namespace

void TransportOperator::apply_generator(int level, std::span<const double> v,
                                        std::span<double> out) const {
    const double h = grid.dx();
    auto A = a.level(level);
    for (int i = 0; i < grid.nodes(); ++i) {
        double acc = A[i] * laplacian_at(grid, v, i);
        for (int k = 0; k < grid.dim; ++k) {
            const double bk = b[k](level, i);
            if (bk > 0.0) acc += bk * (v[grid.neighbor(i, k, 1)] - v[i]) / h;
            else if (bk < 0.0) acc += bk * (v[i] - v[grid.neighbor(i, k, -1)]) / h;
        }
        out[i] = acc;
    }
}

void TransportOperator::apply_adjoint(int level, std::span<const double> m,
                                      std::span<double> out) const {
    const double h = grid.dx();
    const double inv_h2 = 1.0 / (h * h);
    auto A = a.level(level);
    for (int i = 0; i < grid.nodes(); ++i) {
        double acc = 0.0;
        for (int k = 0; k < grid.dim; ++k) {
            const int ip = grid.neighbor(i, k, 1);
            const int im = grid.neighbor(i, k, -1);
            acc += (A[ip] * m[ip] + A[im] * m[im] - 2.0 * A[i] * m[i]) * inv_h2;
            const double bi = b[k](level, i);
            const double bm = b[k](level, im);
            const double bp = b[k](level, ip);
            acc += (std::max(bm, 0.0) * m[im] - std::min(bp, 0.0) * m[ip] - std::abs(bi) * m[i]) / h;
        }
        out[i] = acc;
    }
}

double TransportOperator::max_diffusion() const {
    double m = 0.0;
    for (double v : a.raw()) m = std::max(m, v);
    return m;
}

double TransportOperator::max_drift() const {
    double m = 0.0;
    for (const auto& c : b) m = std::max(m, c.max_abs());
    return m;
}

TransportOperator build_transport_operator(const TimeField& u, const ModelSpec& model) {
    const GridSpec& grid = u.grid();
    const auto& H = model.hamiltonians;
    TransportOperator op{grid, TimeField(grid), {}};
    for (int k = 0; k < grid.dim; ++k) op.b.emplace_back(grid);
    const double lo = model.bounds.eta_min() * (1.0 - 1e-12);
    const double hi = model.bounds.eta_max() * (1.0 + 1e-12);
    for (int n = 0; n < grid.levels(); ++n) {
        const double t = grid.time(n);
        auto v = u.level(n);
        for (int i = 0; i < grid.nodes(); ++i) {
            const Point x = grid.coords(i);
            const double a = eval_H2(H, t, x, laplacian_at(grid, v, i)).derivative;
            if (!(a >= lo && a <= hi)) {
                std::ostringstream err;
                err << "build_transport_operator: diffusion coefficient " << a
                    << " outside [lambda1^2/2, lambda2^2/2] at level " << n << ", node " << i;
                throw ContractError(err.str());
            }
            op.a(n, i) = a;
            const Point drift = eval_H1(H, t, x, gradient_at(grid, v, i)).derivative;
            for (int k = 0; k < grid.dim; ++k) op.b[k](n, i) = drift[k];
        }
    }
    return op;
}

DensityPath::DensityPath(TimeField density) : density_(std::move(density)) {
    mass_ = level_masses(density_);
    for (int n = 0; n < density_.levels(); ++n) {
        if (std::abs(mass_[n] - 1.0) > kMassTolerance) {
            std::ostringstream err;
            err << "DensityPath: level " << n << " has mass " << mass_[n];
            throw ContractError(err.str());
        }
    }
    const double lo = min_value();
    if (lo < -kNegativeTolerance || !density_.all_finite()) {
        std::ostringstream err;
        err << "DensityPath: negative or non-finite density (min " << lo << ")";
        throw ContractError(err.str());
    }
}

DensityPath DensityPath::constant(const GridSpec& grid, std::span<const double> slice) {
    TimeField f(grid);
    for (int n = 0; n < grid.levels(); ++n) std::copy(slice.begin(), slice.end(), f.level(n).begin());
    return DensityPath(std::move(f));
}

DensityPath DensityPath::blend(const DensityPath& a, const DensityPath& b, double theta) {
    if (!a.grid().same_lattice(b.grid())) throw ConfigError("DensityPath::blend: grid mismatch");
    TimeField f(a.grid());
    const auto& x = a.field().raw();
    const auto& y = b.field().raw();
    for (std::size_t i = 0; i < x.size(); ++i) f.raw()[i] = (1.0 - theta) * x[i] + theta * y[i];
    return DensityPath(std::move(f));
}

double DensityPath::max_mass_drift() const {
    double d = 0.0;
    for (double m : mass_) d = std::max(d, std::abs(m - mass_.front()));
    return d;
}

double DensityPath::min_value() const {
    const auto& v = density_.raw();
    return v.empty() ? 0.0 : *std::min_element(v.begin(), v.end());
}

DensityPath solve_fp(const TransportOperator& op, std::span<const double> m0) {
    const GridSpec& grid = op.grid;
    if (static_cast<int>(m0.size()) != grid.nodes()) throw ConfigError("solve_fp: m0 has the wrong size");
    for (int i = 0; i < grid.nodes(); ++i) {
        if (!(m0[i] >= 0.0)) {
            std::ostringstream err;
            err << "solve_fp: initial density is negative or non-finite at node " << i;
            throw ContractError(err.str());
        }
    }
    if (std::abs(slice_mass(grid, m0) - 1.0) > kMassTolerance) {
        throw ContractError("solve_fp: initial density does not have unit mass");
    }
    require_cfl(grid, op.max_diffusion(), op.max_drift());

    const double dt = grid.dt();
    TimeField m(grid);
    std::copy(m0.begin(), m0.end(), m.level(0).begin());
    std::vector<double> flux(static_cast<std::size_t>(grid.nodes()));
    const double mass0 = slice_mass(grid, m0);
    for (int n = 0; n < grid.nt; ++n) {
        auto cur = m.level(n);
        auto next = m.level(n + 1);
        op.apply_adjoint(n + 1, cur, flux);
        for (int i = 0; i < grid.nodes(); ++i) {
            next[i] = cur[i] + dt * flux[i];
            if (next[i] < -kNegativeTolerance || !std::isfinite(next[i])) {
                std::ostringstream err;
                err << "solve_fp: density " << next[i] << " at level " << n + 1 << ", node " << i;
                throw ContractError(err.str());
            }
        }
        if (std::abs(slice_mass(grid, next) - mass0) > kMassTolerance) {
            throw ContractError("solve_fp: mass drift beyond tolerance");
        }
    }
    return DensityPath(std::move(m));
}

TimeField dual_march(const TransportOperator& op, std::span<const double> phiT,
                     const TimeField& psi) {
    const GridSpec& grid = op.grid;
    if (!psi.grid().same_lattice(grid)) throw ConfigError("dual_march: grid mismatch");
    TimeField phi(grid);
    std::copy(phiT.begin(), phiT.end(), phi.level(grid.nt).begin());
    std::vector<double> Lphi(static_cast<std::size_t>(grid.nodes()));
    const double dt = grid.dt();
    for (int n = grid.nt - 1; n >= 0; --n) {
        auto next = phi.level(n + 1);
        auto cur = phi.level(n);
        auto source = psi.level(n + 1);
        op.apply_generator(n + 1, next, Lphi);
        for (int i = 0; i < grid.nodes(); ++i) cur[i] = next[i] + dt * (Lphi[i] + source[i]);
    }
    return phi;
}

double check_duality(const DensityPath& m, const TransportOperator& op,
                     std::span<const double> phiT, const TimeField& psi) {
    const GridSpec& grid = op.grid;
    if (!m.grid().same_lattice(grid) || !psi.grid().same_lattice(grid)) {
        throw ConfigError("check_duality: grid mismatch");
    }
    const TimeField phi = dual_march(op, phiT, psi);
    auto dot = [&](std::span<const double> x, std::span<const double> y) {
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
        return s;
    };
    double running = 0.0;
    for (int n = 0; n < grid.nt; ++n) running += dot(psi.level(n + 1), m.level(n));
    const double gap = dot(phiT, m.level(grid.nt)) + grid.dt() * running -
                       dot(phi.level(0), m.level(0));
    return std::abs(gap) * grid.cell_volume();
}

double first_moment_spread(const DensityPath& m) {
    const GridSpec& grid = m.grid();
    const double vol = grid.cell_volume();
    double worst = 0.0;
    for (int n = 0; n < grid.levels(); ++n) {
        auto slice = m.level(n);
        Point mean{0.0, 0.0};
        for (int i = 0; i < grid.nodes(); ++i) {
            const Point x = grid.coords(i);
            for (int k = 0; k < grid.dim; ++k) mean[k] += x[k] * slice[i] * vol;
        }
        double spread = 0.0;
        for (int i = 0; i < grid.nodes(); ++i) {
            const Point x = grid.coords(i);
            spread += std::hypot(x[0] - mean[0], x[1] - mean[1]) * slice[i] * vol;
        }
        worst = std::max(worst, spread);
    }
    return worst;
}

std::vector<double> lp_norms(const DensityPath& m, double p) {
    const GridSpec& grid = m.grid();
    std::vector<double> out;
    for (int n = 0; n < grid.levels(); ++n) {
        double acc = 0.0;
        for (double v : m.level(n)) acc += std::pow(std::abs(v), p);
        out.push_back(std::pow(acc * grid.cell_volume(), 1.0 / p));
    }
    return out;
}

}  // namespace cdmfg
