#include "cdmfg/mfg_fixed_point.hpp"

#include "cdmfg/errors.hpp"
#include "cdmfg/wasserstein.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace cdmfg {

namespace {

void require_matching(const ModelSpec& model, const GridSpec& grid, const DensityPath& path) {
    if (model.dim != grid.dim) throw ConfigError("fixed point: model and grid dimensions differ");
    if (!path.grid().same_lattice(grid)) throw ConfigError("fixed point: density path is on a different grid");
}

int default_stride(const GridSpec& grid, int requested) {
    if (requested > 0) return requested;
    return grid.dim == 1 ? 1 : std::max(1, grid.nt / 32);
}

double pairing(const GridSpec& grid, std::span<const double> a, std::span<const double> b,
               std::span<const double> c, std::span<const double> d) {
    double s = 0.0;
    for (int i = 0; i < grid.nodes(); ++i) s += (a[i] - b[i]) * (c[i] - d[i]);
    return s * grid.cell_volume();
}

double holder_ratio(const DensityPath& m) {
    try {
        return holder_half_diagnostic(m).constant;
    } catch (const ConfigError&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

}  // namespace

CouplingData evaluate_couplings(const ModelSpec& model, const GridSpec& grid, const DensityPath& gamma) {
    require_matching(model, grid, gamma);
    const PeriodicKernel kernel(grid, model.coupling_f.width);
    CouplingData out{TimeField(grid), {}};
    for (int n = 0; n < grid.levels(); ++n) {
        const auto slice = coupling_F_slice(model, kernel, gamma.level(n));
        std::copy(slice.begin(), slice.end(), out.F.level(n).begin());
    }
    out.G = terminal_G_slice(model, grid, kernel, gamma.level(grid.nt));
    return out;
}

PhiResult phi_map(const DensityPath& gamma, const ModelSpec& model, const GridSpec& grid,
                  const HjbOptions& hjb) {
    const CouplingData c = evaluate_couplings(model, grid, gamma);
    TimeField u = solve_hjb(model, c.F, c.G, grid, hjb);
    const TransportOperator op = build_transport_operator(u, model);
    DensityPath m = solve_fp(op, discretize_initial_density(model.m0, grid));
    return {std::move(u), std::move(m)};
}

FixedPointResult picard_solve(const ModelSpec& model, const GridSpec& grid,
                              const FixedPointOptions& options) {
    if (!(options.theta > 0.0 && options.theta <= 1.0)) throw ConfigError("picard_solve: theta must lie in (0, 1]");
    if (!(options.tol > 0.0)) throw ConfigError("picard_solve: tol must be positive");
    if (options.max_iter < 1) throw ConfigError("picard_solve: max_iter must be at least 1");
    const int stride = default_stride(grid, options.gap_stride);

    DensityPath m = options.init ? *options.init
                                 : DensityPath::constant(grid, discretize_initial_density(model.m0, grid));
    require_matching(model, grid, m);

    FixedPointReport report;
    report.damping = options.theta;
    for (int k = 0; k < options.max_iter; ++k) {
        const CouplingData c = evaluate_couplings(model, grid, m);
        const TimeField u = solve_hjb(model, c.F, c.G, grid, options.hjb);
        report.hjb_residual_sup.push_back(hjb_residual(u, model, c.F, options.hjb).max_abs());
        const DensityPath phi = solve_fp(build_transport_operator(u, model),
                                         discretize_initial_density(model.m0, grid));
        report.fp_mass_drift.push_back(phi.max_mass_drift());
        DensityPath next = DensityPath::blend(m, phi, options.theta);
        const double gap = sup_d1(next, m, stride);
        if (!std::isfinite(gap)) throw NumericalError("picard_solve: non-finite gap", k, -1);
        report.gap_history.push_back(gap);
        report.holder_ratio.push_back(holder_ratio(next));
        m = std::move(next);
        report.iterations = k + 1;
        if (gap < options.tol) {
            report.converged = true;
            break;
        }
    }

    const CouplingData c = evaluate_couplings(model, grid, m);
    TimeField u = solve_hjb(model, c.F, c.G, grid, options.hjb);
    report.final_hjb_residual = hjb_residual(u, model, c.F, options.hjb).max_abs();
    const TransportOperator op = build_transport_operator(u, model);
    DensityPath phi = solve_fp(op, discretize_initial_density(model.m0, grid));
    // duality of the driven path against a fixed smooth pair
    std::vector<double> phiT(grid.nodes());
    TimeField psi(grid);
    for (int i = 0; i < grid.nodes(); ++i) {
        const Point x = grid.coords(i);
        phiT[i] = std::cos(2 * std::numbers::pi * x[0] / grid.box_length) + x[1];
        for (int n = 0; n < grid.levels(); ++n) psi(n, i) = std::sin(2 * std::numbers::pi * (x[0] + x[1]) / grid.box_length);
    }
    report.final_duality_gap = check_duality(phi, op, phiT, psi);
    report.final_phi_defect = sup_d1(phi, m, stride);
    return {std::move(u), std::move(m), std::move(phi), std::move(report)};
}

MonotonicityGap monotonicity_gap(const ModelSpec& model, const DensityPath& m1, const DensityPath& m2) {
    const GridSpec& grid = m1.grid();
    if (!m2.grid().same_lattice(grid)) throw ConfigError("monotonicity_gap: grid mismatch");
    const CouplingData c1 = evaluate_couplings(model, grid, m1);
    const CouplingData c2 = evaluate_couplings(model, grid, m2);
    MonotonicityGap out{std::numeric_limits<double>::infinity(), 0.0};
    for (int n = 0; n < grid.levels(); ++n) {
        out.gap_F = std::min(out.gap_F, pairing(grid, c1.F.level(n), c2.F.level(n), m1.level(n), m2.level(n)));
    }
    out.gap_G = pairing(grid, c1.G, c2.G, m1.level(grid.nt), m2.level(grid.nt));
    return out;
}

UniquenessReport uniqueness_crosscheck(const ModelSpec& model, const GridSpec& grid,
                                       const DensityPath& init1, const DensityPath& init2,
                                       const FixedPointOptions& options) {
    FixedPointOptions o1 = options, o2 = options;
    o1.init = init1;
    o2.init = init2;
    const FixedPointResult r1 = picard_solve(model, grid, o1);
    const FixedPointResult r2 = picard_solve(model, grid, o2);
    UniquenessReport out;
    out.first = r1.report;
    out.second = r2.report;
    out.both_converged = r1.report.converged && r2.report.converged;
    if (!out.both_converged) return out;
    out.sup_d1 = sup_d1(r1.m, r2.m, default_stride(grid, options.gap_stride));
    const CouplingData c1 = evaluate_couplings(model, grid, r1.m);
    const CouplingData c2 = evaluate_couplings(model, grid, r2.m);
    for (int n = 1; n < grid.levels(); ++n) {
        out.lasry_lions += grid.dt() * pairing(grid, c1.F.level(n), c2.F.level(n), r1.m.level(n), r2.m.level(n));
    }
    return out;
}

ContinuityMeasurement phi_continuity(const ModelSpec& model, const GridSpec& grid,
                                     const DensityPath& gamma1, const DensityPath& gamma2,
                                     const HjbOptions& hjb, int stride) {
    ContinuityMeasurement out;
    out.input_distance = sup_d1(gamma1, gamma2, stride);
    const PhiResult a = phi_map(gamma1, model, grid, hjb);
    const PhiResult b = phi_map(gamma2, model, grid, hjb);
    out.output_distance = sup_d1(a.m, b.m, stride);
    out.ratio = out.input_distance > 0.0 ? out.output_distance / out.input_distance : 0.0;
    return out;
}

}  // namespace cdmfg
