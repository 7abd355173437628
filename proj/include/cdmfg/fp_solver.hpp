#pragma once

#include "cdmfg/control_model.hpp"
#include "cdmfg/grid.hpp"

#include <span>
#include <vector>

namespace cdmfg {

// Coefficients a = H2_q(t, x, Lap_h u) and b = H1_p(t, x, D_h u) at every level.
// The step n -> n+1 uses the coefficients of level n+1, matching the HJB march.
// Generator: (L v)_i = a_i Lap_h v_i + sum_k [b_k^+ D_k^+ v_i + b_k^- D_k^- v_i].
struct TransportOperator {
    GridSpec grid;
    TimeField a;
    std::vector<TimeField> b;  // one component per axis

    // out = L v with the coefficients of `level`.
    void apply_generator(int level, std::span<const double> v, std::span<double> out) const;
    // out = L^T m; contains Lap_h(a m) - div_h(b m) in upwind flux form.
    void apply_adjoint(int level, std::span<const double> m, std::span<double> out) const;

    double max_diffusion() const;
    double max_drift() const;  // max over axes and nodes of |b_k|
};

// Throws ContractError if any a leaves [lambda1^2/2, lambda2^2/2].
TransportOperator build_transport_operator(const TimeField& u, const ModelSpec& model);

// Density over all time levels with its per-level mass (sum * dx^d).
class DensityPath {
public:
    DensityPath() = default;
    // Validates nonnegativity (>= -1e-14) and unit mass within 1e-12 on every level.
    explicit DensityPath(TimeField density);

    static DensityPath constant(const GridSpec& grid, std::span<const double> slice);
    // (1 - theta) * a + theta * b
    static DensityPath blend(const DensityPath& a, const DensityPath& b, double theta);

    const TimeField& field() const { return density_; }
    const GridSpec& grid() const { return density_.grid(); }
    std::span<const double> level(int n) const { return density_.level(n); }
    const std::vector<double>& mass() const { return mass_; }
    double max_mass_drift() const;
    double min_value() const;

private:
    TimeField density_;
    std::vector<double> mass_;
};

// m^{n+1} = (I + dt L_{n+1}^T) m^n. Throws CflError when the coefficients make
// I + dt L non-monotone, ContractError on negative initial data or a positivity
// or mass failure.
DensityPath solve_fp(const TransportOperator& op, std::span<const double> m0);

// phi^n = phi^{n+1} + dt (L_{n+1} phi^{n+1} + psi^{n+1}), phi^{nt} = phiT.
TimeField dual_march(const TransportOperator& op, std::span<const double> phiT,
                     const TimeField& psi);

// |sum phi_T m^{nt} + dt sum_{n<nt} psi^{n+1} . m^n - sum phi^0 m^0| * dx^d
double check_duality(const DensityPath& m, const TransportOperator& op,
                     std::span<const double> phiT, const TimeField& psi);

// sup over t of sum |x - mean| m dx^d (flat coordinates).
double first_moment_spread(const DensityPath& m);

// Grid L^p norm of the density at every level.
std::vector<double> lp_norms(const DensityPath& m, double p);

}  // namespace cdmfg
