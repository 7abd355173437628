#pragma once

#include "cdmfg/control_model.hpp"
#include "cdmfg/grid.hpp"

#include <span>
#include <utility>
#include <vector>

namespace cdmfg {

struct HjbOptions {
    // Lax-Friedrichs constant; negative means "use sup |H1_p| of the model".
    double theta_lf = -1.0;
    int quadrature_order = 16;
};

double lax_friedrichs_theta(const ModelSpec& model, const HjbOptions& options);

// Throws CflError if the grid is too coarse in time for the model.
void require_hjb_cfl(const ModelSpec& model, const GridSpec& grid, const HjbOptions& options);

// Explicit monotone backward march for u_t + H2(t,x,Lap u) + H1(t,x,Du) + F = 0,
// u(T) = G:
//   u^n = u^{n+1} + dt * [H2(t, x, Lap_h u^{n+1}) + H1_LF(t, x, D-/+ u^{n+1}) + F^{n+1}]
// with Hamiltonians evaluated at t = t_{n+1}. H1_LF adds the Lax-Friedrichs
// viscosity theta * (p+ - p-)/2 per axis, which keeps every coefficient of u^{n+1}
// nonnegative under the CFL bound.
TimeField solve_hjb(const ModelSpec& model, const TimeField& F_path, std::span<const double> G,
                    const GridSpec& grid, const HjbOptions& options = {});

// Same march for the exponentially rescaled unknown v = e^{-lambda (T-t)} u, which solves
//   -v_t - H2_l(t,x,Lap v) - H1_l(t,x,Dv) - F_l + lambda v = 0,  v(T) = G,
// with H_l(t,x,z) = e^{-lambda(T-t)} H(t,x,e^{lambda(T-t)} z) and F_l = e^{-lambda(T-t)} F.
TimeField solve_hjb_discounted(const ModelSpec& model, const TimeField& F_path,
                               std::span<const double> G, const GridSpec& grid, double lambda,
                               const HjbOptions& options = {});

enum class TransformDirection { forward, inverse };

// forward: v = e^{-lambda (T-t)} u;  inverse: u = e^{lambda (T-t)} v.
TimeField lambda_transform(const TimeField& u, double lambda, TransformDirection direction);

// r^n = (u^{n+1} - u^n)/dt + H2(Lap_h u^{n+1}) + H1_LF(D u^{n+1}) + F^{n+1} for n < nt;
// level nt of the result is zero.
TimeField hjb_residual(const TimeField& u, const ModelSpec& model, const TimeField& F_path,
                       const HjbOptions& options = {});

struct LinearizedCoefficients {
    TimeField V;             // int_0^1 H2_q(t, x, s Lap_h u) ds
    std::vector<TimeField> Z;  // per axis: int_0^1 H1_p(t, x, s D_h u) ds
    TimeField c;             // H2(t, x, 0) + H1(t, x, 0)
};

// Coefficients of the linear equation satisfied by u. Integrals use Gauss-Legendre
// on the sub-intervals between the Hamiltonians' known kinks along the ray.
LinearizedCoefficients linearize(const TimeField& u, const ModelSpec& model,
                                 const HjbOptions& options = {});

// Worst node of |V Lap_h u + Z . D_h u + c - H2(Lap_h u) - H1(D_h u)| over all levels.
double linearization_defect(const TimeField& u, const ModelSpec& model,
                            const LinearizedCoefficients& coeffs);

// Nodes and weights of the n-point Gauss-Legendre rule on [0, 1].
std::vector<std::pair<double, double>> gauss_legendre_unit(int order);

struct MonotonicityCertificate {
    double min_offdiagonal = 0.0;
    double min_diagonal = 0.0;
    double max_diagonal = 0.0;

    bool monotone() const {
        return min_offdiagonal >= 0.0 && min_diagonal >= 0.0 && max_diagonal <= 1.0;
    }
};

// Partial derivatives du^n_i / du^{n+1}_j of the scheme with frozen argmins.
MonotonicityCertificate monotonicity_certificate(const TimeField& u, const ModelSpec& model,
                                                 const HjbOptions& options = {});

}  // namespace cdmfg
