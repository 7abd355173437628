#pragma once

#include "cdmfg/control_model.hpp"
#include "cdmfg/fp_solver.hpp"
#include "cdmfg/grid.hpp"
#include "cdmfg/hjb_solver.hpp"

#include <optional>
#include <vector>

namespace cdmfg {

// F(t, x, gamma(t)) on every level and G(x, gamma(T)).
struct CouplingData {
    TimeField F;
    std::vector<double> G;
};

CouplingData evaluate_couplings(const ModelSpec& model, const GridSpec& grid, const DensityPath& gamma);

struct PhiResult {
    TimeField u;
    DensityPath m;
};

// u = HJB with couplings frozen at gamma, m = FP driven by u from the model's m0.
PhiResult phi_map(const DensityPath& gamma, const ModelSpec& model, const GridSpec& grid,
                  const HjbOptions& hjb = {});

struct FixedPointOptions {
    double theta = 0.5;
    double tol = 1e-4;
    int max_iter = 50;
    // Levels between evaluations of the sup_t d1 gap; 0 picks 1 in 1D and nt/32 in 2D.
    int gap_stride = 0;
    HjbOptions hjb;
    // Starting path; defaults to the constant-in-time discretized m0.
    std::optional<DensityPath> init;
};

struct FixedPointReport {
    int iterations = 0;
    std::vector<double> gap_history;          // sup_t d1(m^{k+1}, m^k)
    std::vector<double> hjb_residual_sup;     // residual of u_k against F(m^k)
    std::vector<double> fp_mass_drift;        // of Phi(m^k)
    std::vector<double> holder_ratio;         // max d1/sqrt(tau) of each iterate, NaN if unavailable
    bool converged = false;
    double damping = 0.5;
    // At the returned pair: residual of u against F(m), duality gap of the FP path
    // driven by u, and sup_t d1 between that path and m.
    double final_hjb_residual = 0.0;
    double final_duality_gap = 0.0;
    double final_phi_defect = 0.0;
};

struct FixedPointResult {
    TimeField u;            // HJB solution with couplings at m
    DensityPath m;          // final iterate
    DensityPath phi_of_m;   // FP path driven by u
    FixedPointReport report;
};

// m^{k+1} = (1 - theta) m^k + theta Phi(m^k) until sup_t d1(m^{k+1}, m^k) < tol.
// Non-convergence is reported, not thrown.
FixedPointResult picard_solve(const ModelSpec& model, const GridSpec& grid,
                              const FixedPointOptions& options = {});

struct MonotonicityGap {
    double gap_F = 0.0;  // min over t of sum (F(m1) - F(m2)) (m1 - m2) dx^d
    double gap_G = 0.0;  // same for G at T
};

MonotonicityGap monotonicity_gap(const ModelSpec& model, const DensityPath& m1, const DensityPath& m2);

struct UniquenessReport {
    bool both_converged = false;
    double sup_d1 = 0.0;        // between the two limits
    double lasry_lions = 0.0;   // sum over levels of (F(m1) - F(m2)) (m1 - m2) dx^d dt
    FixedPointReport first, second;
};

// Runs picard_solve from both starting paths and compares the limits; the comparison
// is skipped (fields left at zero) when either run does not converge.
UniquenessReport uniqueness_crosscheck(const ModelSpec& model, const GridSpec& grid,
                                       const DensityPath& init1, const DensityPath& init2,
                                       const FixedPointOptions& options = {});

struct ContinuityMeasurement {
    double input_distance = 0.0;   // sup_t d1(gamma1, gamma2)
    double output_distance = 0.0;  // sup_t d1(Phi(gamma1), Phi(gamma2))
    double ratio = 0.0;            // K = output / input
};

ContinuityMeasurement phi_continuity(const ModelSpec& model, const GridSpec& grid,
                                     const DensityPath& gamma1, const DensityPath& gamma2,
                                     const HjbOptions& hjb = {}, int stride = 1);

}  // namespace cdmfg
