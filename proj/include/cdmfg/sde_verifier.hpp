#pragma once

#include "cdmfg/control_model.hpp"
#include "cdmfg/fp_solver.hpp"
#include "cdmfg/grid.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace cdmfg {

struct McConfig {
    int num_paths = 10000;
    double dt_mc = 0.0;  // 0 uses the grid's dt
    std::uint64_t seed = 1;
    Point x0{0.5, 0.5};
    bool antithetic = false;

    // Throws ConfigError unless num_paths >= 100 and dt_mc <= grid dt.
    void validate(const GridSpec& grid) const;
};

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    int num_paths = 0;
};

struct Controls {
    Point alpha{0.0, 0.0};
    double eta = 1.0;  // sigma^2 / 2
};

// Feedback rule evaluated at (t, x, D_h u, Lap_h u) interpolated at the path.
using Policy = std::function<Controls(double t, const Point& x, const Point& p, double q)>;

// The argmins of the Hamiltonians: alpha* = H1_p, eta* = H2_q.
Policy optimal_policy(const ModelSpec& model);
// Fixed controls, checked against the control sets.
Policy constant_policy(const ModelSpec& model, Controls c);

// Cost J of Euler-Maruyama paths on the torus started at (0, x0) under `policy`,
// with running cost L1 + L3 + F(t, X, m(t)) and terminal cost G(X_T, m(T)).
McEstimate simulate_value(const TimeField& u, const DensityPath& m, const ModelSpec& model,
                          const McConfig& cfg);
McEstimate simulate_policy(const TimeField& u, const DensityPath& m, const ModelSpec& model,
                           const McConfig& cfg, const Policy& policy);

struct DppResult {
    double gap = 0.0;       // |estimate - u(0, x0)|
    double estimate = 0.0;  // running cost on [0, h] + u(h, X_h)
    double std_error = 0.0;
    double value = 0.0;     // u(0, x0)
};

// h must be a multiple of the MC step and at most T.
DppResult dpp_check(const TimeField& u, const DensityPath& m, const ModelSpec& model,
                    const McConfig& cfg, double h);

struct ModulusResult {
    std::vector<double> h;
    std::vector<double> mean_sup;  // E sup_{s <= h} |X_s - x0|
    std::vector<double> std_error;
    double exponent = 0.0;
    double constant = 0.0;  // max of mean_sup / sqrt(h)
};

// Fixed controls; hs must hold at least four positive values, each a multiple of dt_mc.
ModulusResult modulus_check(const ModelSpec& model, const McConfig& cfg, std::span<const double> hs,
                            Controls controls);

// Reproducible per-path seed.
std::uint64_t path_seed(std::uint64_t seed, std::uint64_t path);

// Deterministic pairwise sum.
double pairwise_sum(std::span<const double> v);

}  // namespace cdmfg
