#pragma once

#include "cdmfg/control_model.hpp"
#include "cdmfg/grid.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace cdmfg {

// max over levels, nodes and axes of |forward difference|.
double lipschitz_constant(const TimeField& u);

// Signed max over levels, nodes and axes of (u(x+h) + u(x-h) - 2u(x)) / h^2.
double semiconcavity_constant(const TimeField& u);

struct PointTriple {
    Point x, y, z;
};

// Worst over triples and levels of
//   [u(x) + u(y) - 2u(z)] / [delta + (|x-z|^4 + |y-z|^4 + |x+y-2z|^2) / delta].
// Points must be grid nodes; distances are flat.
double three_point_check(const TimeField& u, std::span<const PointTriple> triples, double delta);

// Random triples on the lattice of lattice_nx cells per axis (which must divide the
// grid's nx, so the same triples are on-grid for every refinement), with z in the
// middle half of the box and offsets of at most max_steps lattice cells.
std::vector<PointTriple> sample_triples(const GridSpec& grid, int lattice_nx, int count,
                                        int max_steps, std::uint64_t seed);

struct KrylovSample {
    double t = 0.0;
    Point x{0.0, 0.0};
    double beta = 1.0;
    std::array<double, 4> B{0, 0, 0, 0};  // row-major d x d, symmetric
    Point p_under{0.0, 0.0};
    double s = 0.0;
};

// M(t,x,beta,B,p,s) = beta H2(t,x,tr B / beta) + beta H1(t,x,p / beta).
double krylov_M(const ModelSpec& model, const KrylovSample& k);

// Labels: homogeneity, ellipticity, concavity_B, directional_second, derivative_bounds,
// time_space_growth. Ellipticity is certified against nu = lambda1^2/2.
HypothesisReport class_M_check(const ModelSpec& model, std::span<const KrylovSample> samples,
                               double constant_bound = 10.0, std::uint64_t seed = 1);

std::vector<KrylovSample> random_krylov_samples(const ModelSpec& model, int count,
                                                std::uint64_t seed);

}  // namespace cdmfg
