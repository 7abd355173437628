#pragma once

#include "cdmfg/fp_solver.hpp"
#include "cdmfg/grid.hpp"

#include <span>
#include <vector>

namespace cdmfg {

// Probability weights on the nodes of a grid (density times cell volume).
class GridMeasure {
public:
    // From a density slice; values down to -1e-14 are treated as zero.
    GridMeasure(const GridSpec& grid, std::span<const double> density);
    static GridMeasure from_weights(const GridSpec& grid, std::vector<double> weights);

    const GridSpec& grid() const { return grid_; }
    const std::vector<double>& weights() const { return weights_; }
    double total() const;

private:
    GridMeasure(const GridSpec& grid, std::vector<double> weights, bool);
    GridSpec grid_;
    std::vector<double> weights_;
};

// Largest per-axis node count solved exactly in 2D; finer grids are aggregated first.
inline constexpr int kMaxTransportAxis = 32;

// Wasserstein-1 distance with the flat (non-periodic) Euclidean ground cost.
// 1D: sum |CDF1 - CDF2| dx. 2D: exact transportation problem on <= 32^2 supports.
double d1(const GridMeasure& m1, const GridMeasure& m2);
double d1(const GridSpec& grid, std::span<const double> density1, std::span<const double> density2);

// Exact optimal transport cost between point masses (supplies at `from`, demands at
// `to`, equal totals) with Euclidean cost. Network simplex on the bipartite graph.
double transport_cost(const std::vector<Point>& from, const std::vector<double>& supply,
                      const std::vector<Point>& to, const std::vector<double>& demand);

// Sum of block weights after aggregating factor x factor blocks; block centres are
// returned in `centres`.
std::vector<double> coarsen(const GridMeasure& m, int factor, std::vector<Point>* centres = nullptr);

// sup over levels 0, stride, 2*stride, ..., nt of d1(a(t), b(t)).
double sup_d1(const DensityPath& a, const DensityPath& b, int stride = 1);

struct HolderFit {
    bool degenerate = false;
    double exponent = 0.0;   // least-squares slope of log d1 against log tau
    double constant = 0.0;   // max of d1 / sqrt(tau)
    std::vector<double> taus;
    std::vector<double> distances;
};

// d1(m(0), m(tau)) for tau = T / 2^k, k = 1..5 (rounded to levels). Needs at least
// four distinct positive separations; a path that does not move is reported degenerate.
HolderFit holder_half_diagnostic(const DensityPath& m);

// Least-squares slope of log y against log x.
double loglog_slope(std::span<const double> x, std::span<const double> y);

}  // namespace cdmfg
