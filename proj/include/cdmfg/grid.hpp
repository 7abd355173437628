#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace cdmfg {

// Points and gradients. In 1D the second component is unused and kept at 0.
using Point = std::array<double, 2>;

// Periodic space-time lattice on the torus [0, L)^dim with nodes x_i = i*dx.
struct GridSpec {
    int dim = 1;
    double box_length = 1.0;
    int nx = 64;
    int nt = 1;
    double horizon = 1.0;

    double dx() const { return box_length / nx; }
    double dt() const { return horizon / nt; }
    int nodes() const { return dim == 1 ? nx : nx * nx; }
    int levels() const { return nt + 1; }
    double cell_volume() const { return dim == 1 ? dx() : dx() * dx(); }
    double time(int level) const { return level * dt(); }

    Point coords(int node) const;
    int node_at(int i, int j = 0) const;
    // Periodic neighbour of `node` shifted by `step` along `axis`.
    int neighbor(int node, int axis, int step) const;

    // Throws ConfigError on structural problems (dim, nx >= 8, nt >= 1, ...).
    void validate() const;

    bool same_lattice(const GridSpec& other) const;
};

// Largest explicit step keeping the schemes monotone:
//   dt <= dx^2 / (2*dim*a_max + dx*theta*dim).
double max_stable_dt(const GridSpec& grid, double a_max, double theta);
int minimal_stable_nt(const GridSpec& grid, double a_max, double theta);
// Throws CflError (carrying the minimal admissible nt) when the grid's dt is too large.
void require_cfl(const GridSpec& grid, double a_max, double theta);

// Scalar field over all time levels 0..nt.
class TimeField {
public:
    TimeField() = default;
    explicit TimeField(const GridSpec& grid, double fill = 0.0);

    const GridSpec& grid() const { return grid_; }
    int levels() const { return grid_.levels(); }
    int nodes() const { return grid_.nodes(); }

    std::span<double> level(int n);
    std::span<const double> level(int n) const;
    double& operator()(int n, int node) { return values_[index(n, node)]; }
    double operator()(int n, int node) const { return values_[index(n, node)]; }

    const std::vector<double>& raw() const { return values_; }
    std::vector<double>& raw() { return values_; }

    double max_abs() const;
    bool all_finite() const;

private:
    std::size_t index(int n, int node) const {
        return static_cast<std::size_t>(n) * static_cast<std::size_t>(grid_.nodes()) +
               static_cast<std::size_t>(node);
    }

    GridSpec grid_;
    std::vector<double> values_;
};

// Stencil operators on one time slice.
double laplacian_at(const GridSpec& grid, std::span<const double> v, int node);
Point gradient_at(const GridSpec& grid, std::span<const double> v, int node);
double forward_diff(const GridSpec& grid, std::span<const double> v, int node, int axis);
double backward_diff(const GridSpec& grid, std::span<const double> v, int node, int axis);

std::vector<double> laplacian(const GridSpec& grid, std::span<const double> v);
// Centered gradient component along `axis` at every node.
std::vector<double> gradient_component(const GridSpec& grid, std::span<const double> v, int axis);

// Periodic (bi)linear interpolation of a slice at an arbitrary point.
double interpolate(const GridSpec& grid, std::span<const double> v, const Point& x);

// Wraps a point back into [0, L)^dim.
Point wrap(const GridSpec& grid, Point x);

// Sum of the slice times the cell volume.
double slice_mass(const GridSpec& grid, std::span<const double> v);

}  // namespace cdmfg
