#include "cdmfg/grid.hpp"

#include "cdmfg/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cdmfg {

Point GridSpec::coords(int node) const {
    if (dim == 1) return {node * dx(), 0.0};
    return {(node % nx) * dx(), (node / nx) * dx()};
}

int GridSpec::node_at(int i, int j) const {
    i = ((i % nx) + nx) % nx;
    if (dim == 1) return i;
    j = ((j % nx) + nx) % nx;
    return i + nx * j;
}

int GridSpec::neighbor(int node, int axis, int step) const {
    if (dim == 1) return node_at(node + step);
    const int i = node % nx;
    const int j = node / nx;
    return axis == 0 ? node_at(i + step, j) : node_at(i, j + step);
}

void GridSpec::validate() const {
    std::ostringstream err;
    if (dim != 1 && dim != 2) err << "grid.dim must be 1 or 2 (got " << dim << ")";
    else if (!(box_length > 0.0) || !std::isfinite(box_length))
        err << "grid.box_length must be positive";
    else if (nx < 8) err << "grid.nx must be >= 8 (got " << nx << ")";
    else if (nt < 1) err << "grid.nt must be >= 1 (got " << nt << ")";
    else if (!(horizon > 0.0) || !std::isfinite(horizon))
        err << "grid.horizon must be positive";
    if (!err.str().empty()) throw ConfigError(err.str());
}

bool GridSpec::same_lattice(const GridSpec& other) const {
    return dim == other.dim && nx == other.nx && nt == other.nt &&
           box_length == other.box_length && horizon == other.horizon;
}

double max_stable_dt(const GridSpec& grid, double a_max, double theta) {
    const double h = grid.dx();
    return h * h / (2.0 * grid.dim * a_max + h * theta * grid.dim);
}

int minimal_stable_nt(const GridSpec& grid, double a_max, double theta) {
    return static_cast<int>(std::ceil(grid.horizon / max_stable_dt(grid, a_max, theta) - 1e-9));
}

void require_cfl(const GridSpec& grid, double a_max, double theta) {
    const double bound = max_stable_dt(grid, a_max, theta);
    if (grid.dt() > bound * (1.0 + 1e-12)) {
        const int nt_min = minimal_stable_nt(grid, a_max, theta);
        std::ostringstream err;
        err << "CFL violated: dt=" << grid.dt() << " > " << bound << " for nx=" << grid.nx
            << "; minimal admissible nt=" << nt_min;
        throw CflError(err.str(), nt_min);
    }
}

TimeField::TimeField(const GridSpec& grid, double fill)
    : grid_(grid),
      values_(static_cast<std::size_t>(grid.levels()) * static_cast<std::size_t>(grid.nodes()),
              fill) {}

std::span<double> TimeField::level(int n) {
    return {values_.data() + index(n, 0), static_cast<std::size_t>(grid_.nodes())};
}

std::span<const double> TimeField::level(int n) const {
    return {values_.data() + index(n, 0), static_cast<std::size_t>(grid_.nodes())};
}

double TimeField::max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
}

bool TimeField::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

double laplacian_at(const GridSpec& grid, std::span<const double> v, int node) {
    const double inv_h2 = 1.0 / (grid.dx() * grid.dx());
    double acc = 0.0;
    for (int axis = 0; axis < grid.dim; ++axis) {
        acc += v[grid.neighbor(node, axis, 1)] + v[grid.neighbor(node, axis, -1)] - 2.0 * v[node];
    }
    return acc * inv_h2;
}

Point gradient_at(const GridSpec& grid, std::span<const double> v, int node) {
    Point g{0.0, 0.0};
    const double inv = 0.5 / grid.dx();
    for (int axis = 0; axis < grid.dim; ++axis) {
        g[axis] = (v[grid.neighbor(node, axis, 1)] - v[grid.neighbor(node, axis, -1)]) * inv;
    }
    return g;
}

double forward_diff(const GridSpec& grid, std::span<const double> v, int node, int axis) {
    return (v[grid.neighbor(node, axis, 1)] - v[node]) / grid.dx();
}

double backward_diff(const GridSpec& grid, std::span<const double> v, int node, int axis) {
    return (v[node] - v[grid.neighbor(node, axis, -1)]) / grid.dx();
}

std::vector<double> laplacian(const GridSpec& grid, std::span<const double> v) {
    std::vector<double> out(v.size());
    for (int k = 0; k < grid.nodes(); ++k) out[k] = laplacian_at(grid, v, k);
    return out;
}

std::vector<double> gradient_component(const GridSpec& grid, std::span<const double> v,
                                       int axis) {
    std::vector<double> out(v.size());
    const double inv = 0.5 / grid.dx();
    for (int k = 0; k < grid.nodes(); ++k) {
        out[k] = (v[grid.neighbor(k, axis, 1)] - v[grid.neighbor(k, axis, -1)]) * inv;
    }
    return out;
}

Point wrap(const GridSpec& grid, Point x) {
    const double L = grid.box_length;
    for (int axis = 0; axis < grid.dim; ++axis) {
        x[axis] = std::fmod(x[axis], L);
        if (x[axis] < 0.0) x[axis] += L;
        if (x[axis] >= L) x[axis] -= L;
    }
    return x;
}

double interpolate(const GridSpec& grid, std::span<const double> v, const Point& x) {
    const Point y = wrap(grid, x);
    const double h = grid.dx();
    const double sx = y[0] / h;
    const int i0 = static_cast<int>(std::floor(sx));
    const double fx = sx - i0;
    if (grid.dim == 1) {
        return (1.0 - fx) * v[grid.node_at(i0)] + fx * v[grid.node_at(i0 + 1)];
    }
    const double sy = y[1] / h;
    const int j0 = static_cast<int>(std::floor(sy));
    const double fy = sy - j0;
    return (1.0 - fx) * (1.0 - fy) * v[grid.node_at(i0, j0)] +
           fx * (1.0 - fy) * v[grid.node_at(i0 + 1, j0)] +
           (1.0 - fx) * fy * v[grid.node_at(i0, j0 + 1)] +
           fx * fy * v[grid.node_at(i0 + 1, j0 + 1)];
}

double slice_mass(const GridSpec& grid, std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s * grid.cell_volume();
}

}  // namespace cdmfg
