#include "cdmfg/wasserstein.hpp"

#include "cdmfg/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace cdmfg {

namespace {

constexpr double kMassTolerance = 1e-10;

void check_weights(const std::vector<double>& w) {
    double total = 0.0;
    for (double v : w) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw ContractError("GridMeasure: negative or non-finite weight");
        total += v;
    }
    if (std::abs(total - 1.0) > kMassTolerance) {
        std::ostringstream err;
        err << "GridMeasure: total mass " << total << " differs from 1";
        throw ContractError(err.str());
    }
}

int coarsening_factor(int nx) {
    for (int f = 1; f <= nx; ++f) {
        if (nx % f == 0 && nx / f <= kMaxTransportAxis) return f;
    }
    return nx;
}

// Transportation problem on a complete bipartite graph, solved by the primal
// network simplex with a spanning-tree basis of S + D - 1 cells.
class TransportSimplex {
public:
    TransportSimplex(const std::vector<Point>& from, std::vector<double> supply,
                     const std::vector<Point>& to, std::vector<double> demand)
        : S_(static_cast<int>(from.size())), D_(static_cast<int>(to.size())) {
        cost_.resize(static_cast<std::size_t>(S_) * D_);
        for (int i = 0; i < S_; ++i) {
            for (int j = 0; j < D_; ++j) {
                const double dx = from[i][0] - to[j][0], dy = from[i][1] - to[j][1];
                cost_[static_cast<std::size_t>(i) * D_ + j] = std::sqrt(dx * dx + dy * dy);
            }
        }
        initial_basis(from, to, std::move(supply), std::move(demand));
    }

    double solve() {
        const long long cells = static_cast<long long>(S_) * D_;
        const long long block = std::max<long long>(64, static_cast<long long>(std::sqrt(double(cells))));
        const long long max_pivots = 200LL * (S_ + D_) + 10000;
        long long cursor = 0;
        compute_tree();
        for (long long pivots = 0;; ++pivots) {
            if (pivots > max_pivots) throw NumericalError("transport_cost: simplex did not terminate", -1, -1);
            // block pricing: best candidate in the first block that has one
            int bi = -1, bj = -1;
            double best = -1e-13;
            long long scanned = 0;
            while (scanned < cells) {
                const long long stop = std::min(cells, scanned + block);
                for (; scanned < stop; ++scanned) {
                    const long long c = cursor;
                    cursor = cursor + 1 == cells ? 0 : cursor + 1;
                    const int i = static_cast<int>(c / D_), j = static_cast<int>(c % D_);
                    const double r = cost_[c] - pot_[i] - pot_[S_ + j];
                    if (r < best) {
                        best = r;
                        bi = i;
                        bj = j;
                    }
                }
                if (bi >= 0) break;
            }
            if (bi < 0) break;
            pivot(bi, bj);
        }
        double total = 0.0;
        for (const auto& c : basis_) total += c.flow * cost(c.i, c.j);
        return total;
    }

private:
    struct Cell {
        int i, j;
        double flow;
    };

    double cost(int i, int j) const { return cost_[static_cast<std::size_t>(i) * D_ + j]; }

    void add_cell(int slot, Cell c) {
        basis_[slot] = c;
        adj_[c.i].push_back(slot);
        adj_[S_ + c.j].push_back(slot);
    }

    void drop_cell(int slot) {
        for (int node : {basis_[slot].i, S_ + basis_[slot].j}) {
            auto& a = adj_[node];
            a.erase(std::find(a.begin(), a.end(), slot));
        }
    }

    // North-west corner rule on position-sorted supplies and demands.
    void initial_basis(const std::vector<Point>& from, const std::vector<Point>& to,
                       std::vector<double> supply, std::vector<double> demand) {
        auto by_position = [](const std::vector<Point>& p) {
            std::vector<int> order(p.size());
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return p[a] < p[b]; });
            return order;
        };
        const auto rows = by_position(from);
        const auto cols = by_position(to);
        adj_.assign(S_ + D_, {});
        basis_.assign(S_ + D_ - 1, {0, 0, 0.0});
        int r = 0, c = 0, slot = 0;
        while (slot < S_ + D_ - 1) {
            const int i = rows[r], j = cols[c];
            const double q = std::min(supply[i], demand[j]);
            supply[i] -= q;
            demand[j] -= q;
            add_cell(slot++, {i, j, q});
            if (r == S_ - 1) ++c;
            else if (c == D_ - 1) ++r;
            else if (supply[i] <= demand[j]) ++r;
            else ++c;
        }
    }

    // Parents, depths and potentials (u_i + v_j = c_ij on basic cells) of the
    // subtree reached from `start`, whose parent is `above` through cell `slot`.
    void hang(int start, int above, int slot) {
        std::vector<int>& queue = queue_;
        queue.assign(1, start);
        parent_[start] = above;
        parent_cell_[start] = slot;
        if (above < 0) {
            depth_[start] = 0;
            pot_[start] = 0.0;
        } else {
            depth_[start] = depth_[above] + 1;
            const Cell& c = basis_[slot];
            pot_[start] = cost(c.i, c.j) - pot_[above];
        }
        for (std::size_t q = 0; q < queue.size(); ++q) {
            const int node = queue[q];
            for (int s : adj_[node]) {
                if (s == parent_cell_[node]) continue;
                const Cell& c = basis_[s];
                const int other = node < S_ ? S_ + c.j : c.i;
                depth_[other] = depth_[node] + 1;
                parent_[other] = node;
                parent_cell_[other] = s;
                pot_[other] = cost(c.i, c.j) - pot_[node];
                queue.push_back(other);
            }
        }
    }

    void compute_tree() {
        const int N = S_ + D_;
        pot_.assign(N, 0.0);
        parent_.assign(N, -1);
        parent_cell_.assign(N, -1);
        depth_.assign(N, -1);
        hang(0, -1, -1);
        if (static_cast<int>(queue_.size()) != N) throw NumericalError("transport_cost: basis is not a spanning tree", -1, -1);
    }

    void pivot(int ei, int ej) {
        // cycle: entering cell (+), then the tree path from row ei to column ej
        std::vector<std::pair<int, int>> path;  // (slot, sign)
        std::vector<std::pair<int, int>> tail;
        int a = ei, b = S_ + ej;
        while (a != b) {
            if (depth_[a] >= depth_[b]) {
                path.emplace_back(parent_cell_[a], a < S_ ? -1 : 1);
                a = parent_[a];
            } else {
                tail.emplace_back(parent_cell_[b], b >= S_ ? -1 : 1);
                b = parent_[b];
            }
        }
        const std::size_t from_row = path.size();
        path.insert(path.end(), tail.rbegin(), tail.rend());
        int leave = -1;
        std::size_t leave_at = 0;
        double theta = 0.0;
        for (std::size_t k = 0; k < path.size(); ++k) {
            const auto [slot, sign] = path[k];
            if (sign < 0 && (leave < 0 || basis_[slot].flow < theta)) {
                leave = slot;
                leave_at = k;
                theta = basis_[slot].flow;
            }
        }
        theta = std::max(theta, 0.0);
        for (auto [slot, sign] : path) basis_[slot].flow = std::max(0.0, basis_[slot].flow + sign * theta);
        drop_cell(leave);
        add_cell(leave, {ei, ej, theta});
        // the subtree below the leaving cell now hangs from the entering cell
        if (leave_at < from_row) hang(ei, S_ + ej, leave);
        else hang(S_ + ej, ei, leave);
    }

    int S_, D_;
    std::vector<double> cost_;
    std::vector<Cell> basis_;
    std::vector<std::vector<int>> adj_;
    std::vector<double> pot_;
    std::vector<int> parent_, parent_cell_, depth_, queue_;
};

void require_same_grid(const GridSpec& a, const GridSpec& b, const char* who) {
    if (a.dim != b.dim || a.nx != b.nx || a.box_length != b.box_length) {
        throw ConfigError(std::string(who) + ": grid mismatch");
    }
}

}  // namespace

GridMeasure::GridMeasure(const GridSpec& grid, std::vector<double> weights, bool)
    : grid_(grid), weights_(std::move(weights)) {
    if (static_cast<int>(weights_.size()) != grid_.nodes()) throw ConfigError("GridMeasure: size mismatch");
    check_weights(weights_);
}

GridMeasure::GridMeasure(const GridSpec& grid, std::span<const double> density) : grid_(grid) {
    if (static_cast<int>(density.size()) != grid.nodes()) throw ConfigError("GridMeasure: size mismatch");
    weights_.resize(density.size());
    for (std::size_t i = 0; i < density.size(); ++i) {
        if (density[i] < -1e-14) throw ContractError("GridMeasure: negative density");
        weights_[i] = std::max(density[i], 0.0) * grid.cell_volume();
    }
    check_weights(weights_);
}

GridMeasure GridMeasure::from_weights(const GridSpec& grid, std::vector<double> weights) {
    return GridMeasure(grid, std::move(weights), true);
}

double GridMeasure::total() const {
    return std::accumulate(weights_.begin(), weights_.end(), 0.0);
}

std::vector<double> coarsen(const GridMeasure& m, int factor, std::vector<Point>* centres) {
    const GridSpec& g = m.grid();
    if (factor < 1 || g.nx % factor != 0) throw ConfigError("coarsen: factor must divide nx");
    const int n = g.nx / factor;
    const int cells = g.dim == 1 ? n : n * n;
    std::vector<double> out(cells, 0.0);
    for (int node = 0; node < g.nodes(); ++node) {
        const int i = node % g.nx, j = node / g.nx;
        const int c = i / factor + (g.dim == 2 ? n * (j / factor) : 0);
        out[c] += m.weights()[node];
    }
    if (centres) {
        centres->assign(cells, Point{0.0, 0.0});
        const double half = 0.5 * (factor - 1) * g.dx();
        for (int c = 0; c < cells; ++c) {
            (*centres)[c][0] = (c % n) * factor * g.dx() + half;
            if (g.dim == 2) (*centres)[c][1] = (c / n) * factor * g.dx() + half;
        }
    }
    return out;
}

double transport_cost(const std::vector<Point>& from, const std::vector<double>& supply,
                      const std::vector<Point>& to, const std::vector<double>& demand) {
    if (from.size() != supply.size() || to.size() != demand.size()) {
        throw ConfigError("transport_cost: size mismatch");
    }
    if (from.empty() || to.empty()) return 0.0;
    const double s = std::accumulate(supply.begin(), supply.end(), 0.0);
    const double d = std::accumulate(demand.begin(), demand.end(), 0.0);
    if (std::abs(s - d) > kMassTolerance * std::max(1.0, s)) throw ContractError("transport_cost: unbalanced masses");
    if (s <= 0.0) return 0.0;
    std::vector<double> balanced = demand;
    for (double& v : balanced) v *= s / d;
    return TransportSimplex(from, supply, to, std::move(balanced)).solve();
}

double d1(const GridMeasure& m1, const GridMeasure& m2) {
    require_same_grid(m1.grid(), m2.grid(), "d1");
    const GridSpec& g = m1.grid();
    if (std::abs(m1.total() - m2.total()) > kMassTolerance) throw ContractError("d1: mass mismatch");
    if (g.dim == 1) {
        double c1 = 0.0, c2 = 0.0, acc = 0.0;
        for (int i = 0; i + 1 < g.nx; ++i) {
            c1 += m1.weights()[i];
            c2 += m2.weights()[i];
            acc += std::abs(c1 - c2);
        }
        return acc * g.dx();
    }
    const int factor = coarsening_factor(g.nx);
    std::vector<Point> centres;
    auto w1 = coarsen(m1, factor, &centres);
    auto w2 = coarsen(m2, factor);
    // fixed argument order so that d1(a, b) and d1(b, a) run the same pivots
    if (w2 < w1) std::swap(w1, w2);
    std::vector<Point> from, to;
    std::vector<double> supply, demand;
    for (std::size_t c = 0; c < w1.size(); ++c) {
        const double diff = w1[c] - w2[c];
        if (diff > 0.0) {
            from.push_back(centres[c]);
            supply.push_back(diff);
        } else if (diff < 0.0) {
            to.push_back(centres[c]);
            demand.push_back(-diff);
        }
    }
    return transport_cost(from, supply, to, demand);
}

double d1(const GridSpec& grid, std::span<const double> density1, std::span<const double> density2) {
    return d1(GridMeasure(grid, density1), GridMeasure(grid, density2));
}

double sup_d1(const DensityPath& a, const DensityPath& b, int stride) {
    require_same_grid(a.grid(), b.grid(), "sup_d1");
    if (a.grid().nt != b.grid().nt) throw ConfigError("sup_d1: time grid mismatch");
    if (stride < 1) throw ConfigError("sup_d1: stride must be positive");
    const int nt = a.grid().nt;
    double worst = 0.0;
    for (int n = 0;; n = std::min(n + stride, nt)) {
        worst = std::max(worst, d1(a.grid(), a.level(n), b.level(n)));
        if (n == nt) break;
    }
    return worst;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw ConfigError("loglog_slope: need at least two points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double lx = std::log(x[k]), ly = std::log(y[k]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

HolderFit holder_half_diagnostic(const DensityPath& m) {
    const GridSpec& g = m.grid();
    HolderFit fit;
    std::vector<int> levels;
    for (int k = 1; k <= 5; ++k) {
        const int level = static_cast<int>(std::lround(g.nt / std::pow(2.0, k)));
        if (level >= 1 && (levels.empty() || level != levels.back())) levels.push_back(level);
    }
    if (levels.size() < 4) throw ConfigError("holder_half_diagnostic: fewer than four dyadic separations");
    for (int level : levels) {
        fit.taus.push_back(g.time(level));
        fit.distances.push_back(d1(g, m.level(0), m.level(level)));
    }
    for (std::size_t k = 0; k < levels.size(); ++k) {
        if (!(fit.distances[k] > 1e-15)) fit.degenerate = true;
        fit.constant = std::max(fit.constant, fit.distances[k] / std::sqrt(fit.taus[k]));
    }
    if (!fit.degenerate) fit.exponent = loglog_slope(fit.taus, fit.distances);
    return fit;
}

}  // namespace cdmfg
