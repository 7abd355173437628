#include "cdmfg/control_model.hpp"

#include "cdmfg/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace cdmfg {

namespace {

void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) {
        throw ContractError(std::string(what) + ": non-finite argument");
    }
}

double clamp(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

// Offsets and weights of the mollifier along one axis.
struct MollifierStencil {
    std::array<double, 9> offset{};
    std::array<double, 9> weight{};      // approximates rho
    std::array<double, 9> derivative{};  // approximates rho', exact on affine functions
};

MollifierStencil mollifier_stencil(double delta) {
    MollifierStencil s;
    double wsum = 0.0;
    double dmoment = 0.0;
    for (int k = 0; k < 9; ++k) {
        const double r = delta * (k - 4) / 4.0;
        const double z = r / delta;
        const double trap = (k == 0 || k == 8) ? 0.5 : 1.0;
        s.offset[k] = r;
        s.weight[k] = std::max(0.0, 1.0 - z * z) * trap;
        s.derivative[k] = -r * trap;
        wsum += s.weight[k];
        dmoment += -r * s.derivative[k];
    }
    for (int k = 0; k < 9; ++k) {
        s.weight[k] /= wsum;
        s.derivative[k] /= dmoment;
    }
    return s;
}

struct TxOffset {
    double dt = 0.0;
    Point dx{0.0, 0.0};
    double weight = 1.0;
};

std::vector<TxOffset> tx_offsets(const MollifierStencil& s, int dim, bool active) {
    if (!active) return {TxOffset{}};
    std::vector<TxOffset> out;
    for (int a = 0; a < 9; ++a) {
        for (int b = 0; b < 9; ++b) {
            const int cmax = dim == 2 ? 9 : 1;
            for (int c = 0; c < cmax; ++c) {
                TxOffset o;
                o.dt = s.offset[a];
                o.dx = {s.offset[b], dim == 2 ? s.offset[c] : 0.0};
                o.weight = s.weight[a] * s.weight[b] * (dim == 2 ? s.weight[c] : 1.0);
                if (o.weight > 0.0) out.push_back(o);
            }
        }
    }
    return out;
}

Point shifted(const Point& x, const Point& d) { return {x[0] - d[0], x[1] - d[1]}; }

H1Eval eval_H1_mollified(const MollifiedHamiltonian& m, int dim, double t, const Point& x,
                         const Point& p) {
    const auto s = mollifier_stencil(m.delta);
    const auto txs = tx_offsets(s, dim, m.base->depends_on_tx());
    H1Eval out;
    const int kmax = dim == 2 ? 9 : 1;
    for (const auto& o : txs) {
        for (int a = 0; a < 9; ++a) {
            for (int b = 0; b < kmax; ++b) {
                const Point pp{p[0] - s.offset[a], dim == 2 ? p[1] - s.offset[b] : 0.0};
                const double wa = s.weight[a];
                const double wb = dim == 2 ? s.weight[b] : 1.0;
                const double w = o.weight * wa * wb;
                const H1Eval e = eval_H1(*m.base, t - o.dt, shifted(x, o.dx), pp);
                out.value += w * e.value;
                out.argmin[0] += w * e.argmin[0];
                out.argmin[1] += w * e.argmin[1];
                out.derivative[0] += o.weight * s.derivative[a] * wb * e.value;
                if (dim == 2) out.derivative[1] += o.weight * wa * s.derivative[b] * e.value;
            }
        }
    }
    return out;
}

H2Eval eval_H2_mollified(const MollifiedHamiltonian& m, int dim, double t, const Point& x,
                         double q) {
    const auto s = mollifier_stencil(m.delta);
    const auto txs = tx_offsets(s, dim, m.base->depends_on_tx());
    H2Eval out;
    for (const auto& o : txs) {
        for (int a = 0; a < 9; ++a) {
            const H2Eval e = eval_H2(*m.base, t - o.dt, shifted(x, o.dx), q - s.offset[a]);
            out.value += o.weight * s.weight[a] * e.value;
            out.argmin += o.weight * s.weight[a] * e.argmin;
            out.derivative += o.weight * s.derivative[a] * e.value;
        }
    }
    return out;
}

}  // namespace

ControlBounds::ControlBounds(double lambda1, double lambda2, double drift_bound)
    : lambda1_(lambda1), lambda2_(lambda2), drift_bound_(drift_bound) {
    if (!(lambda1 > 0.0) || !(lambda2 > lambda1) || !std::isfinite(lambda2)) {
        std::ostringstream err;
        err << "ControlBounds: require 0 < lambda1 < lambda2 (got lambda1=" << lambda1
            << ", lambda2=" << lambda2 << ")";
        throw ConfigError(err.str());
    }
    if (!(drift_bound >= 0.0) || !std::isfinite(drift_bound)) {
        throw ConfigError("ControlBounds: drift_bound must be finite and >= 0");
    }
}

HamiltonianSpec HamiltonianSpec::model_a(int dim, const ControlBounds& bounds,
                                         const ModelACoefficients& c) {
    if (dim != 1 && dim != 2) throw ConfigError("HamiltonianSpec: dim must be 1 or 2");
    if (!(c.alpha_max >= 0.0) || !(c.l1_weight > 0.0) || !(c.l3_weight > 0.0)) {
        throw ConfigError("HamiltonianSpec: model A needs alpha_max >= 0 and positive weights");
    }
    if (c.alpha_max > bounds.drift_bound() * (1.0 + 1e-12)) {
        throw ConfigError("HamiltonianSpec: alpha_max exceeds the drift bound");
    }
    return HamiltonianSpec(dim, bounds, c);
}

HamiltonianSpec HamiltonianSpec::tabulated(int dim, const ControlBounds& bounds,
                                           TabulatedControls controls) {
    if (dim != 1 && dim != 2) throw ConfigError("HamiltonianSpec: dim must be 1 or 2");
    if (controls.drift_controls.empty() || controls.diffusion_controls.empty()) {
        throw ConfigError("HamiltonianSpec: empty control grid");
    }
    if (!controls.l1 || !controls.l3) {
        throw ConfigError("HamiltonianSpec: tabulated model needs both Lagrangians");
    }
    const double tol = 1e-12 * (1.0 + bounds.eta_max());
    for (std::size_t k = 0; k < controls.diffusion_controls.size(); ++k) {
        const double eta = controls.diffusion_controls[k];
        if (eta < bounds.eta_min() - tol || eta > bounds.eta_max() + tol) {
            throw ConfigError("HamiltonianSpec: diffusion control outside [lambda1^2/2, lambda2^2/2]");
        }
        if (k > 0 && !(eta > controls.diffusion_controls[k - 1])) {
            throw ConfigError("HamiltonianSpec: diffusion controls must be increasing");
        }
    }
    for (const auto& a : controls.drift_controls) {
        for (int k = 0; k < dim; ++k) {
            if (std::abs(a[k]) > bounds.drift_bound() * (1.0 + 1e-12)) {
                throw ConfigError("HamiltonianSpec: drift control exceeds the drift bound");
            }
        }
        if (dim == 1 && a[1] != 0.0) {
            throw ConfigError("HamiltonianSpec: 1D drift control with a second component");
        }
    }
    return HamiltonianSpec(dim, bounds, std::move(controls));
}

bool HamiltonianSpec::depends_on_tx() const {
    return std::visit(
        [](const auto& r) -> bool {
            using T = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<T, ModelACoefficients>) return false;
            else if constexpr (std::is_same_v<T, TabulatedControls>) return r.depends_on_tx;
            else return r.base->depends_on_tx();
        },
        rep_);
}

double HamiltonianSpec::drift_sup() const {
    return std::visit(
        [](const auto& r) -> double {
            using T = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<T, ModelACoefficients>) {
                return r.alpha_max;
            } else if constexpr (std::is_same_v<T, TabulatedControls>) {
                double m = 0.0;
                for (const auto& a : r.drift_controls) {
                    m = std::max({m, std::abs(a[0]), std::abs(a[1])});
                }
                return m;
            } else {
                return r.base->drift_sup();
            }
        },
        rep_);
}

H1Eval eval_H1(const HamiltonianSpec& spec, double t, const Point& x, const Point& p) {
    require_finite(p[0], "eval_H1");
    require_finite(p[1], "eval_H1");
    require_finite(t, "eval_H1");
    const int dim = spec.dim();
    return std::visit(
        [&](const auto& r) -> H1Eval {
            using T = std::decay_t<decltype(r)>;
            H1Eval e;
            if constexpr (std::is_same_v<T, ModelACoefficients>) {
                for (int k = 0; k < dim; ++k) {
                    const double a = clamp(-p[k] / r.l1_weight, -r.alpha_max, r.alpha_max);
                    e.argmin[k] = a;
                    e.value += p[k] * a + 0.5 * r.l1_weight * a * a;
                }
                e.derivative = e.argmin;
            } else if constexpr (std::is_same_v<T, TabulatedControls>) {
                double best = std::numeric_limits<double>::infinity();
                for (const auto& a : r.drift_controls) {
                    const double v = p[0] * a[0] + p[1] * a[1] + r.l1(t, x, a);
                    if (v < best) {
                        best = v;
                        e.argmin = a;
                    }
                }
                e.value = best;
                e.derivative = e.argmin;
            } else {
                e = eval_H1_mollified(r, dim, t, x, p);
            }
            return e;
        },
        spec.representation());
}

H2Eval eval_H2(const HamiltonianSpec& spec, double t, const Point& x, double q) {
    require_finite(q, "eval_H2");
    require_finite(t, "eval_H2");
    const double lo = spec.bounds().eta_min();
    const double hi = spec.bounds().eta_max();
    return std::visit(
        [&](const auto& r) -> H2Eval {
            using T = std::decay_t<decltype(r)>;
            H2Eval e;
            if constexpr (std::is_same_v<T, ModelACoefficients>) {
                const double eta = clamp(r.eta_center - q / (2.0 * r.l3_weight), lo, hi);
                const double d = eta - r.eta_center;
                e.value = eta * q + r.l3_weight * d * d;
                e.argmin = eta;
                e.derivative = eta;
            } else if constexpr (std::is_same_v<T, TabulatedControls>) {
                double best = std::numeric_limits<double>::infinity();
                for (double eta : r.diffusion_controls) {
                    const double v = eta * q + r.l3(t, x, eta);
                    if (v < best) {
                        best = v;
                        e.argmin = eta;
                    }
                }
                e.value = best;
                e.derivative = e.argmin;
            } else {
                e = eval_H2_mollified(r, spec.dim(), t, x, q);
            }
            return e;
        },
        spec.representation());
}

double drift_lagrangian(const HamiltonianSpec& spec, double t, const Point& x,
                        const Point& alpha) {
    return std::visit(
        [&](const auto& r) -> double {
            using T = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<T, ModelACoefficients>) {
                return 0.5 * r.l1_weight * (alpha[0] * alpha[0] + alpha[1] * alpha[1]);
            } else if constexpr (std::is_same_v<T, TabulatedControls>) {
                return r.l1(t, x, alpha);
            } else {
                return drift_lagrangian(*r.base, t, x, alpha);
            }
        },
        spec.representation());
}

double diffusion_lagrangian(const HamiltonianSpec& spec, double t, const Point& x, double eta) {
    return std::visit(
        [&](const auto& r) -> double {
            using T = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<T, ModelACoefficients>) {
                const double d = eta - r.eta_center;
                return r.l3_weight * d * d;
            } else if constexpr (std::is_same_v<T, TabulatedControls>) {
                return r.l3(t, x, eta);
            } else {
                return diffusion_lagrangian(*r.base, t, x, eta);
            }
        },
        spec.representation());
}

std::vector<double> ray_breakpoints_H1(const HamiltonianSpec& spec, const Point& p) {
    std::vector<double> out;
    if (const auto* r = std::get_if<ModelACoefficients>(&spec.representation())) {
        for (int k = 0; k < spec.dim(); ++k) {
            if (p[k] == 0.0) continue;
            const double s = r->l1_weight * r->alpha_max / std::abs(p[k]);
            if (s > 0.0 && s < 1.0) out.push_back(s);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<double> ray_breakpoints_H2(const HamiltonianSpec& spec, double q) {
    std::vector<double> out;
    if (const auto* r = std::get_if<ModelACoefficients>(&spec.representation())) {
        if (q != 0.0) {
            for (double edge : {spec.bounds().eta_min(), spec.bounds().eta_max()}) {
                const double s = 2.0 * r->l3_weight * (r->eta_center - edge) / q;
                if (s > 0.0 && s < 1.0) out.push_back(s);
            }
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

HamiltonianSpec mollify_hamiltonian(const HamiltonianSpec& spec, double delta) {
    if (!(delta > 0.0) || !std::isfinite(delta)) {
        throw ConfigError("mollify_hamiltonian: delta must be positive");
    }
    MollifiedHamiltonian m{std::make_shared<const HamiltonianSpec>(spec), delta};
    return HamiltonianSpec(spec.dim(), spec.bounds(), std::move(m));
}

DiffusionLagrangian diffusion_cost_from_sigma(
    std::function<double(double t, const Point& x, double sigma)> l2) {
    return [l2 = std::move(l2)](double t, const Point& x, double eta) {
        return l2(t, x, std::sqrt(2.0 * eta));
    };
}

void ModelSpec::validate() const {
    if (dim != 1 && dim != 2) throw ConfigError("model.dim must be 1 or 2");
    if (hamiltonians.dim() != dim) throw ConfigError("model.hamiltonian: dimension mismatch");
    if (hamiltonians.bounds().lambda1() != bounds.lambda1() ||
        hamiltonians.bounds().lambda2() != bounds.lambda2() ||
        hamiltonians.bounds().drift_bound() != bounds.drift_bound()) {
        throw ConfigError("model.hamiltonian: built against different ControlBounds");
    }
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ConfigError("model.horizon must be positive");
    if (!(discount_lambda >= 0.0)) throw ConfigError("model.discount_lambda must be >= 0");
    if (!(coupling_f.width > 0.0)) throw ConfigError("model.coupling_f.width must be positive");
    if (!std::isfinite(coupling_f.gain) || !std::isfinite(terminal_g.gain)) {
        throw ConfigError("model: coupling gains must be finite");
    }
    if (m0.kind == InitialDensity::Kind::gaussian && !(m0.width > 0.0)) {
        throw ConfigError("model.m0.width must be positive");
    }
}

ModelSpec model_a_reference(int dim) {
    ModelSpec m;
    m.dim = dim;
    m.bounds = ControlBounds(1.0, 2.0, 1.0);
    m.hamiltonians = HamiltonianSpec::model_a(dim, m.bounds, ModelACoefficients{});
    m.terminal_g = TerminalCost{};
    m.coupling_f = KernelCoupling{0.0, 0.1};
    m.horizon = 1.0;
    return m;
}

ModelSpec single_control_model(double nu, int dim) {
    ModelSpec m;
    m.dim = dim;
    m.bounds = ControlBounds(1.0, 2.0, 1.0);
    TabulatedControls c;
    c.drift_controls = {Point{0.0, 0.0}};
    c.diffusion_controls = {nu};
    c.l1 = [](double, const Point&, const Point&) { return 0.0; };
    c.l3 = [](double, const Point&, double) { return 0.0; };
    c.depends_on_tx = false;
    m.hamiltonians = HamiltonianSpec::tabulated(dim, m.bounds, std::move(c));
    m.coupling_f = KernelCoupling{0.0, 0.1};
    return m;
}

PeriodicKernel::PeriodicKernel(const GridSpec& grid, double width) : grid_(grid) {
    if (!(width > 0.0)) throw ConfigError("PeriodicKernel: width must be positive");
    const double L = grid.box_length;
    const double h = grid.dx();
    const int images = 2 + static_cast<int>(std::ceil(6.0 * width / L));
    weights_.assign(static_cast<std::size_t>(grid.nx), 0.0);
    double total = 0.0;
    for (int d = 0; d < grid.nx; ++d) {
        double acc = 0.0;
        for (int n = -images; n <= images; ++n) {
            const double z = d * h + n * L;
            acc += std::exp(-z * z / (2.0 * width * width));
        }
        weights_[d] = acc;
        total += acc * h;
    }
    for (double& w : weights_) w /= total;
}

std::vector<double> PeriodicKernel::apply(std::span<const double> m) const {
    const int nx = grid_.nx;
    const double h = grid_.dx();
    auto convolve_line = [&](auto&& get, auto&& set) {
        std::vector<double> line(static_cast<std::size_t>(nx));
        for (int i = 0; i < nx; ++i) line[i] = get(i);
        for (int i = 0; i < nx; ++i) {
            double acc = 0.0;
            for (int j = 0; j < nx; ++j) acc += weights_[((i - j) % nx + nx) % nx] * line[j];
            set(i, acc * h);
        }
    };
    std::vector<double> out(m.begin(), m.end());
    if (grid_.dim == 1) {
        convolve_line([&](int i) { return m[i]; }, [&](int i, double v) { out[i] = v; });
        return out;
    }
    for (int j = 0; j < nx; ++j) {
        convolve_line([&](int i) { return out[i + nx * j]; },
                      [&](int i, double v) { out[i + nx * j] = v; });
    }
    for (int i = 0; i < nx; ++i) {
        convolve_line([&](int j) { return out[i + nx * j]; },
                      [&](int j, double v) { out[i + nx * j] = v; });
    }
    return out;
}

double terminal_base(const ModelSpec& model, const GridSpec& grid, const Point& x) {
    const auto& g = model.terminal_g;
    if (g.kind == TerminalCost::Kind::constant) return g.offset;
    const double k = 2.0 * std::numbers::pi / grid.box_length;
    double acc = 0.0;
    for (int a = 0; a < grid.dim; ++a) acc += std::cos(k * x[a]);
    return g.offset + g.amplitude * acc;
}

std::vector<double> coupling_F_slice(const ModelSpec& model, const PeriodicKernel& kernel,
                                     std::span<const double> m) {
    std::vector<double> out(m.size(), 0.0);
    if (model.coupling_f.gain == 0.0) return out;
    out = kernel.apply(m);
    for (double& v : out) v *= model.coupling_f.gain;
    return out;
}

std::vector<double> terminal_G_slice(const ModelSpec& model, const GridSpec& grid,
                                     const PeriodicKernel& kernel, std::span<const double> m) {
    std::vector<double> out(static_cast<std::size_t>(grid.nodes()));
    std::vector<double> smooth;
    if (model.terminal_g.gain != 0.0) smooth = kernel.apply(m);
    for (int k = 0; k < grid.nodes(); ++k) {
        out[k] = terminal_base(model, grid, grid.coords(k));
        if (!smooth.empty()) out[k] += model.terminal_g.gain * smooth[k];
    }
    return out;
}

std::vector<double> discretize_initial_density(const InitialDensity& m0, const GridSpec& grid) {
    std::vector<double> out(static_cast<std::size_t>(grid.nodes()), 0.0);
    switch (m0.kind) {
        case InitialDensity::Kind::uniform: {
            std::fill(out.begin(), out.end(), 1.0 / (grid.cell_volume() * grid.nodes()));
            return out;
        }
        case InitialDensity::Kind::dirac: {
            const Point c = wrap(grid, m0.center);
            const int i = static_cast<int>(std::lround(c[0] / grid.dx()));
            const int j = grid.dim == 2 ? static_cast<int>(std::lround(c[1] / grid.dx())) : 0;
            out[grid.node_at(i, j)] = 1.0 / grid.cell_volume();
            return out;
        }
        case InitialDensity::Kind::gaussian: {
            double total = 0.0;
            for (int k = 0; k < grid.nodes(); ++k) {
                const Point x = grid.coords(k);
                double r2 = 0.0;
                for (int a = 0; a < grid.dim; ++a) r2 += (x[a] - m0.center[a]) * (x[a] - m0.center[a]);
                out[k] = std::exp(-r2 / (2.0 * m0.width * m0.width));
                total += out[k];
            }
            const double scale = 1.0 / (total * grid.cell_volume());
            for (double& v : out) v *= scale;
            return out;
        }
    }
    return out;
}

const HypothesisCheck& HypothesisReport::find(const std::string& label) const {
    for (const auto& c : checks) {
        if (c.label == label) return c;
    }
    throw std::out_of_range("HypothesisReport: no check named " + label);
}

bool HypothesisReport::all_pass() const {
    return nonfinite_samples == 0 &&
           std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass; });
}

std::string HypothesisReport::summary() const {
    std::ostringstream os;
    os << "hypotheses:";
    for (const auto& c : checks) {
        os << ' ' << c.label << '=' << c.worst << (c.pass ? "(ok)" : "(FAIL)");
    }
    os << " nonfinite=" << nonfinite_samples;
    return os.str();
}

HypothesisReport validate_hypotheses(const ModelSpec& model,
                                     std::span<const HypothesisSample> samples,
                                     double constant_bound) {
    const auto& H = model.hamiltonians;
    const int dim = model.dim;
    constexpr double h = 1e-4;
    const double C = constant_bound;
    const double inf = std::numeric_limits<double>::infinity();

    double nu = inf, at_zero = 0.0, derivs = 0.0, qx = 0.0;
    double legendre1 = inf, legendre2 = inf, xleg1 = 0.0, xleg2 = 0.0;
    double growth1 = 0.0, growth2 = 0.0, xgrowth = 0.0;
    int nonfinite = 0;

    auto plus = [](Point x, int a, double s) {
        x[a] += s;
        return x;
    };

    for (const auto& s : samples) {
        const H1Eval e1 = eval_H1(H, s.t, s.x, s.p);
        const H2Eval e2 = eval_H2(H, s.t, s.x, s.q);
        if (!std::isfinite(e1.value) || !std::isfinite(e2.value) ||
            !std::isfinite(e2.derivative)) {
            ++nonfinite;
            continue;
        }
        const double pnorm = std::hypot(s.p[0], s.p[1]);
        nu = std::min(nu, e2.derivative);
        at_zero = std::max(at_zero, std::abs(eval_H1(H, s.t, s.x, Point{}).value) +
                                        std::abs(eval_H2(H, s.t, s.x, 0.0).value));
        derivs = std::max(derivs, std::hypot(e1.derivative[0], e1.derivative[1]) +
                                      std::abs(e2.derivative));
        legendre1 = std::min(legendre1, e1.derivative[0] * s.p[0] + e1.derivative[1] * s.p[1] -
                                            e1.value);
        legendre2 = std::min(legendre2, e2.derivative * s.q - e2.value);

        double h1xx = 0.0, h2xx = 0.0, h1x = 0.0, h2x = 0.0;
        for (int a = 0; a < dim; ++a) {
            const Point xp = plus(s.x, a, h), xm = plus(s.x, a, -h);
            const H1Eval p1 = eval_H1(H, s.t, xp, s.p), m1 = eval_H1(H, s.t, xm, s.p);
            const H2Eval p2 = eval_H2(H, s.t, xp, s.q), m2 = eval_H2(H, s.t, xm, s.q);
            const double d1x = (p1.value - m1.value) / (2 * h);
            const double d2x = (p2.value - m2.value) / (2 * h);
            const double d1px_dot_p = ((p1.derivative[0] - m1.derivative[0]) * s.p[0] +
                                       (p1.derivative[1] - m1.derivative[1]) * s.p[1]) /
                                      (2 * h);
            const double d2qx = (p2.derivative - m2.derivative) / (2 * h);
            qx = std::max(qx, std::abs(d2qx));
            xleg1 = std::max(xleg1, std::abs(d1px_dot_p - d1x));
            xleg2 = std::max(xleg2, std::abs(d2qx * s.q - d2x));
            h1x = std::max(h1x, std::abs(d1x));
            h2x = std::max(h2x, std::abs(d2x));
            for (int b = 0; b < dim; ++b) {
                double s1, s2;
                if (a == b) {
                    s1 = (p1.value + m1.value - 2 * e1.value) / (h * h);
                    s2 = (p2.value + m2.value - 2 * e2.value) / (h * h);
                } else {
                    const Point pp = plus(plus(s.x, a, h), b, h), pm = plus(plus(s.x, a, h), b, -h);
                    const Point mp = plus(plus(s.x, a, -h), b, h), mm = plus(plus(s.x, a, -h), b, -h);
                    s1 = (eval_H1(H, s.t, pp, s.p).value - eval_H1(H, s.t, pm, s.p).value -
                          eval_H1(H, s.t, mp, s.p).value + eval_H1(H, s.t, mm, s.p).value) /
                         (4 * h * h);
                    s2 = (eval_H2(H, s.t, pp, s.q).value - eval_H2(H, s.t, pm, s.q).value -
                          eval_H2(H, s.t, mp, s.q).value + eval_H2(H, s.t, mm, s.q).value) /
                         (4 * h * h);
                }
                h1xx = std::max(h1xx, std::abs(s1));
                h2xx = std::max(h2xx, std::abs(s2));
            }
        }
        const double h1t =
            std::abs(eval_H1(H, s.t + h, s.x, s.p).value - eval_H1(H, s.t - h, s.x, s.p).value) /
            (2 * h);
        const double h2t =
            std::abs(eval_H2(H, s.t + h, s.x, s.q).value - eval_H2(H, s.t - h, s.x, s.q).value) /
            (2 * h);
        growth1 = std::max(growth1, (h1xx + h1t) / (1.0 + pnorm));
        growth2 = std::max(growth2, (h2xx + h2t) / (1.0 + std::abs(s.q)));
        xgrowth = std::max(xgrowth, (h2x + h1x) / (1.0 + pnorm));
    }

    const double declared_nu = model.bounds.eta_min();
    auto upper = [&](std::string label, double worst) {
        return HypothesisCheck{std::move(label), worst, C, false, worst <= C};
    };
    HypothesisReport r;
    r.nonfinite_samples = nonfinite;
    r.checks.push_back({"ellipticity", nu, declared_nu, true,
                        nu >= declared_nu * (1.0 - 1e-9) && nu > 0.0});
    r.checks.push_back(upper("bounded_at_zero", at_zero));
    r.checks.push_back(upper("bounded_derivatives", derivs));
    r.checks.push_back(upper("mixed_derivative_qx", qx));
    r.checks.push_back({"legendre_lower_H1", legendre1, -C, true, legendre1 >= -C});
    r.checks.push_back({"legendre_lower_H2", legendre2, -C, true, legendre2 >= -C});
    r.checks.push_back(upper("x_legendre_H1", xleg1));
    r.checks.push_back(upper("x_legendre_H2", xleg2));
    r.checks.push_back(upper("second_order_growth_H1", growth1));
    r.checks.push_back(upper("second_order_growth_H2", growth2));
    r.checks.push_back(upper("x_growth", xgrowth));
    return r;
}

std::vector<HypothesisSample> hypothesis_sample_grid(const ModelSpec& model, const GridSpec& grid,
                                                     double p_range, double q_range, int count) {
    // Kronecker sequence: fractional parts of k * (irrational) per coordinate.
    constexpr std::array<double, 6> alpha{0.6180339887498949, 0.4142135623730950,
                                          0.7320508075688772, 0.2360679774997897,
                                          0.6457513110645906, 0.1622776601683793};
    std::vector<HypothesisSample> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
        auto frac = [&](int c) { return std::fmod((k + 1) * alpha[c], 1.0); };
        HypothesisSample s;
        s.t = model.horizon * frac(0);
        s.x = {grid.box_length * frac(1), model.dim == 2 ? grid.box_length * frac(2) : 0.0};
        s.p = {p_range * (2.0 * frac(3) - 1.0),
               model.dim == 2 ? p_range * (2.0 * frac(5) - 1.0) : 0.0};
        s.q = q_range * (2.0 * frac(4) - 1.0);
        out.push_back(s);
    }
    return out;
}

}  // namespace cdmfg
