#pragma once

#include "cdmfg/grid.hpp"

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace cdmfg {

// Diffusion control bounds lambda1 < Gamma < lambda2 and the drift bound M >= |b|.
// The diffusion controls enter the Hamiltonian through eta = sigma^2/2 in
// S' = [lambda1^2/2, lambda2^2/2].
class ControlBounds {
public:
    ControlBounds() : ControlBounds(1.0, 2.0, 1.0) {}
    ControlBounds(double lambda1, double lambda2, double drift_bound);

    double lambda1() const { return lambda1_; }
    double lambda2() const { return lambda2_; }
    double drift_bound() const { return drift_bound_; }
    double eta_min() const { return 0.5 * lambda1_ * lambda1_; }
    double eta_max() const { return 0.5 * lambda2_ * lambda2_; }

private:
    double lambda1_;
    double lambda2_;
    double drift_bound_;
};

using DriftLagrangian = std::function<double(double t, const Point& x, const Point& alpha)>;
using DiffusionLagrangian = std::function<double(double t, const Point& x, double eta)>;

// Closed-form reference model: U = [-alpha_max, alpha_max]^d with
// L1 = l1_weight*|alpha|^2/2, and S' from the bounds with L3 = l3_weight*(eta - eta_center)^2.
struct ModelACoefficients {
    double alpha_max = 1.0;
    double l1_weight = 1.0;
    double eta_center = 1.0;
    double l3_weight = 1.0;
};

// Finite control sets minimised exhaustively.
struct TabulatedControls {
    std::vector<Point> drift_controls;
    std::vector<double> diffusion_controls;  // increasing, inside S'
    DriftLagrangian l1;
    DiffusionLagrangian l3;
    bool depends_on_tx = true;  // false lets mollification skip the (t, x) offsets
};

class HamiltonianSpec;

struct MollifiedHamiltonian {
    std::shared_ptr<const HamiltonianSpec> base;
    double delta = 0.0;
};

class HamiltonianSpec {
public:
    using Representation = std::variant<ModelACoefficients, TabulatedControls, MollifiedHamiltonian>;

    HamiltonianSpec() : HamiltonianSpec(model_a(1, ControlBounds{}, ModelACoefficients{})) {}

    static HamiltonianSpec model_a(int dim, const ControlBounds& bounds,
                                   const ModelACoefficients& coeffs);
    static HamiltonianSpec tabulated(int dim, const ControlBounds& bounds,
                                     TabulatedControls controls);

    int dim() const { return dim_; }
    const ControlBounds& bounds() const { return bounds_; }
    const Representation& representation() const { return rep_; }
    bool depends_on_tx() const;

    // sup over the drift control set of max_k |alpha_k|, i.e. sup |H1_p| per axis.
    double drift_sup() const;

private:
    friend HamiltonianSpec mollify_hamiltonian(const HamiltonianSpec& spec, double delta);
    HamiltonianSpec(int dim, const ControlBounds& bounds, Representation rep)
        : dim_(dim), bounds_(bounds), rep_(std::move(rep)) {}

    int dim_;
    ControlBounds bounds_;
    Representation rep_;
};

struct H1Eval {
    double value = 0.0;
    Point argmin{0.0, 0.0};
    Point derivative{0.0, 0.0};  // H1_p
};

struct H2Eval {
    double value = 0.0;
    double argmin = 0.0;
    double derivative = 0.0;  // H2_q, lies in S'
};

// H1(t,x,p) = min over U of <p, alpha> + L1(t,x,alpha).
H1Eval eval_H1(const HamiltonianSpec& spec, double t, const Point& x, const Point& p);
// H2(t,x,q) = min over S' of eta*q + L3(t,x,eta).
H2Eval eval_H2(const HamiltonianSpec& spec, double t, const Point& x, double q);

double drift_lagrangian(const HamiltonianSpec& spec, double t, const Point& x,
                        const Point& alpha);
double diffusion_lagrangian(const HamiltonianSpec& spec, double t, const Point& x, double eta);

// Interior points s in (0,1) where the last-variable derivative along the ray
// s -> H(s*arg) is not smooth. Empty when unknown.
std::vector<double> ray_breakpoints_H1(const HamiltonianSpec& spec, const Point& p);
std::vector<double> ray_breakpoints_H2(const HamiltonianSpec& spec, double q);

// Convolution of the Hamiltonians with a normalised quadratic bump of radius delta,
// 9 offsets per axis, over (t, x, last variable).
HamiltonianSpec mollify_hamiltonian(const HamiltonianSpec& spec, double delta);

// L3(eta) = L2(sqrt(2 eta)) for a diffusion cost written in terms of sigma.
DiffusionLagrangian diffusion_cost_from_sigma(
    std::function<double(double t, const Point& x, double sigma)> l2);

// ---------------------------------------------------------------------------
// Couplings and data of the game.

struct KernelCoupling {
    double gain = 0.0;   // c_F
    double width = 0.1;  // epsilon of the periodic Gaussian kernel
};

struct TerminalCost {
    enum class Kind { constant, cosine };
    Kind kind = Kind::constant;
    double offset = 0.0;
    double amplitude = 0.0;  // cosine: offset + amplitude * sum_k cos(2 pi x_k / L)
    double gain = 0.0;       // c_G
};

struct InitialDensity {
    enum class Kind { uniform, dirac, gaussian };
    Kind kind = Kind::gaussian;
    Point center{0.5, 0.5};
    double width = 0.1;
};

struct ModelSpec {
    int dim = 1;
    ControlBounds bounds;
    HamiltonianSpec hamiltonians;
    KernelCoupling coupling_f;
    TerminalCost terminal_g;
    InitialDensity m0;
    double discount_lambda = 0.0;
    double horizon = 1.0;

    void validate() const;
};

// Reference configuration used across tests: d = 1, U = [-1,1], L1 = alpha^2/2,
// S' = [0.5, 2], L3 = (eta-1)^2, no couplings, constant terminal cost.
ModelSpec model_a_reference(int dim = 1);

// S' = {nu}, L3 = 0, U = {0}, L1 = 0: the HJB reduces to the backward heat equation.
ModelSpec single_control_model(double nu, int dim = 1);

// Periodic Gaussian kernel sampled on the grid and normalised to unit mass.
// Positive definite on the torus, so F and G built from it are monotone in m.
class PeriodicKernel {
public:
    PeriodicKernel(const GridSpec& grid, double width);

    // (rho * m)(x_i) = sum_j rho(x_i - x_j) m_j dx^d
    std::vector<double> apply(std::span<const double> m) const;
    double weight(int offset) const { return weights_[static_cast<std::size_t>(offset)]; }

private:
    GridSpec grid_;
    std::vector<double> weights_;  // 1D profile indexed by periodic offset
};

double terminal_base(const ModelSpec& model, const GridSpec& grid, const Point& x);

// F(t, ., m) = c_F * rho * m on one slice.
std::vector<double> coupling_F_slice(const ModelSpec& model, const PeriodicKernel& kernel,
                                     std::span<const double> m);
// G(., m) = g0 + c_G * rho * m.
std::vector<double> terminal_G_slice(const ModelSpec& model, const GridSpec& grid,
                                     const PeriodicKernel& kernel, std::span<const double> m);

// Discretised m0 with unit mass (Dirac: all mass on the nearest node).
std::vector<double> discretize_initial_density(const InitialDensity& m0, const GridSpec& grid);

// ---------------------------------------------------------------------------
// Sampled audit of the structural hypotheses used by the regularity theory.

struct HypothesisSample {
    double t = 0.0;
    Point x{0.0, 0.0};
    Point p{0.0, 0.0};
    double q = 0.0;
};

struct HypothesisCheck {
    std::string label;
    double worst = 0.0;  // worst sampled constant
    double bound = 0.0;  // declared bound it is compared against
    bool lower = false;  // true: pass iff worst >= bound; false: pass iff worst <= bound
    bool pass = false;
};

struct HypothesisReport {
    std::vector<HypothesisCheck> checks;
    int nonfinite_samples = 0;

    const HypothesisCheck& find(const std::string& label) const;
    bool all_pass() const;
    std::string summary() const;
};

// constant_bound is the declared C of the growth conditions; the declared nu
// is lambda1^2/2.
HypothesisReport validate_hypotheses(const ModelSpec& model,
                                     std::span<const HypothesisSample> samples,
                                     double constant_bound = 10.0);

// Samples (t, x, p, q) on a regular grid covering the given ranges.
std::vector<HypothesisSample> hypothesis_sample_grid(const ModelSpec& model, const GridSpec& grid,
                                                     double p_range, double q_range, int count);

}  // namespace cdmfg
