#pragma once

#include <functional>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "renv/affine.hpp"
#include "renv/integrate.hpp"
#include "renv/measure.hpp"
#include "renv/transform.hpp"

namespace renv {

// Integrand phi(t,y) with analytic partials; the module applies the
// generator to F(t,x) = int_0^x exp(e^{-rt} T_t theta(y)) phi(t,y) dy.
struct PhiIntegrand {
    std::function<double(double, double)> phi;
    std::function<double(double, double)> dphi_dx;
    std::function<double(double, double)> dphi_dt;
};

struct ChainRuleResult {
    double spatial = 0.0;  // generator's spatial part on F^phi at (t,x)
    double time = 0.0;     // time derivative of F^phi at (t,x)
    double f_value = 0.0;  // F^phi(t,x)
};

// Environment values enter through the grid polyline, so the results are
// exact for the represented path; integrals run by adaptive quadrature.
ChainRuleResult chain_rule_apply(const PotentialSpec& spec, const PhiIntegrand& phi, double t,
                                 double x, double quad_tol = 1e-9);

enum class FamilyKind { f_family, g_family };

// C^2 clamp: 1 on [1,2], v on [3,inf), quintic blend on [2,3]; monotone and
// everywhere <= v.
double smooth_clamp(double v);
double smooth_clamp_d1(double v);
double smooth_clamp_d2(double v);

// Weighted comparison family built on the residual of the piecewise-linear
// approximation:
//   F(t,x) = 1 + int_0^x exp(e^{-rt} T_t [theta - W](y)) psi'(y) dy
// with psi = U_alpha (f-family) or psi = clamp(V_alpha) (g-family).
// approx == nullptr treats the environment as exactly zero.
class LyapunovFamily {
public:
    LyapunovFamily(FamilyKind kind, double alpha,
                   std::shared_ptr<const AffineApproximation> approx);

    FamilyKind kind() const { return kind_; }
    double alpha() const { return alpha_; }
    const std::shared_ptr<const AffineApproximation>& approx() const { return approx_; }
    double hgamma() const { return approx_ ? approx_->hgamma() : 0.0; }
    double epsilon() const { return approx_ ? approx_->epsilon() : 0.0; }

    double psi(double x) const;
    double dpsi(double x) const;
    double ddpsi(double x) const;

private:
    FamilyKind kind_;
    double alpha_;
    std::shared_ptr<const AffineApproximation> approx_;
};

// exp(q epsilon) with q = max(1, e^{-(r+1/4)T}): F is sandwiched between
// U_alpha / Psi and U_alpha * Psi on [0,T].
double sandwich_factor(double epsilon, double r, double t_max);

struct DriftReport {
    double lambda = 0.0;
    double t_max = 0.0, x_max = 0.0;
    int nt = 0, nx = 0;
    double b_realized = 0.0;     // minimal constant covering L F + lambda F on the grid
    double max_violation = 0.0;  // max(L F + lambda F) - b_realized, <= 0 by construction
    bool boundary_growth = false;
    double hgamma = 0.0;
    double sandwich_lo = 0.0, sandwich_hi = 0.0;  // range of F / U_alpha on the grid
};

// Evaluates L F + lambda F over [0,t_max] x [-x_max,x_max] (a = 1 only; other
// a values are exercised through the chain rules).
DriftReport lyapunov_generator_check(const PotentialSpec& spec, const LyapunovFamily& family,
                                     double lambda, double t_max, double x_max, int nt, int nx,
                                     double quad_tol = 1e-9);

struct KernelDriftReport {
    std::vector<double> x_grid, pu_mean, pu_se;
    double b_min = 0.0;
    double set_half_width = 0.0;  // induced set {U <= B/kappa} is [-w, w]
    double eta = 0.0, kappa = 0.0, tau = 0.0;
    bool indicator_active = false;
    std::int64_t n_escaped = 0;
};

// Monte Carlo transfer-operator drift: estimates P_{s,t} U_alpha on the grid
// and reports the minimal B closing the inequality at mean + 2 SE.
KernelDriftReport kernel_drift_check(const PotentialSpec& spec, double alpha, double eta,
                                     double kappa, double tau, double s, double t,
                                     std::span<const double> x_grid, int n_replicas,
                                     rng::Stream noise, const IntegrateOptions& opt = {});

struct DiscreteKernel {
    std::vector<double> states;
    std::vector<std::vector<double>> rows;  // rows[i][j], each summing to 1
    std::uint64_t env_seed = 0;
    double t_step = 1.0;
    int n_per_state = 0;

    std::size_t size() const { return states.size(); }
    double apply_weight(std::size_t i, const WeightFunction& f) const;
    std::vector<double> row_power(std::size_t i, int n) const;  // delta_i K^n
};

// One-unit transition rows estimated by binning terminal states into the
// Voronoi cells of the grid.
DiscreteKernel estimate_kernel(const PotentialSpec& spec, std::span<const double> state_grid,
                               int n_per_state, rng::Stream noise, double t_step = 1.0,
                               const IntegrateOptions& opt = {});

struct CouplingSet {
    std::size_t lo = 0, hi = 0;  // inclusive index range of the set
    double eps = 0.0;            // (sum of row infima) clamped to 1/2
    std::vector<double> nu;      // normalized infima
};
CouplingSet coupling_set(const DiscreteKernel& k, std::size_t lo, std::size_t hi);

struct CouplingEstimate {
    std::size_t set_lo = 0, set_hi = 0;
    double eps = 0.0;
    std::vector<double> nu;
    // product-chain matrices; state (x_i, x_j) has flat index i*m+j
    std::vector<std::vector<double>> residual_r, coupled_p, star_p;
};

// Residual rows (P - eps nu)/(1 - eps) paired independently on the set,
// independent product off it; the coupled kernel re-adds eps mass on the
// diagonal.  Marginal identities hold exactly on the matrices.
CouplingEstimate build_coupling(const DiscreteKernel& k, const CouplingSet& cs);

// max over j-element subsets of the product of sequence values (1 for j = 0).
double dm_top_product(std::span<const double> seq, int j);

// Two-term coupling bound on ||nu1 K^n - nu2 K^n||_U: geometric part scaled
// by the initial norms plus the accumulated perturbation term.
double dm_bound(int n, int j, double rho, std::span<const double> eps_seq,
                std::span<const double> b_seq, double norm1, double norm2);

// Exact matrix-level drift: smallest B with K U <= lvl * U + B 1_{U <= B/kappa}.
double kernel_drift_b_min(const DiscreteKernel& k, const WeightFunction& u, double lvl,
                          double kappa, std::pair<std::size_t, std::size_t>* set_out = nullptr);

double weighted_mass_distance(const DiscreteKernel& k, std::span<const double> a,
                              std::span<const double> b, const WeightFunction& f);

}  // namespace renv
