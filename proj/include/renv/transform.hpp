#pragma once

#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "renv/environment.hpp"

namespace renv {

// Time-varying confining potential Q(t,x) = a x^2/2 + e^{-rt} T_t theta(x).
// a = 1 is the baseline; beta = r + 1/4 is the log-time drift exponent.
struct PotentialSpec {
    double a = 1.0;
    double r = 0.0;
    EnvView env;

    // True when Q(t,.) does not depend on t: zero environment (any r), or an
    // |x|^{1/2}-kind environment with r = 0.
    bool time_independent() const {
        if (!env.path()) return true;
        if (env.path()->kind() == PathKind::zero) return true;
        return env.flow_invariant() && r == 0.0;
    }
};

inline double beta_of_r(double r) { return r + 0.25; }
inline double r_of_beta(double beta) { return beta - 0.25; }

// Environment rebasing: the dynamics from time s onward under theta equals
// the dynamics from 0 under e^{-rs} T_s theta.
PotentialSpec rebase(const PotentialSpec& spec, double s);

// Q(t,x) with the environment read through the env-module contract
// (snapped evaluation).  Throws OutOfWindow when e^{t/2} x leaves the window.
double potential(const PotentialSpec& spec, double t, double x);

struct TransformOptions {
    double quadrature_tol = 1e-9;   // absolute-ish per-cell tolerance scale
    double knot_spacing_cap = 1.0 / 32.0;
    double inverse_tol = 1e-10;     // |S(H(z)) - z| target, relative to scale
    double initial_range = 2.0;     // first tabulation half-range in x
};

// Tabulated space transform S(t,x) = int_0^x exp(Q(t,y)) dy at one fixed t,
// its inverse H, and the coefficients of the transformed SDE
//   sigma(t,z) = exp(Q(t, H(t,z))),
//   d(t,z)     = (x/2) sigma - z/2 - int_0^x [a y^2/2 + (r+1/4) e^{-rt}T_t
//                theta(y)] e^{Q(t,y)} dy  at x = H(t,z).
//
// The environment enters as the piecewise-linear interpolation of its dyadic
// grid at a resolution level chosen so the potential contribution of one grid
// cell stays at the base-grid scale: level = base + 2 log2 of the decay
// factor, clamped, plus a geometric floor keeping knot spacing below the cap.
// Knot values are read by dyadic index, so rebased evaluations at matched
// absolute times agree to rounding.
//
// Tables are per-worker objects; nothing here is thread-safe.
class PseudoScale {
public:
    PseudoScale(PotentialSpec spec, double t, const TransformOptions& opt = {});
    PseudoScale(PotentialSpec spec, double t, const TransformOptions& opt, double lo, double hi);

    double t() const { return t_; }
    const PotentialSpec& spec() const { return spec_; }
    int level() const { return level_; }
    double knot_spacing() const { return hx_; }
    double x_lo() const;
    double x_hi() const;

    // Exponent Q(t,x) as the table sees it (polyline environment).
    double q(double x) const;

    double s(double x);                       // extends the table as needed
    double h(double z);                       // inverse; BracketExhausted if unreachable
    struct Coeffs {
        double x;      // H(t,z)
        double sigma;  // exp(Q(t,x))
        double d;      // time coefficient
    };
    Coeffs coeffs(double z);

    // Non-extending lookups for lock-free ensemble stepping.
    std::optional<double> try_s(double x) const;
    std::optional<Coeffs> try_coeffs(double z, std::int64_t* cell_hint = nullptr) const;

    void ensure_range(double lo, double hi);  // may throw OutOfWindow at the env cap

private:
    struct CellFns;
    void build(double lo, double hi);
    double knot_x(std::int64_t i) const { return static_cast<double>(i) * hx_; }
    double s_at_knot(std::int64_t i) const;
    double d_int_at_knot(std::int64_t i) const;
    double theta_knot(std::int64_t i) const;
    // integrals of (e^Q, dint-integrand) from knot i to x inside cell i
    std::array<double, 2> partial(std::int64_t i, double x, bool precise) const;
    std::array<double, 2> cell_full(std::int64_t i) const;
    double invert_in_cell(std::int64_t i, double z, bool precise) const;
    std::int64_t locate_cell(double z) const;  // -
    bool in_range(std::int64_t i) const { return i >= i_lo_ && i < i_hi_; }

    PotentialSpec spec_;
    double t_;
    TransformOptions opt_;
    double c_eff_ = 0.0;   // scalar on the base path values
    double lam_eff_ = 1.0; // base abscissa per unit x
    int level_ = 0;
    double hx_ = 1.0;
    bool has_theta_ = false;      // random path contributes knot values
    bool analytic_theta_ = false; // deterministic kind evaluated exactly
    bool track_d_ = true;
    std::int64_t i_lo_ = 0, i_hi_ = 0;  // knots i_lo..i_hi inclusive
    std::vector<double> th_;  // c_eff * path value per knot (random kind)
    std::vector<double> s_;   // cumulative S at knots, anchored S(0)=0
    std::vector<double> di_;  // cumulative d-integral at knots
};

// One-shot wrappers over a throwaway table.
double pseudo_scale(const PotentialSpec& spec, double t, double x,
                    const TransformOptions& opt = {});
double inverse_scale(const PotentialSpec& spec, double t, double z,
                     const TransformOptions& opt = {});
// (sigma, d) at tilde-space argument z.
std::pair<double, double> coefficients(const PotentialSpec& spec, double t, double z,
                                       const TransformOptions& opt = {});

// Log time change between the natural clock and the rescaled one:
// (t, y) -> (log t, y/sqrt(t)) for t >= 1, and back.
void brox_to_z_inplace(std::span<double> times, std::span<double> states);
void z_to_brox_inplace(std::span<double> times, std::span<double> states);

}  // namespace renv
