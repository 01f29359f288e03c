#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "renv/environment.hpp"

namespace renv {

// L(x) = sqrt(1 + log(1 + |x|)); weights the per-cell Hoelder norms.
inline double log_weight(double x) { return std::sqrt(1.0 + std::log1p(std::fabs(x))); }

// Discrete Hoelder seminorm: max over n <= n_max of
// (||theta+||_{gamma,n} + ||theta-||_{gamma,n}) / L(n), with the sup taken
// over grid pairs inside [n, n+1].  For the piecewise-linear grid
// representation of the path this equals the continuum seminorm; for rougher
// targets it is a lower bound that tightens as base_level grows.
double holder_seminorm(const EnvironmentPath& path, double gamma, int n_max);

// Piecewise-linear approximation of a path: on [n, n+1] the subdivision has
// m_n = floor(L(n)^{1/gamma}/eta) + 1 equal pieces with
// eta = (epsilon / H_gamma)^{1/gamma}; the negative side mirrors it.
// Guarantees on the represented window:
//   sup |theta - W| <= epsilon,
//   sup |W'| / L(x)^{1/gamma} <= epsilon (1 + (H_gamma/epsilon)^{1/gamma}).
class AffineApproximation {
public:
    AffineApproximation(std::shared_ptr<EnvironmentPath> path, double gamma, double epsilon,
                        int window);

    double gamma() const { return gamma_; }
    double epsilon() const { return epsilon_; }
    double eta() const { return eta_; }
    double hgamma() const { return hgamma_; }
    int window() const { return window_; }
    int n_max() const { return window_ - 1; }  // truncation used for H_gamma
    const std::shared_ptr<EnvironmentPath>& path() const { return path_; }

    double value(double x) const;
    // Right-continuous piecewise-constant derivative: the slope at a
    // breakpoint is the slope of the segment to its right.
    double slope(double x) const;
    // Residual theta_tilde - W against the path's grid polyline.
    double delta(double x) const;

    std::size_t node_count() const;
    // Flattened (breakpoint, value) pairs, ascending in x.
    std::vector<std::pair<double, double>> nodes() const;

    struct Cell {
        double h = 1.0;               // 1 / m_n
        std::vector<double> values;   // m_n + 1 node values, ascending in x
    };
    const Cell& cell_pos(int n) const { return pos_[static_cast<std::size_t>(n)]; }
    const Cell& cell_neg(int n) const { return neg_[static_cast<std::size_t>(n)]; }

private:
    std::shared_ptr<EnvironmentPath> path_;
    double gamma_, epsilon_, eta_, hgamma_;
    int window_;
    std::vector<Cell> pos_;  // cell n covers [n, n+1]
    std::vector<Cell> neg_;  // cell n covers [-(n+1), -n], values ascending in x
};

AffineApproximation affine_approx(std::shared_ptr<EnvironmentPath> path, double gamma,
                                  double epsilon, int window);

}  // namespace renv
