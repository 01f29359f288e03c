#include "renv/drift.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "renv/errors.hpp"
#include "renv/quadrature.hpp"

namespace renv {

namespace {

// e^{-rt} T_t theta(y) through the grid polyline.
double theta_part(const PotentialSpec& spec, double t, double y) {
    if (!spec.env.path() || spec.env.path()->kind() == PathKind::zero) return 0.0;
    const auto& p = *spec.env.path();
    return std::exp(-spec.r * t) * spec.env.flow(t).polyline_value(p.base_level(), y);
}

}  // namespace

ChainRuleResult chain_rule_apply(const PotentialSpec& spec, const PhiIntegrand& phi, double t,
                                 double x, double quad_tol) {
    const double rq = spec.r + 0.25;
    auto integrand = [&](double y) -> std::array<double, 3> {
        const double th = theta_part(spec, t, y);
        const double e = std::exp(th);
        const double p = phi.phi(t, y);
        return {e * p, e * (phi.dphi_dt(t, y) - 0.5 * y * phi.dphi_dx(t, y)), e * th * p};
    };
    std::array<double, 3> ints{};
    if (x != 0.0) {
        const double rough = std::fabs(integrand(0.5 * x)[0] * x) + 1.0;
        ints = adaptive_simpson_vec<3>(integrand, 0.0, x, quad_tol * rough * 1e-3, 30);
    }
    const double thx = theta_part(spec, t, x);
    const double ex = std::exp(thx);
    ChainRuleResult out;
    out.f_value = ints[0];
    out.spatial = 0.5 * ex * (phi.dphi_dx(t, x) - spec.a * x * phi.phi(t, x));
    out.time = 0.5 * ex * x * phi.phi(t, x) - 0.5 * ints[0] + ints[1] - rq * ints[2];
    return out;
}

namespace {
// quintic blend on [2,3]: h(s) = 1 + 16 s^3 - 23 s^4 + 9 s^5
double blend(double s) { return 1.0 + s * s * s * (16.0 + s * (-23.0 + 9.0 * s)); }
double blend_d1(double s) { return s * s * (48.0 + s * (-92.0 + 45.0 * s)); }
double blend_d2(double s) { return s * (96.0 + s * (-276.0 + 180.0 * s)); }
}  // namespace

double smooth_clamp(double v) {
    if (v <= 2.0) return 1.0;
    if (v >= 3.0) return v;
    return blend(v - 2.0);
}

double smooth_clamp_d1(double v) {
    if (v <= 2.0) return 0.0;
    if (v >= 3.0) return 1.0;
    return blend_d1(v - 2.0);
}

double smooth_clamp_d2(double v) {
    if (v <= 2.0 || v >= 3.0) return 0.0;
    return blend_d2(v - 2.0);
}

LyapunovFamily::LyapunovFamily(FamilyKind kind, double alpha,
                               std::shared_ptr<const AffineApproximation> approx)
    : kind_(kind), alpha_(alpha), approx_(std::move(approx)) {
    if (alpha_ <= 0.0 || alpha_ >= 1.0) throw ConfigError("family exponent must be in (0,1)");
    if (approx_) {
        const double g = approx_->gamma();
        if (kind_ == FamilyKind::g_family && !(g > 0.5 * alpha_ && g < 0.5))
            throw ConfigError("g-family needs gamma in (alpha/2, 1/2)");
    }
}

double LyapunovFamily::psi(double x) const {
    const double u = std::exp(0.5 * alpha_ * x * x);
    if (kind_ == FamilyKind::f_family) return u;
    return smooth_clamp(std::exp(std::pow(std::fabs(x), alpha_)));
}

double LyapunovFamily::dpsi(double x) const {
    if (kind_ == FamilyKind::f_family)
        return alpha_ * x * std::exp(0.5 * alpha_ * x * x);
    const double ax = std::fabs(x);
    const double v = std::exp(std::pow(ax, alpha_));
    const double c1 = smooth_clamp_d1(v);
    if (c1 == 0.0 || x == 0.0) return 0.0;
    const double vp = alpha_ * std::pow(ax, alpha_ - 1.0) * (x > 0 ? 1.0 : -1.0) * v;
    return c1 * vp;
}

double LyapunovFamily::ddpsi(double x) const {
    if (kind_ == FamilyKind::f_family) {
        const double u = std::exp(0.5 * alpha_ * x * x);
        return alpha_ * (1.0 + alpha_ * x * x) * u;
    }
    const double ax = std::fabs(x);
    const double v = std::exp(std::pow(ax, alpha_));
    const double c1 = smooth_clamp_d1(v);
    const double c2 = smooth_clamp_d2(v);
    if ((c1 == 0.0 && c2 == 0.0) || x == 0.0) return 0.0;
    const double sg = (x > 0 ? 1.0 : -1.0);
    const double vp = alpha_ * std::pow(ax, alpha_ - 1.0) * sg * v;
    const double vpp =
        (alpha_ * (alpha_ - 1.0) * std::pow(ax, alpha_ - 2.0) +
         alpha_ * alpha_ * std::pow(ax, 2.0 * alpha_ - 2.0)) * v;
    return c2 * vp * vp + c1 * vpp;
}

double sandwich_factor(double epsilon, double r, double t_max) {
    const double q = std::max(1.0, std::exp(-(r + 0.25) * t_max));
    return std::exp(q * epsilon);
}

DriftReport lyapunov_generator_check(const PotentialSpec& spec, const LyapunovFamily& family,
                                     double lambda, double t_max, double x_max, int nt, int nx,
                                     double quad_tol) {
    if (spec.a != 1.0) throw ConfigError("generator check runs the a = 1 operator");
    if (spec.env.path() && spec.env.lam() != 1.0)
        throw ConfigError("generator check expects an unscaled environment view");
    if (lambda <= 0.0) throw ConfigError("lambda must be positive");
    const auto* ap = family.approx().get();
    if (ap != nullptr && ap->window() < std::exp(0.5 * t_max) * x_max)
        throw ConfigError("approximation window too small for the requested grid");

    const double coef = spec.env.path() ? spec.env.coef() : 1.0;
    const double rq = spec.r + 0.25;

    DriftReport rep;
    rep.lambda = lambda;
    rep.t_max = t_max;
    rep.x_max = x_max;
    rep.nt = nt;
    rep.nx = nx;
    rep.hgamma = family.hgamma();
    rep.sandwich_lo = std::numeric_limits<double>::infinity();
    rep.sandwich_hi = 0.0;

    double vmax = -std::numeric_limits<double>::infinity();
    bool boundary = false;

    for (int it = 0; it < nt; ++it) {
        const double t = t_max * static_cast<double>(it) / std::max(1, nt - 1);
        const double ce = coef * std::exp(-rq * t);
        const double ms = std::exp(0.5 * t);

        auto c_delta = [&](double y) { return ap ? ce * ap->delta(ms * y) : 0.0; };
        auto cw_slope = [&](double y) { return ap ? ce * ms * ap->slope(ms * y) : 0.0; };
        auto seg_integrand = [&](double y) -> std::array<double, 2> {
            const double cd = c_delta(y);
            const double e = std::exp(cd);
            return {e * family.dpsi(y),
                    e * (0.5 * y * family.ddpsi(y) + rq * cd * family.dpsi(y))};
        };

        auto eval_row = [&](std::span<const double> xs) {
            double f_int = 0.0, t_int = 0.0, prev = 0.0;
            double row_max = -std::numeric_limits<double>::infinity();
            double v_last = 0.0, v_prev_edge = 0.0;
            for (std::size_t j = 0; j < xs.size(); ++j) {
                const double x = xs[j];
                if (x != prev) {
                    const double rough =
                        std::fabs(seg_integrand(0.5 * (prev + x))[0] * (x - prev)) + 1e-6;
                    const auto seg = adaptive_simpson_vec<2>(seg_integrand, prev, x,
                                                             quad_tol * rough * 1e-3, 26);
                    f_int += seg[0];
                    t_int += seg[1];
                    prev = x;
                }
                const double cd = c_delta(x);
                const double e = std::exp(cd);
                const double fval = 1.0 + f_int;
                const double spatial =
                    0.5 * e * (family.ddpsi(x) - (cw_slope(x) + x) * family.dpsi(x));
                const double time = 0.5 * e * x * family.dpsi(x) - 0.5 * f_int - t_int;
                const double v = spatial + time + lambda * fval;
                row_max = std::max(row_max, v);
                if (j + 1 == xs.size()) {
                    v_last = v;
                } else if (j + 2 == xs.size()) {
                    v_prev_edge = v;
                }
                const double ratio = fval / std::exp(0.5 * family.alpha() * x * x);
                rep.sandwich_lo = std::min(rep.sandwich_lo, ratio);
                rep.sandwich_hi = std::max(rep.sandwich_hi, ratio);
                vmax = std::max(vmax, v);
            }
            if (v_last >= row_max && v_last > v_prev_edge && v_last > 0.0) boundary = true;
        };

        std::vector<double> xs_pos, xs_neg;
        for (int jx = 0; jx < nx; ++jx) {
            const double x = -x_max + 2.0 * x_max * static_cast<double>(jx) / (nx - 1);
            (x >= 0.0 ? xs_pos : xs_neg).push_back(x);
        }
        std::sort(xs_pos.begin(), xs_pos.end());
        std::sort(xs_neg.begin(), xs_neg.end(), std::greater<>());
        eval_row(xs_pos);
        eval_row(xs_neg);
    }

    rep.b_realized = std::max(0.0, vmax);
    rep.max_violation = vmax - rep.b_realized;
    rep.boundary_growth = boundary;
    return rep;
}

KernelDriftReport kernel_drift_check(const PotentialSpec& spec, double alpha, double eta,
                                     double kappa, double tau, double s, double t,
                                     std::span<const double> x_grid, int n_replicas,
                                     rng::Stream noise, const IntegrateOptions& opt) {
    if (eta <= 0 || kappa <= 0 || tau < 0) throw ConfigError("eta, kappa must be positive");
    const WeightFunction u = WeightFunction::U(alpha);

    std::vector<double> z0;
    z0.reserve(x_grid.size() * static_cast<std::size_t>(n_replicas));
    for (double x : x_grid)
        z0.insert(z0.end(), static_cast<std::size_t>(n_replicas), x);

    const double snap[] = {t};
    std::vector<std::uint8_t> esc;
    const auto snaps = ensemble_equivalent(spec, s, z0, snap, opt.dt, noise, opt, &esc);

    KernelDriftReport rep;
    rep.eta = eta;
    rep.kappa = kappa;
    rep.tau = tau;
    rep.indicator_active = (t - s) <= tau;
    rep.x_grid.assign(x_grid.begin(), x_grid.end());
    rep.n_escaped = std::count(esc.begin(), esc.end(), std::uint8_t{1});

    for (std::size_t g = 0; g < x_grid.size(); ++g) {
        std::vector<double> vals;
        vals.reserve(static_cast<std::size_t>(n_replicas));
        for (int i = 0; i < n_replicas; ++i) {
            const double x = snaps[0][g * static_cast<std::size_t>(n_replicas) +
                                      static_cast<std::size_t>(i)];
            if (std::isfinite(x)) vals.push_back(u(x));
        }
        if (vals.size() < 16) throw ConfigError("kernel drift: too many escapes on the grid");
        // exp-moment estimation hazard: reject when the top decile carries
        // most of the average
        std::vector<double> sorted = vals;
        std::sort(sorted.begin(), sorted.end());
        const std::size_t dec = vals.size() / 10;
        const double top = std::accumulate(sorted.end() - static_cast<std::ptrdiff_t>(dec),
                                           sorted.end(), 0.0);
        const double total = std::accumulate(sorted.begin(), sorted.end(), 0.0);
        if (dec > 0 && top > 0.5 * total)
            throw TailDominated("transfer-operator average dominated by the top decile");
        rep.pu_mean.push_back(stats::mean(vals));
        rep.pu_se.push_back(stats::stderr_of_mean(vals));
    }

    const double lvl = eta + kappa + (rep.indicator_active ? 1.0 : 0.0);
    auto feasible = [&](double b) {
        for (std::size_t g = 0; g < x_grid.size(); ++g) {
            const double ux = u(x_grid[g]);
            const double ub = rep.pu_mean[g] + 2.0 * rep.pu_se[g];
            if (ub <= lvl * ux) continue;
            if (ux > b / kappa || ub > lvl * ux + b) return false;
        }
        return true;
    };
    double lo = 0.0, hi = 1.0;
    for (std::size_t g = 0; g < x_grid.size(); ++g)
        hi = std::max({hi, rep.pu_mean[g] + 2.0 * rep.pu_se[g], kappa * u(x_grid[g])});
    for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        (feasible(mid) ? hi : lo) = mid;
    }
    rep.b_min = hi;
    rep.set_half_width = std::sqrt(std::max(0.0, 2.0 * std::log(rep.b_min / kappa) / alpha));
    return rep;
}

double DiscreteKernel::apply_weight(std::size_t i, const WeightFunction& f) const {
    double s = 0.0;
    for (std::size_t j = 0; j < states.size(); ++j) s += rows[i][j] * f(states[j]);
    return s;
}

std::vector<double> DiscreteKernel::row_power(std::size_t i, int n) const {
    std::vector<double> v(states.size(), 0.0), next(states.size(), 0.0);
    v[i] = 1.0;
    for (int step = 0; step < n; ++step) {
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t a = 0; a < states.size(); ++a) {
            if (v[a] == 0.0) continue;
            const double w = v[a];
            const auto& row = rows[a];
            for (std::size_t b = 0; b < states.size(); ++b) next[b] += w * row[b];
        }
        std::swap(v, next);
    }
    return v;
}

DiscreteKernel estimate_kernel(const PotentialSpec& spec, std::span<const double> state_grid,
                               int n_per_state, rng::Stream noise, double t_step,
                               const IntegrateOptions& opt) {
    if (state_grid.size() < 2) throw ConfigError("estimate_kernel needs a grid");
    DiscreteKernel k;
    k.states.assign(state_grid.begin(), state_grid.end());
    k.t_step = t_step;
    k.n_per_state = n_per_state;
    if (spec.env.path()) k.env_seed = spec.env.path()->seed();

    std::vector<double> z0;
    z0.reserve(state_grid.size() * static_cast<std::size_t>(n_per_state));
    for (double x : state_grid)
        z0.insert(z0.end(), static_cast<std::size_t>(n_per_state), x);
    const double snap[] = {t_step};
    const auto snaps = ensemble_equivalent(spec, 0.0, z0, snap, opt.dt, noise, opt);

    const std::size_t m = state_grid.size();
    std::vector<double> edges(m - 1);
    for (std::size_t j = 0; j + 1 < m; ++j) edges[j] = 0.5 * (state_grid[j] + state_grid[j + 1]);

    k.rows.assign(m, std::vector<double>(m, 0.0));
    for (std::size_t g = 0; g < m; ++g) {
        std::int64_t used = 0;
        for (int i = 0; i < n_per_state; ++i) {
            const double x =
                snaps[0][g * static_cast<std::size_t>(n_per_state) + static_cast<std::size_t>(i)];
            if (!std::isfinite(x)) continue;
            const auto cell = static_cast<std::size_t>(
                std::upper_bound(edges.begin(), edges.end(), x) - edges.begin());
            k.rows[g][cell] += 1.0;
            ++used;
        }
        if (used == 0) throw EscapeCapExceeded("kernel row lost every replica");
        for (auto& v : k.rows[g]) v /= static_cast<double>(used);
    }
    return k;
}

CouplingSet coupling_set(const DiscreteKernel& k, std::size_t lo, std::size_t hi) {
    if (lo > hi || hi >= k.size()) throw ConfigError("coupling_set: bad index range");
    CouplingSet cs;
    cs.lo = lo;
    cs.hi = hi;
    cs.nu.assign(k.size(), std::numeric_limits<double>::infinity());
    for (std::size_t i = lo; i <= hi; ++i)
        for (std::size_t j = 0; j < k.size(); ++j) cs.nu[j] = std::min(cs.nu[j], k.rows[i][j]);
    const double total = std::accumulate(cs.nu.begin(), cs.nu.end(), 0.0);
    if (total <= 0.0)
        throw NotACouplingSet("row infima vanish over the candidate set");
    for (auto& v : cs.nu) v /= total;
    cs.eps = std::min(total, 0.5);
    return cs;
}

CouplingEstimate build_coupling(const DiscreteKernel& k, const CouplingSet& cs) {
    const std::size_t m = k.size();
    CouplingEstimate ce;
    ce.set_lo = cs.lo;
    ce.set_hi = cs.hi;
    ce.eps = cs.eps;
    ce.nu = cs.nu;

    // residual distributions on the set
    std::vector<std::vector<double>> resid(m);
    for (std::size_t i = cs.lo; i <= cs.hi; ++i) {
        resid[i].assign(m, 0.0);
        double sum = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            double v = (k.rows[i][j] - cs.eps * cs.nu[j]) / (1.0 - cs.eps);
            if (v < -1e-12)
                throw NegativeResidual("residual row went negative; shrink the set and retry");
            v = std::max(v, 0.0);
            resid[i][j] = v;
            sum += v;
        }
        for (auto& v : resid[i]) v /= sum;
    }

    const std::size_t mm = m * m;
    auto in_set = [&](std::size_t i) { return i >= cs.lo && i <= cs.hi; };
    ce.residual_r.assign(mm, std::vector<double>(mm, 0.0));
    ce.coupled_p.assign(mm, std::vector<double>(mm, 0.0));
    ce.star_p.assign(mm, std::vector<double>(mm, 0.0));

    for (std::size_t x = 0; x < m; ++x) {
        for (std::size_t y = 0; y < m; ++y) {
            const std::size_t row = x * m + y;
            const bool coupled_cell = in_set(x) && in_set(y);
            const auto& px = coupled_cell ? resid[x] : k.rows[x];
            const auto& py = coupled_cell ? resid[y] : k.rows[y];
            auto& r_row = ce.residual_r[row];
            auto& p_row = ce.coupled_p[row];
            auto& s_row = ce.star_p[row];
            for (std::size_t a = 0; a < m; ++a) {
                if (px[a] == 0.0) continue;
                const double wa = px[a];
                for (std::size_t b = 0; b < m; ++b) {
                    const double v = wa * py[b];
                    if (v == 0.0) continue;
                    r_row[a * m + b] = v;
                }
            }
            if (coupled_cell) {
                for (std::size_t a = 0; a < mm; ++a) p_row[a] = (1.0 - cs.eps) * r_row[a];
                for (std::size_t a = 0; a < m; ++a) p_row[a * m + a] += cs.eps * cs.nu[a];
                s_row = r_row;
            } else {
                p_row = r_row;
                s_row = p_row;
            }
        }
    }
    return ce;
}

double dm_top_product(std::span<const double> seq, int j) {
    if (j <= 0) return 1.0;
    if (static_cast<std::size_t>(j) > seq.size())
        throw ConfigError("dm_top_product: subset larger than the sequence");
    std::vector<double> sorted(seq.begin(), seq.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double prod = 1.0;
    for (int i = 0; i < j; ++i) prod *= sorted[static_cast<std::size_t>(i)];
    return prod;
}

double dm_bound(int n, int j, double rho, std::span<const double> eps_seq,
                std::span<const double> b_seq, double norm1, double norm2) {
    if (n < 0 || j < 1 || j > n + 1) throw ConfigError("dm_bound: need 1 <= j <= n+1");
    if (eps_seq.size() != static_cast<std::size_t>(n) || b_seq.size() != static_cast<std::size_t>(n))
        throw ConfigError("dm_bound: sequences must have length n");
    if (rho <= 0.0 || rho >= 1.0) throw ConfigError("dm_bound: rho must be in (0,1)");

    std::vector<double> one_minus(eps_seq.size());
    for (std::size_t i = 0; i < eps_seq.size(); ++i) one_minus[i] = 1.0 - eps_seq[i];
    const double lead = (j <= n) ? dm_top_product(one_minus, j) : 0.0;
    const double bpart = dm_top_product(b_seq, j - 1);

    double tail = 0.0;
    double rk = 1.0;
    for (int kk = 0; kk < n; ++kk) {
        tail += rk * b_seq[static_cast<std::size_t>(n - kk - 1)];
        rk *= rho;
    }
    const double rn = std::pow(rho, n);
    return 2.0 * rn * (lead + bpart) * norm1 * norm2 + 2.0 * lead * tail;
}

double kernel_drift_b_min(const DiscreteKernel& k, const WeightFunction& u, double lvl,
                          double kappa, std::pair<std::size_t, std::size_t>* set_out) {
    std::vector<double> pu(k.size());
    for (std::size_t i = 0; i < k.size(); ++i) pu[i] = k.apply_weight(i, u);
    auto feasible = [&](double b) {
        for (std::size_t i = 0; i < k.size(); ++i) {
            const double ux = u(k.states[i]);
            if (pu[i] <= lvl * ux) continue;
            if (ux > b / kappa || pu[i] > lvl * ux + b) return false;
        }
        return true;
    };
    double lo = 0.0, hi = 1.0;
    for (std::size_t i = 0; i < k.size(); ++i) hi = std::max({hi, pu[i], kappa * u(k.states[i])});
    for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        (feasible(mid) ? hi : lo) = mid;
    }
    if (set_out != nullptr) {
        std::size_t a = k.size(), b = 0;
        for (std::size_t i = 0; i < k.size(); ++i) {
            if (u(k.states[i]) <= hi / kappa) {
                a = std::min(a, i);
                b = std::max(b, i);
            }
        }
        *set_out = {a, b};
    }
    return hi;
}

double weighted_mass_distance(const DiscreteKernel& k, std::span<const double> a,
                              std::span<const double> b, const WeightFunction& f) {
    double s = 0.0;
    for (std::size_t j = 0; j < k.size(); ++j) s += f(k.states[j]) * std::fabs(a[j] - b[j]);
    return s;
}

}  // namespace renv
