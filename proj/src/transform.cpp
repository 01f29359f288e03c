#include "renv/transform.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "renv/errors.hpp"
#include "renv/quadrature.hpp"

namespace renv {

namespace {
constexpr double kCellRelTol = 1e-12;
constexpr std::int64_t kMaxKnots = std::int64_t{1} << 24;
}  // namespace

PotentialSpec rebase(const PotentialSpec& spec, double s) {
    PotentialSpec out = spec;
    if (out.env.path()) out.env = spec.env.flow(s).times(std::exp(-spec.r * s));
    return out;
}

double potential(const PotentialSpec& spec, double t, double x) {
    const double quad = 0.5 * spec.a * x * x;
    if (!spec.env.path() || spec.env.path()->kind() == PathKind::zero) return quad;
    return quad + std::exp(-spec.r * t) * spec.env.flow(t).evaluate(x);
}

PseudoScale::PseudoScale(PotentialSpec spec, double t, const TransformOptions& opt)
    : PseudoScale(std::move(spec), t, opt, -opt.initial_range, opt.initial_range) {}

PseudoScale::PseudoScale(PotentialSpec spec, double t, const TransformOptions& opt, double lo,
                         double hi)
    : spec_(std::move(spec)), t_(t), opt_(opt) {
    if (spec_.a <= 0.0) throw NonConfining("pseudo-scale requires a > 0");

    const auto& env = spec_.env;
    const bool has_path = static_cast<bool>(env.path());
    const bool zero_env = !has_path || env.path()->kind() == PathKind::zero;
    c_eff_ = zero_env ? 0.0 : env.coef() * std::exp(-(spec_.r + 0.25) * t_);
    lam_eff_ = has_path ? env.lam() * std::exp(0.5 * t_) : std::exp(0.5 * t_);
    analytic_theta_ = !zero_env && env.path()->analytic();
    has_theta_ = !zero_env && c_eff_ != 0.0;
    track_d_ = !spec_.time_independent();

    const int geom = static_cast<int>(std::ceil(-std::log2(opt_.knot_spacing_cap * lam_eff_)));
    int level = geom;
    if (has_theta_ && !analytic_theta_) {
        const auto& p = *env.path();
        const int policy = static_cast<int>(
            std::ceil(p.base_level() + 2.0 * std::log2(std::fabs(c_eff_))));
        level = std::max(geom, policy);
        level = std::min(level, p.base_level() + EnvironmentPath::kMaxRefineDepth);
    }
    level_ = std::max(level, EnvironmentPath::kMinLevel);
    hx_ = std::ldexp(1.0, -level_) / lam_eff_;

    build(lo, hi);
}

double PseudoScale::x_lo() const { return knot_x(i_lo_); }
double PseudoScale::x_hi() const { return knot_x(i_hi_); }

double PseudoScale::theta_knot(std::int64_t i) const {
    return th_[static_cast<std::size_t>(i - i_lo_)];
}

double PseudoScale::s_at_knot(std::int64_t i) const {
    return s_[static_cast<std::size_t>(i - i_lo_)];
}

double PseudoScale::d_int_at_knot(std::int64_t i) const {
    return di_[static_cast<std::size_t>(i - i_lo_)];
}

// Integrand pair (e^Q, [a y^2/2 + (r+1/4) theta_part] e^Q) inside cell i,
// where theta_part is linear between knot values (random path) or the exact
// deterministic form.
struct PseudoScale::CellFns {
    const PseudoScale& ps;
    std::int64_t i;
    double th0 = 0.0, dth = 0.0;  // linear theta-part over the cell

    explicit CellFns(const PseudoScale& p, std::int64_t cell) : ps(p), i(cell) {
        if (ps.has_theta_ && !ps.analytic_theta_) {
            th0 = ps.theta_knot(i);
            dth = (ps.theta_knot(i + 1) - th0) / ps.hx_;
        }
    }

    double theta_part(double y) const {
        if (!ps.has_theta_) return 0.0;
        if (ps.analytic_theta_)
            return ps.c_eff_ * ps.spec_.env.path()->polyline_value(0, ps.lam_eff_ * y);
        return th0 + dth * (y - ps.knot_x(i));
    }

    std::array<double, 2> operator()(double y) const {
        const double tp = theta_part(y);
        const double half_ay2 = 0.5 * ps.spec_.a * y * y;
        const double eq = std::exp(half_ay2 + tp);
        return {eq, (half_ay2 + (ps.spec_.r + 0.25) * tp) * eq};
    }
};

std::array<double, 2> PseudoScale::cell_full(std::int64_t i) const {
    CellFns f(*this, i);
    const double a = knot_x(i), b = knot_x(i + 1);
    const double rough = std::fabs(f(0.5 * (a + b))[0]) * hx_;
    const int depth = (analytic_theta_ && (i == -1 || i == 0)) ? 30 : 20;
    return adaptive_simpson_vec<2>(f, a, b, kCellRelTol * (rough + 1e-300), depth);
}

std::array<double, 2> PseudoScale::partial(std::int64_t i, double x, bool precise) const {
    CellFns f(*this, i);
    const double a = knot_x(i);
    if (x == a) return {0.0, 0.0};
    const bool kink = analytic_theta_ && (i == -1 || i == 0) &&
                      spec_.env.path()->kind() == PathKind::deterministic_sqrt;
    if (precise || kink) {
        const double rough = std::fabs(f(0.5 * (a + x))[0]) * std::fabs(x - a);
        return adaptive_simpson_vec<2>(f, a, x, kCellRelTol * (rough + 1e-300), kink ? 30 : 20);
    }
    // two-panel Simpson; cells are narrow so this sits near rounding already
    const auto f0 = f(a), f1 = f(0.25 * (3 * a + x)), f2 = f(0.5 * (a + x)),
               f3 = f(0.25 * (a + 3 * x)), f4 = f(x);
    const double w = (x - a) / 12.0;
    return {w * (f0[0] + 4 * f1[0] + 2 * f2[0] + 4 * f3[0] + f4[0]),
            w * (f0[1] + 4 * f1[1] + 2 * f2[1] + 4 * f3[1] + f4[1])};
}

void PseudoScale::build(double lo, double hi) {
    const std::int64_t new_lo =
        std::min<std::int64_t>(static_cast<std::int64_t>(std::floor(lo / hx_)), 0) - 1;
    const std::int64_t new_hi =
        std::max<std::int64_t>(static_cast<std::int64_t>(std::ceil(hi / hx_)), 0) + 1;
    if (new_hi - new_lo + 1 > kMaxKnots)
        throw ConfigError("pseudo-scale table would exceed the knot budget");

    if (has_theta_ && !analytic_theta_) {
        const double reach =
            std::ldexp(static_cast<double>(std::max(std::llabs(new_lo), std::llabs(new_hi))),
                       -level_);
        spec_.env.path()->ensure_half_width(reach + 1.0);
        th_.resize(static_cast<std::size_t>(new_hi - new_lo + 1));
        for (std::int64_t i = new_lo; i <= new_hi; ++i)
            th_[static_cast<std::size_t>(i - new_lo)] = c_eff_ * spec_.env.path()->dyadic_value(level_, i);
    } else if (analytic_theta_) {
        const double reach = std::fabs(hx_ * static_cast<double>(
                                 std::max(std::llabs(new_lo), std::llabs(new_hi)))) * lam_eff_;
        spec_.env.path()->ensure_half_width(reach + 1.0);
    }

    i_lo_ = new_lo;
    i_hi_ = new_hi;
    const auto n = static_cast<std::size_t>(new_hi - new_lo + 1);
    s_.assign(n, 0.0);
    di_.assign(track_d_ ? n : 0, 0.0);
    const auto k0 = static_cast<std::size_t>(-new_lo);
    for (std::int64_t i = 0; i < new_hi; ++i) {
        const auto inc = cell_full(i);
        const auto k = k0 + static_cast<std::size_t>(i);
        s_[k + 1] = s_[k] + inc[0];
        if (track_d_) di_[k + 1] = di_[k] + inc[1];
    }
    for (std::int64_t i = -1; i >= new_lo; --i) {
        const auto inc = cell_full(i);
        const auto k = k0 - static_cast<std::size_t>(-i);
        s_[k] = s_[k + 1] - inc[0];
        if (track_d_) di_[k] = di_[k + 1] - inc[1];
    }
}

void PseudoScale::ensure_range(double lo, double hi) {
    if (lo >= x_lo() && hi <= x_hi()) return;
    build(std::min(lo, x_lo()), std::max(hi, x_hi()));
}

double PseudoScale::q(double x) const {
    double tp = 0.0;
    if (has_theta_) {
        if (analytic_theta_)
            tp = c_eff_ * spec_.env.path()->polyline_value(0, lam_eff_ * x);
        else
            tp = c_eff_ * spec_.env.path()->polyline_value(level_, lam_eff_ * x);
    }
    return 0.5 * spec_.a * x * x + tp;
}

double PseudoScale::s(double x) {
    ensure_range(std::min(x, -0.5), std::max(x, 0.5));
    auto i = static_cast<std::int64_t>(std::floor(x / hx_));
    i = std::clamp(i, i_lo_, i_hi_ - 1);
    return s_at_knot(i) + partial(i, x, /*precise=*/true)[0];
}

std::int64_t PseudoScale::locate_cell(double z) const {
    // first knot with S >= z, minus one
    const auto it = std::lower_bound(s_.begin(), s_.end(), z);
    if (it == s_.begin() || it == s_.end()) return std::numeric_limits<std::int64_t>::min();
    return i_lo_ + static_cast<std::int64_t>(it - s_.begin()) - 1;
}

double PseudoScale::invert_in_cell(std::int64_t i, double z, bool precise) const {
    const double s0 = s_at_knot(i), s1 = s_at_knot(i + 1);
    const double target = z - s0;
    const double x0 = knot_x(i);
    double lo = x0, hi = knot_x(i + 1);
    double x = x0 + hx_ * std::clamp(target / (s1 - s0), 0.0, 1.0);
    const double ftol = 0.5 * opt_.inverse_tol * (1.0 + std::fabs(z));
    CellFns cf(*this, i);
    for (int it = 0; it < 60; ++it) {
        const double val = partial(i, x, precise)[0] - target;
        if (val > 0)
            hi = x;
        else
            lo = x;
        if (std::fabs(val) <= ftol) break;
        const double fp = std::exp(0.5 * spec_.a * x * x + cf.theta_part(x));
        double next = x - val / fp;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::fabs(next - x) < 1e-16 * (1.0 + std::fabs(x))) {
            x = next;
            break;
        }
        x = next;
    }
    return x;
}

double PseudoScale::h(double z) {
    for (int attempt = 0;; ++attempt) {
        if (!s_.empty() && z >= s_.front() && z <= s_.back()) break;
        if (attempt >= 2)
            throw BracketExhausted("inverse target " + std::to_string(z) +
                                   " not bracketed by the tabulated range");
        const double grow = (attempt == 0) ? 1.0 : 2.0;
        if (z > (s_.empty() ? 0.0 : s_.back()))
            ensure_range(x_lo(), x_hi() + grow);
        else
            ensure_range(x_lo() - grow, x_hi());
    }
    const auto i = locate_cell(z);
    if (!in_range(i)) return (z <= s_.front()) ? x_lo() : x_hi();
    return invert_in_cell(i, z, /*precise=*/true);
}

PseudoScale::Coeffs PseudoScale::coeffs(double z) {
    const double x = h(z);
    CellFns cf(*this, std::clamp(static_cast<std::int64_t>(std::floor(x / hx_)), i_lo_, i_hi_ - 1));
    const double sigma = std::exp(0.5 * spec_.a * x * x + cf.theta_part(x));
    if (!track_d_) return {x, sigma, 0.0};
    const auto i = std::clamp(static_cast<std::int64_t>(std::floor(x / hx_)), i_lo_, i_hi_ - 1);
    const double dint = d_int_at_knot(i) + partial(i, x, /*precise=*/true)[1];
    return {x, sigma, 0.5 * x * sigma - 0.5 * z - dint};
}

std::optional<double> PseudoScale::try_s(double x) const {
    if (x < x_lo() || x > x_hi()) return std::nullopt;
    auto i = std::clamp(static_cast<std::int64_t>(std::floor(x / hx_)), i_lo_, i_hi_ - 1);
    return s_at_knot(i) + partial(i, x, /*precise=*/false)[0];
}

std::optional<PseudoScale::Coeffs> PseudoScale::try_coeffs(double z, std::int64_t* cell_hint) const {
    if (s_.empty() || z <= s_.front() || z >= s_.back()) return std::nullopt;
    std::int64_t i;
    if (cell_hint != nullptr && in_range(*cell_hint) && *cell_hint + 1 <= i_hi_) {
        i = *cell_hint;
        // walk from the hint; trajectories move a few cells per step
        int walked = 0;
        while (z < s_at_knot(i) && i > i_lo_ && walked < 64) { --i; ++walked; }
        while (i + 1 < i_hi_ && z > s_at_knot(i + 1) && walked < 64) { ++i; ++walked; }
        if (z < s_at_knot(i) || z > s_at_knot(i + 1)) i = locate_cell(z);
    } else {
        i = locate_cell(z);
    }
    if (!in_range(i)) return std::nullopt;
    if (cell_hint != nullptr) *cell_hint = i;

    const double x = invert_in_cell(i, z, /*precise=*/false);
    CellFns cf(*this, i);
    const double sigma = std::exp(0.5 * spec_.a * x * x + cf.theta_part(x));
    if (!track_d_) return Coeffs{x, sigma, 0.0};
    const double dint = d_int_at_knot(i) + partial(i, x, /*precise=*/false)[1];
    return Coeffs{x, sigma, 0.5 * x * sigma - 0.5 * z - dint};
}

double pseudo_scale(const PotentialSpec& spec, double t, double x, const TransformOptions& opt) {
    PseudoScale ps(spec, t, opt);
    return ps.s(x);
}

double inverse_scale(const PotentialSpec& spec, double t, double z, const TransformOptions& opt) {
    PseudoScale ps(spec, t, opt);
    return ps.h(z);
}

std::pair<double, double> coefficients(const PotentialSpec& spec, double t, double z,
                                       const TransformOptions& opt) {
    PseudoScale ps(spec, t, opt);
    const auto c = ps.coeffs(z);
    return {c.sigma, c.d};
}

void brox_to_z_inplace(std::span<double> times, std::span<double> states) {
    for (double t : times)
        if (t < 1.0) throw BadTimeOrigin("log time change needs sample times >= 1");
    for (std::size_t i = 0; i < times.size(); ++i) {
        states[i] /= std::sqrt(times[i]);
        times[i] = std::log(times[i]);
    }
}

void z_to_brox_inplace(std::span<double> times, std::span<double> states) {
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double t = std::exp(times[i]);
        times[i] = t;
        states[i] *= std::sqrt(t);
    }
}

}  // namespace renv
