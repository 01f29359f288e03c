#include "renv/measure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "renv/errors.hpp"
#include "renv/quadrature.hpp"

namespace renv {

double WeightFunction::operator()(double x) const {
    switch (kind) {
        case Kind::u_alpha: return std::exp(0.5 * alpha * x * x);
        case Kind::v_alpha: return std::exp(std::pow(std::fabs(x), alpha));
        case Kind::one: return 1.0;
    }
    return 1.0;
}

std::string WeightFunction::name() const {
    switch (kind) {
        case Kind::u_alpha: return "U";
        case Kind::v_alpha: return "V";
        case Kind::one: return "one";
    }
    return "?";
}

double v_over_u_constant(double alpha) {
    // sup_x exp(|x|^alpha - alpha x^2/2), attained at |x| = 1
    return std::exp(1.0 - 0.5 * alpha);
}

EmpiricalMeasure EmpiricalMeasure::from_samples(std::vector<double> samples) {
    EmpiricalMeasure m;
    m.samples_ = stats::finite_values(samples);
    if (m.samples_.empty()) throw ConfigError("empirical measure needs at least one finite sample");
    auto [lo, hi] = std::minmax_element(m.samples_.begin(), m.samples_.end());
    m.lo_ = *lo;
    m.hi_ = *hi;
    return m;
}

EmpiricalMeasure EmpiricalMeasure::histogram(std::vector<double> edges, std::vector<double> masses) {
    if (edges.size() != masses.size() + 1 || masses.empty())
        throw ConfigError("histogram needs edges = masses + 1");
    for (std::size_t i = 1; i < edges.size(); ++i)
        if (edges[i] <= edges[i - 1]) throw ConfigError("histogram edges must increase");
    const double total = std::accumulate(masses.begin(), masses.end(), 0.0);
    if (std::fabs(total - 1.0) > 1e-12) throw ConfigError("histogram mass must be 1");
    EmpiricalMeasure m;
    m.lo_ = edges.front();
    m.hi_ = edges.back();
    m.edges_ = std::move(edges);
    m.masses_ = std::move(masses);
    return m;
}

Binning joint_binning(const EmpiricalMeasure& a, const EmpiricalMeasure& b, const Binning& base) {
    Binning out = base;
    out.lo = std::max(base.lo, std::min(a.support_lo(), b.support_lo()));
    out.hi = std::min(base.hi, std::max(a.support_hi(), b.support_hi()));
    if (out.lo >= out.hi) {
        out.lo -= 0.5;
        out.hi += 0.5;
    }
    return out;
}

std::vector<double> bin_masses(const EmpiricalMeasure& m, const Binning& bng) {
    std::vector<double> mass(static_cast<std::size_t>(bng.bins), 0.0);
    const double w = (bng.hi - bng.lo) / bng.bins;
    auto bin_of = [&](double x) {
        const auto k = static_cast<std::int64_t>(std::floor((x - bng.lo) / w));
        return static_cast<std::size_t>(std::clamp<std::int64_t>(k, 0, bng.bins - 1));
    };
    if (m.is_histogram()) {
        // redistribute by overlap of source bins with target bins
        const auto& e = m.edges();
        for (std::size_t i = 0; i < m.masses().size(); ++i) {
            const double a = e[i], b = e[i + 1];
            const std::size_t ka = bin_of(a), kb = bin_of(b);
            if (ka == kb) {
                mass[ka] += m.masses()[i];
                continue;
            }
            for (std::size_t k = ka; k <= kb; ++k) {
                const double lo = std::max(a, bng.lo + static_cast<double>(k) * w);
                const double hi = std::min(b, bng.lo + static_cast<double>(k + 1) * w);
                double frac = std::max(0.0, hi - lo) / (b - a);
                if (k == ka) frac += std::max(0.0, (bng.lo - a)) / (b - a);
                if (k == kb) frac += std::max(0.0, (b - bng.hi)) / (b - a);
                mass[k] += m.masses()[i] * frac;
            }
        }
    } else {
        const double inc = 1.0 / static_cast<double>(m.samples().size());
        for (double x : m.samples()) mass[bin_of(x)] += inc;
    }
    return mass;
}

std::vector<double> density_bin_masses(const std::function<double(double)>& density,
                                       const Binning& bng, double tail) {
    std::vector<double> mass(static_cast<std::size_t>(bng.bins), 0.0);
    const double w = (bng.hi - bng.lo) / bng.bins;
    double total = 0.0;
    for (int k = 0; k < bng.bins; ++k) {
        const double a = bng.lo + k * w, b = a + w;
        mass[static_cast<std::size_t>(k)] = adaptive_simpson(density, a, b, 1e-12, 24);
        total += mass[static_cast<std::size_t>(k)];
    }
    const double left = adaptive_simpson(density, bng.lo - tail, bng.lo, 1e-12, 24);
    const double right = adaptive_simpson(density, bng.hi, bng.hi + tail, 1e-12, 24);
    mass.front() += left;
    mass.back() += right;
    total += left + right;
    for (auto& v : mass) v /= total;
    return mass;
}

EmpiricalMeasure histogram_from_density(const std::function<double(double)>& density,
                                        const Binning& bng) {
    std::vector<double> edges(static_cast<std::size_t>(bng.bins) + 1);
    const double w = (bng.hi - bng.lo) / bng.bins;
    for (int k = 0; k <= bng.bins; ++k) edges[static_cast<std::size_t>(k)] = bng.lo + k * w;
    auto mass = density_bin_masses(density, bng);
    // guard the unit-mass invariant against quadrature rounding
    const double total = std::accumulate(mass.begin(), mass.end(), 0.0);
    for (auto& v : mass) v /= total;
    return EmpiricalMeasure::histogram(std::move(edges), std::move(mass));
}

NormResult weighted_norm(const EmpiricalMeasure& m, const WeightFunction& f) {
    NormResult out;
    if (m.is_histogram()) {
        double total = 0.0;
        for (std::size_t i = 0; i < m.masses().size(); ++i) {
            const double mid = 0.5 * (m.edges()[i] + m.edges()[i + 1]);
            total += f(mid) * m.masses()[i];
        }
        const double first = f(0.5 * (m.edges()[0] + m.edges()[1])) * m.masses().front();
        const std::size_t nl = m.masses().size() - 1;
        const double last = f(0.5 * (m.edges()[nl] + m.edges()[nl + 1])) * m.masses().back();
        out.value = total;
        out.tail_dominated = (first + last) > 0.1 * total;
        return out;
    }
    const auto& s = m.samples();
    std::vector<double> contrib(s.size());
    double total = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        contrib[i] = f(s[i]);
        total += contrib[i];
    }
    out.value = total / static_cast<double>(s.size());
    // tail monitor: the heaviest 1% of |x| should stay a modest share
    const auto top = std::max<std::size_t>(1, s.size() / 100);
    std::nth_element(contrib.begin(), contrib.end() - static_cast<std::ptrdiff_t>(top),
                     contrib.end());
    const double top_sum = std::accumulate(contrib.end() - static_cast<std::ptrdiff_t>(top),
                                           contrib.end(), 0.0);
    out.tail_dominated = s.size() >= 100 && top_sum > 0.1 * total;
    return out;
}

DistanceResult weighted_distance(const EmpiricalMeasure& m1, const EmpiricalMeasure& m2,
                                 const WeightFunction& f, const Binning& base) {
    const Binning bng = joint_binning(m1, m2, base);
    const auto a = bin_masses(m1, bng);
    const auto b = bin_masses(m2, bng);
    const double w = (bng.hi - bng.lo) / bng.bins;
    DistanceResult out;
    bool overlap = false;
    for (int k = 0; k < bng.bins; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        const double mid = bng.lo + (k + 0.5) * w;
        out.value += f(mid) * std::fabs(a[kk] - b[kk]);
        overlap = overlap || (a[kk] > 0 && b[kk] > 0);
    }
    out.empty_overlap = !overlap;
    return out;
}

stats::KsResult ks_distance(const EmpiricalMeasure& m1, const EmpiricalMeasure& m2) {
    if (m1.is_histogram() || m2.is_histogram())
        throw ConfigError("two-sample ks needs sample measures");
    return stats::ks_two_sample(m1.samples(), m2.samples());
}

stats::KsResult ks_distance(const EmpiricalMeasure& m1, const std::function<double(double)>& cdf) {
    if (m1.is_histogram()) throw ConfigError("one-sample ks needs a sample measure");
    return stats::ks_one_sample(m1.samples(), cdf);
}

namespace {

std::vector<double> draw_initial(const EmpiricalMeasure& initial, int n, rng::Stream s) {
    std::vector<double> z0(static_cast<std::size_t>(n));
    const auto& samples = initial.samples();
    if (samples.size() == 1) {
        std::fill(z0.begin(), z0.end(), samples[0]);
    } else {
        for (int i = 0; i < n; ++i)
            z0[static_cast<std::size_t>(i)] =
                samples[rng::bits(s, static_cast<std::uint64_t>(i)) % samples.size()];
    }
    return z0;
}

}  // namespace

EmpiricalMeasure pullback_measure(const PotentialSpec& spec, int n_units,
                                  const EmpiricalMeasure& initial_measure, int n_replicas,
                                  rng::Stream noise, const IntegrateOptions& opt) {
    if (spec.r != 0.0) throw ConfigError("pullback estimation is defined for r = 0");
    if (n_units < 1) throw ConfigError("pullback needs n_units >= 1");
    if (initial_measure.is_histogram())
        throw ConfigError("pullback draws initial states from a sample measure");
    const auto norm = weighted_norm(initial_measure, WeightFunction::U(0.5));
    if (!std::isfinite(norm.value)) throw ConfigError("initial measure has infinite tail weight");

    PotentialSpec pulled = spec;
    pulled.env = spec.env.flow(-static_cast<double>(n_units));
    const auto z0 = draw_initial(initial_measure, n_replicas, rng::split(noise, 0x1d1));
    const double snap[] = {static_cast<double>(n_units)};
    const auto snaps =
        ensemble_equivalent(pulled, 0.0, z0, snap, opt.dt, rng::split(noise, 0x1d2), opt);
    return EmpiricalMeasure::from_samples(snaps[0]);
}

InvarianceReport invariance_check(const PotentialSpec& spec, int pullback_n, int n_replicas,
                                  rng::Stream noise, const IntegrateOptions& opt,
                                  const WeightFunction& f) {
    if (spec.r != 0.0) throw ConfigError("invariance check is defined for r = 0");
    const auto mu = pullback_measure(spec, pullback_n, EmpiricalMeasure::delta(0.0), n_replicas,
                                     rng::split(noise, 1), opt);

    // push the estimate one unit through the original environment
    const double snap[] = {1.0};
    const auto pushed_snaps = ensemble_equivalent(spec, 0.0, mu.samples(), snap, opt.dt,
                                                  rng::split(noise, 2), opt);
    const auto pushed = EmpiricalMeasure::from_samples(pushed_snaps[0]);

    PotentialSpec shifted = spec;
    shifted.env = spec.env.flow(1.0);
    const auto mu_shift = pullback_measure(shifted, pullback_n, EmpiricalMeasure::delta(0.0),
                                           n_replicas, rng::split(noise, 3), opt);

    InvarianceReport rep;
    rep.n_used = static_cast<int>(std::min(pushed.size(), mu_shift.size()));
    rep.ks = ks_distance(pushed, mu_shift);
    rep.wtv = weighted_distance(pushed, mu_shift, f).value;

    // split-half floor: two halves of the same pushed sample
    const auto& ps = pushed.samples();
    const std::size_t half = ps.size() / 2;
    const auto a = EmpiricalMeasure::from_samples({ps.begin(), ps.begin() + static_cast<std::ptrdiff_t>(half)});
    const auto b = EmpiricalMeasure::from_samples({ps.begin() + static_cast<std::ptrdiff_t>(half), ps.end()});
    rep.wtv_floor = weighted_distance(a, b, f).value;
    return rep;
}

RateEstimate rate_estimate(std::span<const double> t, std::span<const double> d) {
    if (t.size() != d.size() || t.size() < 4)
        throw ConfigError("rate_estimate needs >= 4 matched points");
    std::vector<double> logd(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (!(d[i] > 0.0)) throw NonPositiveDistance("rate_estimate needs positive distances");
        logd[i] = std::log(d[i]);
    }
    const auto fit = stats::least_squares(t, logd);
    return {fit.slope, fit.intercept, fit.residual_rms};
}

CltReport quenched_clt_check(const PotentialSpec& spec, std::span<const double> t_list,
                             int n_replicas, rng::Stream noise, const IntegrateOptions& opt) {
    if (spec.r <= 0.0) throw ConfigError("the normal limit check is defined for r > 0");
    const std::vector<double> z0(static_cast<std::size_t>(n_replicas), 0.0);
    std::vector<std::uint8_t> esc;
    const auto snaps = ensemble_equivalent(spec, 0.0, z0, t_list, opt.dt, noise, opt, &esc);

    CltReport rep;
    rep.times.assign(t_list.begin(), t_list.end());
    rep.n_escaped = std::count(esc.begin(), esc.end(), std::uint8_t{1});
    auto cdf = [](double x) { return stats::normal_cdf(x); };
    for (const auto& snap : snaps) {
        const auto ks = stats::ks_one_sample(stats::finite_values(snap), cdf);
        rep.ks_stat.push_back(ks.statistic);
        rep.p_value.push_back(ks.p_value);
    }
    return rep;
}

TimeAverageReport time_average(const PotentialSpec& spec,
                               const std::function<double(double, double)>& f, double t_end,
                               int n_paths, rng::Stream noise, const IntegrateOptions& opt,
                               double obs_dt) {
    const auto n_obs = static_cast<std::size_t>(std::llround(t_end / obs_dt));
    std::vector<double> obs_times(n_obs);
    for (std::size_t j = 0; j < n_obs; ++j)
        obs_times[j] = (static_cast<double>(j) + 1.0) * obs_dt;
    const std::vector<double> z0(static_cast<std::size_t>(n_paths), 0.0);
    const auto snaps = ensemble_equivalent(spec, 0.0, z0, obs_times, opt.dt, noise, opt);

    TimeAverageReport rep;
    rep.per_path.assign(static_cast<std::size_t>(n_paths), 0.0);
    std::vector<double> first_half(static_cast<std::size_t>(n_paths), 0.0);
    const std::size_t half = n_obs / 2;
    for (std::size_t j = 0; j < n_obs; ++j)
        for (int i = 0; i < n_paths; ++i) {
            const auto ii = static_cast<std::size_t>(i);
            const double v = f(obs_times[j], snaps[j][ii]);
            rep.per_path[ii] += v;
            if (j < half) first_half[ii] += v;
        }
    double agree = 0.0;
    for (int i = 0; i < n_paths; ++i) {
        const auto ii = static_cast<std::size_t>(i);
        const double full = rep.per_path[ii] / static_cast<double>(n_obs);
        const double fh = first_half[ii] / static_cast<double>(half);
        const double sh = (rep.per_path[ii] - first_half[ii]) / static_cast<double>(n_obs - half);
        rep.per_path[ii] = full;
        agree += std::fabs(fh - sh);
    }
    rep.half_agreement = agree / static_cast<double>(n_paths);
    rep.mean = stats::mean(rep.per_path);
    rep.spread = std::sqrt(stats::variance(rep.per_path));
    return rep;
}

}  // namespace renv
