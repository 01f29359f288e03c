#include "renv/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace renv::stats {

double normal_cdf(double x, double mean, double sd) {
    return 0.5 * std::erfc(-(x - mean) / (sd * std::sqrt(2.0)));
}

double normal_pdf(double x, double mean, double sd) {
    const double u = (x - mean) / sd;
    return std::exp(-0.5 * u * u) / (sd * std::sqrt(2.0 * M_PI));
}

double kolmogorov_q(double lambda) {
    if (lambda < 1e-8) return 1.0;
    double sum = 0.0;
    double sign = 1.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += sign * term;
        if (term < 1e-12 * std::fabs(sum) || term < 1e-300) break;
        sign = -sign;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

namespace {
double ks_p(double d, double n_eff) {
    const double rn = std::sqrt(n_eff);
    return kolmogorov_q((rn + 0.12 + 0.11 / rn) * d);
}
}  // namespace

KsResult ks_one_sample(std::vector<double> sample, const std::function<double(double)>& cdf) {
    if (sample.empty()) throw std::invalid_argument("ks_one_sample: empty sample");
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = cdf(sample[i]);
        d = std::max(d, std::fabs(f - static_cast<double>(i) / n));
        d = std::max(d, std::fabs(static_cast<double>(i + 1) / n - f));
    }
    return {d, ks_p(d, n)};
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    double d = 0.0, fa = 0.0, fb = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        const double xa = a[i], xb = b[j];
        if (xa <= xb) fa = static_cast<double>(++i) / na;
        if (xb <= xa) fb = static_cast<double>(++j) / nb;
        d = std::max(d, std::fabs(fa - fb));
    }
    return {d, ks_p(d, na * nb / (na + nb))};
}

double mean(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double variance(std::span<const double> v) {
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

double stderr_of_mean(std::span<const double> v) {
    return std::sqrt(variance(v) / static_cast<double>(v.size()));
}

LineFit least_squares(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("least_squares: need matching series with >= 2 points");
    const double mx = mean(x), my = mean(y);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    LineFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double rss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (fit.intercept + fit.slope * x[i]);
        rss += r * r;
    }
    fit.residual_rms = std::sqrt(rss / static_cast<double>(x.size()));
    return fit;
}

std::vector<double> finite_values(std::span<const double> v) {
    std::vector<double> out;
    out.reserve(v.size());
    for (double x : v)
        if (std::isfinite(x)) out.push_back(x);
    return out;
}

}  // namespace renv::stats
