#include "renv/affine.hpp"

#include <algorithm>
#include <stdexcept>

#include "renv/errors.hpp"

namespace renv {

namespace {

// Sup over grid pairs of |v_j - v_i| / ((j-i) h)^gamma.
double cell_seminorm(std::span<const double> v, double h, double gamma) {
    const std::size_t m = v.size();
    if (m < 2) return 0.0;
    std::vector<double> wt(m);
    for (std::size_t d = 1; d < m; ++d)
        wt[d] = std::pow(static_cast<double>(d) * h, -gamma);
    double best = 0.0;
    for (std::size_t d = 1; d < m; ++d) {
        double inc = 0.0;
        for (std::size_t i = 0; i + d < m; ++i)
            inc = std::max(inc, std::fabs(v[i + d] - v[i]));
        best = std::max(best, inc * wt[d]);
    }
    return best;
}

std::vector<double> cell_grid_values(const EnvironmentPath& path, double lo, int level) {
    const auto m = static_cast<std::size_t>(std::ldexp(1.0, level));
    std::vector<double> v(m + 1);
    const auto i0 = static_cast<std::int64_t>(std::llround(std::ldexp(lo, level)));
    for (std::size_t j = 0; j <= m; ++j)
        v[j] = path.dyadic_value(level, i0 + static_cast<std::int64_t>(j));
    return v;
}

}  // namespace

double holder_seminorm(const EnvironmentPath& path, double gamma, int n_max) {
    if (gamma <= 0.0 || gamma >= 0.5) throw ConfigError("holder_seminorm: gamma must be in (0,1/2)");
    if (n_max + 1 > path.half_width()) throw ConfigError("holder_seminorm: n_max exceeds window");
    if (path.kind() == PathKind::zero) return 0.0;
    if (path.kind() == PathKind::synthetic_linear) return 2.0 * std::fabs(path.slope());

    const int level = path.base_level();
    const double h = std::ldexp(1.0, -level);
    double best = 0.0;
    for (int n = 0; n <= n_max; ++n) {
        const double p = cell_seminorm(cell_grid_values(path, n, level), h, gamma);
        const double q = cell_seminorm(cell_grid_values(path, -(n + 1), level), h, gamma);
        best = std::max(best, (p + q) / log_weight(n));
    }
    return best;
}

AffineApproximation::AffineApproximation(std::shared_ptr<EnvironmentPath> path, double gamma,
                                         double epsilon, int window)
    : path_(std::move(path)), gamma_(gamma), epsilon_(epsilon), window_(window) {
    if (gamma <= 0.0 || gamma >= 0.5) throw ConfigError("affine_approx: gamma must be in (0,1/2)");
    if (epsilon <= 0.0) throw ConfigError("affine_approx: epsilon must be positive");
    if (window < 1 || window > path_->half_width())
        throw ConfigError("affine_approx: window must be in [1, half_width]");

    hgamma_ = holder_seminorm(*path_, gamma, window - 1);
    if (hgamma_ <= 0.0)
        throw DegenerateEnvironment("affine_approx: H_gamma = 0; use the path directly");
    eta_ = std::pow(epsilon_ / hgamma_, 1.0 / gamma_);

    const int level = path_->base_level();
    std::size_t total = 0;
    pos_.resize(static_cast<std::size_t>(window_));
    neg_.resize(static_cast<std::size_t>(window_));
    for (int n = 0; n < window_; ++n) {
        const double pieces = std::pow(log_weight(n), 1.0 / gamma_) / eta_;
        if (!(pieces < 4e9)) throw ConfigError("affine_approx: subdivision too fine for memory");
        const auto m = static_cast<std::size_t>(std::floor(pieces)) + 1;
        total += 2 * (m + 1);
        if (total > (std::size_t{1} << 26))
            throw ConfigError("affine_approx: node budget exceeded; shrink window or raise epsilon");
        const double h = 1.0 / static_cast<double>(m);
        auto& cp = pos_[static_cast<std::size_t>(n)];
        cp.h = h;
        cp.values.resize(m + 1);
        for (std::size_t k = 0; k <= m; ++k)
            cp.values[k] = path_->polyline_value(level, n + static_cast<double>(k) * h);
        auto& cn = neg_[static_cast<std::size_t>(n)];
        cn.h = h;
        cn.values.resize(m + 1);
        for (std::size_t k = 0; k <= m; ++k)
            cn.values[k] = path_->polyline_value(level, -(n + 1) + static_cast<double>(k) * h);
    }
}

double AffineApproximation::value(double x) const {
    if (std::fabs(x) > window_) throw OutOfWindow("affine value beyond the represented window");
    const Cell* cell;
    double off;
    if (x >= 0.0) {
        int n = std::min(static_cast<int>(std::floor(x)), window_ - 1);
        cell = &pos_[static_cast<std::size_t>(n)];
        off = x - n;
    } else {
        int n = std::min(static_cast<int>(std::floor(-x)), window_ - 1);
        cell = &neg_[static_cast<std::size_t>(n)];
        off = x + n + 1;
    }
    const auto m = cell->values.size() - 1;
    const double u = off / cell->h;
    const auto j = std::min(static_cast<std::size_t>(std::max(0.0, std::floor(u))), m - 1);
    const double s = u - static_cast<double>(j);
    return cell->values[j] + s * (cell->values[j + 1] - cell->values[j]);
}

double AffineApproximation::slope(double x) const {
    if (std::fabs(x) > window_) throw OutOfWindow("affine slope beyond the represented window");
    const Cell* cell;
    double off;
    if (x >= 0.0) {
        int n = std::min(static_cast<int>(std::floor(x)), window_ - 1);
        cell = &pos_[static_cast<std::size_t>(n)];
        off = x - n;
    } else {
        int n = std::min(static_cast<int>(std::floor(-x)), window_ - 1);
        cell = &neg_[static_cast<std::size_t>(n)];
        off = x + n + 1;
    }
    const auto m = cell->values.size() - 1;
    const auto j = std::min(static_cast<std::size_t>(std::max(0.0, std::floor(off / cell->h))), m - 1);
    return (cell->values[j + 1] - cell->values[j]) / cell->h;
}

double AffineApproximation::delta(double x) const {
    return path_->polyline_value(path_->base_level(), x) - value(x);
}

std::size_t AffineApproximation::node_count() const {
    std::size_t n = 0;
    for (const auto& c : pos_) n += c.values.size();
    for (const auto& c : neg_) n += c.values.size();
    return n;
}

std::vector<std::pair<double, double>> AffineApproximation::nodes() const {
    std::vector<std::pair<double, double>> out;
    out.reserve(node_count());
    for (int n = window_ - 1; n >= 0; --n) {
        const auto& c = neg_[static_cast<std::size_t>(n)];
        const auto m = c.values.size() - 1;
        for (std::size_t k = (n == static_cast<int>(window_ - 1)) ? 0 : 1; k <= m; ++k)
            out.emplace_back(-(n + 1) + static_cast<double>(k) * c.h, c.values[k]);
    }
    for (int n = 0; n < window_; ++n) {
        const auto& c = pos_[static_cast<std::size_t>(n)];
        const auto m = c.values.size() - 1;
        for (std::size_t k = 1; k <= m; ++k)
            out.emplace_back(n + static_cast<double>(k) * c.h, c.values[k]);
    }
    return out;
}

AffineApproximation affine_approx(std::shared_ptr<EnvironmentPath> path, double gamma,
                                  double epsilon, int window) {
    return AffineApproximation(std::move(path), gamma, epsilon, window);
}

}  // namespace renv
