#include <doctest.h>

#include <cmath>
#include <vector>

#include "renv/affine.hpp"
#include "renv/errors.hpp"
#include "renv/stats.hpp"

using namespace renv;

TEST_CASE("seminorm of a linear path is twice the slope") {
    auto lin = EnvironmentPath::synthetic_linear(1.0, 16, 6);
    CHECK(holder_seminorm(*lin, 0.3, 7) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(holder_seminorm(*lin, 0.45, 7) == doctest::Approx(2.0).epsilon(1e-12));
    auto lin3 = EnvironmentPath::synthetic_linear(-3.0, 16, 6);
    CHECK(holder_seminorm(*lin3, 0.4, 7) == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("zero path has no approximation") {
    auto z = EnvironmentPath::zero(16, 6);
    CHECK(holder_seminorm(*z, 0.4, 7) == 0.0);
    CHECK_THROWS_AS(affine_approx(z, 0.4, 0.5, 8), DegenerateEnvironment);
}

TEST_CASE("Wiener seminorms are finite and positive") {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        auto p = EnvironmentPath::sample(777000 + seed, 9, 5);
        const double h = holder_seminorm(*p, 0.4, 7);
        CHECK(h > 0.0);
        CHECK(std::isfinite(h));
    }
}

TEST_CASE("subdivision counts follow the weighted rule") {
    // linear slope-1 path has H = 2 exactly, so epsilon = 2 * 0.5^gamma
    // realizes a step parameter of 0.5
    const double gamma = 0.4;
    const double eps = 2.0 * std::pow(0.5, gamma);
    auto lin = EnvironmentPath::synthetic_linear(1.0, 16, 6);
    auto ap = affine_approx(lin, gamma, eps, 8);
    CHECK(ap.eta() == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(ap.cell_pos(0).values.size() - 1 == 3);  // floor(1/0.5) + 1
    const double pieces3 = std::pow(log_weight(3.0), 1.0 / gamma) / 0.5;
    CHECK(ap.cell_pos(3).values.size() - 1 == static_cast<std::size_t>(std::floor(pieces3)) + 1);
    CHECK(ap.cell_pos(3).values.size() - 1 == 6);
}

TEST_CASE("a linear path is its own interpolant") {
    auto lin = EnvironmentPath::synthetic_linear(2.5, 16, 6);
    auto ap = affine_approx(lin, 0.4, 1.0, 8);
    for (double x : {-7.3, -2.0, -0.1, 0.0, 0.6, 3.9, 7.99})
        CHECK(std::fabs(ap.delta(x)) < 1e-12);
}

namespace {

struct BoundCheck {
    double worst_error = 0.0;   // max |theta - W| over the grid, relative to epsilon
    double worst_slope = 0.0;   // max |W'|/L^{1/gamma} relative to the bound
};

BoundCheck check_bounds(const AffineApproximation& ap) {
    const auto& path = *ap.path();
    const int level = path.base_level();
    const double h = std::ldexp(1.0, -level);
    const double slope_cap =
        ap.epsilon() * (1.0 + std::pow(ap.hgamma() / ap.epsilon(), 1.0 / ap.gamma()));
    BoundCheck out;
    const auto n = static_cast<std::int64_t>(ap.window() / h);
    for (std::int64_t i = -n; i <= n; ++i) {
        const double x = static_cast<double>(i) * h;
        const double err = std::fabs(path.polyline_value(level, x) - ap.value(x));
        out.worst_error = std::max(out.worst_error, err / ap.epsilon());
        if (x < ap.window()) {
            const double s = std::fabs(ap.slope(x)) /
                             std::pow(log_weight(x), 1.0 / ap.gamma());
            out.worst_slope = std::max(out.worst_slope, s / slope_cap);
        }
    }
    return out;
}

}  // namespace

TEST_CASE("approximation bounds hold on the grid for Wiener paths") {
    for (std::uint64_t seed : {3ull, 17ull, 91ull, 1234ull, 77777ull}) {
        auto p = EnvironmentPath::sample(seed, 9, 8);
        for (double eps : {0.5, 1.0}) {
            auto ap = affine_approx(p, 0.4, eps, 8);
            const auto chk = check_bounds(ap);
            CHECK(chk.worst_error <= 1.0);
            CHECK(chk.worst_slope <= 1.0);
        }
    }
}

TEST_CASE("rebuilding the interpolant is deterministic") {
    auto p = EnvironmentPath::sample(5150, 9, 7);
    auto a = affine_approx(p, 0.35, 0.4, 8);
    auto b = affine_approx(p, 0.35, 0.4, 8);
    CHECK(a.hgamma() == b.hgamma());
    for (double x : {-6.5, -1.2, 0.3, 4.8}) CHECK(a.value(x) == b.value(x));
}

TEST_CASE("squared-seminorm exponential moments stay stable in sample size") {
    const double alpha = 0.02;
    const int n = 1200;
    std::vector<double> vals(n);
    for (int i = 0; i < n; ++i) {
        auto p = EnvironmentPath::sample(31000 + static_cast<std::uint64_t>(i), 9, 5);
        const double h = holder_seminorm(*p, 0.4, 7);
        vals[static_cast<std::size_t>(i)] = std::exp(alpha * h * h);
    }
    const double half = stats::mean(std::span<const double>(vals).first(n / 2));
    const double full = stats::mean(vals);
    CHECK(std::isfinite(full));
    CHECK(std::fabs(full - half) <= 0.1 * full);
    // monotone in alpha near the chosen value
    double bigger = 0.0;
    for (double v : vals) bigger += std::pow(v, 1.5);  // exp(1.5 alpha h^2)
    bigger /= n;
    CHECK(bigger >= full);
}
