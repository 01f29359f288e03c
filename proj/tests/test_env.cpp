#include <doctest.h>

#include <cmath>
#include <vector>

#include "renv/environment.hpp"
#include "renv/errors.hpp"
#include "renv/stats.hpp"

using namespace renv;

TEST_CASE("origin is pinned for every kind and seed") {
    for (std::uint64_t seed : {1ull, 7ull, 42ull, 1234567ull}) {
        auto p = EnvironmentPath::sample(seed, 8, 8);
        CHECK(p->evaluate(0.0) == 0.0);
    }
    CHECK(EnvironmentPath::zero()->evaluate(0.0) == 0.0);
    CHECK(EnvironmentPath::deterministic_sqrt()->evaluate(0.0) == 0.0);
    CHECK(EnvironmentPath::synthetic_linear(2.0)->evaluate(0.0) == 0.0);
}

TEST_CASE("deterministic kinds evaluate their closed form exactly") {
    CHECK(EnvironmentPath::zero()->evaluate(3.7) == 0.0);
    CHECK(EnvironmentPath::synthetic_linear(2.0)->evaluate(-1.5) == -3.0);
    CHECK(EnvironmentPath::deterministic_sqrt()->evaluate(4.0) == 2.0);
}

TEST_CASE("unit-time marginal variance matches the Brownian law") {
    const int n = 10000;
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i)
        v[static_cast<std::size_t>(i)] =
            EnvironmentPath::sample(1000 + static_cast<std::uint64_t>(i), 2, 4)->evaluate(1.0);
    const double var = stats::variance(v);
    const double se = std::sqrt(2.0 / (n - 1.0));
    CHECK(std::fabs(var - 1.0) <= 3.0 * se);
}

TEST_CASE("refinement does not move already-observable values") {
    auto p = EnvironmentPath::sample(99, 4, 6);
    const double before = p->evaluate(0.5);
    const double deep_before = p->dyadic_value(p->base_level() + 3, 11);
    p->refine_to(p->base_level() + 3);
    CHECK(p->evaluate(0.5) == before);
    CHECK(p->dyadic_value(p->base_level() + 3, 11) == deep_before);

    // same draws regardless of evaluation order
    auto q = EnvironmentPath::sample(99, 4, 6);
    q->refine_to(q->base_level() + 3);
    CHECK(q->evaluate(0.25) == p->evaluate(0.25));
    CHECK(q->dyadic_value(q->base_level() + 3, 11) == deep_before);
}

TEST_CASE("window extension keeps existing values and respects the cap") {
    auto p = EnvironmentPath::sample(7, 4, 6);
    const double at1 = p->evaluate(1.0);
    const double at35 = p->evaluate(3.5);
    CHECK_THROWS_AS((void)p->evaluate(4.5), OutOfWindow);
    p->ensure_half_width(16.0);
    CHECK(p->evaluate(1.0) == at1);
    CHECK(p->evaluate(3.5) == at35);
    CHECK_NOTHROW((void)p->evaluate(15.0));
    p->set_half_width_cap(32.0);
    CHECK_THROWS_AS(p->ensure_half_width(64.0), OutOfWindow);
}

TEST_CASE("scaling view reads the base path lazily") {
    auto lin = EnvironmentPath::synthetic_linear(1.0);
    EnvView v(lin);
    CHECK(v.scale(4.0).evaluate(1.0) == doctest::Approx(2.0).epsilon(1e-15));

    auto p = EnvironmentPath::sample(5, 8, 8);
    EnvView w(p);
    for (double x : {-1.0, -0.25, 0.5, 1.75})
        CHECK(w.scale(1.0).evaluate(x) == w.evaluate(x));
}

TEST_CASE("scaled Wiener paths keep the Wiener variance") {
    const int n = 10000;
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) {
        EnvView view(EnvironmentPath::sample(50000 + static_cast<std::uint64_t>(i), 4, 4));
        v[static_cast<std::size_t>(i)] = view.scale(3.0).evaluate(1.0);
    }
    const double var = stats::variance(v);
    const double se = std::sqrt(2.0 / (n - 1.0));
    CHECK(std::fabs(var - 1.0) <= 3.0 * se);
}

TEST_CASE("flow is a group action and matches the scaling map") {
    auto p = EnvironmentPath::sample(11, 64, 8);
    EnvView v(p);

    for (double x : {-2.0, -0.3, 0.7, 1.9}) CHECK(v.flow(0.0).evaluate(x) == v.evaluate(x));

    auto lin = EnvironmentPath::synthetic_linear(1.0, 64, 8);
    EnvView lv(lin);
    const double t = 0.9;
    CHECK(lv.flow(t).evaluate(2.0) == doctest::Approx(std::exp(t / 4.0) * 2.0).epsilon(1e-14));

    const double s = 0.7, u = 1.3;
    auto once = v.flow(s + u);
    auto twice = v.flow(s).flow(u);
    double worst = 0.0;
    for (int i = -20; i <= 20; ++i) {
        const double x = 0.11 * i;
        worst = std::max(worst, std::fabs(once.evaluate(x) - twice.evaluate(x)));
    }
    CHECK(worst < 1e-12);

    auto scaled = v.scale(std::exp(0.5 * s));
    auto flowed = v.flow(s);
    for (double x : {-1.1, 0.37, 2.3})
        CHECK(flowed.evaluate(x) == doctest::Approx(scaled.evaluate(x)).epsilon(1e-14));
}

TEST_CASE("flow sections are stationary Ornstein-Uhlenbeck readings") {
    const int n = 5000;
    const double grid[] = {0.0, 1.0};
    std::vector<double> a(n), b(n);
    for (int i = 0; i < n; ++i) {
        EnvView v(EnvironmentPath::sample(90000 + static_cast<std::uint64_t>(i), 8, 6));
        auto sec = ou_section(v, 1.0, grid);
        a[static_cast<std::size_t>(i)] = sec[0];
        b[static_cast<std::size_t>(i)] = sec[1];
    }
    // lag-1 autocovariance x e^{-1/4} at x = 1
    double cov = 0.0;
    const double ma = stats::mean(a), mb = stats::mean(b);
    for (int i = 0; i < n; ++i)
        cov += (a[static_cast<std::size_t>(i)] - ma) * (b[static_cast<std::size_t>(i)] - mb);
    cov /= (n - 1.0);
    const double target = std::exp(-0.25);
    const double se = std::sqrt((1.0 + target * target) / n);
    CHECK(std::fabs(cov - target) <= 3.0 * se);

    // t = 0 reproduces the path itself
    EnvView v(EnvironmentPath::sample(4, 8, 6));
    CHECK(ou_section(v, 1.5, grid)[0] == v.evaluate(1.5));
}

TEST_CASE("flow marginals keep the N(0,x) law") {
    const int n = 5000;
    std::vector<double> s(n);
    const double grid[] = {2.5};
    for (int i = 0; i < n; ++i) {
        EnvView v(EnvironmentPath::sample(123450 + static_cast<std::uint64_t>(i), 16, 5));
        s[static_cast<std::size_t>(i)] = ou_section(v, 2.0, grid)[0];
    }
    const double var = stats::variance(s);
    const double se = 2.0 * std::sqrt(2.0 / (n - 1.0));
    CHECK(std::fabs(var - 2.0) <= 3.0 * se);
}
