#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "renv/errors.hpp"
#include "renv/rng.hpp"
#include "renv/stats.hpp"
#include "renv/transform.hpp"

using namespace renv;

namespace {

// Reference quadrature for oracle values: composite Simpson on a fixed fine
// grid, independent of the library's adaptive integrator.
double ref_simpson(const std::function<double(double)>& f, double a, double b, int panels = 20000) {
    const double h = (b - a) / (2.0 * panels);
    double s = f(a) + f(b);
    for (int i = 1; i < 2 * panels; ++i) s += f(a + i * h) * ((i % 2) ? 4.0 : 2.0);
    return s * h / 3.0;
}

PotentialSpec zero_spec(double a = 1.0, double r = 0.0) {
    return {a, r, EnvView(EnvironmentPath::zero(64, 8))};
}

PotentialSpec wiener_spec(std::uint64_t seed, double a = 1.0, double r = 0.0,
                          double half_width = 64, int level = 8) {
    return {a, r, EnvView(EnvironmentPath::sample(seed, half_width, level))};
}

// Frozen by the reference integrator: int_0^1 exp(y^2/2) dy.
const double kS1 = ref_simpson([](double y) { return std::exp(0.5 * y * y); }, 0.0, 1.0);

}  // namespace

TEST_CASE("potential reduces to the quadratic well on the zero environment") {
    auto spec = zero_spec();
    for (double t : {0.0, 0.7, 3.0}) CHECK(potential(spec, t, 2.0) == 2.0);
}

TEST_CASE("unit quadratic coefficient matches the general formula") {
    auto spec = wiener_spec(21);
    const double t = 0.5, x = 1.3;
    const double direct = 0.5 * x * x + std::exp(-spec.r * t) * spec.env.flow(t).evaluate(x);
    CHECK(potential(spec, t, x) == doctest::Approx(direct).epsilon(1e-15));
}

TEST_CASE("potential laws are stationary in time when r = 0") {
    // at fixed x both readings are N(x^2/2, x); test each marginal
    const int n = 4000;
    const double x = 1.2;
    std::vector<double> at0(n), at5(n);
    for (int i = 0; i < n; ++i) {
        auto spec = wiener_spec(40000 + static_cast<std::uint64_t>(i), 1.0, 0.0, 32, 6);
        at0[static_cast<std::size_t>(i)] = potential(spec, 0.0, x);
        at5[static_cast<std::size_t>(i)] = potential(spec, 5.0, x);
    }
    auto cdf = [&](double v) { return stats::normal_cdf(v, 0.5 * x * x, std::sqrt(x)); };
    CHECK(stats::ks_one_sample(at0, cdf).statistic < 0.03);
    CHECK(stats::ks_one_sample(at5, cdf).statistic < 0.03);
}

TEST_CASE("space transform matches the reference quadrature on the zero environment") {
    auto spec = zero_spec();
    CHECK(kS1 == doctest::Approx(1.1949576).epsilon(1e-6));
    for (double t : {0.0, 1.0}) {
        CHECK(std::fabs(pseudo_scale(spec, t, 1.0) - kS1) < 1e-8);
        CHECK(pseudo_scale(spec, t, 0.0) == 0.0);
        CHECK(std::fabs(pseudo_scale(spec, t, -1.0) + kS1) < 1e-8);
    }
}

TEST_CASE("transform is strictly increasing") {
    auto spec = wiener_spec(77);
    PseudoScale ps(spec, 0.8);
    double prev = ps.s(-3.0);
    for (double x = -2.8; x <= 3.01; x += 0.2) {
        const double cur = ps.s(x);
        CHECK(cur > prev);
        prev = cur;
    }
}

TEST_CASE("inverse identity holds to tolerance") {
    auto spec = zero_spec();
    CHECK(inverse_scale(spec, 0.0, 0.0) == doctest::Approx(0.0));
    CHECK(std::fabs(inverse_scale(spec, 0.0, kS1) - 1.0) < 1e-6);

    auto wspec = wiener_spec(31);
    PseudoScale ps(wspec, 0.4);
    rng::Stream st = rng::stream(5, 5);
    for (int i = 0; i < 100; ++i) {
        const double x = 5.0 * (rng::u01(st, static_cast<std::uint64_t>(i)) - 0.5);
        const double z = ps.s(x);
        CHECK(std::fabs(ps.s(ps.h(z)) - z) <= 1e-8 * (1.0 + std::fabs(z)));
        CHECK(std::fabs(ps.h(z) - x) <= 1e-8);
    }
}

TEST_CASE("the confinement requirement is enforced") {
    PotentialSpec bad{-0.5, 0.0, EnvView(EnvironmentPath::zero())};
    CHECK_THROWS_AS((void)pseudo_scale(bad, 0.0, 1.0), NonConfining);
}

TEST_CASE("time coefficient vanishes identically on time-independent potentials") {
    auto spec = zero_spec(1.0, 0.75);
    for (double t : {0.0, 0.5, 2.0})
        for (double z : {-1.3, 0.0, 2.2}) {
            const auto [sigma, d] = coefficients(spec, t, z);
            CHECK(d == 0.0);
            CHECK(sigma > 0.0);
        }
    // |x|^{1/2} environment with r = 0 is flow-invariant as well
    PotentialSpec sq{1.0, 0.0, EnvView(EnvironmentPath::deterministic_sqrt(64, 8))};
    CHECK(coefficients(sq, 1.3, 0.8).second == 0.0);
}

TEST_CASE("diffusion coefficient is one at the origin") {
    for (auto spec : {zero_spec(), wiener_spec(8)}) {
        const auto [sigma, d] = coefficients(spec, 0.7, 0.0);
        CHECK(sigma == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("time coefficient agrees with a central difference of the transform") {
    auto spec = wiener_spec(12345, 1.0, 0.25);
    rng::Stream st = rng::stream(9, 9);
    const double dt_fd = 1e-4;
    int checked = 0;
    for (int i = 0; i < 50; ++i) {
        double t = 2.0 * rng::u01(st, static_cast<std::uint64_t>(2 * i));
        const double z = 3.0 * (rng::u01(st, static_cast<std::uint64_t>(2 * i + 1)) - 0.5);
        // keep clear of the discrete resolution-level switch times
        for (double w : {-(spec.r + 0.25) * 2.0 / std::log(2.0), 0.5 / std::log(2.0)})
            if (std::fabs(t * w - std::round(t * w)) < 0.03 * std::fabs(w)) t += 0.06;

        PseudoScale ps(spec, t);
        // evaluate at a knot-cell midpoint: the finite difference sees kinks
        // whenever a breakpoint crosses the endpoint inside the step window
        const double x0 = ps.coeffs(z).x;
        const double h = ps.knot_spacing();
        const double xm = (std::floor(x0 / h) + 0.5) * h;
        const double zm = ps.s(xm);
        const auto c = ps.coeffs(zm);

        PseudoScale lo(spec, t - dt_fd), hi(spec, t + dt_fd);
        const double fd = (hi.s(c.x) - lo.s(c.x)) / (2.0 * dt_fd);
        CHECK(std::fabs(c.d - fd) <= 1e-4 * (1.0 + std::fabs(c.d)));
        ++checked;
    }
    CHECK(checked == 50);
}

TEST_CASE("rebasing the environment reproduces shifted-time evaluations") {
    for (double r : {0.0, 0.5}) {
        auto spec = wiener_spec(2024, 1.0, r);
        const double s = 0.7, t = 1.3;
        PseudoScale direct(spec, s + t);
        PseudoScale shifted(rebase(spec, s), t);
        for (double x : {-2.0, -0.4, 0.9, 2.5}) {
            const double a = direct.s(x);
            const double b = shifted.s(x);
            CHECK(std::fabs(a - b) <= 1e-8 * (1.0 + std::fabs(a)));
        }
        for (double z : {-1.5, 0.3, 1.1}) {
            const auto ca = direct.coeffs(z);
            const auto cb = shifted.coeffs(z);
            CHECK(std::fabs(ca.x - cb.x) <= 1e-8 * (1.0 + std::fabs(ca.x)));
            CHECK(std::fabs(ca.sigma - cb.sigma) <= 1e-8 * (1.0 + ca.sigma));
            CHECK(std::fabs(ca.d - cb.d) <= 1e-7 * (1.0 + std::fabs(ca.d)));
        }
    }
}

TEST_CASE("coefficients settle onto the autonomous well when r > 0") {
    auto spec = wiener_spec(6161, 1.0, 0.5);
    spec.env.path()->set_half_width_cap(16384.0);
    auto limit_sigma = [&](double z) {
        // autonomous transform of the pure quadratic well
        PseudoScale ps(zero_spec(), 0.0);
        const double x = ps.h(z);
        return std::exp(0.5 * x * x);
    };
    double prev_dev = 1e30;
    for (double t : {5.0, 10.0, 15.0}) {
        PseudoScale ps(spec, t);
        double dev = 0.0;
        for (double z : {-2.0, -0.7, 0.4, 1.8}) {
            const auto c = ps.coeffs(z);
            dev = std::max(dev, std::fabs(c.sigma - limit_sigma(z)) + std::fabs(c.d));
        }
        CHECK(dev < prev_dev);
        prev_dev = dev;
    }
    CHECK(prev_dev < 1e-2);
}

TEST_CASE("log time change and its inverse") {
    std::vector<double> t{1.0, std::exp(1.0), std::exp(2.0)};
    std::vector<double> y{2.0, 2.0, 2.0};
    brox_to_z_inplace(t, y);
    CHECK(t[0] == doctest::Approx(0.0));
    CHECK(t[1] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(y[0] == doctest::Approx(2.0));
    CHECK(y[1] == doctest::Approx(2.0 * std::exp(-0.5)).epsilon(1e-14));
    CHECK(y[2] == doctest::Approx(2.0 * std::exp(-1.0)).epsilon(1e-14));

    // round trip on a pseudo-random trajectory
    std::vector<double> tt, yy;
    rng::Stream st = rng::stream(3, 3);
    for (int i = 0; i < 50; ++i) {
        tt.push_back(1.0 + 0.3 * i);
        yy.push_back(rng::normal(st, static_cast<std::uint64_t>(i)));
    }
    auto t2 = tt;
    auto y2 = yy;
    brox_to_z_inplace(t2, y2);
    z_to_brox_inplace(t2, y2);
    for (std::size_t i = 0; i < tt.size(); ++i) {
        CHECK(std::fabs(t2[i] - tt[i]) < 1e-12 * tt[i]);
        CHECK(std::fabs(y2[i] - yy[i]) < 1e-12);
    }

    std::vector<double> bad_t{0.5};
    std::vector<double> bad_y{0.0};
    CHECK_THROWS_AS(brox_to_z_inplace(bad_t, bad_y), BadTimeOrigin);
}
