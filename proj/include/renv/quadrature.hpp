#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include "renv/errors.hpp"

namespace renv {

// Adaptive Simpson for an R^N-valued integrand, shared subdivision.  The
// error proxy is the Richardson difference summed over components.
template <int N, class F>
struct AdaptiveSimpson {
    F f;
    double tol;
    int max_depth;
    int evals = 0;

    using Vec = std::array<double, N>;

    static Vec combine(const Vec& a, const Vec& b, double wa, double wb) {
        Vec r{};
        for (int i = 0; i < N; ++i) r[i] = wa * a[i] + wb * b[i];
        return r;
    }

    Vec panel(double a, double b, const Vec& fa, const Vec& fm, const Vec& fb) const {
        Vec r{};
        const double w = (b - a) / 6.0;
        for (int i = 0; i < N; ++i) r[i] = w * (fa[i] + 4.0 * fm[i] + fb[i]);
        return r;
    }

    Vec run(double a, double b) {
        const Vec fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
        evals += 3;
        const Vec whole = panel(a, b, fa, fm, fb);
        return recurse(a, b, fa, fm, fb, whole, tol, max_depth);
    }

    Vec recurse(double a, double b, const Vec& fa, const Vec& fm, const Vec& fb, const Vec& whole,
                double t, int depth) {
        const double m = 0.5 * (a + b);
        const Vec fl = f(0.5 * (a + m)), fr = f(0.5 * (m + b));
        evals += 2;
        const Vec left = panel(a, m, fa, fl, fm);
        const Vec right = panel(m, b, fm, fr, fb);
        double err = 0.0;
        Vec sum{};
        for (int i = 0; i < N; ++i) {
            sum[i] = left[i] + right[i];
            err += std::fabs(sum[i] - whole[i]);
        }
        if (err <= 15.0 * t || depth <= 0) {
            if (depth <= 0 && err > 1e6 * 15.0 * (t + 1e-300))
                throw QuadratureNotConverged("adaptive Simpson hit depth limit");
            Vec r{};
            for (int i = 0; i < N; ++i) r[i] = sum[i] + (sum[i] - whole[i]) / 15.0;
            return r;
        }
        const Vec l = recurse(a, m, fa, fl, fm, left, 0.5 * t, depth - 1);
        const Vec r = recurse(m, b, fm, fr, fb, right, 0.5 * t, depth - 1);
        Vec out{};
        for (int i = 0; i < N; ++i) out[i] = l[i] + r[i];
        return out;
    }
};

template <class F>
double adaptive_simpson(F&& f, double a, double b, double tol, int max_depth = 24) {
    if (a == b) return 0.0;
    auto wrap = [&f](double x) { return std::array<double, 1>{f(x)}; };
    AdaptiveSimpson<1, decltype(wrap)> q{wrap, tol, max_depth};
    return q.run(a, b)[0];
}

template <int N, class F>
std::array<double, N> adaptive_simpson_vec(F&& f, double a, double b, double tol,
                                           int max_depth = 24) {
    if (a == b) return {};
    AdaptiveSimpson<N, F> q{std::forward<F>(f), tol, max_depth};
    return q.run(a, b);
}

}  // namespace renv
