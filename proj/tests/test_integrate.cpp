#include <doctest.h>

#include <cmath>
#include <vector>

#include "renv/errors.hpp"
#include "renv/integrate.hpp"
#include "renv/measure.hpp"

using namespace renv;

namespace {

PotentialSpec zero_spec(double a = 1.0, double r = 0.0) {
    return {a, r, EnvView(EnvironmentPath::zero(64, 8))};
}

PotentialSpec wiener_spec(std::uint64_t seed, double r = 0.0, double half_width = 64,
                          int level = 8) {
    return {1.0, r, EnvView(EnvironmentPath::sample(seed, half_width, level))};
}

// relaxation-1/2 well: X_t | x0 ~ N(x0 e^{-t/2}, 1 - e^{-t})
double well_cdf(double x, double x0, double t) {
    return stats::normal_cdf(x, x0 * std::exp(-0.5 * t), std::sqrt(1.0 - std::exp(-t)));
}

}  // namespace

TEST_CASE("transformed route reproduces the exact well transition law") {
    auto spec = zero_spec(1.0, 0.75);
    const int n = 10000;
    const std::vector<double> z0(n, 1.5);
    const double snap[] = {3.0};
    const auto snaps = ensemble_equivalent(spec, 0.0, z0, snap, 1e-3, rng::stream(1, 1));
    const auto ks = stats::ks_one_sample(stats::finite_values(snaps[0]),
                                         [](double x) { return well_cdf(x, 1.5, 3.0); });
    CHECK(ks.statistic <= 0.02);
}

TEST_CASE("direct route matches the transformed route on the zero environment") {
    const int n = 10000;
    const auto direct =
        direct_terminals(nullptr, 1.0, 0.75, 0.0, 1.5, 3.0, 1e-3, n, rng::stream(2, 1));
    const auto ks_exact = stats::ks_one_sample(stats::finite_values(direct),
                                               [](double x) { return well_cdf(x, 1.5, 3.0); });
    CHECK(ks_exact.statistic <= 0.02);

    auto spec = zero_spec(1.0, 0.75);
    const std::vector<double> z0(n, 1.5);
    const double snap[] = {3.0};
    const auto equiv = ensemble_equivalent(spec, 0.0, z0, snap, 1e-3, rng::stream(2, 2));
    const auto ks = stats::ks_two_sample(stats::finite_values(direct),
                                         stats::finite_values(equiv[0]));
    CHECK(ks.statistic <= 0.02);
}

TEST_CASE("identical seeds give bit-identical trajectories") {
    auto spec = wiener_spec(44, 0.25);
    IntegrateOptions opt;
    opt.store_stride = 50;
    const auto a = integrate_equivalent(spec, 0.0, 0.5, 1.0, 1e-3, rng::stream(7, 3), opt);
    const auto b = integrate_equivalent(spec, 0.0, 0.5, 1.0, 1e-3, rng::stream(7, 3), opt);
    REQUIRE(a.states.size() == b.states.size());
    for (std::size_t i = 0; i < a.states.size(); ++i) CHECK(a.states[i] == b.states[i]);
}

TEST_CASE("ensemble results do not depend on the worker count") {
    auto spec = wiener_spec(45, 0.0);
    const std::vector<double> z0(64, 0.0);
    const double snap[] = {1.0};
    IntegrateOptions one;
    one.workers = 1;
    IntegrateOptions two;
    two.workers = 2;
    const auto a = ensemble_equivalent(spec, 0.0, z0, snap, 1e-3, rng::stream(9, 9), one);
    const auto b = ensemble_equivalent(spec, 0.0, z0, snap, 1e-3, rng::stream(9, 9), two);
    for (std::size_t i = 0; i < z0.size(); ++i) CHECK(a[0][i] == b[0][i]);
}

TEST_CASE("terminal means are stable under step halving") {
    auto spec = wiener_spec(46, 0.0);
    const int n = 4000;
    const std::vector<double> z0(n, 0.0);
    const double snap[] = {1.0};
    const auto coarse = ensemble_equivalent(spec, 0.0, z0, snap, 1e-2, rng::stream(11, 1));
    const auto fine = ensemble_equivalent(spec, 0.0, z0, snap, 5e-3, rng::stream(11, 2));
    const auto a = stats::finite_values(coarse[0]);
    const auto b = stats::finite_values(fine[0]);
    const double se = std::sqrt(stats::variance(a) / a.size() + stats::variance(b) / b.size());
    CHECK(std::fabs(stats::mean(a) - stats::mean(b)) <= 3.0 * se);
}

TEST_CASE("stored states satisfy the coordinate identity") {
    auto spec = wiener_spec(47, 0.5);
    IntegrateOptions opt;
    opt.store_stride = 100;
    const auto tr = integrate_equivalent(spec, 0.0, 0.3, 1.5, 1e-3, rng::stream(13, 1), opt);
    REQUIRE(!tr.escaped);
    REQUIRE(tr.states.size() == tr.tilde_states.size());
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        PseudoScale ps(spec, tr.times[i]);
        const double z = ps.s(tr.states[i]);
        CHECK(std::fabs(z - tr.tilde_states[i]) <= 2e-8 * (1.0 + std::fabs(z)));
    }
}

TEST_CASE("running maxima have stable exponential moments") {
    auto spec = wiener_spec(48, 0.0);
    const double snap[] = {3.0};
    auto run = [&](int n) {
        const std::vector<double> z0(static_cast<std::size_t>(n), 0.0);
        std::vector<double> max_sq;
        ensemble_equivalent(spec, 0.0, z0, snap, 2e-3, rng::stream(17, 1), {}, nullptr, &max_sq);
        std::vector<double> v(max_sq.size());
        for (std::size_t i = 0; i < max_sq.size(); ++i) v[i] = std::exp(0.05 * max_sq[i]);
        return stats::mean(v);
    };
    const double m1 = run(1000);
    const double m2 = run(2000);
    CHECK(std::isfinite(m1));
    CHECK(std::isfinite(m2));
    CHECK(std::fabs(m2 - m1) <= 0.15 * m1);
}

TEST_CASE("started-later runs match rebased runs in law") {
    // zero environment: both samples follow the same well transition law
    auto zspec = zero_spec();
    auto chk = cocycle_check(zspec, 1.0, 2.0, 0.4, 4000, rng::stream(19, 1));
    CHECK(chk.ks.p_value > 0.01);

    auto wspec = wiener_spec(50, 0.0);
    chk = cocycle_check(wspec, 1.0, 1.0, 0.4, 4000, rng::stream(19, 50));
    CHECK(chk.ks.p_value > 0.01);

    auto rspec = wiener_spec(51, 0.5);
    chk = cocycle_check(rspec, 2.0, 1.0, 0.4, 4000, rng::stream(19, 3));
    CHECK(chk.ks.p_value > 0.01);
}

TEST_CASE("natural-clock route agrees with the rescaled route at matched times") {
    const double beta = 0.75;
    const double r = beta - 0.25;
    auto path = EnvironmentPath::sample(52, 256, 8);
    path->set_half_width_cap(4096);
    auto ap = std::make_shared<AffineApproximation>(path, 0.4, 0.3, 64);

    const int n = 5000;
    const auto y = brox_direct_terminals(*ap, beta, 0.0, std::exp(2.0), 1e-3, n,
                                         rng::stream(23, 1));
    std::vector<double> z_from_y;
    for (double v : y)
        if (std::isfinite(v)) z_from_y.push_back(v / std::exp(1.0));  // y / sqrt(e^2)

    PotentialSpec spec{1.0, r, EnvView(path)};
    const std::vector<double> z0(static_cast<std::size_t>(n), 0.0);
    const double snap[] = {2.0};
    const auto equiv = ensemble_equivalent(spec, 0.0, z0, snap, 1e-3, rng::stream(23, 2));
    const auto ks = stats::ks_two_sample(z_from_y, stats::finite_values(equiv[0]));
    CHECK(ks.statistic <= 0.03);
}

TEST_CASE("coarser approximations drift further from the reference run") {
    auto path = EnvironmentPath::sample(53, 64, 8);
    const int n = 8000;
    auto run = [&](double eps) {
        auto ap = affine_approx(path, 0.45, eps, 12);
        // shared noise: the comparison couples the runs pathwise
        return direct_terminals(&ap, 1.0, 0.0, 0.0, 0.0, 2.0, 1e-3, n, rng::stream(29, 1));
    };
    const auto ref = run(0.05);
    const auto mid = run(0.15);
    const auto far = run(0.5);
    const double d_mid =
        stats::ks_two_sample(stats::finite_values(ref), stats::finite_values(mid)).statistic;
    const double d_far =
        stats::ks_two_sample(stats::finite_values(ref), stats::finite_values(far)).statistic;
    CHECK(d_far > d_mid);
}

TEST_CASE("breakpoint slopes use the right-hand segment") {
    auto path = EnvironmentPath::sample(54, 16, 6);
    auto ap = affine_approx(path, 0.4, 0.5, 8);
    const auto& cell = ap.cell_pos(2);
    const double x = 2.0 + cell.h;  // interior breakpoint
    const double right = (cell.values[2] - cell.values[1]) / cell.h;
    CHECK(ap.slope(x) == doctest::Approx(right).epsilon(1e-12));
}

TEST_CASE("quenched ensembles record one environment seed") {
    EnsembleConfig cfg;
    cfg.mode = EnsembleMode::quenched;
    cfg.env_seed = 77;
    cfg.n_replicas = 100;
    cfg.t_final = 0.5;
    cfg.dt = 1e-2;
    const auto res = run_ensemble(cfg);
    CHECK(res.rows.size() == 100);
    for (const auto& row : res.rows) CHECK(row.env_seed == 77);
    CHECK(res.terminal_samples.size() + static_cast<std::size_t>(res.n_escaped) == 100);
}

TEST_CASE("forced-zero annealed runs match quenched runs") {
    EnsembleConfig cfg;
    cfg.env_kind = PathKind::zero;
    cfg.n_replicas = 500;
    cfg.t_final = 1.0;
    cfg.dt = 5e-3;
    cfg.mode = EnsembleMode::quenched;
    const auto q = run_ensemble(cfg);
    cfg.mode = EnsembleMode::annealed;
    const auto a = run_ensemble(cfg);
    REQUIRE(q.rows.size() == a.rows.size());
    for (std::size_t i = 0; i < q.rows.size(); ++i)
        CHECK(q.rows[i].terminal == a.rows[i].terminal);
}

TEST_CASE("deterministic-environment smoke run") {
    EnsembleConfig cfg;
    cfg.mode = EnsembleMode::deterministic_env;
    cfg.n_replicas = 100;
    cfg.t_final = 0.5;
    cfg.dt = 1e-2;
    const auto res = run_ensemble(cfg);
    CHECK(res.rows.size() == 100);
    CHECK(res.n_escaped == 0);
}

TEST_CASE("window exhaustion escapes instead of lying") {
    auto path = EnvironmentPath::sample(55, 4, 6);
    path->set_half_width_cap(4.0);
    PotentialSpec spec{1.0, 0.0, EnvView(path)};
    IntegrateOptions opt;
    opt.escape_cap = 1.0;
    const auto tr = integrate_equivalent(spec, 0.0, 0.0, 9.0, 1e-3, rng::stream(31, 1), opt);
    CHECK(tr.escaped);
    CHECK(tr.times.back() < 9.0);

    EnsembleConfig cfg;
    cfg.env_seed = 55;
    cfg.env_half_width = 4;
    cfg.env_cap = 4;
    cfg.n_replicas = 200;
    cfg.t_final = 9.0;
    cfg.dt = 1e-3;
    CHECK_THROWS_AS((void)run_ensemble(cfg), EscapeCapExceeded);
}
