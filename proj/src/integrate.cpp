#include "renv/integrate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <memory>

#include "renv/errors.hpp"
#include "renv/parallel.hpp"

namespace renv {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::uint64_t kNoiseTag = 0x6e6f697365ull;
constexpr std::uint64_t kAnnealedEnvTag = 0x616e6e656e76ull;

std::int64_t step_count(double s, double t_end, double dt) {
    if (t_end < s || dt <= 0) throw ConfigError("integration needs t_end >= s and dt > 0");
    return std::llround((t_end - s) / dt);
}

int pick_stride(std::int64_t steps, int requested) {
    if (requested > 0) return requested;
    return static_cast<int>(std::max<std::int64_t>(1, steps / 1024));
}

}  // namespace

std::string to_string(Coordinate c) {
    switch (c) {
        case Coordinate::z_space: return "z-space";
        case Coordinate::tilde_z_space: return "tilde-z-space";
        case Coordinate::brox_y_space: return "brox-y-space";
    }
    return "unknown";
}

std::string to_string(EnsembleMode m) {
    switch (m) {
        case EnsembleMode::quenched: return "quenched";
        case EnsembleMode::annealed: return "annealed";
        case EnsembleMode::deterministic_env: return "deterministic-env";
    }
    return "unknown";
}

EnsembleMode ensemble_mode_from_string(const std::string& s) {
    if (s == "quenched") return EnsembleMode::quenched;
    if (s == "annealed") return EnsembleMode::annealed;
    if (s == "deterministic-env" || s == "deterministic") return EnsembleMode::deterministic_env;
    throw ConfigError("unknown ensemble mode: " + s);
}

Trajectory brox_to_z(const Trajectory& y_traj) {
    Trajectory out = y_traj;
    brox_to_z_inplace(out.times, out.states);
    out.coordinate = Coordinate::z_space;
    out.tilde_states.clear();
    return out;
}

Trajectory z_to_brox(const Trajectory& z_traj) {
    Trajectory out = z_traj;
    z_to_brox_inplace(out.times, out.states);
    out.coordinate = Coordinate::brox_y_space;
    out.tilde_states.clear();
    return out;
}

Trajectory integrate_equivalent(const PotentialSpec& spec, double s, double z, double t_end,
                                double dt, rng::Stream noise, const IntegrateOptions& opt) {
    const std::int64_t steps = step_count(s, t_end, dt);
    const int stride = pick_stride(steps, opt.store_stride);
    const bool ti = spec.time_independent();
    const double sqrt_dt = std::sqrt(dt);

    Trajectory out;
    out.coordinate = Coordinate::z_space;
    if (spec.env.path()) out.env_seed = spec.env.path()->seed();

    std::unique_ptr<PseudoScale> table;
    auto make_table = [&](double u, double lo, double hi) {
        table = std::make_unique<PseudoScale>(spec, u, opt.transform, lo, hi);
    };

    make_table(s, z - 1, z + 1);
    double zt = table->s(z);
    double x = z;
    std::int64_t hint = 0;

    for (std::int64_t k = 0; k <= steps; ++k) {
        const double u = s + static_cast<double>(k) * dt;
        std::optional<PseudoScale::Coeffs> c;
        try {
            if (!ti && k > 0) make_table(u, x - 1, x + 1);
            for (int attempt = 0; attempt < 8 && !c; ++attempt) {
                c = table->try_coeffs(zt, &hint);
                if (!c) table->ensure_range(table->x_lo() - 1.0, table->x_hi() + 1.0);
            }
        } catch (const OutOfWindow&) {
            c.reset();
        }
        if (!c) {
            out.escaped = true;
            break;
        }
        x = c->x;
        out.max_state_sq = std::max(out.max_state_sq, x * x);
        if (std::fabs(x) > opt.state_cap) {
            out.escaped = true;
            break;
        }
        if (k % stride == 0 || k == steps) {
            out.times.push_back(u);
            out.states.push_back(x);
            out.tilde_states.push_back(zt);
        }
        if (k < steps) zt += c->sigma * sqrt_dt * rng::normal(noise, static_cast<std::uint64_t>(k)) +
                             c->d * dt;
    }
    return out;
}

std::vector<std::vector<double>> ensemble_equivalent(const PotentialSpec& spec, double s,
                                                     std::span<const double> z0,
                                                     std::span<const double> snapshot_times,
                                                     double dt, rng::Stream noise,
                                                     const IntegrateOptions& opt,
                                                     std::vector<std::uint8_t>* escaped_out,
                                                     std::vector<double>* max_sq_out) {
    const auto n = static_cast<std::int64_t>(z0.size());
    if (n == 0 || snapshot_times.empty()) throw ConfigError("ensemble needs replicas and snapshots");
    for (std::size_t j = 1; j < snapshot_times.size(); ++j)
        if (snapshot_times[j] < snapshot_times[j - 1])
            throw ConfigError("snapshot times must be sorted");
    if (snapshot_times.front() < s) throw ConfigError("snapshots precede the start time");

    const std::int64_t steps = step_count(s, snapshot_times.back(), dt);
    std::vector<std::vector<std::size_t>> snaps_at(static_cast<std::size_t>(steps) + 1);
    for (std::size_t j = 0; j < snapshot_times.size(); ++j) {
        const auto k = std::llround((snapshot_times[j] - s) / dt);
        if (k < 0 || k > steps) throw ConfigError("snapshot off the time grid");
        snaps_at[static_cast<std::size_t>(k)].push_back(j);
    }

    const bool ti = spec.time_independent();
    const double sqrt_dt = std::sqrt(dt);
    const int workers = effective_workers(opt.workers, n);

    std::vector<std::vector<double>> snapshots(snapshot_times.size(),
                                               std::vector<double>(static_cast<std::size_t>(n), kNaN));
    std::vector<double> z(static_cast<std::size_t>(n)), znext(static_cast<std::size_t>(n)),
        x(z0.begin(), z0.end());
    std::vector<std::int64_t> hint(static_cast<std::size_t>(n), 0);
    std::vector<double> max_sq(static_cast<std::size_t>(n), 0.0);
    std::vector<std::uint8_t> esc(static_cast<std::size_t>(n), 0),
        need(static_cast<std::size_t>(n), 0);
    std::vector<rng::Stream> streams(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i)
        streams[static_cast<std::size_t>(i)] = rng::split(noise, static_cast<std::uint64_t>(i));

    std::unique_ptr<PseudoScale> table;
    auto build_table = [&](double u, double lo, double hi) {
        table = std::make_unique<PseudoScale>(spec, u, opt.transform, lo, hi);
    };

    // Requested range clamped to what the environment cap can represent;
    // replicas outside become escapes.
    auto build_clamped = [&](double u, double lo, double hi) {
        try {
            if (table && ti)
                table->ensure_range(lo, hi);
            else
                build_table(u, lo, hi);
            return;
        } catch (const OutOfWindow&) {
            if (!spec.env.path()) throw;
        }
        const double lam = spec.env.lam() * std::exp(0.5 * u);
        const double xcap = 0.9 * (spec.env.path()->half_width_cap() - 2.0) / lam;
        if (!(xcap > 0.01)) throw OutOfWindow("mapped window shrank to nothing");
        for (std::int64_t i = 0; i < n; ++i) {
            auto ii = static_cast<std::size_t>(i);
            if (!esc[ii] && std::fabs(x[ii]) > xcap) esc[ii] = 1;
        }
        build_table(u, std::clamp(lo, -xcap, xcap), std::clamp(hi, -xcap, xcap));
    };

    {
        const auto [mn, mx] = std::minmax_element(z0.begin(), z0.end());
        build_clamped(s, *mn - 0.75, *mx + 0.75);
        for (std::int64_t i = 0; i < n; ++i)
            z[static_cast<std::size_t>(i)] = table->s(z0[static_cast<std::size_t>(i)]);
    }

    struct Slot {
        double mn = 0, mx = 0;
        bool need = false;
        char pad[40];  // keep worker slots off one cache line
    };
    std::vector<Slot> slots(static_cast<std::size_t>(workers));
    int repeat_count = 0;

    auto work = [&](std::int64_t k, std::int64_t b, std::int64_t e, int w) {
        double mn = std::numeric_limits<double>::infinity();
        double mx = -std::numeric_limits<double>::infinity();
        bool any_need = false;
        const auto& snap_list = snaps_at[static_cast<std::size_t>(k)];
        for (std::int64_t i = b; i < e; ++i) {
            const auto ii = static_cast<std::size_t>(i);
            if (esc[ii]) continue;
            const auto c = table->try_coeffs(z[ii], &hint[ii]);
            if (!c) {
                need[ii] = 1;
                any_need = true;
                continue;
            }
            need[ii] = 0;
            x[ii] = c->x;
            max_sq[ii] = std::max(max_sq[ii], c->x * c->x);
            if (std::fabs(c->x) > opt.state_cap) {
                esc[ii] = 1;
                continue;
            }
            mn = std::min(mn, c->x);
            mx = std::max(mx, c->x);
            for (std::size_t j : snap_list) snapshots[j][ii] = c->x;
            if (k < steps)
                znext[ii] = z[ii] +
                            c->sigma * sqrt_dt * rng::normal(streams[ii], static_cast<std::uint64_t>(k)) +
                            c->d * dt;
        }
        slots[static_cast<std::size_t>(w)] = Slot{mn, mx, any_need, {}};
    };

    auto serial = [&](std::int64_t k) noexcept -> StepControl {
        bool any_need = false;
        double gmn = std::numeric_limits<double>::infinity();
        double gmx = -std::numeric_limits<double>::infinity();
        for (const auto& sl : slots) {
            any_need = any_need || sl.need;
            gmn = std::min(gmn, sl.mn);
            gmx = std::max(gmx, sl.mx);
        }
        try {
            if (any_need) {
                // widen on the side(s) that ran out and redo the round
                ++repeat_count;
                const double grow = 0.5 * static_cast<double>(1 << std::min(repeat_count, 6));
                const double old_lo = table->x_lo(), old_hi = table->x_hi();
                build_clamped(s + static_cast<double>(k) * dt, old_lo - grow, old_hi + grow);
                if (table->x_lo() >= old_lo && table->x_hi() <= old_hi) {
                    // window pinned at the environment cap: the flagged
                    // replicas have nowhere to go
                    for (std::int64_t i = 0; i < n; ++i) {
                        const auto ii = static_cast<std::size_t>(i);
                        if (need[ii]) esc[ii] = 1;
                    }
                }
                for (auto& f : need) f = 0;
                return StepControl::repeat;
            }
            repeat_count = 0;
            if (!std::isfinite(gmn)) return StepControl::stop;  // every replica escaped
            if (k < steps) {
                for (std::int64_t i = 0; i < n; ++i) {
                    const auto ii = static_cast<std::size_t>(i);
                    if (!esc[ii]) z[ii] = znext[ii];
                }
                build_clamped(s + static_cast<double>(k + 1) * dt, gmn - 0.75, gmx + 0.75);
            }
            return StepControl::advance;
        } catch (...) {
            // table rebuild failed beyond recovery; freeze everything alive
            for (auto& f : esc) f = 1;
            return StepControl::stop;
        }
    };

    step_parallel(n, workers, steps + 1, work, serial);

    if (escaped_out != nullptr) escaped_out->assign(esc.begin(), esc.end());
    if (max_sq_out != nullptr) *max_sq_out = std::move(max_sq);
    return snapshots;
}

Trajectory integrate_direct(const AffineApproximation* approx, double a, double r, double s,
                            double z, double t_end, double dt, rng::Stream noise,
                            const IntegrateOptions& opt) {
    const std::int64_t steps = step_count(s, t_end, dt);
    const int stride = pick_stride(steps, opt.store_stride);
    const double sqrt_dt = std::sqrt(dt);

    Trajectory out;
    out.coordinate = Coordinate::z_space;
    if (approx != nullptr) out.env_seed = approx->path()->seed();

    double x = z;
    for (std::int64_t k = 0; k <= steps; ++k) {
        const double u = s + static_cast<double>(k) * dt;
        out.max_state_sq = std::max(out.max_state_sq, x * x);
        if (std::fabs(x) > opt.state_cap) {
            out.escaped = true;
            break;
        }
        double g = 0.0;
        if (approx != nullptr) {
            const double xb = std::exp(0.5 * u) * x;
            if (std::fabs(xb) > approx->window()) {
                out.escaped = true;
                break;
            }
            g = std::exp((0.25 - r) * u) * approx->slope(xb);
        }
        if (k % stride == 0 || k == steps) {
            out.times.push_back(u);
            out.states.push_back(x);
        }
        if (k < steps)
            x += -0.5 * (a * x + g) * dt + sqrt_dt * rng::normal(noise, static_cast<std::uint64_t>(k));
    }
    return out;
}

std::vector<double> direct_terminals(const AffineApproximation* approx, double a, double r,
                                     double s, double z0, double t_end, double dt, int n,
                                     rng::Stream noise, const IntegrateOptions& opt,
                                     std::vector<std::uint8_t>* escaped_out) {
    std::vector<double> terminal(static_cast<std::size_t>(n), kNaN);
    std::vector<std::uint8_t> esc(static_cast<std::size_t>(n), 0);
    IntegrateOptions one = opt;
    one.store_stride = std::numeric_limits<int>::max();
    parallel_for(n, opt.workers, [&](std::int64_t b, std::int64_t e, int) {
        for (std::int64_t i = b; i < e; ++i) {
            const auto tr = integrate_direct(approx, a, r, s, z0, t_end, dt,
                                             rng::split(noise, static_cast<std::uint64_t>(i)), one);
            const auto ii = static_cast<std::size_t>(i);
            if (tr.escaped) {
                esc[ii] = 1;
            } else {
                terminal[ii] = tr.states.back();
            }
        }
    });
    if (escaped_out != nullptr) *escaped_out = std::move(esc);
    return terminal;
}

Trajectory integrate_brox_direct(const AffineApproximation& approx, double beta, double y0,
                                 double t_end, double h_log, rng::Stream noise,
                                 const IntegrateOptions& opt) {
    if (t_end <= 1.0 || h_log <= 0) throw ConfigError("natural-clock run needs t_end > 1, h > 0");
    const auto steps = static_cast<std::int64_t>(std::ceil(std::log(t_end) / h_log));
    const double h = std::log(t_end) / static_cast<double>(steps);
    const int stride = pick_stride(steps, opt.store_stride);

    Trajectory out;
    out.coordinate = Coordinate::brox_y_space;
    out.env_seed = approx.path()->seed();

    double y = y0;
    for (std::int64_t k = 0; k <= steps; ++k) {
        const double u = std::exp(static_cast<double>(k) * h);
        out.max_state_sq = std::max(out.max_state_sq, y * y / u);
        if (std::fabs(y) > approx.window() || y * y > opt.state_cap * opt.state_cap * u) {
            out.escaped = true;
            break;
        }
        if (k % stride == 0 || k == steps) {
            out.times.push_back(u);
            out.states.push_back(y);
        }
        if (k < steps) {
            const double du = u * (std::exp(h) - 1.0);
            y += -0.5 * approx.slope(y) * std::pow(u, -beta) * du +
                 std::sqrt(du) * rng::normal(noise, static_cast<std::uint64_t>(k));
        }
    }
    return out;
}

std::vector<double> brox_direct_terminals(const AffineApproximation& approx, double beta,
                                          double y0, double t_end, double h_log, int n,
                                          rng::Stream noise, const IntegrateOptions& opt,
                                          std::vector<std::uint8_t>* escaped_out) {
    std::vector<double> terminal(static_cast<std::size_t>(n), kNaN);
    std::vector<std::uint8_t> esc(static_cast<std::size_t>(n), 0);
    IntegrateOptions one = opt;
    one.store_stride = std::numeric_limits<int>::max();
    parallel_for(n, opt.workers, [&](std::int64_t b, std::int64_t e, int) {
        for (std::int64_t i = b; i < e; ++i) {
            const auto tr = integrate_brox_direct(approx, beta, y0, t_end, h_log,
                                                  rng::split(noise, static_cast<std::uint64_t>(i)), one);
            const auto ii = static_cast<std::size_t>(i);
            if (tr.escaped) {
                esc[ii] = 1;
            } else {
                terminal[ii] = tr.states.back();
            }
        }
    });
    if (escaped_out != nullptr) *escaped_out = std::move(esc);
    return terminal;
}

EnsembleResult run_ensemble(const EnsembleConfig& cfg) {
    if (cfg.n_replicas <= 0) throw ConfigError("run_ensemble: n_replicas must be positive");
    EnsembleResult res;
    res.mode = cfg.mode;
    res.n_replicas = cfg.n_replicas;
    res.t_final = cfg.t_final;

    const rng::Stream noise = rng::stream(cfg.noise_seed, kNoiseTag);
    const PathKind kind =
        cfg.mode == EnsembleMode::deterministic_env ? PathKind::deterministic_sqrt : cfg.env_kind;
    const double run_start = cfg.brox_scaling ? 0.0 : cfg.s;
    const double run_end = cfg.brox_scaling ? std::log(cfg.t_final) : cfg.t_final;
    if (cfg.brox_scaling && (cfg.t_final <= 1.0 || cfg.s != 0.0))
        throw ConfigError("natural-clock scaling needs s = 0 and t_final > 1");

    res.rows.resize(static_cast<std::size_t>(cfg.n_replicas));

    if (cfg.mode == EnsembleMode::annealed && kind == PathKind::wiener) {
        const rng::Stream env_seq = rng::stream(cfg.env_seed, kAnnealedEnvTag);
        IntegrateOptions one = cfg.integrate;
        one.store_stride = std::numeric_limits<int>::max();
        parallel_for(cfg.n_replicas, cfg.integrate.workers, [&](std::int64_t b, std::int64_t e, int) {
            for (std::int64_t i = b; i < e; ++i) {
                const auto ii = static_cast<std::size_t>(i);
                const std::uint64_t env_seed = rng::bits(env_seq, static_cast<std::uint64_t>(i));
                auto path = EnvironmentPath::sample(env_seed, cfg.env_half_width, cfg.env_base_level);
                path->set_half_width_cap(cfg.env_cap);
                PotentialSpec spec{cfg.a, cfg.r, EnvView(path)};
                const auto tr = integrate_equivalent(spec, run_start, cfg.z0, run_end, cfg.dt,
                                                     rng::split(noise, static_cast<std::uint64_t>(i)),
                                                     one);
                res.rows[ii] = {i, env_seed, tr.escaped ? kNaN : tr.states.back(), tr.escaped};
            }
        });
    } else {
        std::shared_ptr<EnvironmentPath> path;
        switch (kind) {
            case PathKind::wiener:
                path = EnvironmentPath::sample(cfg.env_seed, cfg.env_half_width, cfg.env_base_level);
                break;
            case PathKind::deterministic_sqrt:
                path = EnvironmentPath::deterministic_sqrt(cfg.env_half_width, cfg.env_base_level);
                break;
            case PathKind::zero:
                path = EnvironmentPath::zero(cfg.env_half_width, cfg.env_base_level);
                break;
            case PathKind::synthetic_linear:
                path = EnvironmentPath::synthetic_linear(1.0, cfg.env_half_width, cfg.env_base_level);
                break;
        }
        path->set_half_width_cap(cfg.env_cap);
        PotentialSpec spec{cfg.a, cfg.r, EnvView(path)};
        const std::vector<double> z0(static_cast<std::size_t>(cfg.n_replicas), cfg.z0);
        const double snap[] = {run_end};
        std::vector<std::uint8_t> esc;
        const auto snaps = ensemble_equivalent(spec, run_start, z0, snap, cfg.dt, noise,
                                               cfg.integrate, &esc);
        const std::uint64_t env_seed = kind == PathKind::wiener ? cfg.env_seed : 0;
        for (std::int64_t i = 0; i < cfg.n_replicas; ++i) {
            const auto ii = static_cast<std::size_t>(i);
            res.rows[ii] = {i, env_seed, snaps[0][ii], esc[ii] != 0};
        }
    }

    for (const auto& row : res.rows) {
        if (row.escaped) {
            ++res.n_escaped;
        } else {
            res.terminal_samples.push_back(row.terminal);
        }
    }
    const double frac = static_cast<double>(res.n_escaped) / static_cast<double>(cfg.n_replicas);
    if (frac > cfg.integrate.escape_cap)
        throw EscapeCapExceeded("escaped fraction " + std::to_string(frac) + " exceeds cap " +
                                std::to_string(cfg.integrate.escape_cap));
    return res;
}

CocycleCheck cocycle_check(const PotentialSpec& spec, double s, double t, double z, int n,
                           rng::Stream noise, const IntegrateOptions& opt) {
    if (n < 1000) throw ConfigError("cocycle_check needs n >= 1000");
    const std::vector<double> z0(static_cast<std::size_t>(n), z);

    const double snap_a[] = {s + t};
    auto a = ensemble_equivalent(spec, s, z0, snap_a, opt.dt, rng::split(noise, 1), opt);

    const PotentialSpec shifted = rebase(spec, s);
    const double snap_b[] = {t};
    auto b = ensemble_equivalent(shifted, 0.0, z0, snap_b, opt.dt, rng::split(noise, 2), opt);

    auto xa = stats::finite_values(a[0]);
    auto xb = stats::finite_values(b[0]);
    CocycleCheck out;
    out.n_used = static_cast<int>(std::min(xa.size(), xb.size()));
    out.ks = stats::ks_two_sample(std::move(xa), std::move(xb));
    return out;
}

}  // namespace renv
