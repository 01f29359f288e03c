#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "renv/affine.hpp"
#include "renv/environment.hpp"
#include "renv/rng.hpp"
#include "renv/stats.hpp"
#include "renv/transform.hpp"

namespace renv {

enum class Coordinate { z_space, tilde_z_space, brox_y_space };

std::string to_string(Coordinate c);

struct Trajectory {
    std::vector<double> times;
    std::vector<double> states;
    std::vector<double> tilde_states;  // filled by the transformed route
    Coordinate coordinate = Coordinate::z_space;
    std::uint64_t env_seed = 0;
    std::uint64_t noise_seed = 0;
    bool escaped = false;
    double max_state_sq = 0.0;
};

Trajectory brox_to_z(const Trajectory& y_traj);  // (t,y) -> (log t, y/sqrt t), t >= 1
Trajectory z_to_brox(const Trajectory& z_traj);

struct IntegrateOptions {
    double dt = 1e-3;
    int store_stride = 0;      // 0: choose ~1000 stored points
    double state_cap = 20.0;   // |x| beyond this escapes (exp overflow guard)
    int workers = 0;           // 0: hardware concurrency
    double escape_cap = 0.01;  // max tolerated escaped fraction in ensembles
    TransformOptions transform;
};

// Transformed-route integration: Euler-Maruyama on dZt = sigma dB + d dt
// with shared per-step coefficient tables, mapped back through the inverse
// transform at store times.

Trajectory integrate_equivalent(const PotentialSpec& spec, double s, double z, double t_end,
                                double dt, rng::Stream noise, const IntegrateOptions& opt = {});

// Lock-step ensemble: replicas advance through one shared table per time
// step, each on its own counter-based stream (replica i -> split(noise, i)).
// Returns snapshots[j][i] = state of replica i at snapshot_times[j] in the
// original coordinates; escaped replicas hold NaN from their escape onward.
std::vector<std::vector<double>> ensemble_equivalent(const PotentialSpec& spec, double s,
                                                     std::span<const double> z0,
                                                     std::span<const double> snapshot_times,
                                                     double dt, rng::Stream noise,
                                                     const IntegrateOptions& opt = {},
                                                     std::vector<std::uint8_t>* escaped_out = nullptr,
                                                     std::vector<double>* max_sq_out = nullptr);

// Direct route: explicit Euler-Maruyama in the original coordinates with the
// rough drift read from the piecewise-linear approximation (nullptr: no
// environment term).  Serves as an independent oracle for the transformed
// route.
Trajectory integrate_direct(const AffineApproximation* approx, double a, double r, double s,
                            double z, double t_end, double dt, rng::Stream noise,
                            const IntegrateOptions& opt = {});

std::vector<double> direct_terminals(const AffineApproximation* approx, double a, double r,
                                     double s, double z0, double t_end, double dt, int n,
                                     rng::Stream noise, const IntegrateOptions& opt = {},
                                     std::vector<std::uint8_t>* escaped_out = nullptr);

// Direct route in the natural clock: dY = dB - W'(Y)/(2 t^beta) dt from t=1,
// stepped log-uniformly (h is the step in log t).
Trajectory integrate_brox_direct(const AffineApproximation& approx, double beta, double y0,
                                 double t_end, double h_log, rng::Stream noise,
                                 const IntegrateOptions& opt = {});

std::vector<double> brox_direct_terminals(const AffineApproximation& approx, double beta,
                                          double y0, double t_end, double h_log, int n,
                                          rng::Stream noise, const IntegrateOptions& opt = {},
                                          std::vector<std::uint8_t>* escaped_out = nullptr);

enum class EnsembleMode { quenched, annealed, deterministic_env };

std::string to_string(EnsembleMode m);
EnsembleMode ensemble_mode_from_string(const std::string& s);

struct EnsembleConfig {
    EnsembleMode mode = EnsembleMode::quenched;
    PathKind env_kind = PathKind::wiener;  // forced kind; deterministic_env pins |x|^{1/2}
    double a = 1.0;
    double r = 0.0;
    std::uint64_t env_seed = 1;
    std::uint64_t noise_seed = 2;
    double env_half_width = 64.0;
    double env_cap = 1024.0;
    int env_base_level = 8;
    int n_replicas = 1000;
    double s = 0.0;
    double t_final = 1.0;
    double dt = 1e-3;
    double z0 = 0.0;
    bool brox_scaling = false;  // report X_t/sqrt(t) of the natural clock
    IntegrateOptions integrate;
};

struct ReplicaRow {
    std::int64_t replica_id = 0;
    std::uint64_t env_seed = 0;
    double terminal = 0.0;
    bool escaped = false;
};

struct EnsembleResult {
    EnsembleMode mode = EnsembleMode::quenched;
    std::vector<ReplicaRow> rows;
    std::vector<double> terminal_samples;  // escaped replicas excluded
    std::int64_t n_escaped = 0;
    int n_replicas = 0;
    double t_final = 0.0;
    std::uint64_t config_hash = 0;
};

// Quenched: one environment, independent noise streams.  Annealed: fresh
// (environment, noise) pair per replica.  Throws EscapeCapExceeded when the
// escaped fraction passes the cap.
EnsembleResult run_ensemble(const EnsembleConfig& cfg);

struct CocycleCheck {
    stats::KsResult ks;
    int n_used = 0;
};

// Samples X_{s+t} started at (s,z) against X_t started at (0,z) under the
// rebased environment, with independent noise.
CocycleCheck cocycle_check(const PotentialSpec& spec, double s, double t, double z, int n,
                           rng::Stream noise, const IntegrateOptions& opt = {});

}  // namespace renv
