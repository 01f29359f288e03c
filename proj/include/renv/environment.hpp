#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "renv/rng.hpp"

namespace renv {

enum class PathKind { wiener, deterministic_sqrt, zero, synthetic_linear };

std::string to_string(PathKind k);
PathKind path_kind_from_string(const std::string& s);

// Two-sided path on [-half_width, half_width] pinned to 0 at the origin.
//
// Random paths are a dyadic hierarchy: independent Brownian increments per
// side at the coarsest spacing (2^-kTopLevel units), then Brownian-bridge
// midpoints down to any requested level.  Every value is a pure function of
// (seed, level, index), so refining then evaluating equals evaluating
// directly, bit for bit, and parallel workers agree without coordination.
// Values are cached sparsely; only touched nodes occupy memory.
//
// Deterministic kinds (zero, |x|^{1/2}, m*x) evaluate their closed form
// exactly at every argument.
//
// Concurrency: values are immutable once defined; the node cache is
// internally synchronized.  ensure_half_width / refine_to / cap changes must
// not race with readers (call them from serial sections).
class EnvironmentPath {
public:
    static std::shared_ptr<EnvironmentPath> sample(std::uint64_t seed, double half_width,
                                                   int base_level);
    static std::shared_ptr<EnvironmentPath> deterministic_sqrt(double half_width = 64.0,
                                                               int base_level = 8);
    static std::shared_ptr<EnvironmentPath> zero(double half_width = 64.0, int base_level = 8);
    static std::shared_ptr<EnvironmentPath> synthetic_linear(double slope,
                                                             double half_width = 64.0,
                                                             int base_level = 8);
    // Rebuild from an export; stored values must agree with the seed's
    // regeneration (the file is a snapshot, the seed is the generator).
    static std::shared_ptr<EnvironmentPath> from_values(PathKind kind, std::uint64_t seed,
                                                        double half_width, int base_level,
                                                        std::span<const double> pos,
                                                        std::span<const double> neg,
                                                        double slope = 0.0);

    PathKind kind() const { return kind_; }
    std::uint64_t seed() const { return seed_; }
    int base_level() const { return base_level_; }
    int max_level() const { return max_level_; }
    double half_width() const { return half_width_; }
    double slope() const { return slope_; }
    bool analytic() const { return kind_ != PathKind::wiener; }

    // Value snapped to the nearest dyadic point at the current maximum
    // refinement level (exact closed form for deterministic kinds).
    double evaluate(double x) const;

    // Value at the dyadic point idx * 2^-level; level may be far coarser than
    // the base grid or up to kMaxRefineDepth below it.
    double dyadic_value(int level, std::int64_t idx) const;

    // Piecewise-linear interpolation between dyadic points at `level`.
    double polyline_value(int level, double x) const;

    void refine_to(int level);

    // Grows the represented window by doubling; values are unchanged.  Throws
    // OutOfWindow beyond the cap.
    void ensure_half_width(double r);
    double half_width_cap() const { return cap_; }
    void set_half_width_cap(double cap);

    // Base-grid values for export; pos[i] at +i*2^-base_level, neg[i] at
    // the mirrored abscissa.
    std::vector<double> base_values_pos() const;
    std::vector<double> base_values_neg() const;

    static constexpr int kTopLevel = -10;     // coarsest spacing: 1024 units
    static constexpr int kMaxRefineDepth = 24;  // levels below the base grid
    static constexpr int kMinLevel = kTopLevel;

private:
    EnvironmentPath() = default;
    void ensure_tops(std::int64_t cells);
    double top_value(std::int64_t idx) const;
    double analytic_value(double x) const;

    PathKind kind_ = PathKind::zero;
    std::uint64_t seed_ = 0;
    double slope_ = 0.0;
    int base_level_ = 8;
    int max_level_ = 8;
    double half_width_ = 64.0;
    double cap_ = 1024.0;
    rng::Stream stream_{};
    std::vector<double> tops_pos_, tops_neg_;  // coarsest-grid values per side
    mutable std::unordered_map<std::uint64_t, double> nodes_;
    mutable std::mutex mu_;
};

// Lazy affine reading of a path: value(x) = coef * path(lam * x).  Scaling,
// flow and scalar multiples compose in closed form, so group identities hold
// to rounding.  Views are freely shareable.
class EnvView {
public:
    EnvView() = default;
    explicit EnvView(std::shared_ptr<EnvironmentPath> p) : path_(std::move(p)) {}
    EnvView(std::shared_ptr<EnvironmentPath> p, double coef, double lam)
        : path_(std::move(p)), coef_(coef), lam_(lam) {}

    const std::shared_ptr<EnvironmentPath>& path() const { return path_; }
    double coef() const { return coef_; }
    double lam() const { return lam_; }
    double half_width() const { return path_->half_width() / lam_; }

    double evaluate(double x) const { return coef_ * path_->evaluate(lam_ * x); }
    double polyline_value(int level, double x) const {
        return coef_ * path_->polyline_value(level, lam_ * x);
    }

    // S_lambda: x -> theta(lambda x)/sqrt(lambda).
    EnvView scale(double lambda) const;
    // T_t = S_{e^{t/2}}: x -> e^{-t/4} theta(e^{t/2} x).
    EnvView flow(double t) const;
    EnvView times(double c) const { return {path_, coef_ * c, lam_}; }

    // True when every flow image of the view is a constant multiple of the
    // view itself (zero and |x|^{1/2} kinds): the induced potential is then
    // time-independent whenever the decay factor is constant.
    bool flow_invariant() const;

private:
    std::shared_ptr<EnvironmentPath> path_;
    double coef_ = 1.0;
    double lam_ = 1.0;
};

std::shared_ptr<EnvironmentPath> sample_path(std::uint64_t seed, double half_width,
                                             int base_level);

// (T_t theta(x))_{t in t_grid}; stationarity diagnostics read this section.
std::vector<double> ou_section(const EnvView& env, double x, std::span<const double> t_grid);

}  // namespace renv
