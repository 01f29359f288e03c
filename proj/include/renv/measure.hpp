#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "renv/integrate.hpp"
#include "renv/stats.hpp"
#include "renv/transform.hpp"

namespace renv {

// Tail weights U_alpha(x) = exp(alpha x^2/2), V_alpha(x) = exp(|x|^alpha).
struct WeightFunction {
    enum class Kind { u_alpha, v_alpha, one };
    Kind kind = Kind::one;
    double alpha = 0.5;

    double operator()(double x) const;
    std::string name() const;

    static WeightFunction U(double alpha) { return {Kind::u_alpha, alpha}; }
    static WeightFunction V(double alpha) { return {Kind::v_alpha, alpha}; }
    static WeightFunction One() { return {Kind::one, 0.0}; }
};

// Smallest c with V_alpha <= c * U_alpha pointwise.
double v_over_u_constant(double alpha);

// Uniformly weighted sample or a histogram with unit total mass.
class EmpiricalMeasure {
public:
    static EmpiricalMeasure from_samples(std::vector<double> samples);  // drops NaNs
    static EmpiricalMeasure delta(double x) { return from_samples({x}); }
    static EmpiricalMeasure histogram(std::vector<double> edges, std::vector<double> masses);

    bool is_histogram() const { return !edges_.empty(); }
    const std::vector<double>& samples() const { return samples_; }
    const std::vector<double>& edges() const { return edges_; }
    const std::vector<double>& masses() const { return masses_; }
    std::size_t size() const { return is_histogram() ? masses_.size() : samples_.size(); }
    double support_lo() const { return lo_; }
    double support_hi() const { return hi_; }

private:
    std::vector<double> samples_;
    std::vector<double> edges_, masses_;
    double lo_ = 0.0, hi_ = 0.0;
};

struct Binning {
    double lo = -8.0;
    double hi = 8.0;
    int bins = 64;
};

// Common binning over the joint support, clipped to the binning window; mass
// outside lands in the end bins.
Binning joint_binning(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                      const Binning& base = {});
std::vector<double> bin_masses(const EmpiricalMeasure& m, const Binning& bng);
// Bin probabilities of an (unnormalized) density by quadrature; mass outside
// the window is folded into the end bins.
std::vector<double> density_bin_masses(const std::function<double(double)>& density,
                                       const Binning& bng, double tail = 12.0);
EmpiricalMeasure histogram_from_density(const std::function<double(double)>& density,
                                        const Binning& bng);

struct NormResult {
    double value = 0.0;
    bool tail_dominated = false;  // warning-grade; value still returned
};
NormResult weighted_norm(const EmpiricalMeasure& m, const WeightFunction& f);

struct DistanceResult {
    double value = 0.0;
    bool empty_overlap = false;  // disjoint supports after binning
};
// Binned F-total-variation: sum over bins of F(midpoint) |m1 - m2|.
DistanceResult weighted_distance(const EmpiricalMeasure& m1, const EmpiricalMeasure& m2,
                                 const WeightFunction& f, const Binning& bng = {});

stats::KsResult ks_distance(const EmpiricalMeasure& m1, const EmpiricalMeasure& m2);
stats::KsResult ks_distance(const EmpiricalMeasure& m1, const std::function<double(double)>& cdf);

// Terminal law of the diffusion run for n_units under the environment pulled
// back by the same amount, started from initial_measure; estimates the
// quasi-invariant measure at the original environment.  Requires r = 0.
EmpiricalMeasure pullback_measure(const PotentialSpec& spec, int n_units,
                                  const EmpiricalMeasure& initial_measure, int n_replicas,
                                  rng::Stream noise, const IntegrateOptions& opt = {});

struct InvarianceReport {
    stats::KsResult ks;        // propagated pullback vs shifted pullback
    double wtv = 0.0;          // weighted-TV between the two
    double wtv_floor = 0.0;    // split-half noise floor of the same statistic
    int n_used = 0;
};
// Estimates mu by pullback, pushes it one unit forward, and compares with the
// pullback estimate under the unit-shifted environment.  Requires r = 0.
InvarianceReport invariance_check(const PotentialSpec& spec, int pullback_n, int n_replicas,
                                  rng::Stream noise, const IntegrateOptions& opt = {},
                                  const WeightFunction& f = WeightFunction::U(0.5));

struct RateEstimate {
    double slope = 0.0;
    double intercept = 0.0;
    double residual_rms = 0.0;
};
// Least-squares slope of log(distance) against time (callers pass log t for
// the polynomial regime).  Distances must be positive.
RateEstimate rate_estimate(std::span<const double> t, std::span<const double> d);

struct CltReport {
    std::vector<double> times;
    std::vector<double> ks_stat;
    std::vector<double> p_value;
    std::int64_t n_escaped = 0;
};
// One quenched ensemble observed at each time in t_list, tested against the
// standard normal.  Requires r > 0.
CltReport quenched_clt_check(const PotentialSpec& spec, std::span<const double> t_list,
                             int n_replicas, rng::Stream noise, const IntegrateOptions& opt = {});

struct TimeAverageReport {
    std::vector<double> per_path;  // time averages of F along each path
    double mean = 0.0;
    double spread = 0.0;                // cross-path standard deviation
    double half_agreement = 0.0;        // |avg over [0,T/2] - avg over [T/2,T]|, path-averaged
};
// Ergodic averages (1/T) int F(t, X_t) dt, sampled on a coarse observation
// grid; the limit is estimated, not asserted.
TimeAverageReport time_average(const PotentialSpec& spec,
                               const std::function<double(double, double)>& f, double t_end,
                               int n_paths, rng::Stream noise, const IntegrateOptions& opt = {},
                               double obs_dt = 0.05);

}  // namespace renv
