#pragma once

#include <functional>
#include <span>
#include <vector>

namespace renv::stats {

double normal_cdf(double x, double mean = 0.0, double sd = 1.0);
double normal_pdf(double x, double mean = 0.0, double sd = 1.0);

// Asymptotic Kolmogorov survival function Q(lambda) = 2 sum (-1)^{k-1} e^{-2k^2 lambda^2}.
double kolmogorov_q(double lambda);

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

// One-sample test against an analytic cdf.
KsResult ks_one_sample(std::vector<double> sample, const std::function<double(double)>& cdf);
// Two-sample test; asymptotic p-value on the pooled effective size.
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

double mean(std::span<const double> v);
double variance(std::span<const double> v);  // unbiased
double stderr_of_mean(std::span<const double> v);

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double residual_rms = 0.0;
};
LineFit least_squares(std::span<const double> x, std::span<const double> y);

// Drops NaNs (escaped replicas) from a sample buffer.
std::vector<double> finite_values(std::span<const double> v);

}  // namespace renv::stats
