#pragma once

// Exponent fitting, tail fitting, two-sample distribution comparison and
// bootstrap uncertainty shared by all experiments.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "perc/lattice.hpp"  // wilson_halfwidth, error types

namespace perc {

struct FitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FitResult {
    double slope = 0;
    double intercept = 0;
    double slope_lo = 0, slope_hi = 0;  // 95% bootstrap interval
    double r2 = 0;
    int n_points = 0;
    int n_excluded = 0;  // zero-probability points dropped with a warning
};

// One Monte Carlo tally per scale.
struct ProbPoint {
    double scale = 0;
    int64_t hits = 0;
    int64_t trials = 0;
};

// Weighted least squares of log(p) on log(scale) with delta-method weights
// n p / (1 - p); the slope CI comes from `n_boot` parametric bootstrap
// replicates of the binomial tallies.
FitResult loglog_fit(const std::vector<ProbPoint>& points, int n_boot = 1000, uint64_t seed = 0x10915);

enum class TailFamily { Exponential, Stretched };

// Fit of the empirical log-survival over the upper half of the sample range:
// against x for the exponential family, against x^beta with beta profiled on
// a grid for the stretched family.
struct TailFit {
    FitResult fit;      // regression of log S
    double beta = 1.0;  // profiled exponent (1.0 for exponential family)
    double decay = 0;   // -slope, the decay constant
};
TailFit tail_fit(const std::vector<double>& samples, TailFamily family, int n_boot = 400, uint64_t seed = 0x7a11);

// Exact two-sample Kolmogorov-Smirnov sup-distance by merge scan.
double ks_distance(const std::vector<double>& x, const std::vector<double>& y);

// Asymptotic two-sample critical value c(alpha) * sqrt((n+m)/(n m)) for
// alpha in {0.05, 0.01}.
double ks_critical_value(size_t n, size_t m, double alpha);

double mean_of(const std::vector<double>& v);
double variance_of(const std::vector<double>& v);  // unbiased

}  // namespace perc
