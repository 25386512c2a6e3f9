#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace rfim {

struct Moments {
    double mean = 0.0;
    double variance = 0.0;   // unbiased
    double std_error = 0.0;  // of the mean
    std::size_t count = 0;
};

Moments moments_of(const std::vector<double>& values);

// Wilson score interval for a binomial proportion at z standard deviations.
std::pair<double, double> wilson_interval(double successes, double trials, double z = 3.0);

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = 0.0;
    double chi2 = 0.0;  // weighted sum of squared residuals
    std::size_t points = 0;
};

// Weighted least squares y = a + b x with per-point standard deviations.
LineFit weighted_line_fit(const std::vector<double>& x, const std::vector<double>& y,
                          const std::vector<double>& sigma);

}  // namespace rfim
