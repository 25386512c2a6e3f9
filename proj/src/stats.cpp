#include "rfim/stats.hpp"

#include <cmath>
#include <stdexcept>

namespace rfim {

Moments moments_of(const std::vector<double>& values) {
    Moments m;
    m.count = values.size();
    if (values.empty()) return m;
    double sum = 0.0;
    for (double v : values) sum += v;
    m.mean = sum / static_cast<double>(values.size());
    if (values.size() < 2) return m;
    double sq = 0.0;
    for (double v : values) sq += (v - m.mean) * (v - m.mean);
    m.variance = sq / (static_cast<double>(values.size()) - 1.0);
    m.std_error = std::sqrt(m.variance / static_cast<double>(values.size()));
    return m;
}

std::pair<double, double> wilson_interval(double successes, double trials, double z) {
    if (trials <= 0.0) throw std::invalid_argument("wilson_interval requires trials > 0");
    const double p = successes / trials;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / trials;
    const double center = (p + z2 / (2.0 * trials)) / denom;
    const double half =
        z * std::sqrt(p * (1.0 - p) / trials + z2 / (4.0 * trials * trials)) / denom;
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

LineFit weighted_line_fit(const std::vector<double>& x, const std::vector<double>& y,
                          const std::vector<double>& sigma) {
    if (x.size() != y.size() || x.size() != sigma.size() || x.size() < 2)
        throw std::invalid_argument("weighted_line_fit requires >= 2 matched points");
    double sw = 0.0, swx = 0.0, swy = 0.0, swxx = 0.0, swxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(sigma[i] > 0.0)) throw std::invalid_argument("weights require sigma > 0");
        const double w = 1.0 / (sigma[i] * sigma[i]);
        sw += w;
        swx += w * x[i];
        swy += w * y[i];
        swxx += w * x[i] * x[i];
        swxy += w * x[i] * y[i];
    }
    const double det = sw * swxx - swx * swx;
    if (det <= 0.0) throw std::invalid_argument("degenerate fit abscissae");
    LineFit fit;
    fit.points = x.size();
    fit.slope = (sw * swxy - swx * swy) / det;
    fit.intercept = (swxx * swy - swx * swxy) / det;
    fit.slope_se = std::sqrt(sw / det);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = (y[i] - fit.intercept - fit.slope * x[i]) / sigma[i];
        fit.chi2 += r * r;
    }
    return fit;
}

}  // namespace rfim
