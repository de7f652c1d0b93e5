#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "mrgp/gp.hpp"

namespace mrgp {

/// AR(1) model y_t = c + phi y_{t-1} + eps, eps ~ N(0, sigma2). The paper's
/// comparison baseline; the discrete-time twin of the OU process
/// (phi = e^{-lambda}).
struct AR1Params {
    double phi = 0.0;
    double c = 0.0;
    double sigma2 = 1.0;
    bool nonstationary_clamped = false;  // |phi| hit 1 and was clamped

    double mu() const { return c / (1.0 - phi); }
    double stationary_variance() const { return sigma2 / (1.0 - phi * phi); }
};

/// Conditional (lag-regression) maximum likelihood. If the estimate leaves
/// the stationary region it is clamped to +-(1 - 1e-6) and flagged.
inline AR1Params fit_ar1_mle(const std::vector<double>& series) {
    const int n = static_cast<int>(series.size());
    if (n < 10) throw std::invalid_argument("fit_ar1_mle: need at least 10 observations");
    const auto [mn, mx] = std::minmax_element(series.begin(), series.end());
    if (*mn == *mx) throw std::invalid_argument("fit_ar1_mle: constant series");

    const int m = n - 1;  // regression rows
    double mx_lag = 0.0, my = 0.0;
    for (int t = 1; t < n; ++t) {
        mx_lag += series[static_cast<std::size_t>(t - 1)];
        my += series[static_cast<std::size_t>(t)];
    }
    mx_lag /= m;
    my /= m;

    double sxx = 0.0, sxy = 0.0;
    for (int t = 1; t < n; ++t) {
        const double dx = series[static_cast<std::size_t>(t - 1)] - mx_lag;
        sxx += dx * dx;
        sxy += dx * (series[static_cast<std::size_t>(t)] - my);
    }
    if (!(sxx > 0.0)) throw std::invalid_argument("fit_ar1_mle: degenerate lag regressor");

    AR1Params p;
    p.phi = sxy / sxx;
    if (std::abs(p.phi) >= 1.0) {
        p.phi = std::copysign(1.0 - 1e-6, p.phi);
        p.nonstationary_clamped = true;
    }
    p.c = my - p.phi * mx_lag;

    double sse = 0.0;
    for (int t = 1; t < n; ++t) {
        const double e =
            series[static_cast<std::size_t>(t)] - p.c - p.phi * series[static_cast<std::size_t>(t - 1)];
        sse += e * e;
    }
    p.sigma2 = std::max(sse / m, std::numeric_limits<double>::min());
    return p;
}

/// Closed-form multi-step forecast from level x0:
///   mean_h = mu + phi^h (x0 - mu),  std_h = sqrt(sigma2 (1 - phi^{2h}) / (1 - phi^2)).
inline ForecastDistribution ar1_forecast(const AR1Params& p, double x0, int horizon) {
    if (!(std::abs(p.phi) < 1.0))
        throw std::invalid_argument("ar1_forecast: |phi| < 1 required");
    if (horizon < 1) throw std::invalid_argument("ar1_forecast: horizon >= 1");

    const double mu = p.mu();
    ForecastDistribution fc;
    fc.horizons.resize(horizon);
    fc.mean.resize(horizon);
    fc.std.resize(horizon);
    double phi_h = 1.0;
    for (int h = 1; h <= horizon; ++h) {
        phi_h *= p.phi;
        fc.horizons[h - 1] = h;
        fc.mean[h - 1] = mu + phi_h * (x0 - mu);
        fc.std[h - 1] = std::sqrt(p.sigma2 * (1.0 - phi_h * phi_h) / (1.0 - p.phi * p.phi));
    }
    return fc;
}

}  // namespace mrgp
