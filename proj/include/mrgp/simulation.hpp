#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "mrgp/representations.hpp"
#include "mrgp/rng.hpp"

namespace mrgp {

/// Ornstein-Uhlenbeck parameters: dX = lambda (mu - X) dt + sigma dW.
struct OUParams {
    double lambda = 0.01;  // mean-reversion rate, 1/days
    double mu = 0.0;       // long-run mean, price units
    double sigma = 0.38;   // diffusion volatility, price units / sqrt(day)

    double stationary_variance() const { return sigma * sigma / (2.0 * lambda); }

    void validate() const {
        if (!(lambda > 0.0)) throw std::invalid_argument("OUParams: lambda > 0 required");
        if (!(sigma >= 0.0)) throw std::invalid_argument("OUParams: sigma >= 0 required");
    }
};

struct NoiseKind {
    enum class Tag { Gaussian, StudentT };
    Tag tag = Tag::Gaussian;
    double dof = 0.0;

    static NoiseKind gaussian() { return {Tag::Gaussian, 0.0}; }
    static NoiseKind student_t(double dof) {
        if (!(dof > 0.0)) throw std::invalid_argument("NoiseKind: dof > 0 required");
        return {Tag::StudentT, dof};
    }
};

/// Sine-plus-OU series generator: value at day k is
/// amplitude * sin(2 pi k / period) + OU_k.
struct SimSpec {
    double amplitude = 1.0;
    double period = 250.0;  // days per seasonal cycle
    OUParams ou;
    NoiseKind noise = NoiseKind::gaussian();
    int n_years = 10;
    int days_per_year = 250;
    std::uint64_t seed = 0;

    double deterministic_at(int t) const {
        return amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / period);
    }

    void validate() const {
        ou.validate();
        if (!(period > 0.0)) throw std::invalid_argument("SimSpec: period > 0 required");
        if (n_years < 1) throw std::invalid_argument("SimSpec: n_years >= 1 required");
        if (days_per_year < 2) throw std::invalid_argument("SimSpec: days_per_year >= 2 required");
        if (noise.tag == NoiseKind::Tag::StudentT && !(noise.dof > 0.0))
            throw std::invalid_argument("SimSpec: Student-t dof > 0 required");
    }
};

/// Exact OU transition over dt days (Gillespie's update, not an Euler step):
/// mu + (x - mu) e^{-lambda dt} + sigma sqrt((1 - e^{-2 lambda dt}) / (2 lambda)) z.
inline double ou_step_exact(double x, const OUParams& p, double dt, double z) {
    if (dt < 0.0) throw std::invalid_argument("ou_step_exact: dt >= 0 required");
    const double decay = std::exp(-p.lambda * dt);
    const double cond_sd = p.sigma * std::sqrt((1.0 - decay * decay) / (2.0 * p.lambda));
    return p.mu + (x - p.mu) * decay + cond_sd * z;
}

/// Unit-variance innovation (for dof > 2 the t draw is scaled by
/// sqrt((dof-2)/dof)). For dof <= 2 the raw t draw is returned; its variance
/// is undefined and that is the point of that regime.
inline double draw_innovation(const NoiseKind& noise, Rng& rng) {
    if (noise.tag == NoiseKind::Tag::Gaussian) return rng.normal();
    const double t = rng.student_t(noise.dof);
    if (noise.dof > 2.0) return t * std::sqrt((noise.dof - 2.0) / noise.dof);
    return t;
}

struct SimulatedSeries {
    SeriesGrid grid;
    double ou_final = 0.0;  // OU component at the last simulated day
};

/// One realization of the series. OU starts at its long-run mean; innovations
/// come from mt19937_64(spec.seed). `n_days` overrides the default
/// n_years * days_per_year length (used when the observation point falls
/// before the end of the final year).
inline SimulatedSeries simulate_series(const SimSpec& spec, int n_days = 0) {
    spec.validate();
    const int n = n_days > 0 ? n_days : spec.n_years * spec.days_per_year;
    if (n < 2) throw std::invalid_argument("simulate_series: need at least 2 days");

    SimulatedSeries out;
    out.grid.days_per_year = spec.days_per_year;
    out.grid.values.resize(static_cast<std::size_t>(n));

    Rng rng(spec.seed);
    double ou = spec.ou.mu;
    out.grid.values[0] = spec.deterministic_at(0) + ou;
    for (int k = 1; k < n; ++k) {
        ou = ou_step_exact(ou, spec.ou, 1.0, draw_innovation(spec.noise, rng));
        out.grid.values[static_cast<std::size_t>(k)] = spec.deterministic_at(k) + ou;
    }
    out.ou_final = ou;
    return out;
}

/// Read-only view of a series component for regime classification. `length`
/// bounds the valid index range; closed-form components are unbounded.
struct ComponentAccessor {
    std::function<double(int)> value;
    int length = std::numeric_limits<int>::max();
};

inline ComponentAccessor deterministic_accessor(const SimSpec& spec) {
    return {[spec](int t) { return spec.deterministic_at(t); },
            std::numeric_limits<int>::max()};
}

inline ComponentAccessor realized_accessor(const SeriesGrid& grid) {
    return {[&grid](int t) { return grid.values[static_cast<std::size_t>(t)]; }, grid.size()};
}

enum class RegimeSource { Deterministic, Realized };

inline RegimeSource regime_source_from_string(const std::string& s) {
    if (s == "deterministic") return RegimeSource::Deterministic;
    if (s == "realized") return RegimeSource::Realized;
    throw std::invalid_argument("unknown regime source '" + s +
                                "' (expected deterministic|realized)");
}

/// One-hot regime of day t based on the component's move over the next
/// `lookahead` days (truncated near the end of a bounded component):
///   (1,0,0) high and declining, (0,1,0) low and ascending, (0,0,1) neither.
inline Eigen::Vector3d regime_onehot(const ComponentAccessor& s, int t, int lookahead = 50,
                                     double level_ref = 0.0) {
    if (lookahead < 1) throw std::invalid_argument("regime_onehot: lookahead >= 1");
    const int look = std::min(lookahead, s.length - 1 - t);
    const double level = s.value(t);
    const double move = look >= 1 ? s.value(t + look) - level : 0.0;
    if (level > level_ref && move < 0.0) return {1.0, 0.0, 0.0};
    if (level < level_ref && move > 0.0) return {0.0, 1.0, 0.0};
    return {0.0, 0.0, 1.0};
}

/// The empirical ground truth: `n_paths` continuations from the observation
/// point, all starting from the same OU state.
struct TestDistribution {
    Eigen::MatrixXd paths;  // n_paths x horizon
    int t0 = 0;             // observation day (absolute)
    SimSpec spec;
};

/// Continue the deterministic component past t0 and restart the OU component
/// from `ou_state_at_t0` with fresh innovations. Path p uses
/// mt19937_64(spec.seed ^ splitmix64(p + 1)), so paths are independent of
/// scheduling order and reproducible individually.
inline TestDistribution simulate_test_paths(const SimSpec& spec, int t0, double ou_state_at_t0,
                                            int n_paths = 1000, int horizon = 50) {
    spec.validate();
    if (n_paths < 1) throw std::invalid_argument("simulate_test_paths: n_paths >= 1");
    if (horizon < 1) throw std::invalid_argument("simulate_test_paths: horizon >= 1");

    TestDistribution out;
    out.t0 = t0;
    out.spec = spec;
    out.paths.resize(n_paths, horizon);
    for (int p = 0; p < n_paths; ++p) {
        Rng rng(spec.seed ^ splitmix64(static_cast<std::uint64_t>(p) + 1));
        double ou = ou_state_at_t0;
        for (int h = 1; h <= horizon; ++h) {
            ou = ou_step_exact(ou, spec.ou, 1.0, draw_innovation(spec.noise, rng));
            out.paths(p, h - 1) = spec.deterministic_at(t0 + h) + ou;
        }
    }
    return out;
}

}  // namespace mrgp
