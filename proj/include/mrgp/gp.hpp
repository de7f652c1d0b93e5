#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mrgp/kernels.hpp"
#include "mrgp/rng.hpp"

namespace mrgp {

/// Semantic label of a design-matrix column.
enum class DimRole { Year, Day, Feature, Delta, Time };

struct TrainingSet {
    Eigen::MatrixXd X;               // n x d, one sample per row
    Eigen::VectorXd y;               // n targets (price units)
    std::vector<DimRole> dim_roles;  // size d
    std::vector<bool> categorical;   // per-column one-hot flag (empty = none)

    Eigen::Index n() const { return X.rows(); }
    Eigen::Index d() const { return X.cols(); }

    std::vector<bool> categorical_mask() const {
        return categorical.empty()
                   ? std::vector<bool>(static_cast<std::size_t>(d()), false)
                   : categorical;
    }

    void validate() const {
        if (n() < 2) throw std::invalid_argument("TrainingSet: need at least 2 samples");
        if (!X.allFinite() || !y.allFinite())
            throw std::invalid_argument("TrainingSet: non-finite entries");
        if (y.size() != n()) throw std::invalid_argument("TrainingSet: |y| != rows(X)");
        if (static_cast<Eigen::Index>(dim_roles.size()) != d())
            throw std::invalid_argument("TrainingSet: dim_roles size mismatch");
        if (!categorical.empty() && static_cast<Eigen::Index>(categorical.size()) != d())
            throw std::invalid_argument("TrainingSet: categorical mask size mismatch");
    }
};

/// Per-horizon predictive mean and standard deviation.
struct ForecastDistribution {
    Eigen::VectorXd horizons;  // target times, days
    Eigen::VectorXd mean;      // price units
    Eigen::VectorXd std;       // price units, >= 0
};

class FitError : public std::runtime_error {
  public:
    explicit FitError(const std::string& what) : std::runtime_error(what) {}
};

/// Exact GP regression state: Cholesky factor of K + sigma_n^2 I (plus any
/// jitter the factorization needed) and the weight vector for prediction.
/// Targets are centered internally; `y_center` is re-added at predict time.
struct TrainedGP {
    TrainingSet train;
    KernelSpec spec;
    Eigen::MatrixXd chol;     // lower-triangular L, L L^T = K + sigma_n^2 I + jitter I
    Eigen::VectorXd weights;  // (K + sigma_n^2 I)^-1 (y - y_center)
    double y_center = 0.0;
    double lml = 0.0;         // log marginal likelihood of the centered targets
    double jitter = 0.0;      // diagonal jitter actually applied
};

namespace detail {

inline std::string describe_hyper(const KernelSpec& spec) {
    std::ostringstream os;
    os << "family=" << to_string(spec.family)
       << " log_sf2=" << spec.hyper.log_signal_variance << " log_ls=[";
    for (int d = 0; d < spec.dims(); ++d)
        os << (d ? "," : "") << spec.hyper.log_length_scales[d];
    os << "] log_sn2=" << spec.hyper.log_noise_variance;
    if (spec.family == KernelFamily::RationalQuadratic)
        os << " log_alpha=" << spec.hyper.log_alpha;
    return os.str();
}

}  // namespace detail

/// Exact fit via Cholesky of the regularized kernel matrix. On a failed
/// factorization, diagonal jitter starting at 1e-10 * mean(diag) escalates
/// by factors of 10 up to 1e-4 * mean(diag) before giving up.
inline TrainedGP fit(const TrainingSet& ts, const KernelSpec& spec) {
    ts.validate();
    spec.validate();
    if (ts.d() != spec.dims())
        throw std::invalid_argument("fit: training dimensionality does not match kernel spec");
    const double sn2 = spec.hyper.noise_variance();
    if (!(sn2 > 0.0)) throw std::invalid_argument("fit: noise variance must be positive");

    const Eigen::Index n = ts.n();
    const Eigen::MatrixXd K = kernel_matrix(spec, ts.X);
    const double mean_diag = K.diagonal().mean() + sn2;

    Eigen::LLT<Eigen::MatrixXd> llt;
    double jitter = 0.0;
    bool ok = false;
    for (double scale = 0.0; scale <= 1e-4; scale = (scale == 0.0 ? 1e-10 : scale * 10.0)) {
        jitter = scale * mean_diag;
        Eigen::MatrixXd Kt = K;
        Kt.diagonal().array() += sn2 + jitter;
        llt.compute(Kt);
        if (llt.info() == Eigen::Success) {
            ok = true;
            break;
        }
        if (scale == 1e-4) break;
    }
    if (!ok)
        throw FitError("fit: Cholesky failed after jitter escalation (" +
                       detail::describe_hyper(spec) + ")");

    TrainedGP gp;
    gp.y_center = ts.y.mean();
    const Eigen::VectorXd r = ts.y.array() - gp.y_center;
    gp.weights = llt.solve(r);
    gp.chol = llt.matrixL();
    gp.lml = -0.5 * r.dot(gp.weights) - gp.chol.diagonal().array().log().sum() -
             0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
    gp.jitter = jitter;
    gp.train = ts;
    gp.spec = spec;
    return gp;
}

/// Gradient of the log marginal likelihood with respect to every log
/// hyperparameter: kernel parameters first (same order as
/// kernel_matrix_grad), log sigma_n^2 last. Entry p is
/// 0.5 tr((a a^T - Kinv) dK/dtheta_p) with a the weight vector.
inline Eigen::VectorXd log_marginal_likelihood_grad(const TrainedGP& gp) {
    const Eigen::Index n = gp.train.n();
    const int P = gp.spec.n_kernel_params();

    Eigen::MatrixXd Kinv = Eigen::MatrixXd::Identity(n, n);
    gp.chol.triangularView<Eigen::Lower>().solveInPlace(Kinv);
    gp.chol.transpose().triangularView<Eigen::Upper>().solveInPlace(Kinv);

    Eigen::VectorXd grad = Eigen::VectorXd::Zero(P + 1);
    std::vector<double> buf(static_cast<std::size_t>(P));
    const Eigen::VectorXd& a = gp.weights;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i; j < n; ++j) {
            detail::kernel_grad_pair(gp.spec, gp.train.X.row(i), gp.train.X.row(j), buf.data());
            const double w = (a[i] * a[j] - Kinv(i, j)) * (i == j ? 0.5 : 1.0);
            for (int p = 0; p < P; ++p) grad[p] += w * buf[static_cast<std::size_t>(p)];
        }
    }
    const double sn2 = gp.spec.hyper.noise_variance();
    grad[P] = 0.5 * sn2 * (a.squaredNorm() - Kinv.trace());
    return grad;
}

struct GpPrediction {
    Eigen::VectorXd mean;
    Eigen::VectorXd std;
    Eigen::MatrixXd cov;  // filled only when full covariance was requested
    bool has_cov = false;
};

/// Posterior prediction at the rows of Xstar. By default the variance is the
/// latent-function variance; `observation_level` adds sigma_n^2 so the
/// distribution describes noisy observations. Variances are floored at zero
/// before the square root.
inline GpPrediction predict(const TrainedGP& gp, const Eigen::MatrixXd& Xstar,
                            bool full_cov = false, bool observation_level = false) {
    if (Xstar.cols() != gp.spec.dims())
        throw std::invalid_argument("predict: query dimensionality mismatch");
    const Eigen::Index n = gp.train.n();
    const Eigen::Index m = Xstar.rows();
    const double sn2 = gp.spec.hyper.noise_variance();
    const double sf2 = gp.spec.hyper.signal_variance();

    Eigen::MatrixXd Kstar(n, m);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < m; ++j)
            Kstar(i, j) = eval_kernel(gp.spec, gp.train.X.row(i), Xstar.row(j));

    GpPrediction out;
    out.mean = (Kstar.transpose() * gp.weights).array() + gp.y_center;

    Eigen::MatrixXd V = Kstar;
    gp.chol.triangularView<Eigen::Lower>().solveInPlace(V);  // V = L^-1 K*

    out.std.resize(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        double var = sf2 - V.col(j).squaredNorm();
        if (var < 0.0) var = 0.0;
        if (observation_level) var += sn2;
        out.std[j] = std::sqrt(var);
    }

    if (full_cov) {
        Eigen::MatrixXd Kss(m, m);
        for (Eigen::Index i = 0; i < m; ++i)
            for (Eigen::Index j = i; j < m; ++j) {
                const double v = eval_kernel(gp.spec, Xstar.row(i), Xstar.row(j));
                Kss(i, j) = v;
                Kss(j, i) = v;
            }
        out.cov = Kss - V.transpose() * V;
        if (observation_level) out.cov.diagonal().array() += sn2;
        out.has_cov = true;
    }
    return out;
}

/// Scale-aware hyperparameter draw for optimizer restarts: per-dimension
/// length scales uniform in log over [0.1, 2] x the dimension's span,
/// sigma_f^2 over [0.1, 10] x var(y), sigma_n^2 over [1e-4, 1] x var(y),
/// the RQ alpha over [0.1, 10]. Draw order is fixed: length scales by
/// dimension, then signal variance, then alpha (RQ only), then noise.
inline HyperParams draw_initial_hyper(const TrainingSet& ts, const KernelSpec& spec, Rng& rng) {
    const auto uniform_log = [&rng](double lo, double hi) {
        return std::log(lo) + rng.uniform() * (std::log(hi) - std::log(lo));
    };
    const double vy = std::max((ts.y.array() - ts.y.mean()).square().mean(), 1e-12);

    HyperParams h;
    h.log_length_scales.resize(ts.d());
    for (Eigen::Index d = 0; d < ts.d(); ++d) {
        double span = ts.X.col(d).maxCoeff() - ts.X.col(d).minCoeff();
        if (!(span > 0.0)) span = 1.0;
        h.log_length_scales[d] = uniform_log(0.1 * span, 2.0 * span);
    }
    h.log_signal_variance = uniform_log(0.1 * vy, 10.0 * vy);
    if (spec.family == KernelFamily::RationalQuadratic) h.log_alpha = uniform_log(0.1, 10.0);
    h.log_noise_variance = uniform_log(1e-4 * vy, vy);
    return h;
}

/// Deterministic midpoint of the draw_initial_hyper ranges (geometric mean
/// of each interval); the warm start used by restart 0.
inline HyperParams scale_aware_hyper(const TrainingSet& ts) {
    const double vy = std::max((ts.y.array() - ts.y.mean()).square().mean(), 1e-12);
    HyperParams h;
    h.log_length_scales.resize(ts.d());
    for (Eigen::Index d = 0; d < ts.d(); ++d) {
        double span = ts.X.col(d).maxCoeff() - ts.X.col(d).minCoeff();
        if (!(span > 0.0)) span = 1.0;
        h.log_length_scales[d] = std::log(span) + 0.5 * (std::log(0.1) + std::log(2.0));
    }
    h.log_signal_variance = std::log(vy);
    h.log_alpha = 0.0;
    h.log_noise_variance = std::log(1e-2 * vy);
    return h;
}

struct OptimizeOptions {
    int max_iterations = 200;
    double grad_tolerance = 1e-5;  // infinity norm
    double length_scale_upper_bound = std::numeric_limits<double>::infinity();
    int lbfgs_memory = 8;
};

namespace detail {

/// theta = [log sigma_f^2, log l_0 .. log l_{d-1}, (log alpha), log sigma_n^2]
inline Eigen::VectorXd pack_theta(const KernelSpec& spec) {
    const int D = spec.dims();
    Eigen::VectorXd t(spec.n_kernel_params() + 1);
    t[0] = spec.hyper.log_signal_variance;
    t.segment(1, D) = spec.hyper.log_length_scales;
    if (spec.family == KernelFamily::RationalQuadratic) t[1 + D] = spec.hyper.log_alpha;
    t[t.size() - 1] = spec.hyper.log_noise_variance;
    return t;
}

inline void unpack_theta(const Eigen::VectorXd& t, KernelSpec& spec) {
    const int D = spec.dims();
    spec.hyper.log_signal_variance = t[0];
    spec.hyper.log_length_scales = t.segment(1, D);
    if (spec.family == KernelFamily::RationalQuadratic) spec.hyper.log_alpha = t[1 + D];
    spec.hyper.log_noise_variance = t[t.size() - 1];
}

struct LmlPoint {
    bool ok = false;
    double lml = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd grad;
};

inline LmlPoint eval_lml(const TrainingSet& ts, KernelSpec spec, const Eigen::VectorXd& theta) {
    unpack_theta(theta, spec);
    LmlPoint p;
    try {
        const TrainedGP gp = fit(ts, spec);
        p.lml = gp.lml;
        p.grad = log_marginal_likelihood_grad(gp);
        p.ok = true;
    } catch (const FitError&) {
    }
    return p;
}

/// L-BFGS ascent on the log marginal likelihood with Armijo backtracking.
/// Accepted steps are monotone non-decreasing in lml; terminates when the
/// gradient infinity norm falls below tolerance, when no improving step
/// exists at line-search resolution, or after max_iterations.
inline std::optional<std::pair<double, Eigen::VectorXd>> lbfgs_maximize(
    const TrainingSet& ts, const KernelSpec& spec, Eigen::VectorXd theta,
    const OptimizeOptions& opts) {
    const int D = spec.dims();
    const auto clamp = [&](Eigen::VectorXd t) {
        for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = std::clamp(t[i], -46.0, 46.0);
        if (std::isfinite(opts.length_scale_upper_bound)) {
            const double ub = std::log(opts.length_scale_upper_bound);
            for (int d = 0; d < D; ++d) t[1 + d] = std::min(t[1 + d], ub);
        }
        return t;
    };

    theta = clamp(theta);
    LmlPoint cur = eval_lml(ts, spec, theta);
    if (!cur.ok) return std::nullopt;

    std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> hist;  // (s, y)
    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        const Eigen::VectorXd g = -cur.grad;  // gradient of f = -lml
        if (cur.grad.lpNorm<Eigen::Infinity>() < opts.grad_tolerance) break;

        // Two-loop recursion for d = -H g.
        Eigen::VectorXd d = -g;
        if (!hist.empty()) {
            std::vector<double> alpha_i(hist.size());
            Eigen::VectorXd q = g;
            for (std::size_t k = hist.size(); k-- > 0;) {
                const auto& [s, yv] = hist[k];
                alpha_i[k] = s.dot(q) / yv.dot(s);
                q -= alpha_i[k] * yv;
            }
            const auto& [s_last, y_last] = hist.back();
            q *= s_last.dot(y_last) / y_last.squaredNorm();
            for (std::size_t k = 0; k < hist.size(); ++k) {
                const auto& [s, yv] = hist[k];
                q += s * (alpha_i[k] - yv.dot(q) / yv.dot(s));
            }
            d = -q;
            if (!(g.dot(d) < -1e-12 * g.norm() * d.norm())) {  // not a descent direction
                d = -g;
                hist.clear();
            }
        }

        double step = hist.empty() ? std::min(1.0, 1.0 / std::max(1.0, g.lpNorm<Eigen::Infinity>()))
                                   : 1.0;
        bool accepted = false;
        for (int k = 0; k < 50; ++k, step *= 0.5) {
            const Eigen::VectorXd cand = clamp(theta + step * d);
            const Eigen::VectorXd delta = cand - theta;
            if (delta.lpNorm<Eigen::Infinity>() < 1e-15) break;
            const LmlPoint next = eval_lml(ts, spec, cand);
            if (!next.ok) continue;
            // Armijo on f = -lml with the clamped displacement.
            if (-next.lml <= -cur.lml + 1e-4 * g.dot(delta)) {
                const Eigen::VectorXd yv = (-next.grad) - g;
                if (delta.dot(yv) > 1e-10 * delta.norm() * yv.norm()) {
                    hist.emplace_back(delta, yv);
                    if (static_cast<int>(hist.size()) > opts.lbfgs_memory) hist.pop_front();
                }
                theta = cand;
                cur = next;
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
    }
    return std::make_pair(cur.lml, theta);
}

}  // namespace detail

/// Multi-restart hyperparameter optimization. Restart 0 starts from the
/// hyperparameters carried by `spec`; restarts 1..R-1 draw starting points
/// via draw_initial_hyper with engines seeded seed + restart index. Returns
/// the fit with the highest lml (ties broken by lowest restart index).
/// Deterministic given (ts, spec, restarts, seed).
inline TrainedGP optimize_hyperparams(const TrainingSet& ts, const KernelSpec& spec,
                                      int restarts, std::uint64_t seed,
                                      const OptimizeOptions& opts = {}) {
    if (restarts < 1) throw std::invalid_argument("optimize_hyperparams: restarts >= 1 required");
    ts.validate();
    spec.validate();

    std::optional<std::pair<double, Eigen::VectorXd>> best;
    for (int r = 0; r < restarts; ++r) {
        KernelSpec start = spec;
        if (r > 0) {
            Rng rng(seed + static_cast<std::uint64_t>(r));
            start.hyper = draw_initial_hyper(ts, spec, rng);
        }
        auto res = detail::lbfgs_maximize(ts, spec, detail::pack_theta(start), opts);
        if (res && (!best || res->first > best->first)) best = res;
    }
    if (!best)
        throw FitError("optimize_hyperparams: every restart failed the Cholesky factorization");

    KernelSpec final_spec = spec;
    detail::unpack_theta(best->second, final_spec);
    return fit(ts, final_spec);
}

}  // namespace mrgp
