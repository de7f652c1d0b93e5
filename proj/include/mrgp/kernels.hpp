#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace mrgp {

/// Stationary covariance families. OU is the exponential (Matern-1/2)
/// kernel, the covariance of a stationary Ornstein-Uhlenbeck process.
enum class KernelFamily { SquaredExponential, OU, Matern32, RationalQuadratic };

inline std::string to_string(KernelFamily f) {
    switch (f) {
        case KernelFamily::SquaredExponential: return "rbf";
        case KernelFamily::OU: return "ou";
        case KernelFamily::Matern32: return "matern32";
        case KernelFamily::RationalQuadratic: return "rq";
    }
    return "?";
}

inline KernelFamily kernel_family_from_string(const std::string& s) {
    if (s == "rbf") return KernelFamily::SquaredExponential;
    if (s == "ou") return KernelFamily::OU;
    if (s == "matern32") return KernelFamily::Matern32;
    if (s == "rq") return KernelFamily::RationalQuadratic;
    throw std::invalid_argument("unknown kernel family '" + s +
                                "' (expected rbf|ou|matern32|rq)");
}

/// All hyperparameters live in log space so positivity never needs a
/// constraint. One length-scale per input dimension (ARD).
struct HyperParams {
    double log_signal_variance = 0.0;      // log sigma_f^2
    Eigen::VectorXd log_length_scales;     // log l_d, one per input dimension
    double log_alpha = 0.0;                // log of the RQ shape exponent
    double log_noise_variance = std::log(1e-2);  // log sigma_n^2

    double signal_variance() const { return std::exp(log_signal_variance); }
    double noise_variance() const { return std::exp(log_noise_variance); }
    double alpha() const { return std::exp(log_alpha); }
    double length_scale(int d) const { return std::exp(log_length_scales[d]); }
};

/// A kernel over inputs whose dimensions split into continuous coordinates
/// and one-hot (categorical) indicator coordinates. The continuous block is
/// covered by the chosen family with ARD scaling; the categorical block
/// always gets a squared-exponential ARD factor. The two factors multiply
/// and share a single signal variance, so k(x, x) == sigma_f^2.
struct KernelSpec {
    KernelFamily family = KernelFamily::SquaredExponential;
    int continuous_dims = 0;
    int categorical_dims = 0;
    std::vector<bool> categorical;  // per-dimension flag, size == dims()
    HyperParams hyper;

    KernelSpec() = default;

    /// Categorical dimensions (if any) occupy the trailing positions.
    KernelSpec(KernelFamily fam, int n_continuous, int n_categorical,
               HyperParams h)
        : family(fam),
          continuous_dims(n_continuous),
          categorical_dims(n_categorical),
          categorical(static_cast<std::size_t>(n_continuous + n_categorical), false),
          hyper(std::move(h)) {
        for (int d = n_continuous; d < n_continuous + n_categorical; ++d)
            categorical[static_cast<std::size_t>(d)] = true;
    }

    /// Explicit placement of categorical dimensions (one-hot columns may sit
    /// anywhere in the design matrix).
    KernelSpec(KernelFamily fam, std::vector<bool> categorical_mask, HyperParams h)
        : family(fam), categorical(std::move(categorical_mask)), hyper(std::move(h)) {
        for (bool c : categorical) (c ? categorical_dims : continuous_dims)++;
    }

    int dims() const { return continuous_dims + categorical_dims; }

    /// Number of kernel log-hyperparameters, excluding the noise variance:
    /// [log sigma_f^2, log l_0 .. log l_{d-1}, log alpha (RQ only)].
    int n_kernel_params() const {
        return 1 + dims() + (family == KernelFamily::RationalQuadratic ? 1 : 0);
    }

    void validate() const {
        if (continuous_dims < 1)
            throw std::invalid_argument("KernelSpec: need at least one continuous dimension");
        if (categorical_dims < 0 || static_cast<int>(categorical.size()) != dims())
            throw std::invalid_argument("KernelSpec: categorical mask size mismatch");
        if (hyper.log_length_scales.size() != dims())
            throw std::invalid_argument("KernelSpec: need one length-scale per input dimension");
        if (!std::isfinite(hyper.log_signal_variance) ||
            !std::isfinite(hyper.log_noise_variance) ||
            !std::isfinite(hyper.log_alpha) ||
            !hyper.log_length_scales.allFinite())
            throw std::invalid_argument("KernelSpec: non-finite hyperparameter");
    }
};

namespace detail {

/// Unit-amplitude value of the continuous-block family at scaled squared
/// distance r2 = sum_d (dx_d / l_d)^2.
inline double continuous_factor(KernelFamily family, double alpha, double r2) {
    switch (family) {
        case KernelFamily::SquaredExponential:
            return std::exp(-0.5 * r2);
        case KernelFamily::OU:
            return std::exp(-std::sqrt(r2));
        case KernelFamily::Matern32: {
            const double s = std::sqrt(3.0 * r2);
            return (1.0 + s) * std::exp(-s);
        }
        case KernelFamily::RationalQuadratic:
            // (1 + r2/(2a))^(-a), via log1p for large a.
            return std::exp(-alpha * std::log1p(r2 / (2.0 * alpha)));
    }
    return 0.0;
}

}  // namespace detail

/// k(x1, x2) for the composed kernel. Preconditions: both inputs carry
/// spec.dims() entries and the spec validates.
inline double eval_kernel(const KernelSpec& spec, const Eigen::VectorXd& x1,
                          const Eigen::VectorXd& x2) {
    if (x1.size() != spec.dims() || x2.size() != spec.dims())
        throw std::invalid_argument("eval_kernel: input dimension mismatch");
    spec.validate();

    double r2_cont = 0.0, r2_cat = 0.0;
    for (int d = 0; d < spec.dims(); ++d) {
        const double dx = x1[d] - x2[d];
        const double l = spec.hyper.length_scale(d);
        const double u = (dx * dx) / (l * l);
        (spec.categorical[static_cast<std::size_t>(d)] ? r2_cat : r2_cont) += u;
    }
    const double base = detail::continuous_factor(spec.family, spec.hyper.alpha(), r2_cont);
    const double cat = std::exp(-0.5 * r2_cat);
    return spec.hyper.signal_variance() * base * cat;
}

/// Gram matrix of the rows of X. Symmetric by construction; diagonal entries
/// equal sigma_f^2 exactly.
inline Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, const Eigen::MatrixXd& X) {
    if (X.rows() < 1) throw std::invalid_argument("kernel_matrix: empty design matrix");
    spec.validate();
    const Eigen::Index n = X.rows();
    Eigen::MatrixXd K(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i; j < n; ++j) {
            const double v = eval_kernel(spec, X.row(i), X.row(j));
            K(i, j) = v;
            K(j, i) = v;
        }
    }
    return K;
}

namespace detail {

/// Per-pair partial derivatives of k(x1, x2) with respect to every kernel
/// log-hyperparameter, written into `out` (size spec.n_kernel_params()) in
/// the order [log sigma_f^2, log l_0 .. log l_{d-1}, log alpha (RQ)].
inline void kernel_grad_pair(const KernelSpec& spec, const Eigen::VectorXd& x1,
                             const Eigen::VectorXd& x2, double* out) {
    const int D = spec.dims();
    const double alpha = spec.hyper.alpha();
    const double sf2 = spec.hyper.signal_variance();

    double r2_cont = 0.0, r2_cat = 0.0;
    // u_d = (dx_d / l_d)^2 for each dimension.
    Eigen::VectorXd u(D);
    for (int d = 0; d < D; ++d) {
        const double dx = x1[d] - x2[d];
        const double l = spec.hyper.length_scale(d);
        u[d] = (dx * dx) / (l * l);
        (spec.categorical[static_cast<std::size_t>(d)] ? r2_cat : r2_cont) += u[d];
    }
    const double base = continuous_factor(spec.family, alpha, r2_cont);
    const double cat = std::exp(-0.5 * r2_cat);
    const double k = sf2 * base * cat;

    out[0] = k;  // d k / d log sigma_f^2

    // dbase/dlog l_d for continuous dimensions, as a multiple of u_d.
    for (int d = 0; d < D; ++d) {
        if (spec.categorical[static_cast<std::size_t>(d)]) {
            out[1 + d] = k * u[d];  // SE factor on the one-hot block
            continue;
        }
        double dbase;
        switch (spec.family) {
            case KernelFamily::SquaredExponential:
                dbase = base * u[d];
                break;
            case KernelFamily::OU: {
                const double r = std::sqrt(r2_cont);
                dbase = r > 0.0 ? base * u[d] / r : 0.0;
                break;
            }
            case KernelFamily::Matern32:
                dbase = 3.0 * u[d] * std::exp(-std::sqrt(3.0 * r2_cont));
                break;
            case KernelFamily::RationalQuadratic:
                dbase = u[d] * std::exp(-(alpha + 1.0) * std::log1p(r2_cont / (2.0 * alpha)));
                break;
            default:
                dbase = 0.0;
        }
        out[1 + d] = sf2 * cat * dbase;
    }

    if (spec.family == KernelFamily::RationalQuadratic) {
        const double s = r2_cont / (2.0 * alpha);
        out[1 + D] = k * alpha * (-std::log1p(s) + s / (1.0 + s));
    }
}

}  // namespace detail

/// dK/dtheta_p for every kernel log-hyperparameter, same order as
/// kernel_grad_pair. Each matrix is symmetric.
inline std::vector<Eigen::MatrixXd> kernel_matrix_grad(const KernelSpec& spec,
                                                       const Eigen::MatrixXd& X) {
    spec.validate();
    const Eigen::Index n = X.rows();
    const int P = spec.n_kernel_params();
    std::vector<Eigen::MatrixXd> grads(static_cast<std::size_t>(P), Eigen::MatrixXd(n, n));
    std::vector<double> buf(static_cast<std::size_t>(P));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i; j < n; ++j) {
            detail::kernel_grad_pair(spec, X.row(i), X.row(j), buf.data());
            for (int p = 0; p < P; ++p) {
                grads[static_cast<std::size_t>(p)](i, j) = buf[static_cast<std::size_t>(p)];
                grads[static_cast<std::size_t>(p)](j, i) = buf[static_cast<std::size_t>(p)];
            }
        }
    }
    return grads;
}

}  // namespace mrgp
