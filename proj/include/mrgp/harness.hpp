#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "mrgp/ar1.hpp"
#include "mrgp/gp.hpp"
#include "mrgp/kernels.hpp"
#include "mrgp/representations.hpp"
#include "mrgp/rng.hpp"
#include "mrgp/simulation.hpp"

namespace mrgp {

/// Everything one experiment trial needs: the simulator settings plus the
/// model grid (representations x kernels), forecast horizons, Monte-Carlo
/// sizes and the sampling knobs.
struct TrialConfig {
    SimSpec sim;
    std::vector<RepresentationKind> representations = {
        RepresentationKind::OneDim, RepresentationKind::Functional,
        RepresentationKind::Augmented1D, RepresentationKind::FunctionalAugmented};
    std::vector<KernelFamily> kernels = {KernelFamily::RationalQuadratic};
    std::vector<int> horizons = {10, 20, 30};
    int forecast_horizon = 50;
    int n_test_paths = 1000;
    int n_trials = 10;
    int restarts = 5;
    int subsample_budget = 500;
    int max_delta = 50;
    std::vector<int> start_offsets;  // empty: n_trials evenly spaced phases of the final year
    RegimeSource regime_source = RegimeSource::Deterministic;
    SubsamplePolicy subsample_policy = SubsamplePolicy::Strided;
    double length_scale_upper_bound = std::numeric_limits<double>::infinity();
    std::uint64_t master_seed = 1;
    int jobs = 0;  // parallel trials; 0 = hardware concurrency
    bool dump_forecasts = false;

    void validate() const {
        sim.validate();
        if (representations.empty()) throw std::invalid_argument("TrialConfig: no representations");
        if (kernels.empty()) throw std::invalid_argument("TrialConfig: no kernels");
        if (horizons.empty()) throw std::invalid_argument("TrialConfig: no horizons");
        if (forecast_horizon < 1) throw std::invalid_argument("TrialConfig: forecast_horizon >= 1");
        for (int h : horizons)
            if (h < 1 || h > forecast_horizon)
                throw std::invalid_argument(
                    "TrialConfig: every horizon must lie in [1, forecast_horizon] "
                    "(keys horizons, forecast_horizon)");
        if (n_test_paths < 1) throw std::invalid_argument("TrialConfig: n_test_paths >= 1");
        if (n_trials < 1) throw std::invalid_argument("TrialConfig: n_trials >= 1");
        if (restarts < 1) throw std::invalid_argument("TrialConfig: restarts >= 1");
        if (subsample_budget < 1) throw std::invalid_argument("TrialConfig: subsample_budget >= 1");
        if (max_delta < 1) throw std::invalid_argument("TrialConfig: max_delta >= 1");
        for (int o : start_offsets)
            if (o < 0 || o >= sim.days_per_year)
                throw std::invalid_argument("TrialConfig: start offsets must lie within a year");
    }
};

/// Identity of one model cell: AR(1), or a GP given by (representation, kernel).
struct ModelKey {
    bool is_ar1 = false;
    RepresentationKind representation = RepresentationKind::OneDim;
    KernelFamily kernel = KernelFamily::RationalQuadratic;

    static ModelKey ar1() { return {true, RepresentationKind::OneDim, KernelFamily::OU}; }
    static ModelKey gp(RepresentationKind r, KernelFamily k) { return {false, r, k}; }

    std::string model_label() const { return is_ar1 ? "ar1" : "gp"; }
    std::string representation_label() const { return is_ar1 ? "-" : to_string(representation); }
    std::string kernel_label() const { return is_ar1 ? "-" : to_string(kernel); }

    std::tuple<std::string, std::string, std::string> sort_key() const {
        return {model_label(), representation_label(), kernel_label()};
    }
    bool operator==(const ModelKey& o) const { return sort_key() == o.sort_key(); }
};

struct ModelMetrics {
    std::vector<double> mse_primary;    // (pred mean - empirical mean)^2, per horizon
    std::vector<double> mse_secondary;  // mean over paths of (pred mean - path)^2
    double trajectory_mse = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> std_abs_err;    // |pred std - empirical std|, per horizon
    double coverage_2sigma = std::numeric_limits<double>::quiet_NaN();
    bool diverged = false;
    bool fit_failed = false;
    double lml = std::numeric_limits<double>::quiet_NaN();
    Eigen::VectorXd hyper;  // packed log hyperparameters (GP models)
};

struct ModelForecast {
    ModelKey key;
    ForecastDistribution forecast;
    bool beyond_trained_delta = false;
};

struct TrialResult {
    int trial_index = 0;
    int t0 = 0;  // observation day (absolute index into the training grid)
    std::vector<std::pair<ModelKey, ModelMetrics>> models;  // sorted by ModelKey
};

/// Raw per-trial material (training grid, test paths, per-model forecasts)
/// for dump files and recomputation checks.
struct TrialArtifacts {
    SeriesGrid train_grid;
    TestDistribution paths;
    std::vector<ModelForecast> forecasts;
};

struct HorizonMse {
    double primary = 0.0;
    double secondary = 0.0;
};

/// Primary metric: squared distance between the predicted mean and the
/// empirical mean of the test distribution at one horizon. The secondary,
/// path-averaged variant differs from it by exactly the empirical path
/// variance.
inline HorizonMse mse_at_horizon(double pred_mean, const Eigen::VectorXd& paths_at_h) {
    if (paths_at_h.size() < 1) throw std::invalid_argument("mse_at_horizon: no paths");
    const double em = paths_at_h.mean();
    HorizonMse m;
    m.primary = (pred_mean - em) * (pred_mean - em);
    m.secondary = (paths_at_h.array() - pred_mean).square().mean();
    return m;
}

/// Mean of the primary horizon MSE over h = 1..|pred_mean|.
inline double trajectory_mse(const Eigen::VectorXd& pred_mean, const TestDistribution& td) {
    const Eigen::Index H = pred_mean.size();
    if (H < 1 || H > td.paths.cols())
        throw std::invalid_argument("trajectory_mse: horizon exceeds path width");
    double acc = 0.0;
    for (Eigen::Index h = 0; h < H; ++h)
        acc += mse_at_horizon(pred_mean[h], td.paths.col(h)).primary;
    return acc / static_cast<double>(H);
}

struct StdMetrics {
    std::vector<double> std_abs_err;
    double coverage_2sigma = 0.0;
};

/// |predicted std - empirical std| at the requested horizons plus the 2-sigma
/// coverage: the fraction of all (path, h) points inside pred_mean +- 2 pred_std
/// over the forecast trajectory. Empirical std uses the 1/n convention.
inline StdMetrics std_metrics(const Eigen::VectorXd& pred_mean, const Eigen::VectorXd& pred_std,
                              const TestDistribution& td, const std::vector<int>& horizons) {
    const Eigen::Index H = pred_std.size();
    if (H < 1 || H > td.paths.cols() || pred_mean.size() != H)
        throw std::invalid_argument("std_metrics: size mismatch");
    StdMetrics out;
    for (int h : horizons) {
        if (h < 1 || h > H) throw std::invalid_argument("std_metrics: horizon out of range");
        const auto col = td.paths.col(h - 1);
        const double em = col.mean();
        const double esd = std::sqrt((col.array() - em).square().mean());
        out.std_abs_err.push_back(std::abs(pred_std[h - 1] - esd));
    }
    std::int64_t inside = 0;
    for (Eigen::Index h = 0; h < H; ++h) {
        const auto col = td.paths.col(h);
        const double lo = pred_mean[h] - 2.0 * pred_std[h];
        const double hi = pred_mean[h] + 2.0 * pred_std[h];
        for (Eigen::Index p = 0; p < col.size(); ++p)
            if (col[p] >= lo && col[p] <= hi) ++inside;
    }
    out.coverage_2sigma = static_cast<double>(inside) /
                          (static_cast<double>(H) * static_cast<double>(td.paths.rows()));
    return out;
}

namespace detail {

/// Metric magnitudes past this multiple of the series' nominal stationary
/// variance (sine power + OU stationary variance) flag the cell as diverged.
inline double diverged_threshold(const SimSpec& spec) {
    return 1e6 * (0.5 * spec.amplitude * spec.amplitude + spec.ou.stationary_variance());
}

inline ModelMetrics compute_metrics(const ForecastDistribution& fc, const TestDistribution& td,
                                    const std::vector<int>& horizons, double threshold) {
    ModelMetrics m;
    for (int h : horizons) {
        const HorizonMse hm = mse_at_horizon(fc.mean[h - 1], td.paths.col(h - 1));
        m.mse_primary.push_back(hm.primary);
        m.mse_secondary.push_back(hm.secondary);
    }
    m.trajectory_mse = trajectory_mse(fc.mean, td);
    const StdMetrics sm = std_metrics(fc.mean, fc.std, td, horizons);
    m.std_abs_err = sm.std_abs_err;
    m.coverage_2sigma = sm.coverage_2sigma;
    for (double v : m.mse_primary)
        if (!std::isfinite(v) || v > threshold) m.diverged = true;
    if (!std::isfinite(m.trajectory_mse) || m.trajectory_mse > threshold) m.diverged = true;
    return m;
}

inline ModelMetrics failed_metrics(std::size_t n_horizons) {
    ModelMetrics m;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    m.mse_primary.assign(n_horizons, nan);
    m.mse_secondary.assign(n_horizons, nan);
    m.std_abs_err.assign(n_horizons, nan);
    m.diverged = true;
    m.fit_failed = true;
    return m;
}

// Seed streams hung off the per-trial seed.
constexpr std::uint64_t kStreamTrain = 1;
constexpr std::uint64_t kStreamTest = 2;
constexpr std::uint64_t kStreamSubsample = 3;
constexpr std::uint64_t kStreamModels = 16;

}  // namespace detail

/// Observation day for a trial: the configured start offset into the final
/// training year (defaults to n_trials evenly spaced phases).
inline int trial_observation_index(const TrialConfig& cfg, int trial_index) {
    int offset;
    if (cfg.start_offsets.empty()) {
        const int i = trial_index % cfg.n_trials;
        offset = static_cast<int>((static_cast<std::int64_t>(i) * cfg.sim.days_per_year) /
                                  cfg.n_trials);
    } else {
        offset = cfg.start_offsets[static_cast<std::size_t>(trial_index) % cfg.start_offsets.size()];
    }
    return (cfg.sim.n_years - 1) * cfg.sim.days_per_year + offset;
}

/// One pass of the five-step procedure: simulate a training realization up to
/// the observation day, build every representation, optimize every
/// (kernel x representation) GP plus the AR(1) baseline, forecast over the
/// full horizon, simulate the test distribution from the same observation
/// point, and score everything. A model whose fit fails is flagged, never
/// fatal. Deterministic given (cfg, trial_index, sweep_index).
inline TrialResult run_trial(const TrialConfig& cfg, int trial_index, int sweep_index = 0,
                             TrialArtifacts* artifacts = nullptr) {
    cfg.validate();
    const int t0 = trial_observation_index(cfg, trial_index);
    const int H = cfg.forecast_horizon;
    const std::uint64_t trial_seed =
        derive_seed(derive_seed(cfg.master_seed, static_cast<std::uint64_t>(sweep_index)),
                    static_cast<std::uint64_t>(trial_index));

    SimSpec train_spec = cfg.sim;
    train_spec.seed = derive_seed(trial_seed, detail::kStreamTrain);
    const SimulatedSeries sim = simulate_series(train_spec, t0 + 1);
    const SeriesGrid& grid = sim.grid;

    SimSpec test_spec = cfg.sim;
    test_spec.seed = derive_seed(trial_seed, detail::kStreamTest);
    const TestDistribution td =
        simulate_test_paths(test_spec, t0, sim.ou_final, cfg.n_test_paths, H);

    const double threshold = detail::diverged_threshold(cfg.sim);

    // Regime features, frozen per observation day. The lookahead equals the
    // delta cap: the regimes are defined by the same forward window the
    // augmentation trains on.
    const ComponentAccessor accessor = cfg.regime_source == RegimeSource::Deterministic
                                           ? deterministic_accessor(train_spec)
                                           : realized_accessor(grid);
    const double level_ref =
        cfg.regime_source == RegimeSource::Deterministic ? 0.0 : cfg.sim.ou.mu;
    FeatureProvider features;
    features.categorical = {true, true, true};
    features.at = [&accessor, &cfg, level_ref](int o) -> Eigen::VectorXd {
        return regime_onehot(accessor, o, cfg.max_delta, level_ref);
    };

    TrialResult result;
    result.trial_index = trial_index;
    result.t0 = t0;
    if (artifacts) {
        artifacts->train_grid = grid;
        artifacts->paths = td;
    }

    const auto record = [&](const ModelKey& key, const ForecastDistribution& fc,
                            bool beyond_delta, double lml, const Eigen::VectorXd& hyper) {
        ModelMetrics m = detail::compute_metrics(fc, td, cfg.horizons, threshold);
        m.lml = lml;
        m.hyper = hyper;
        result.models.emplace_back(key, std::move(m));
        if (artifacts) artifacts->forecasts.push_back({key, fc, beyond_delta});
    };

    // AR(1) baseline, always included.
    try {
        const AR1Params ar = fit_ar1_mle(grid.values);
        const ForecastDistribution fc = ar1_forecast(ar, grid.values.back(), H);
        record(ModelKey::ar1(), fc, false, std::numeric_limits<double>::quiet_NaN(),
               Eigen::VectorXd());
    } catch (const std::invalid_argument&) {
        result.models.emplace_back(ModelKey::ar1(), detail::failed_metrics(cfg.horizons.size()));
    }

    // Representation training sets are shared across kernels.
    std::vector<AugmentedRow> aug_rows;
    bool have_aug_rows = false;
    const auto training_set_for = [&](RepresentationKind rep) -> TrainingSet {
        switch (rep) {
            case RepresentationKind::OneDim: return build_one_dim(grid);
            case RepresentationKind::Functional: return build_functional(grid);
            default: break;
        }
        if (!have_aug_rows) {
            aug_rows = subsample_rows(build_augmented_rows(grid, features, cfg.max_delta),
                                      cfg.subsample_budget,
                                      derive_seed(trial_seed, detail::kStreamSubsample),
                                      cfg.subsample_policy);
            have_aug_rows = true;
        }
        return to_training_set(aug_rows, rep, grid.days_per_year, features.categorical);
    };

    std::vector<TrainingSet> rep_sets;
    rep_sets.reserve(cfg.representations.size());
    for (RepresentationKind rep : cfg.representations) rep_sets.push_back(training_set_for(rep));

    OptimizeOptions opt;
    opt.length_scale_upper_bound = cfg.length_scale_upper_bound;

    std::uint64_t model_ordinal = 0;
    for (KernelFamily kernel : cfg.kernels) {
        for (std::size_t ri = 0; ri < cfg.representations.size(); ++ri, ++model_ordinal) {
            const RepresentationKind rep = cfg.representations[ri];
            const TrainingSet& ts = rep_sets[ri];
            const ModelKey key = ModelKey::gp(rep, kernel);
            const std::uint64_t opt_seed =
                derive_seed(trial_seed, detail::kStreamModels + model_ordinal);
            try {
                KernelSpec spec(kernel, ts.categorical_mask(), scale_aware_hyper(ts));
                const TrainedGP gp = optimize_hyperparams(ts, spec, cfg.restarts, opt_seed, opt);

                Eigen::VectorXd frozen;
                if (rep == RepresentationKind::Augmented1D ||
                    rep == RepresentationKind::FunctionalAugmented) {
                    const Eigen::VectorXd f = features.at(t0);
                    frozen.resize(1 + f.size());
                    frozen[0] = grid.values.back();
                    frozen.tail(f.size()) = f;
                }
                const QueryRows qr =
                    forecast_query_rows(grid, rep, t0, H, frozen, cfg.max_delta);
                const GpPrediction pred = predict(gp, qr.X, false, /*observation_level=*/true);

                ForecastDistribution fc;
                fc.horizons = Eigen::VectorXd::LinSpaced(H, 1, H);
                fc.mean = pred.mean;
                fc.std = pred.std;
                record(key, fc, qr.beyond_trained_delta, gp.lml, detail::pack_theta(gp.spec));
            } catch (const FitError&) {
                result.models.emplace_back(key, detail::failed_metrics(cfg.horizons.size()));
            }
        }
    }

    std::stable_sort(result.models.begin(), result.models.end(),
                     [](const auto& a, const auto& b) {
                         return a.first.sort_key() < b.first.sort_key();
                     });
    if (artifacts)
        std::stable_sort(artifacts->forecasts.begin(), artifacts->forecasts.end(),
                         [](const ModelForecast& a, const ModelForecast& b) {
                             return a.key.sort_key() < b.key.sort_key();
                         });
    return result;
}

enum class SweepAxis { Sigma, Kernel, Dof, TrainLength };

inline std::string to_string(SweepAxis a) {
    switch (a) {
        case SweepAxis::Sigma: return "sigma";
        case SweepAxis::Kernel: return "kernel";
        case SweepAxis::Dof: return "dof";
        case SweepAxis::TrainLength: return "train_length";
    }
    return "?";
}

inline SweepAxis sweep_axis_from_string(const std::string& s) {
    if (s == "sigma") return SweepAxis::Sigma;
    if (s == "kernel") return SweepAxis::Kernel;
    if (s == "dof") return SweepAxis::Dof;
    if (s == "train_length") return SweepAxis::TrainLength;
    throw std::invalid_argument("unknown sweep axis '" + s +
                                "' (expected sigma|kernel|dof|train_length)");
}

struct SweepSpec {
    SweepAxis axis = SweepAxis::Sigma;
    std::vector<double> values;          // sigma / dof / train-length axes
    std::vector<KernelFamily> kernels;   // kernel axis

    std::size_t n_points() const {
        return axis == SweepAxis::Kernel ? kernels.size() : values.size();
    }
    void validate() const {
        if (n_points() == 0) throw std::invalid_argument("SweepSpec: no sweep points");
    }
};

/// The trial configuration specialized to one sweep point.
inline TrialConfig config_at_point(const TrialConfig& base, const SweepSpec& sweep,
                                   std::size_t point) {
    TrialConfig cfg = base;
    switch (sweep.axis) {
        case SweepAxis::Sigma: cfg.sim.ou.sigma = sweep.values[point]; break;
        case SweepAxis::Dof:
            cfg.sim.noise = NoiseKind::student_t(sweep.values[point]);
            break;
        case SweepAxis::TrainLength:
            cfg.sim.n_years = static_cast<int>(std::llround(sweep.values[point]));
            break;
        case SweepAxis::Kernel: cfg.kernels = {sweep.kernels[point]}; break;
    }
    return cfg;
}

struct AggregatedCell {
    ModelKey key;
    std::vector<double> mse_mean;      // per horizon, mean over trials
    std::vector<double> mse_std;       // per horizon, sample std over trials
    std::vector<double> std_err_mean;  // per horizon
    double trajectory_mse_mean = std::numeric_limits<double>::quiet_NaN();
    double coverage_mean = std::numeric_limits<double>::quiet_NaN();
    bool diverged = false;
    int n_trials = 0;  // trials whose (finite) metrics entered the aggregate
};

struct SweepPointResult {
    std::string axis_label;
    double axis_numeric = std::numeric_limits<double>::quiet_NaN();
    std::vector<AggregatedCell> cells;
    std::vector<TrialResult> trials;
};

struct SweepReport {
    SweepAxis axis = SweepAxis::Sigma;
    std::vector<int> horizons;
    std::vector<SweepPointResult> points;
};

namespace detail {

inline void mean_and_std(const std::vector<double>& xs, double& mean, double& sdev) {
    double acc = 0.0;
    int n = 0;
    for (double x : xs)
        if (std::isfinite(x)) {
            acc += x;
            ++n;
        }
    if (n == 0) {
        mean = std::numeric_limits<double>::quiet_NaN();
        sdev = std::numeric_limits<double>::quiet_NaN();
        return;
    }
    mean = acc / n;
    if (n < 2) {
        sdev = 0.0;
        return;
    }
    double ss = 0.0;
    for (double x : xs)
        if (std::isfinite(x)) ss += (x - mean) * (x - mean);
    sdev = std::sqrt(ss / (n - 1));
}

inline std::vector<AggregatedCell> aggregate_trials(const std::vector<TrialResult>& trials,
                                                    std::size_t n_horizons) {
    std::vector<AggregatedCell> cells;
    if (trials.empty()) return cells;
    const std::size_t n_models = trials.front().models.size();
    for (std::size_t m = 0; m < n_models; ++m) {
        AggregatedCell cell;
        cell.key = trials.front().models[m].first;
        int finite = 0;
        for (std::size_t h = 0; h < n_horizons; ++h) {
            std::vector<double> mse, serr;
            for (const auto& t : trials) {
                mse.push_back(t.models[m].second.mse_primary[h]);
                serr.push_back(t.models[m].second.std_abs_err[h]);
            }
            double mu, sd;
            mean_and_std(mse, mu, sd);
            cell.mse_mean.push_back(mu);
            cell.mse_std.push_back(sd);
            mean_and_std(serr, mu, sd);
            cell.std_err_mean.push_back(mu);
        }
        std::vector<double> traj, cov;
        for (const auto& t : trials) {
            const ModelMetrics& mm = t.models[m].second;
            if (!(cell.key == t.models[m].first))
                throw std::logic_error("aggregate_trials: inconsistent model ordering");
            traj.push_back(mm.trajectory_mse);
            cov.push_back(mm.coverage_2sigma);
            cell.diverged = cell.diverged || mm.diverged || mm.fit_failed;
            if (std::isfinite(mm.trajectory_mse)) ++finite;
        }
        double sd;
        mean_and_std(traj, cell.trajectory_mse_mean, sd);
        mean_and_std(cov, cell.coverage_mean, sd);
        cell.n_trials = finite;
        cells.push_back(std::move(cell));
    }
    return cells;
}

}  // namespace detail

/// Called per completed trial when forecast dumping is on. File writing done
/// inside the callback must be per-trial independent so scheduling cannot
/// change any file's bytes.
using TrialSink = std::function<void(const SweepSpec&, std::size_t point, int trial,
                                     const TrialResult&, const TrialArtifacts&)>;

/// n_trials trials per sweep point, run in parallel (cfg.jobs workers),
/// reduced in (point, trial) order. Per-trial seeds derive from
/// (master seed, point index, trial index), so the report is bitwise
/// reproducible for a given config.
inline SweepReport run_sweep(const TrialConfig& cfg, const SweepSpec& sweep,
                             const TrialSink& sink = {}) {
    cfg.validate();
    sweep.validate();
    const std::size_t n_points = sweep.n_points();
    const std::size_t n_tasks = n_points * static_cast<std::size_t>(cfg.n_trials);

    std::vector<std::vector<TrialResult>> results(n_points);
    for (auto& v : results) v.resize(static_cast<std::size_t>(cfg.n_trials));

    unsigned jobs = cfg.jobs > 0 ? static_cast<unsigned>(cfg.jobs)
                                 : std::max(1u, std::thread::hardware_concurrency());
    jobs = std::min<unsigned>(jobs, static_cast<unsigned>(n_tasks));

    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    const auto worker = [&]() {
        for (;;) {
            const std::size_t task = next.fetch_add(1);
            if (task >= n_tasks) return;
            const std::size_t point = task / static_cast<std::size_t>(cfg.n_trials);
            const int trial = static_cast<int>(task % static_cast<std::size_t>(cfg.n_trials));
            try {
                const TrialConfig cfg_pt = config_at_point(cfg, sweep, point);
                TrialArtifacts artifacts;
                TrialArtifacts* ap = (sink || cfg.dump_forecasts) ? &artifacts : nullptr;
                TrialResult res = run_trial(cfg_pt, trial, static_cast<int>(point), ap);
                if (sink) sink(sweep, point, trial, res, artifacts);
                results[point][static_cast<std::size_t>(trial)] = std::move(res);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    SweepReport report;
    report.axis = sweep.axis;
    report.horizons = cfg.horizons;
    for (std::size_t p = 0; p < n_points; ++p) {
        SweepPointResult pt;
        if (sweep.axis == SweepAxis::Kernel) {
            pt.axis_label = to_string(sweep.kernels[p]);
        } else {
            char buf[40];
            std::snprintf(buf, sizeof(buf), "%.9g", sweep.values[p]);
            pt.axis_label = buf;
            pt.axis_numeric = sweep.values[p];
        }
        pt.cells = detail::aggregate_trials(results[p], cfg.horizons.size());
        pt.trials = std::move(results[p]);
        report.points.push_back(std::move(pt));
    }
    return report;
}

struct TradeDecision {
    bool trade = false;
    int best_index = -1;        // position in the forecast vectors, -1 = no trade
    double best_horizon = 0.0;  // horizon value at best_index
    int direction = 0;          // sign of (mean - current price) at best_index
    Eigen::VectorXd sharpe;     // per horizon; NaN where excluded
    std::vector<bool> excluded; // zero predicted std
};

/// Expected Sharpe per horizon: (|mean_h - price| - cost) / std_h. Horizons
/// with zero std are excluded (flagged). Best horizon is the argmax, ties to
/// the smallest horizon; if no positive Sharpe exists the decision is
/// no-trade.
inline TradeDecision expected_sharpe_select(const ForecastDistribution& fc, double current_price,
                                            double cost_per_trade) {
    if (cost_per_trade < 0.0)
        throw std::invalid_argument("expected_sharpe_select: cost >= 0 required");
    const Eigen::Index H = fc.mean.size();
    if (H < 1 || fc.std.size() != H || fc.horizons.size() != H)
        throw std::invalid_argument("expected_sharpe_select: malformed forecast");

    TradeDecision d;
    d.sharpe.resize(H);
    d.excluded.assign(static_cast<std::size_t>(H), false);
    for (Eigen::Index h = 0; h < H; ++h) {
        if (!(fc.std[h] >= 0.0))
            throw std::invalid_argument("expected_sharpe_select: negative std");
        if (fc.std[h] == 0.0) {
            d.excluded[static_cast<std::size_t>(h)] = true;
            d.sharpe[h] = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        d.sharpe[h] = (std::abs(fc.mean[h] - current_price) - cost_per_trade) / fc.std[h];
        if (d.best_index < 0 || d.sharpe[h] > d.sharpe[d.best_index]) d.best_index = static_cast<int>(h);
    }
    if (d.best_index >= 0 && d.sharpe[d.best_index] > 0.0) {
        d.trade = true;
        d.best_horizon = fc.horizons[d.best_index];
        const double move = fc.mean[d.best_index] - current_price;
        d.direction = move > 0.0 ? 1 : (move < 0.0 ? -1 : 0);
    } else {
        d.best_index = -1;
    }
    return d;
}

}  // namespace mrgp
