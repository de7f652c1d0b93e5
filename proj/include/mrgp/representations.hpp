#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <functional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "mrgp/gp.hpp"
#include "mrgp/rng.hpp"

namespace mrgp {

/// A daily-sampled series indexed by (year, day-of-year). `values[i]` sits at
/// absolute day `year0 * days_per_year + day0 + i`.
struct SeriesGrid {
    std::vector<double> values;
    int days_per_year = 250;
    int year0 = 0;
    int day0 = 0;

    int size() const { return static_cast<int>(values.size()); }
    int absolute_day(int i) const { return year0 * days_per_year + day0 + i; }
    int year_of(int i) const { return absolute_day(i) / days_per_year; }
    int day_of(int i) const { return absolute_day(i) % days_per_year; }

    void validate() const {
        if (size() < 2) throw std::invalid_argument("SeriesGrid: need at least 2 values");
        if (days_per_year < 1) throw std::invalid_argument("SeriesGrid: days_per_year >= 1");
        if (day0 < 0 || day0 >= days_per_year)
            throw std::invalid_argument("SeriesGrid: day0 out of range");
        for (double v : values)
            if (!std::isfinite(v)) throw std::invalid_argument("SeriesGrid: non-finite value");
    }
};

/// One observation/target pair of the augmented layout (Table-style row):
/// explanatory fields frozen at the observation day, target `delta` days out.
struct AugmentedRow {
    int obs_year = 0;
    int obs_day = 0;
    double obs_price = 0.0;
    Eigen::VectorXd features;  // e.g. one-hot regime indicators
    int delta = 0;
    double target_price = 0.0;
};

enum class RepresentationKind { OneDim, Functional, Augmented1D, FunctionalAugmented };

inline std::string to_string(RepresentationKind k) {
    switch (k) {
        case RepresentationKind::OneDim: return "one_dim";
        case RepresentationKind::Functional: return "functional";
        case RepresentationKind::Augmented1D: return "augmented_1d";
        case RepresentationKind::FunctionalAugmented: return "functional_augmented";
    }
    return "?";
}

inline RepresentationKind representation_from_string(const std::string& s) {
    if (s == "one_dim") return RepresentationKind::OneDim;
    if (s == "functional") return RepresentationKind::Functional;
    if (s == "augmented_1d") return RepresentationKind::Augmented1D;
    if (s == "functional_augmented") return RepresentationKind::FunctionalAugmented;
    throw std::invalid_argument(
        "unknown representation '" + s +
        "' (expected one_dim|functional|augmented_1d|functional_augmented)");
}

/// Per-observation-day feature source for the augmented layouts. `at(i)`
/// returns the feature vector for grid index i; `categorical[j]` marks
/// feature j as a one-hot column for the kernel.
struct FeatureProvider {
    std::function<Eigen::VectorXd(int)> at;
    std::vector<bool> categorical;

    int size() const { return static_cast<int>(categorical.size()); }
    static FeatureProvider none() {
        return {[](int) { return Eigen::VectorXd(0); }, {}};
    }
};

/// X = absolute day (one column), y = prices.
inline TrainingSet build_one_dim(const SeriesGrid& grid) {
    grid.validate();
    TrainingSet ts;
    const int n = grid.size();
    ts.X.resize(n, 1);
    ts.y.resize(n);
    for (int i = 0; i < n; ++i) {
        ts.X(i, 0) = grid.absolute_day(i);
        ts.y[i] = grid.values[static_cast<std::size_t>(i)];
    }
    ts.dim_roles = {DimRole::Time};
    return ts;
}

/// X = (year index, day-of-year), y = prices. Prior years become curves the
/// kernel can reach even when the forecast leaves the current year's data.
inline TrainingSet build_functional(const SeriesGrid& grid) {
    grid.validate();
    TrainingSet ts;
    const int n = grid.size();
    ts.X.resize(n, 2);
    ts.y.resize(n);
    for (int i = 0; i < n; ++i) {
        ts.X(i, 0) = grid.year_of(i);
        ts.X(i, 1) = grid.day_of(i);
        ts.y[i] = grid.values[static_cast<std::size_t>(i)];
    }
    ts.dim_roles = {DimRole::Year, DimRole::Day};
    return ts;
}

/// Every (observation day o, delta in [0, max_delta]) pair with o + delta
/// inside the grid, in (o, delta) order.
inline std::vector<AugmentedRow> build_augmented_rows(const SeriesGrid& grid,
                                                      const FeatureProvider& features,
                                                      int max_delta) {
    grid.validate();
    if (max_delta < 1) throw std::invalid_argument("build_augmented_rows: max_delta >= 1");
    const int n = grid.size();
    std::vector<AugmentedRow> rows;
    rows.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(max_delta + 1));
    for (int o = 0; o < n; ++o) {
        const Eigen::VectorXd f = features.at ? features.at(o) : Eigen::VectorXd(0);
        const int dmax = std::min(max_delta, n - 1 - o);
        for (int delta = 0; delta <= dmax; ++delta) {
            AugmentedRow r;
            r.obs_year = grid.year_of(o);
            r.obs_day = grid.day_of(o);
            r.obs_price = grid.values[static_cast<std::size_t>(o)];
            r.features = f;
            r.delta = delta;
            r.target_price = grid.values[static_cast<std::size_t>(o + delta)];
            rows.push_back(std::move(r));
        }
    }
    return rows;
}

enum class SubsamplePolicy { Strided, Random };

inline SubsamplePolicy subsample_policy_from_string(const std::string& s) {
    if (s == "strided") return SubsamplePolicy::Strided;
    if (s == "random") return SubsamplePolicy::Random;
    throw std::invalid_argument("unknown subsample policy '" + s + "' (expected strided|random)");
}

namespace detail {

inline std::tuple<int, int, int> row_order_key(const AugmentedRow& r) {
    return {r.obs_year, r.obs_day, r.delta};
}

}  // namespace detail

/// Keeps every delta-0 row, plus `budget` delta>0 rows. The strided policy
/// walks the delta>0 rows in (observation, delta) order with stride
/// floor(count/budget) starting at offset 0, and always retains the full
/// delta block of the most recent observation day that reaches the maximum
/// delta, displacing the tail of the stride. The random policy (kept for
/// comparison, seeded) samples delta>0 rows uniformly without replacement.
/// Output size is exactly (#delta-0 rows) + min(budget, #delta>0 rows).
inline std::vector<AugmentedRow> subsample_rows(const std::vector<AugmentedRow>& rows, int budget,
                                                std::uint64_t seed,
                                                SubsamplePolicy policy = SubsamplePolicy::Strided) {
    if (budget < 1) throw std::invalid_argument("subsample_rows: budget >= 1");
    std::vector<AugmentedRow> zeros, pos;
    for (const auto& r : rows) (r.delta == 0 ? zeros : pos).push_back(r);
    std::stable_sort(pos.begin(), pos.end(), [](const AugmentedRow& a, const AugmentedRow& b) {
        return detail::row_order_key(a) < detail::row_order_key(b);
    });

    std::vector<AugmentedRow> picked;
    const int count_pos = static_cast<int>(pos.size());
    if (count_pos <= budget) {
        picked = pos;
    } else if (policy == SubsamplePolicy::Random) {
        std::vector<int> idx(pos.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
        std::mt19937_64 eng(seed);
        for (int i = 0; i < budget; ++i) {  // partial Fisher-Yates
            const auto j = i + static_cast<int>(eng() % static_cast<std::uint64_t>(count_pos - i));
            std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
        }
        for (int i = 0; i < budget; ++i) picked.push_back(pos[static_cast<std::size_t>(idx[i])]);
    } else {
        int dmax = 0;
        for (const auto& r : pos) dmax = std::max(dmax, r.delta);
        // Anchor block: all rows of the latest observation day whose deltas
        // reach dmax (the most recent fully-informed observation).
        std::pair<int, int> anchor{-1, -1};
        for (const auto& r : pos)
            if (r.delta == dmax) anchor = std::max(anchor, {r.obs_year, r.obs_day});
        std::vector<char> in_anchor(pos.size(), 0);
        int n_anchor = 0;
        for (std::size_t i = 0; i < pos.size(); ++i)
            if (std::pair<int, int>{pos[i].obs_year, pos[i].obs_day} == anchor) {
                if (n_anchor < budget) {
                    in_anchor[i] = 1;
                    ++n_anchor;
                }
            }
        const int take = budget - n_anchor;
        const int stride = count_pos / budget;
        int collected = 0;
        for (int k = 0; collected < take && k * stride < count_pos; ++k) {
            const auto i = static_cast<std::size_t>(k * stride);
            if (in_anchor[i]) continue;
            in_anchor[i] = 2;
            ++collected;
        }
        for (std::size_t i = 0; i < pos.size(); ++i)
            if (in_anchor[i]) picked.push_back(pos[i]);
    }

    std::vector<AugmentedRow> out = std::move(zeros);
    out.insert(out.end(), picked.begin(), picked.end());
    std::stable_sort(out.begin(), out.end(), [](const AugmentedRow& a, const AugmentedRow& b) {
        return detail::row_order_key(a) < detail::row_order_key(b);
    });
    return out;
}

/// Lay augmented rows out as a design matrix.
///   FunctionalAugmented: [obs_year, obs_day, obs_price, features..., delta]
///   Augmented1D:         [obs absolute day, obs_price, features..., delta]
/// `feature_categorical` marks which feature columns are one-hot (defaults
/// to none).
inline TrainingSet to_training_set(const std::vector<AugmentedRow>& rows, RepresentationKind kind,
                                   int days_per_year,
                                   const std::vector<bool>& feature_categorical = {}) {
    if (kind != RepresentationKind::Augmented1D && kind != RepresentationKind::FunctionalAugmented)
        throw std::invalid_argument(
            "to_training_set: only augmented kinds are built from rows (use "
            "build_one_dim/build_functional)");
    if (rows.empty()) throw std::invalid_argument("to_training_set: no rows");
    const int F = static_cast<int>(rows.front().features.size());
    if (!feature_categorical.empty() && static_cast<int>(feature_categorical.size()) != F)
        throw std::invalid_argument("to_training_set: feature_categorical size mismatch");

    const bool functional = kind == RepresentationKind::FunctionalAugmented;
    const int lead = functional ? 2 : 1;  // (year, day) or absolute day
    const int d = lead + 1 + F + 1;
    const int n = static_cast<int>(rows.size());

    TrainingSet ts;
    ts.X.resize(n, d);
    ts.y.resize(n);
    for (int i = 0; i < n; ++i) {
        const auto& r = rows[static_cast<std::size_t>(i)];
        if (r.features.size() != F)
            throw std::invalid_argument("to_training_set: ragged feature vectors");
        int c = 0;
        if (functional) {
            ts.X(i, c++) = r.obs_year;
            ts.X(i, c++) = r.obs_day;
        } else {
            ts.X(i, c++) = r.obs_year * days_per_year + r.obs_day;
        }
        ts.X(i, c++) = r.obs_price;
        for (int f = 0; f < F; ++f) ts.X(i, c++) = r.features[f];
        ts.X(i, c) = r.delta;
        ts.y[i] = r.target_price;
    }

    if (functional) ts.dim_roles = {DimRole::Year, DimRole::Day};
    else ts.dim_roles = {DimRole::Time};
    ts.dim_roles.push_back(DimRole::Feature);
    for (int f = 0; f < F; ++f) ts.dim_roles.push_back(DimRole::Feature);
    ts.dim_roles.push_back(DimRole::Delta);

    ts.categorical.assign(static_cast<std::size_t>(d), false);
    for (int f = 0; f < F; ++f)
        ts.categorical[static_cast<std::size_t>(lead + 1 + f)] =
            feature_categorical.empty() ? false : feature_categorical[static_cast<std::size_t>(f)];
    return ts;
}

struct QueryRows {
    Eigen::MatrixXd X;
    // Set when a delta-bearing query extends past the delta range seen in
    // training (prediction quality is known to decline out there).
    bool beyond_trained_delta = false;
};

/// Forecast-time design rows for horizons 1..horizon from observation index
/// t0. Augmented kinds freeze the observation fields: `frozen` carries
/// [obs_price, features...] and delta runs over the horizon. Pass the
/// max_delta used in training to get the extrapolation flag.
inline QueryRows forecast_query_rows(const SeriesGrid& grid, RepresentationKind kind, int t0,
                                     int horizon, const Eigen::VectorXd& frozen = {},
                                     int trained_max_delta = 0) {
    grid.validate();
    if (horizon < 1) throw std::invalid_argument("forecast_query_rows: horizon >= 1");
    if (t0 < 0 || t0 >= grid.size())
        throw std::invalid_argument("forecast_query_rows: t0 outside the grid");

    QueryRows q;
    switch (kind) {
        case RepresentationKind::OneDim:
            q.X.resize(horizon, 1);
            for (int h = 1; h <= horizon; ++h) q.X(h - 1, 0) = grid.absolute_day(t0) + h;
            break;
        case RepresentationKind::Functional:
            q.X.resize(horizon, 2);
            for (int h = 1; h <= horizon; ++h) {
                q.X(h - 1, 0) = grid.year_of(t0 + h);  // wraps into the next year
                q.X(h - 1, 1) = grid.day_of(t0 + h);
            }
            break;
        case RepresentationKind::Augmented1D:
        case RepresentationKind::FunctionalAugmented: {
            const bool functional = kind == RepresentationKind::FunctionalAugmented;
            const int lead = functional ? 2 : 1;
            q.X.resize(horizon, lead + frozen.size() + 1);
            for (int h = 1; h <= horizon; ++h) {
                int c = 0;
                if (functional) {
                    q.X(h - 1, c++) = grid.year_of(t0);
                    q.X(h - 1, c++) = grid.day_of(t0);
                } else {
                    q.X(h - 1, c++) = grid.absolute_day(t0);
                }
                for (Eigen::Index f = 0; f < frozen.size(); ++f) q.X(h - 1, c++) = frozen[f];
                q.X(h - 1, c) = h;
            }
            q.beyond_trained_delta = trained_max_delta > 0 && horizon > trained_max_delta;
            break;
        }
    }
    return q;
}

}  // namespace mrgp
