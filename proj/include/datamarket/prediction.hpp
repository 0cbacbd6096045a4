#pragma once

// The marketplace's learning algorithm and gain scoring. Two reference
// predictors are provided: ridge regression on the feature rows (normal
// equations, no intercept) and k-nearest-neighbor over feature columns.
// Exact duplicate rows are removed before fitting so that replicating a
// feature can never change predictions; the division module's robustness
// guarantees lean on that invariance.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "core.hpp"

namespace datamarket {

enum class PredictorKind { ridge_regression, k_nearest_neighbor };
enum class GainKind { one_minus_rmse, normalized_accuracy };

struct PredictorSpec {
    PredictorKind kind = PredictorKind::ridge_regression;
    double ridge_lambda = 1e-6;
    std::size_t k = 3;

    void validate() const {
        if (!(ridge_lambda >= 0.0) || !std::isfinite(ridge_lambda))
            throw input_error("PredictorSpec: ridge_lambda must be >= 0");
        if (k < 1) throw input_error("PredictorSpec: k must be >= 1");
    }
};

struct GainSpec {
    GainKind kind = GainKind::one_minus_rmse;
};

// Indices of the rows that survive exact-duplicate removal, keeping the
// first occurrence of each distinct row, in original order.
inline std::vector<std::size_t> unique_row_indices(const FeatureMatrix& X) {
    std::vector<std::size_t> keep;
    keep.reserve(X.rows());
    for (std::size_t m = 0; m < X.rows(); ++m) {
        bool dup = false;
        auto rm = X.row(m);
        for (std::size_t j : keep) {
            auto rj = X.row(j);
            if (std::equal(rm.begin(), rm.end(), rj.begin())) {
                dup = true;
                break;
            }
        }
        if (!dup) keep.push_back(m);
    }
    return keep;
}

// Rows that actually enter a fit: exact duplicates collapse to their first
// occurrence and identically-zero rows are excluded, since they carry no data
// and would otherwise make a one-seller zero coalition differ from the
// baseline.
inline std::vector<std::size_t> effective_row_indices(const FeatureMatrix& X) {
    std::vector<std::size_t> keep = unique_row_indices(X);
    std::erase_if(keep, [&](std::size_t m) {
        auto r = X.row(m);
        return std::all_of(r.begin(), r.end(), [](double v) { return v == 0.0; });
    });
    return keep;
}

namespace detail {

// Solves G x = rhs for symmetric positive-definite G via Cholesky.
// G is row-major n x n and is overwritten with its factor.
inline std::vector<double> cholesky_solve(std::vector<double>& G,
                                          std::vector<double> rhs,
                                          std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = G[i * n + j];
            for (std::size_t k = 0; k < j; ++k) s -= G[i * n + k] * G[j * n + k];
            if (i == j) {
                if (!(s > 0.0))
                    throw numeric_error("ridge solve: singular normal equations");
                G[i * n + i] = std::sqrt(s);
            } else {
                G[i * n + j] = s / G[j * n + j];
            }
        }
    }
    // Forward then backward substitution on the factor.
    for (std::size_t i = 0; i < n; ++i) {
        double s = rhs[i];
        for (std::size_t k = 0; k < i; ++k) s -= G[i * n + k] * rhs[k];
        rhs[i] = s / G[i * n + i];
    }
    for (std::size_t ii = n; ii > 0; --ii) {
        std::size_t i = ii - 1;
        double s = rhs[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= G[k * n + i] * rhs[k];
        rhs[i] = s / G[i * n + i];
    }
    return rhs;
}

inline std::vector<double> ridge_predict(const FeatureMatrix& X,
                                         const std::vector<std::size_t>& rows,
                                         const PredictionTask& task,
                                         double lambda) {
    const std::size_t n = rows.size();
    const auto& tr = task.train_columns;
    const auto& te = task.test_columns;
    // Gram matrix over train columns plus the ridge diagonal.
    std::vector<double> G(n * n, 0.0);
    std::vector<double> rhs(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        auto ri = X.row(rows[i]);
        for (std::size_t j = 0; j <= i; ++j) {
            auto rj = X.row(rows[j]);
            double s = 0.0;
            for (std::size_t c : tr) s += ri[c] * rj[c];
            G[i * n + j] = s;
            G[j * n + i] = s;
        }
        G[i * n + i] += lambda;
        double s = 0.0;
        for (std::size_t c : tr) s += ri[c] * task.y[c];
        rhs[i] = s;
    }
    std::vector<double> beta = cholesky_solve(G, std::move(rhs), n);
    std::vector<double> pred(te.size(), 0.0);
    for (std::size_t j = 0; j < te.size(); ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += beta[i] * X.at(rows[i], te[j]);
        pred[j] = s;
    }
    return pred;
}

// Mean of the k nearest train targets per test column; ties between equal
// distances go to the smaller train index so the result is deterministic.
inline std::vector<double> knn_from_distances(
    const std::vector<double>& dist,  // [test][train], row-major
    const std::vector<double>& y_train, std::size_t n_test, std::size_t k) {
    const std::size_t n_train = y_train.size();
    const std::size_t k_eff = std::min(k, n_train);
    std::vector<std::pair<double, std::size_t>> order(n_train);
    std::vector<double> pred(n_test, 0.0);
    for (std::size_t s = 0; s < n_test; ++s) {
        for (std::size_t t = 0; t < n_train; ++t)
            order[t] = {dist[s * n_train + t], t};
        std::partial_sort(order.begin(), order.begin() + k_eff, order.end());
        double sum = 0.0;
        for (std::size_t i = 0; i < k_eff; ++i) sum += y_train[order[i].second];
        pred[s] = sum / static_cast<double>(k_eff);
    }
    return pred;
}

inline std::vector<double> knn_predict(const FeatureMatrix& X,
                                       const std::vector<std::size_t>& rows,
                                       const PredictionTask& task,
                                       std::size_t k) {
    const auto& tr = task.train_columns;
    const auto& te = task.test_columns;
    std::vector<double> dist(te.size() * tr.size(), 0.0);
    for (std::size_t m : rows) {
        auto r = X.row(m);
        for (std::size_t s = 0; s < te.size(); ++s) {
            double b = r[te[s]];
            for (std::size_t t = 0; t < tr.size(); ++t) {
                double d = r[tr[t]] - b;
                dist[s * tr.size() + t] += d * d;
            }
        }
    }
    return knn_from_distances(dist, task.y_train(), te.size(), k);
}

}  // namespace detail

// Fits on the train columns only and returns predictions for the test
// columns in task order. An empty effective feature set (no rows, or only
// zero rows) falls back to the train-mean baseline.
inline std::vector<double> fit_predict(const PredictorSpec& spec,
                                       const FeatureMatrix& X,
                                       const PredictionTask& task) {
    spec.validate();
    task.validate();
    if (X.rows() > 0 && X.cols() != task.columns())
        throw input_error("fit_predict: column count mismatch");
    std::vector<std::size_t> rows = effective_row_indices(X);
    if (rows.empty()) {
        auto ytr = task.y_train();
        double mean =
            std::accumulate(ytr.begin(), ytr.end(), 0.0) / static_cast<double>(ytr.size());
        return std::vector<double>(task.test_columns.size(), mean);
    }
    switch (spec.kind) {
        case PredictorKind::ridge_regression:
            return detail::ridge_predict(X, rows, task, spec.ridge_lambda);
        case PredictorKind::k_nearest_neighbor:
            return detail::knn_predict(X, rows, task, spec.k);
    }
    throw input_error("fit_predict: unknown predictor kind");
}

// Prediction gain in [0, 1]. The RMSE variant normalizes by the test-target
// range, so a constant test target has no meaningful scale and raises.
// The accuracy variant treats targets as labels and compares exactly.
inline double gain(const GainSpec& spec, const std::vector<double>& y_test,
                   const std::vector<double>& y_hat) {
    if (y_test.empty() || y_test.size() != y_hat.size())
        throw input_error("gain: vectors must have equal nonzero length");
    switch (spec.kind) {
        case GainKind::one_minus_rmse: {
            auto [lo, hi] = std::minmax_element(y_test.begin(), y_test.end());
            double range = *hi - *lo;
            if (!(range > 0.0))
                throw numeric_error("gain: degenerate test-target range");
            double se = 0.0;
            for (std::size_t i = 0; i < y_test.size(); ++i) {
                double d = y_hat[i] - y_test[i];
                se += d * d;
            }
            double rmse = std::sqrt(se / static_cast<double>(y_test.size())) / range;
            return std::clamp(1.0 - rmse, 0.0, 1.0);
        }
        case GainKind::normalized_accuracy: {
            double hits = 0.0;
            for (std::size_t i = 0; i < y_test.size(); ++i)
                if (y_hat[i] == y_test[i]) hits += 1.0;
            double acc = hits / static_cast<double>(y_test.size());
            return std::clamp(std::max(0.0, acc - 0.5) / 0.5, 0.0, 1.0);
        }
    }
    throw input_error("gain: unknown gain kind");
}

// Gain of the train-mean baseline on the task; the empty coalition's value.
inline double baseline_gain(const GainSpec& gspec, const PredictorSpec& pspec,
                            const PredictionTask& task) {
    auto pred = fit_predict(pspec, FeatureMatrix::empty(task.columns()), task);
    return gain(gspec, task.y_test(), pred);
}

}  // namespace datamarket
