#pragma once

// Allocation functions that degrade feature quality as the bid falls short
// of the posted price, and the empirical quality curve h(z): the gain a
// buyer would realize at hypothetical bid z against a fixed posted price.
// The curve is the object the payment rule integrates, so it is forced
// non-decreasing by construction (noise averaging + isotonic projection).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <optional>
#include <unordered_map>
#include <vector>

#include "core.hpp"
#include "prediction.hpp"
#include "rng.hpp"

namespace datamarket {

enum class AllocationKind { gaussian_noise, bernoulli_mask };

struct AllocationSpec {
    AllocationKind kind = AllocationKind::gaussian_noise;
    double sigma = 1.0;
    std::uint64_t noise_seed = 0;
    // Draw fresh noise per grid point instead of common random numbers.
    // Exists for sensitivity studies; curves are noisier with it on.
    bool fresh_noise = false;

    void validate() const {
        if (!(sigma > 0.0) || !std::isfinite(sigma))
            throw input_error("AllocationSpec: sigma must be > 0");
    }
};

namespace detail {

inline FeatureMatrix gaussian_degrade(const FeatureMatrix& X, double scale,
                                      double sigma, Rng& rng) {
    FeatureMatrix out = X;
    for (double& v : out.data()) v += scale * sigma * rng.normal();
    return out;
}

inline FeatureMatrix bernoulli_degrade(const FeatureMatrix& X, double theta,
                                       Rng& rng) {
    FeatureMatrix out = X;
    // Coupled draws: one uniform per entry, thresholded by theta, so a
    // higher keep rate can only keep a superset of entries.
    for (double& v : out.data())
        if (rng.uniform01() > theta) v = 0.0;
    return out;
}

}  // namespace detail

// Degrades X as a function of posted price p and bid b. A bid at or above
// the price returns X bit-exactly without consuming randomness.
inline FeatureMatrix allocate(const AllocationSpec& spec, double p, double b,
                              const FeatureMatrix& X) {
    spec.validate();
    if (!(p >= 0.0) || !(b >= 0.0) || !std::isfinite(p) || !std::isfinite(b))
        throw input_error("allocate: price and bid must be finite and >= 0");
    if (b >= p) return X;
    Rng rng(spec.noise_seed);
    switch (spec.kind) {
        case AllocationKind::gaussian_noise:
            return detail::gaussian_degrade(X, p - b, spec.sigma, rng);
        case AllocationKind::bernoulli_mask: {
            double theta = p == 0.0 ? 1.0 : std::min(b / p, 1.0);
            if (theta >= 1.0) return X;
            return detail::bernoulli_degrade(X, theta, rng);
        }
    }
    throw input_error("allocate: unknown allocation kind");
}

// Unweighted L2 isotonic projection (pool adjacent violators).
inline std::vector<double> isotonic_non_decreasing(std::vector<double> v) {
    struct Block {
        double sum;
        std::size_t count;
    };
    std::vector<Block> blocks;
    blocks.reserve(v.size());
    for (double x : v) {
        blocks.push_back({x, 1});
        while (blocks.size() > 1) {
            auto& b = blocks[blocks.size() - 1];
            auto& a = blocks[blocks.size() - 2];
            if (a.sum * static_cast<double>(b.count) <=
                b.sum * static_cast<double>(a.count))
                break;
            a.sum += b.sum;
            a.count += b.count;
            blocks.pop_back();
        }
    }
    std::vector<double> out;
    out.reserve(v.size());
    // The pooled means are non-decreasing as exact rationals, but the
    // divisions round independently and can invert by one ulp; the running
    // max repairs exactly those inversions.
    double prev = -std::numeric_limits<double>::infinity();
    for (const auto& b : blocks) {
        double mean = std::max(b.sum / static_cast<double>(b.count), prev);
        out.insert(out.end(), b.count, mean);
        prev = mean;
    }
    return out;
}

// Empirical gain-vs-bid curve on an ascending bid grid. Non-decreasing and
// [0,1]-valued by construction; the flat tail at z >= p carries the
// undegraded gain.
struct QualityCurve {
    std::vector<double> grid;
    std::vector<double> h;
    std::size_t replications = 0;

    double b_max() const { return grid.back(); }

    void validate() const {
        if (grid.size() < 2 || grid.size() != h.size())
            throw input_error("QualityCurve: need matching grid/h, >= 2 points");
        if (grid.front() != 0.0)
            throw input_error("QualityCurve: grid must start at 0");
        for (std::size_t i = 1; i < grid.size(); ++i)
            if (!(grid[i] > grid[i - 1]))
                throw input_error("QualityCurve: grid must be strictly ascending");
        for (std::size_t i = 0; i < h.size(); ++i) {
            if (!(h[i] >= 0.0) || !(h[i] <= 1.0))
                throw input_error("QualityCurve: h outside [0,1]");
            if (i > 0 && h[i] < h[i - 1])
                throw input_error("QualityCurve: h must be non-decreasing");
        }
    }

    // Linear interpolation of h at z; exact at grid points.
    double value_at(double z) const {
        if (!(z >= 0.0) || !(z <= grid.back()))
            throw input_error("QualityCurve: bid outside [0, b_max]");
        auto it = std::lower_bound(grid.begin(), grid.end(), z);
        std::size_t i = static_cast<std::size_t>(it - grid.begin());
        if (it != grid.end() && *it == z) return h[i];
        double t = (z - grid[i - 1]) / (grid[i] - grid[i - 1]);
        return h[i - 1] + t * (h[i] - h[i - 1]);
    }
};

namespace detail {

// Shared evaluator for curve construction. For gaussian noise with common
// random numbers the averaged gain depends on (p, z) only through the
// scalar degradation max(0, p - z); results are memoized by that scalar's
// bit pattern, which is what lets a whole family of candidate-price curves
// reuse one table while staying bit-identical to per-price evaluation.
class CurveEvaluator {
  public:
    CurveEvaluator(const AllocationSpec& spec, const FeatureMatrix& X,
                   const PredictionTask& task, const PredictorSpec& pspec,
                   const GainSpec& gspec, std::size_t R)
        : spec_(spec), X_(X), task_(task), pspec_(pspec), gspec_(gspec), R_(R) {
        if (R < 1) throw input_error("quality_curve: R must be >= 1");
        y_test_ = task.y_test();
        if (spec.kind == AllocationKind::gaussian_noise && !spec.fresh_noise) {
            noise_.reserve(R);
            for (std::size_t r = 0; r < R; ++r) {
                Rng rng(derive_seed(spec.noise_seed, r));
                std::vector<double> e(X.rows() * X.cols());
                for (double& v : e) v = rng.normal();
                noise_.push_back(std::move(e));
            }
        }
    }

    // Raw (pre-projection) curve value at bid z against posted price p.
    double raw_value(double p, double z, std::size_t grid_index) {
        if (z >= p) return undegraded();
        switch (spec_.kind) {
            case AllocationKind::gaussian_noise: {
                if (spec_.fresh_noise) return gaussian_fresh(p - z, grid_index);
                return gaussian_common(p - z);
            }
            case AllocationKind::bernoulli_mask: {
                double theta = p == 0.0 ? 1.0 : std::min(z / p, 1.0);
                if (theta >= 1.0) return undegraded();
                return bernoulli(theta, grid_index);
            }
        }
        throw input_error("quality_curve: unknown allocation kind");
    }

    double undegraded() {
        if (!undegraded_) {
            auto pred = fit_predict(pspec_, X_, task_);
            undegraded_ = gain(gspec_, y_test_, pred);
        }
        return *undegraded_;
    }

  private:
    double gaussian_common(double delta) {
        std::uint64_t key;
        std::memcpy(&key, &delta, sizeof key);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        double acc = 0.0;
        FeatureMatrix Xt = X_;
        for (std::size_t r = 0; r < R_; ++r) {
            const auto& e = noise_[r];
            for (std::size_t i = 0; i < e.size(); ++i)
                Xt.data()[i] = X_.data()[i] + delta * spec_.sigma * e[i];
            acc += gain(gspec_, y_test_, fit_predict(pspec_, Xt, task_));
        }
        double v = acc / static_cast<double>(R_);
        cache_.emplace(key, v);
        return v;
    }

    double gaussian_fresh(double delta, std::size_t grid_index) {
        double acc = 0.0;
        for (std::size_t r = 0; r < R_; ++r) {
            Rng rng(derive_seed(spec_.noise_seed, r, grid_index));
            FeatureMatrix Xt = X_;
            for (double& v : Xt.data()) v += delta * spec_.sigma * rng.normal();
            acc += gain(gspec_, y_test_, fit_predict(pspec_, Xt, task_));
        }
        return acc / static_cast<double>(R_);
    }

    double bernoulli(double theta, std::size_t grid_index) {
        double acc = 0.0;
        for (std::size_t r = 0; r < R_; ++r) {
            Rng rng(spec_.fresh_noise
                        ? derive_seed(spec_.noise_seed, r, grid_index)
                        : derive_seed(spec_.noise_seed, r));
            FeatureMatrix Xt = X_;
            for (double& v : Xt.data())
                if (rng.uniform01() > theta) v = 0.0;
            acc += gain(gspec_, y_test_, fit_predict(pspec_, Xt, task_));
        }
        return acc / static_cast<double>(R_);
    }

    const AllocationSpec& spec_;
    const FeatureMatrix& X_;
    const PredictionTask& task_;
    const PredictorSpec& pspec_;
    const GainSpec& gspec_;
    std::size_t R_;
    std::vector<double> y_test_;
    std::vector<std::vector<double>> noise_;
    std::unordered_map<std::uint64_t, double> cache_;
    std::optional<double> undegraded_;
};

inline void check_curve_grid(const std::vector<double>& grid) {
    if (grid.size() < 2) throw input_error("quality_curve: grid needs >= 2 points");
    if (grid.front() != 0.0) throw input_error("quality_curve: grid must start at 0");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1]))
            throw input_error("quality_curve: grid must be strictly ascending");
}

// Projects raw curve values onto the feasible set: non-decreasing, capped
// at the undegraded gain g0, and exactly g0 on the z >= p tail. PAV followed
// by an upper clip is the exact L2 projection for the capped monotone cone.
inline std::vector<double> project_curve(std::vector<double> raw,
                                         std::size_t tail_start, double g0) {
    std::vector<double> prefix(raw.begin(),
                               raw.begin() + static_cast<std::ptrdiff_t>(tail_start));
    prefix = isotonic_non_decreasing(std::move(prefix));
    for (double& v : prefix) v = std::clamp(v, 0.0, std::min(g0, 1.0));
    prefix.resize(raw.size(), std::clamp(g0, 0.0, 1.0));
    return prefix;
}

inline QualityCurve build_curve(CurveEvaluator& eval, double p,
                                const std::vector<double>& grid, std::size_t R) {
    std::vector<double> raw(grid.size());
    std::size_t tail_start = grid.size();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        raw[i] = eval.raw_value(p, grid[i], i);
        if (grid[i] >= p && tail_start == grid.size()) tail_start = i;
    }
    QualityCurve curve;
    curve.grid = grid;
    curve.h = project_curve(std::move(raw), tail_start, eval.undegraded());
    curve.replications = R;
    curve.validate();
    return curve;
}

}  // namespace detail

// Estimates h(z) on the given bid grid at posted price p: each grid point
// averages the realized gain over R seeded noise draws, then the curve is
// projected to be non-decreasing with an exact undegraded tail.
inline QualityCurve quality_curve(const AllocationSpec& spec, double p,
                                  const FeatureMatrix& X,
                                  const PredictionTask& task,
                                  const PredictorSpec& pspec,
                                  const GainSpec& gspec,
                                  const std::vector<double>& grid,
                                  std::size_t R = 16) {
    spec.validate();
    detail::check_curve_grid(grid);
    if (!(p >= 0.0) || !std::isfinite(p))
        throw input_error("quality_curve: price must be finite and >= 0");
    detail::CurveEvaluator eval(spec, X, task, pspec, gspec, R);
    return detail::build_curve(eval, p, grid, R);
}

// One curve per candidate price, sharing a single degradation table in the
// gaussian common-random-numbers mode. Each returned curve is bit-identical
// to quality_curve called with that price alone.
inline std::vector<QualityCurve> quality_curve_family(
    const AllocationSpec& spec, const std::vector<double>& prices,
    const FeatureMatrix& X, const PredictionTask& task,
    const PredictorSpec& pspec, const GainSpec& gspec,
    const std::vector<double>& grid, std::size_t R = 16) {
    spec.validate();
    detail::check_curve_grid(grid);
    std::vector<QualityCurve> out;
    out.reserve(prices.size());
    detail::CurveEvaluator eval(spec, X, task, pspec, gspec, R);
    for (double p : prices) {
        if (!(p >= 0.0) || !std::isfinite(p))
            throw input_error("quality_curve_family: price must be finite and >= 0");
        out.push_back(detail::build_curve(eval, p, grid, R));
    }
    return out;
}

}  // namespace datamarket
