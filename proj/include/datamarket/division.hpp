#pragma once

// Revenue division among sellers: exact Shapley values for small markets,
// permutation-sampled estimates for larger ones, and a similarity-penalized
// variant that makes replicating a feature row unprofitable. Also the
// penalty-function validity checker and the replication stress harness.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <list>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "core.hpp"
#include "prediction.hpp"
#include "rng.hpp"

namespace datamarket {

enum class DivisionKind { exact, sampled, robust };

struct DivisionVector {
    std::vector<double> psi;
    DivisionKind kind = DivisionKind::exact;
    std::size_t samples = 0;   // K for sampled/robust
    double lambda = 0.0;       // penalty rate for robust

    // Nonnegative simplex shares scaled to a revenue amount; all-zero when
    // the division carries no mass.
    std::vector<double> revenue_shares(double revenue) const {
        std::vector<double> s(psi.size(), 0.0);
        double total = 0.0;
        for (double v : psi) total += std::max(0.0, v);
        if (total <= 0.0) return s;
        for (std::size_t i = 0; i < psi.size(); ++i)
            s[i] = revenue * std::max(0.0, psi[i]) / total;
        return s;
    }
};

// Coalition value v(S): the gain a predictor trained on feature subset S
// achieves. Coalitions are canonicalized to their distinct-row classes
// before evaluation (duplicate rows cannot change predictions, by the
// dedup guarantee of fit_predict), then memoized under an LRU bound.
// Single-threaded by design; parallel callers must hold their own oracle.
class CoalitionValueOracle {
  public:
    static constexpr std::size_t cache_capacity = std::size_t{1} << 20;

    static CoalitionValueOracle from_market(const FeatureMatrix& X,
                                            const PredictionTask& task,
                                            const PredictorSpec& pspec,
                                            const GainSpec& gspec) {
        if (X.rows() < 1) throw input_error("CoalitionValueOracle: need M >= 1");
        if (X.rows() > 64)
            throw input_error("CoalitionValueOracle: more than 64 sellers");
        if (X.cols() != task.columns())
            throw input_error("CoalitionValueOracle: column count mismatch");
        task.validate();
        CoalitionValueOracle o;
        o.members_ = X.rows();
        o.X_ = X;
        o.task_ = task;
        o.pspec_ = pspec;
        o.gspec_ = gspec;
        o.build_classes();
        return o;
    }

    // Synthetic game over raw masks; every member is its own class.
    static CoalitionValueOracle from_function(
        std::size_t members, std::function<double(std::uint64_t)> fn) {
        if (members < 1 || members > 64)
            throw input_error("CoalitionValueOracle: members must be in [1, 64]");
        CoalitionValueOracle o;
        o.members_ = members;
        o.fn_ = std::move(fn);
        o.class_bit_.resize(members);
        for (std::size_t m = 0; m < members; ++m)
            o.class_bit_[m] = std::uint64_t{1} << m;
        return o;
    }

    std::size_t members() const { return members_; }

    std::uint64_t canonicalize(std::uint64_t mask) const {
        std::uint64_t c = 0;
        for (std::size_t m = 0; m < members_; ++m)
            if (mask & (std::uint64_t{1} << m)) c |= class_bit_[m];
        return c;
    }

    double value(std::uint64_t mask) const {
        check_mask(mask);
        return value_canonical(canonicalize(mask));
    }

    // Marginal contribution of every member along one join order: entry m is
    // v(prefix-of-m plus m) minus v(prefix-of-m). A member whose duplicate
    // class is already present contributes exactly zero.
    std::vector<double> scan_marginals(const std::vector<std::size_t>& perm) const {
        if (perm.size() != members_)
            throw input_error("scan_marginals: permutation size mismatch");
        if (!fn_ && pspec_.kind == PredictorKind::k_nearest_neighbor)
            return scan_marginals_knn(perm);
        std::vector<double> out(members_, 0.0);
        std::uint64_t cmask = 0;
        double prev = value_canonical(0);
        for (std::size_t m : perm) {
            std::uint64_t bit = class_bit_[m];
            if (bit == 0 || (cmask & bit)) {
                out[m] = 0.0;
                continue;
            }
            cmask |= bit;
            double cur = value_canonical(cmask);
            out[m] = cur - prev;
            prev = cur;
        }
        return out;
    }

  private:
    CoalitionValueOracle() = default;

    void check_mask(std::uint64_t mask) const {
        if (members_ < 64 && (mask >> members_) != 0)
            throw input_error("CoalitionValueOracle: mask names unknown member");
    }

    void build_classes() {
        auto keep = unique_row_indices(X_);
        // keep[] holds class representatives in first-occurrence order.
        // Identically-zero rows map to no bit at all: fits ignore them, so
        // coalitions with and without them are the same coalition.
        class_bit_.assign(members_, 0);
        for (std::size_t m = 0; m < members_; ++m) {
            auto rm = X_.row(m);
            if (std::all_of(rm.begin(), rm.end(), [](double v) { return v == 0.0; }))
                continue;
            for (std::size_t c = 0; c < keep.size(); ++c) {
                auto rc = X_.row(keep[c]);
                if (std::equal(rm.begin(), rm.end(), rc.begin())) {
                    class_bit_[m] = std::uint64_t{1} << c;
                    break;
                }
            }
        }
        class_rep_ = std::move(keep);
    }

    double value_canonical(std::uint64_t cmask) const {
        if (auto hit = cache_get(cmask)) return *hit;
        double v;
        if (fn_) {
            v = fn_(cmask);
        } else {
            std::vector<std::size_t> rows;
            for (std::size_t c = 0; c < class_rep_.size(); ++c)
                if (cmask & (std::uint64_t{1} << c)) rows.push_back(class_rep_[c]);
            auto pred = fit_predict(pspec_, feature_subset(X_, rows), task_);
            v = gain(gspec_, task_.y_test(), pred);
        }
        cache_put(cmask, v);
        return v;
    }

    // Incremental permutation scan for the k-nearest-neighbor predictor:
    // adding one feature row updates the train/test distance table in
    // O(T_train * T_test) instead of refitting the coalition from scratch.
    std::vector<double> scan_marginals_knn(const std::vector<std::size_t>& perm) const {
        const auto& tr = task_.train_columns;
        const auto& te = task_.test_columns;
        const auto y_train = task_.y_train();
        const auto y_test = task_.y_test();
        std::vector<double> dist(te.size() * tr.size(), 0.0);
        std::vector<double> out(members_, 0.0);
        std::uint64_t cmask = 0;
        double prev = value_canonical(0);
        for (std::size_t m : perm) {
            std::uint64_t bit = class_bit_[m];
            if (bit == 0 || (cmask & bit)) {
                out[m] = 0.0;
                continue;
            }
            cmask |= bit;
            auto r = X_.row(m);
            for (std::size_t s = 0; s < te.size(); ++s) {
                double b = r[te[s]];
                for (std::size_t t = 0; t < tr.size(); ++t) {
                    double d = r[tr[t]] - b;
                    dist[s * tr.size() + t] += d * d;
                }
            }
            auto pred = detail::knn_from_distances(dist, y_train, te.size(), pspec_.k);
            double cur = gain(gspec_, y_test, pred);
            out[m] = cur - prev;
            prev = cur;
        }
        return out;
    }

    std::optional<double> cache_get(std::uint64_t key) const {
        auto it = cache_.find(key);
        if (it == cache_.end()) return std::nullopt;
        lru_.splice(lru_.begin(), lru_, it->second.second);
        return it->second.first;
    }

    void cache_put(std::uint64_t key, double v) const {
        if (cache_.size() >= cache_capacity) {
            cache_.erase(lru_.back());
            lru_.pop_back();
        }
        lru_.push_front(key);
        cache_.emplace(key, std::make_pair(v, lru_.begin()));
    }

    std::size_t members_ = 0;
    FeatureMatrix X_;
    PredictionTask task_;
    PredictorSpec pspec_;
    GainSpec gspec_;
    std::function<double(std::uint64_t)> fn_;
    std::vector<std::uint64_t> class_bit_;
    std::vector<std::size_t> class_rep_;
    mutable std::unordered_map<std::uint64_t,
                               std::pair<double, std::list<std::uint64_t>::iterator>>
        cache_;
    mutable std::list<std::uint64_t> lru_;
};

// Exact Shapley values by full coalition enumeration; 2^M oracle calls, so
// capped at M = 12. Larger markets should use shapley_approx.
inline DivisionVector shapley_exact(const CoalitionValueOracle& oracle) {
    const std::size_t M = oracle.members();
    if (M > 12)
        throw input_error(
            "shapley_exact: M > 12 needs exponential enumeration; "
            "use shapley_approx");
    // Position weights |T|! (M-|T|-1)! / M!; exact in double for M <= 12.
    std::vector<double> fact(M + 1, 1.0);
    for (std::size_t i = 1; i <= M; ++i)
        fact[i] = fact[i - 1] * static_cast<double>(i);
    std::vector<double> w(M);
    for (std::size_t t = 0; t < M; ++t)
        w[t] = fact[t] * fact[M - t - 1] / fact[M];
    const std::uint64_t full = (M == 64) ? ~std::uint64_t{0}
                                         : ((std::uint64_t{1} << M) - 1);
    std::vector<double> value(std::size_t{1} << M);
    for (std::uint64_t s = 0; s <= full; ++s) value[s] = oracle.value(s);
    DivisionVector out;
    out.kind = DivisionKind::exact;
    out.psi.assign(M, 0.0);
    for (std::uint64_t t = 0; t <= full; ++t) {
        auto size = static_cast<std::size_t>(std::popcount(t));
        for (std::size_t m = 0; m < M; ++m) {
            std::uint64_t bit = std::uint64_t{1} << m;
            if (t & bit) continue;
            out.psi[m] += w[size] * (value[t | bit] - value[t]);
        }
    }
    return out;
}

// Monte-Carlo Shapley estimate: K uniform permutations with replacement,
// per-sample seeds derived from rng_seed so the result is reproducible and
// independent of evaluation order.
inline DivisionVector shapley_approx(const CoalitionValueOracle& oracle,
                                     std::size_t K, std::uint64_t rng_seed) {
    if (K < 1) throw input_error("shapley_approx: K must be >= 1");
    const std::size_t M = oracle.members();
    std::vector<double> acc(M, 0.0);
    for (std::size_t k = 0; k < K; ++k) {
        Rng rng(derive_seed(rng_seed, k));
        auto perm = rng.permutation(M);
        auto marginals = oracle.scan_marginals(perm);
        for (std::size_t m = 0; m < M; ++m) acc[m] += marginals[m];
    }
    DivisionVector out;
    out.kind = DivisionKind::sampled;
    out.samples = K;
    out.psi.resize(M);
    for (std::size_t m = 0; m < M; ++m)
        out.psi[m] = acc[m] / static_cast<double>(K);
    return out;
}

// Permutation count for an (epsilon, delta) uniform guarantee across
// sellers: ceil(M * ln(2/delta) / (2 epsilon^2)) + 1.
inline std::size_t sample_size(std::size_t M, double epsilon, double delta) {
    if (M < 1) throw input_error("sample_size: M must be >= 1");
    if (!(epsilon > 0.0) || !(epsilon <= 1.0))
        throw input_error("sample_size: epsilon must be in (0, 1]");
    if (!(delta > 0.0) || !(delta < 2.0))
        throw input_error("sample_size: delta must be in (0, 2)");
    double k = static_cast<double>(M) * std::log(2.0 / delta) /
               (2.0 * epsilon * epsilon);
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(k)) + 1);
}

enum class SimilarityKind { cosine, inverse_hellinger };

struct SimilaritySpec {
    SimilarityKind kind = SimilarityKind::cosine;
    std::size_t hellinger_bins = 16;

    void validate() const {
        if (hellinger_bins < 1)
            throw input_error("SimilaritySpec: need at least one bin");
    }
};

// Pairwise similarity in [0, 1]: absolute cosine, or one minus the
// Hellinger distance between equal-width histograms over the joint range.
inline double similarity(const SimilaritySpec& spec,
                         std::span<const double> x1,
                         std::span<const double> x2) {
    spec.validate();
    if (x1.size() != x2.size() || x1.empty())
        throw input_error("similarity: vectors must have equal nonzero length");
    switch (spec.kind) {
        case SimilarityKind::cosine: {
            double dot = 0.0, n1 = 0.0, n2 = 0.0;
            for (std::size_t i = 0; i < x1.size(); ++i) {
                dot += x1[i] * x2[i];
                n1 += x1[i] * x1[i];
                n2 += x2[i] * x2[i];
            }
            if (!(n1 > 0.0) || !(n2 > 0.0))
                throw numeric_error("similarity: zero-norm vector has no cosine");
            return std::clamp(std::abs(dot) / std::sqrt(n1 * n2), 0.0, 1.0);
        }
        case SimilarityKind::inverse_hellinger: {
            double lo = x1[0], hi = x1[0];
            for (double v : x1) { lo = std::min(lo, v); hi = std::max(hi, v); }
            for (double v : x2) { lo = std::min(lo, v); hi = std::max(hi, v); }
            const std::size_t B = spec.hellinger_bins;
            std::vector<double> p(B, 0.0), q(B, 0.0);
            double width = hi - lo;
            auto bin = [&](double v) {
                if (width <= 0.0) return std::size_t{0};
                auto b = static_cast<std::size_t>((v - lo) / width *
                                                  static_cast<double>(B));
                return std::min(b, B - 1);
            };
            for (double v : x1) p[bin(v)] += 1.0 / static_cast<double>(x1.size());
            for (double v : x2) q[bin(v)] += 1.0 / static_cast<double>(x2.size());
            double sq = 0.0;
            for (std::size_t b = 0; b < B; ++b) {
                double d = std::sqrt(p[b]) - std::sqrt(q[b]);
                sq += d * d;
            }
            double hell = std::sqrt(0.5 * sq);
            return std::clamp(1.0 - hell, 0.0, 1.0);
        }
    }
    throw input_error("similarity: unknown similarity kind");
}

// For each seller, the summed similarity to every other seller's row; the
// exponent that drives the replication penalty.
inline std::vector<double> similarity_exponents(const FeatureMatrix& X,
                                                const SimilaritySpec& spec) {
    const std::size_t M = X.rows();
    std::vector<double> ex(M, 0.0);
    for (std::size_t i = 0; i < M; ++i)
        for (std::size_t j = i + 1; j < M; ++j) {
            double s = similarity(spec, X.row(i), X.row(j));
            ex[i] += s;
            ex[j] += s;
        }
    return ex;
}

namespace detail {

inline DivisionVector apply_similarity_penalty(DivisionVector psi,
                                               const FeatureMatrix& X,
                                               const SimilaritySpec& spec,
                                               double lambda) {
    if (!(lambda >= 0.0))
        throw input_error("shapley_robust: lambda must be >= 0");
    if (X.rows() != psi.psi.size())
        throw input_error("shapley_robust: psi/matrix size mismatch");
    auto ex = similarity_exponents(X, spec);
    for (std::size_t m = 0; m < psi.psi.size(); ++m)
        psi.psi[m] *= std::exp(-lambda * ex[m]);
    psi.kind = DivisionKind::robust;
    psi.lambda = lambda;
    return psi;
}

}  // namespace detail

// Default penalty rate: makes one perfect replica exactly halve a share.
inline constexpr double default_penalty_lambda = std::numbers::ln2;

// Sampled Shapley downweighted by exp(-lambda * summed similarity): sellers
// whose rows are near-duplicates of others forfeit the duplicated mass.
inline DivisionVector shapley_robust(const CoalitionValueOracle& oracle,
                                     const FeatureMatrix& X, std::size_t K,
                                     const SimilaritySpec& spec, double lambda,
                                     std::uint64_t rng_seed) {
    return detail::apply_similarity_penalty(shapley_approx(oracle, K, rng_seed),
                                            X, spec, lambda);
}

// Same penalty on top of the exact enumeration; for small golden cases.
inline DivisionVector shapley_robust_exact(const CoalitionValueOracle& oracle,
                                           const FeatureMatrix& X,
                                           const SimilaritySpec& spec,
                                           double lambda) {
    return detail::apply_similarity_penalty(shapley_exact(oracle), X, spec,
                                            lambda);
}

// Validity check for a replication penalty f: (c+1) f(x+c) <= f(x) must hold
// for every grid x and integer copy count c. Slack bookkeeping doubles as
// the equality detector (slack ~ 0 where the bound is tight).
struct PenaltyCheck {
    bool valid = true;
    std::optional<double> violation_x;
    std::optional<int> violation_c;
    double min_slack = std::numeric_limits<double>::infinity();
    double min_slack_x = 0.0;
    int min_slack_c = 0;
};

inline PenaltyCheck penalty_valid(const std::function<double(double)>& f,
                                  int c_max, const std::vector<double>& x_grid,
                                  double tol = 1e-12) {
    if (c_max < 1) throw input_error("penalty_valid: c_max must be >= 1");
    if (x_grid.empty()) throw input_error("penalty_valid: empty x grid");
    PenaltyCheck out;
    for (double x : x_grid) {
        double fx = f(x);
        for (int c = 1; c <= c_max; ++c) {
            double slack = fx - static_cast<double>(c + 1) * f(x + c);
            if (slack < out.min_slack) {
                out.min_slack = slack;
                out.min_slack_x = x;
                out.min_slack_c = c;
            }
            if (slack < -tol && out.valid) {
                out.valid = false;
                out.violation_x = x;
                out.violation_c = c;
            }
        }
    }
    return out;
}

// Replication stress run: copies of seller rows are appended per `copies`,
// robust divisions are computed on both markets, and each original seller's
// replicated family total must not exceed their original share by more
// than eps. Sample counts follow the robust-guarantee sizing (eps/3).
struct ReplicationReport {
    bool holds = true;
    std::vector<double> original;        // robust psi on the base market
    std::vector<double> family_total;    // per original seller, on the replicated market
    double max_excess = 0.0;
    std::size_t samples_base = 0;
    std::size_t samples_replicated = 0;
};

inline ReplicationReport replication_robustness_test(
    const FeatureMatrix& X, const PredictionTask& task,
    const PredictorSpec& pspec, const GainSpec& gspec,
    const SimilaritySpec& sspec, const std::vector<std::size_t>& copies,
    double lambda, double eps, double delta, std::uint64_t rng_seed) {
    const std::size_t M = X.rows();
    if (copies.size() != M)
        throw input_error("replication_robustness_test: copies size mismatch");
    if (!(eps > 0.0)) throw input_error("replication_robustness_test: eps <= 0");

    std::vector<std::vector<double>> rows;
    std::vector<std::string> ids;
    std::vector<std::size_t> owner;  // replicated row -> original seller
    for (std::size_t m = 0; m < M; ++m) {
        rows.emplace_back(X.row(m).begin(), X.row(m).end());
        ids.push_back(X.seller_ids()[m]);
        owner.push_back(m);
    }
    for (std::size_t m = 0; m < M; ++m)
        for (std::size_t c = 0; c < copies[m]; ++c) {
            rows.emplace_back(X.row(m).begin(), X.row(m).end());
            ids.push_back(X.seller_ids()[m] + "+" + std::to_string(c + 1));
            owner.push_back(m);
        }
    FeatureMatrix Xr(rows, ids);

    ReplicationReport rep;
    rep.samples_base = sample_size(M, eps / 3.0, delta);
    rep.samples_replicated = sample_size(Xr.rows(), eps / 3.0, delta);

    auto base_oracle = CoalitionValueOracle::from_market(X, task, pspec, gspec);
    auto base = shapley_robust(base_oracle, X, rep.samples_base, sspec, lambda,
                               derive_seed(rng_seed, 1));
    auto repl_oracle = CoalitionValueOracle::from_market(Xr, task, pspec, gspec);
    auto repl = shapley_robust(repl_oracle, Xr, rep.samples_replicated, sspec,
                               lambda, derive_seed(rng_seed, 2));

    rep.original = base.psi;
    rep.family_total.assign(M, 0.0);
    for (std::size_t r = 0; r < Xr.rows(); ++r)
        rep.family_total[owner[r]] += repl.psi[r];
    for (std::size_t m = 0; m < M; ++m) {
        double excess = rep.family_total[m] - rep.original[m];
        rep.max_excess = std::max(rep.max_excess, excess);
        if (excess > eps) rep.holds = false;
    }
    return rep;
}

}  // namespace datamarket
