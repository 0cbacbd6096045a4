#pragma once

// The market loop: per buyer, sample a posted price, elicit a bid, degrade
// and hand over the features, collect the payment, divide it among sellers,
// then update the price weights with counterfactual revenues. One trace
// record per successful step; failed steps are recorded and skipped.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "allocation.hpp"
#include "core.hpp"
#include "division.hpp"
#include "prediction.hpp"
#include "pricing.hpp"
#include "revenue.hpp"
#include "rng.hpp"

namespace datamarket {

struct MarketConfig {
    AllocationSpec allocation;
    PredictorSpec predictor;
    GainSpec gain;
    SimilaritySpec similarity;
    double b_max = 1.0;
    // Price-learning schedule; unset fields are filled from the N-dependent
    // schedule using `lipschitz`.
    std::optional<double> epsilon;
    std::optional<double> delta;
    double lipschitz = 1.0;
    // Division parameters; unset sample count is sized from the epsilon/
    // delta pair below.
    double lambda = default_penalty_lambda;
    std::optional<std::size_t> shapley_samples;
    double shapley_epsilon = 0.1;
    double shapley_delta = 0.05;
    std::size_t replications = 16;
    std::uint64_t master_seed = 0;

    void validate() const {
        allocation.validate();
        predictor.validate();
        similarity.validate();
        if (!(b_max > 0.0) || !std::isfinite(b_max))
            throw input_error("MarketConfig: b_max must be > 0");
        if (epsilon && !(*epsilon > 0.0))
            throw input_error("MarketConfig: epsilon must be > 0");
        if (delta && (!(*delta > 0.0) || !(*delta < 1.0)))
            throw input_error("MarketConfig: delta must be in (0, 1)");
        if (!(lambda >= 0.0)) throw input_error("MarketConfig: lambda must be >= 0");
        if (!(lipschitz > 0.0))
            throw input_error("MarketConfig: lipschitz must be > 0");
        if (replications < 1)
            throw input_error("MarketConfig: replications must be >= 1");
    }
};

// Adversarial bid override: receives the step index, the buyer, the posted
// price, and the quality curve at that price; returns the bid to submit.
using StrategicBid = std::function<double(
    std::size_t, const BuyerInstance&, double, const QualityCurve&)>;

struct StepError {
    std::uint64_t step = 0;
    std::string message;
};

struct MarketRunResult {
    std::vector<TraceRecord> traces;
    RevenueLog revenue_log;  // rows align with traces
    std::vector<StepError> errors;
    EpsilonNet net;
    std::vector<double> final_weights;
    std::vector<double> seller_revenue;  // cumulative, per seller
    double epsilon_used = 0.0;
    double delta_used = 0.0;
};

// Runs the market over an ordered buyer stream. The posted price for step n
// is sampled before the buyer's bid exists, so it is measurable only with
// respect to history; a strategic-bid function, when given, replaces the
// best-response bid (a buyer's fixed `bid` field also overrides it).
inline MarketRunResult run_market(const MarketConfig& config,
                                  const FeatureMatrix& X,
                                  const std::vector<BuyerInstance>& buyers,
                                  const StrategicBid& strategic = nullptr) {
    config.validate();
    if (X.rows() < 1) throw input_error("run_market: need at least one seller");
    if (buyers.empty()) throw input_error("run_market: need at least one buyer");

    double eps = config.epsilon.value_or(0.0);
    double delta = config.delta.value_or(0.0);
    if (!config.epsilon || !config.delta) {
        auto hp = hyperparameters(buyers.size(), config.lipschitz, config.b_max);
        if (!config.epsilon) eps = hp.epsilon;
        // The schedule's delta exceeds 1 only for tiny N, where any valid
        // learning rate satisfies the (vacuous) bound; keep the state legal.
        if (!config.delta) delta = std::min(hp.delta, 0.999);
    }

    MarketRunResult result;
    result.net = make_epsilon_net(config.b_max, eps);
    result.epsilon_used = eps;
    result.delta_used = delta;
    result.seller_revenue.assign(X.rows(), 0.0);

    PriceState state(result.net, delta,
                     derive_seed(config.master_seed, 2));
    const std::size_t K = config.shapley_samples.value_or(sample_size(
        X.rows(), config.shapley_epsilon, config.shapley_delta));

    for (std::size_t n = 1; n <= buyers.size(); ++n) {
        // Price is drawn unconditionally so the sampling stream, and hence
        // every later price, is unaffected by what happens inside the step.
        SampledPrice posted = sample_price(state);
        std::uint64_t step_seed = derive_seed(config.master_seed, 1, n);
        try {
            const BuyerInstance& buyer = buyers[n - 1];
            buyer.validate();
            if (buyer.mu > config.b_max)
                throw input_error("run_market: buyer mu exceeds b_max");
            if (X.cols() != buyer.task.columns())
                throw input_error("run_market: task columns mismatch");

            AllocationSpec alloc = config.allocation;
            alloc.noise_seed = derive_seed(step_seed, 3);
            auto curves = quality_curve_family(
                alloc, result.net.points, X, buyer.task, config.predictor,
                config.gain, result.net.points, config.replications);
            const QualityCurve& posted_curve = curves[posted.index];

            double bid;
            if (strategic) {
                bid = strategic(n, buyer, posted.price, posted_curve);
                if (!(bid >= 0.0) || !(bid <= config.b_max))
                    throw input_error("run_market: strategic bid outside [0, b_max]");
            } else if (buyer.bid) {
                bid = *buyer.bid;
                if (bid > config.b_max)
                    throw input_error("run_market: buyer bid exceeds b_max");
            } else {
                bid = best_response(posted_curve, buyer.mu);
            }

            FeatureMatrix allocated = allocate(alloc, posted.price, bid, X);
            auto y_hat = fit_predict(config.predictor, allocated, buyer.task);
            double realized_gain = gain(config.gain, buyer.task.y_test(), y_hat);
            double revenue = myerson_payment(posted_curve, bid);

            auto oracle = CoalitionValueOracle::from_market(
                allocated, buyer.task, config.predictor, config.gain);
            auto division = shapley_robust(oracle, allocated, K,
                                           config.similarity, config.lambda,
                                           derive_seed(step_seed, 4));
            auto shares = division.revenue_shares(revenue);

            std::vector<double> candidate(curves.size());
            std::vector<double> g(curves.size());
            for (std::size_t i = 0; i < curves.size(); ++i) {
                candidate[i] = myerson_payment(curves[i], bid);
                g[i] = std::clamp(candidate[i] / config.b_max, 0.0, 1.0);
            }
            apply_weight_update(state, g);

            TraceRecord rec;
            rec.n = n;
            rec.price = posted.price;
            rec.bid = bid;
            rec.gain = realized_gain;
            rec.revenue = revenue;
            rec.division = shares;
            rec.seed = step_seed;
            rec.validate(X.rows());
            for (std::size_t m = 0; m < shares.size(); ++m)
                result.seller_revenue[m] += shares[m];
            result.traces.push_back(std::move(rec));
            result.revenue_log.realized.push_back(revenue);
            result.revenue_log.candidate.push_back(std::move(candidate));
        } catch (const std::exception& e) {
            result.errors.push_back({n, e.what()});
        }
    }
    result.final_weights = state.weights();
    return result;
}

}  // namespace datamarket
