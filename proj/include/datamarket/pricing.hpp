#pragma once

// Posted-price learning: multiplicative weights over an epsilon-net of
// candidate prices. Each buyer step multiplies every candidate's weight by
// (1 + delta * normalized-counterfactual-revenue), so the sampled posted
// price converges toward the best fixed price in hindsight.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "allocation.hpp"
#include "core.hpp"
#include "prediction.hpp"
#include "revenue.hpp"
#include "rng.hpp"

namespace datamarket {

// Uniform grid {0, eps, 2eps, ...} over [0, b_max], always including b_max.
struct EpsilonNet {
    double b_max = 0.0;
    double epsilon = 0.0;
    std::vector<double> points;

    std::size_t size() const { return points.size(); }
};

inline EpsilonNet make_epsilon_net(double b_max, double epsilon) {
    if (!(b_max > 0.0) || !std::isfinite(b_max))
        throw input_error("make_epsilon_net: b_max must be > 0");
    if (!(epsilon > 0.0) || !std::isfinite(epsilon))
        throw input_error("make_epsilon_net: epsilon must be > 0");
    EpsilonNet net;
    net.b_max = b_max;
    net.epsilon = std::min(epsilon, b_max);
    // The small slack absorbs cases like 1/0.01 evaluating just under 100.
    auto n = static_cast<std::size_t>(std::floor(b_max / net.epsilon + 1e-9));
    net.points.reserve(n + 2);
    for (std::size_t k = 0; k <= n; ++k)
        net.points.push_back(std::min(static_cast<double>(k) * net.epsilon, b_max));
    if (net.points.back() < b_max) net.points.push_back(b_max);
    net.points.erase(std::unique(net.points.begin(), net.points.end()),
                     net.points.end());
    return net;
}

class PriceState;

struct SampledPrice {
    double price = 0.0;
    std::size_t index = 0;
};

// Bookkeeping returned by a weight update so callers can verify the total-
// weight identity W' = W * (1 + delta * g_alg) numerically.
struct WeightUpdate {
    double total_before = 0.0;
    double total_after = 0.0;  // before any renormalization
    double g_alg = 0.0;        // weight-averaged normalized gain
    bool renormalized = false;
};

inline SampledPrice sample_price(PriceState& state);
inline WeightUpdate apply_weight_update(PriceState& state,
                                        const std::vector<double>& g);

// Multiplicative-weights state over the candidate prices. Weights start at
// one and are renormalized every 1000 updates to keep them in floating-point
// range; sampling probabilities are scale-invariant so that is invisible.
class PriceState {
  public:
    PriceState(EpsilonNet net, double delta, std::uint64_t rng_seed)
        : net_(std::move(net)), weights_(net_.size(), 1.0), delta_(delta),
          rng_(rng_seed) {
        if (net_.size() < 1) throw input_error("PriceState: empty net");
        if (!(delta > 0.0) || !(delta < 1.0))
            throw input_error("PriceState: delta must be in (0, 1)");
    }

    const EpsilonNet& net() const { return net_; }
    const std::vector<double>& weights() const { return weights_; }
    double delta() const { return delta_; }
    std::uint64_t updates() const { return updates_; }

  private:
    EpsilonNet net_;
    std::vector<double> weights_;
    double delta_;
    Rng rng_;
    std::uint64_t updates_ = 0;

    friend SampledPrice sample_price(PriceState& state);
    friend WeightUpdate apply_weight_update(PriceState& state,
                                            const std::vector<double>& g);
};

// Draws net point i with probability w_i / sum(w). Independent of the
// incoming bid by construction: the caller samples before seeing it.
inline SampledPrice sample_price(PriceState& state) {
    double total = 0.0;
    for (double w : state.weights_) total += w;
    double u = state.rng_.uniform01() * total;
    double acc = 0.0;
    std::size_t idx = state.weights_.size() - 1;
    for (std::size_t i = 0; i < state.weights_.size(); ++i) {
        acc += state.weights_[i];
        if (u < acc) {
            idx = i;
            break;
        }
    }
    return {state.net_.points[idx], idx};
}

inline WeightUpdate apply_weight_update(PriceState& state,
                                        const std::vector<double>& g) {
    if (g.size() != state.weights_.size())
        throw input_error("apply_weight_update: gain vector size mismatch");
    WeightUpdate upd;
    double dot = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!(g[i] >= 0.0) || !(g[i] <= 1.0))
            throw input_error("apply_weight_update: gains must lie in [0, 1]");
        upd.total_before += state.weights_[i];
        dot += state.weights_[i] * g[i];
    }
    upd.g_alg = dot / upd.total_before;
    for (std::size_t i = 0; i < g.size(); ++i) {
        state.weights_[i] *= 1.0 + state.delta_ * g[i];
        upd.total_after += state.weights_[i];
    }
    ++state.updates_;
    if (state.updates_ % 1000 == 0) {
        for (double& w : state.weights_) w /= upd.total_after;
        upd.renormalized = true;
    }
    return upd;
}

// Specs needed to evaluate counterfactual revenue at every candidate price.
struct CounterfactualSpec {
    AllocationSpec allocation;
    PredictorSpec predictor;
    GainSpec gain;
    std::size_t replications = 16;
};

// Revenue the market would have collected from (bid, task) at each candidate
// price: one quality curve per price, payment evaluated at the actual bid.
inline std::vector<double> counterfactual_revenues(
    const EpsilonNet& net, double bid, const PredictionTask& task,
    const FeatureMatrix& X, const CounterfactualSpec& spec) {
    auto curves = quality_curve_family(spec.allocation, net.points, X, task,
                                       spec.predictor, spec.gain, net.points,
                                       spec.replications);
    std::vector<double> out(curves.size());
    for (std::size_t i = 0; i < curves.size(); ++i)
        out[i] = myerson_payment(curves[i], bid);
    return out;
}

// One full update step: counterfactual revenues, normalize by b_max into
// [0,1], multiply weights. Returns the updated state.
inline PriceState update_weights(PriceState state, double bid,
                                 const PredictionTask& task,
                                 const FeatureMatrix& X,
                                 const CounterfactualSpec& spec) {
    auto revenues = counterfactual_revenues(state.net(), bid, task, X, spec);
    std::vector<double> g(revenues.size());
    for (std::size_t i = 0; i < revenues.size(); ++i)
        g[i] = std::clamp(revenues[i] / state.net().b_max, 0.0, 1.0);
    apply_weight_update(state, g);
    return state;
}

struct HyperParams {
    double epsilon = 0.0;
    double delta = 0.0;
};

// Horizon-tuned schedule, the one that makes average regret shrink like
// 1/sqrt(N): epsilon = 1/(L*sqrt(N)), delta = sqrt(ln|net|/N). Epsilon is
// clamped into [b_max/4096, b_max] to bound the net size for very large N.
inline HyperParams hyperparameters(std::size_t n_buyers, double lipschitz,
                                   double b_max) {
    if (n_buyers < 1) throw input_error("hyperparameters: need N >= 1");
    if (!(lipschitz > 0.0)) throw input_error("hyperparameters: L must be > 0");
    if (!(b_max > 0.0)) throw input_error("hyperparameters: b_max must be > 0");
    HyperParams hp;
    double raw = 1.0 / (lipschitz * std::sqrt(static_cast<double>(n_buyers)));
    hp.epsilon = std::clamp(raw, b_max / 4096.0, b_max);
    auto net = make_epsilon_net(b_max, hp.epsilon);
    hp.delta = std::sqrt(std::log(static_cast<double>(net.size())) /
                         static_cast<double>(n_buyers));
    return hp;
}

// Per-step revenue bookkeeping consumed by the regret evaluation: what the
// market actually earned, and what each candidate price would have earned.
struct RevenueLog {
    std::vector<double> realized;
    std::vector<std::vector<double>> candidate;
};

struct RegretSummary {
    double best_fixed_price = 0.0;
    double best_fixed_total = 0.0;
    double realized_total = 0.0;
    double regret_total = 0.0;
    double regret_average = 0.0;
};

// Brute-forces the best fixed candidate price over the recorded sequence.
inline RegretSummary hindsight_regret(const RevenueLog& log,
                                      const EpsilonNet& net) {
    if (log.realized.empty())
        throw input_error("hindsight_regret: empty revenue log");
    if (log.candidate.size() != log.realized.size())
        throw input_error("hindsight_regret: log length mismatch");
    std::vector<double> totals(net.size(), 0.0);
    for (const auto& row : log.candidate) {
        if (row.size() != net.size())
            throw input_error("hindsight_regret: candidate row size mismatch");
        for (std::size_t i = 0; i < row.size(); ++i) totals[i] += row[i];
    }
    RegretSummary s;
    std::size_t best = 0;
    for (std::size_t i = 1; i < totals.size(); ++i)
        if (totals[i] > totals[best]) best = i;
    s.best_fixed_price = net.points[best];
    s.best_fixed_total = totals[best];
    for (double r : log.realized) s.realized_total += r;
    s.regret_total = s.best_fixed_total - s.realized_total;
    s.regret_average = s.regret_total / static_cast<double>(log.realized.size());
    return s;
}

}  // namespace datamarket
