#pragma once

// Payment rule over the quality curve: the buyer pays bid-weighted gain
// minus the area under the curve up to the bid. With a monotone curve this
// makes truthful bidding a dominant strategy, which the tests exercise as a
// dominance property rather than assuming it.

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "allocation.hpp"
#include "core.hpp"

namespace datamarket {

// b * h(b) minus the trapezoidal integral of h over [0, b]. Exact for the
// piecewise-linear curves this library produces; clamped at zero against
// rounding on flat curves.
inline double myerson_payment(const QualityCurve& curve, double b) {
    if (!(b >= 0.0) || !(b <= curve.b_max()))
        throw input_error("myerson_payment: bid outside [0, b_max]");
    double hb = curve.value_at(b);
    double integral = 0.0;
    const auto& g = curve.grid;
    const auto& h = curve.h;
    for (std::size_t i = 1; i < g.size() && g[i - 1] < b; ++i) {
        if (g[i] <= b) {
            integral += (g[i] - g[i - 1]) * (h[i] + h[i - 1]) * 0.5;
        } else {
            double hb_part = curve.value_at(b);
            integral += (b - g[i - 1]) * (hb_part + h[i - 1]) * 0.5;
        }
    }
    return std::max(0.0, b * hb - integral);
}

// mu * h(b) - payment(b): the buyer's realized surplus at bid b.
inline double buyer_utility(const QualityCurve& curve, double mu, double b) {
    if (!(mu >= 0.0) || !std::isfinite(mu))
        throw input_error("buyer_utility: mu must be finite and >= 0");
    return mu * curve.value_at(b) - myerson_payment(curve, b);
}

// Utility-maximizing bid over the curve's grid plus mu itself, ties broken
// toward the smallest bid.
inline double best_response(const QualityCurve& curve, double mu) {
    if (!(mu >= 0.0) || !(mu <= curve.b_max()))
        throw input_error("best_response: mu outside [0, b_max]");
    std::vector<double> candidates = curve.grid;
    candidates.push_back(mu);
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()),
                     candidates.end());
    double best_bid = candidates.front();
    double best_u = buyer_utility(curve, mu, best_bid);
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        double u = buyer_utility(curve, mu, candidates[i]);
        if (u > best_u) {
            best_u = u;
            best_bid = candidates[i];
        }
    }
    return best_bid;
}

// Everything the market quotes for one bid at once.
struct RevenueQuote {
    double bid = 0.0;
    double gain_at_bid = 0.0;
    double payment = 0.0;
    std::optional<double> utility_at_mu;
};

inline RevenueQuote quote(const QualityCurve& curve, double b,
                          std::optional<double> mu = std::nullopt) {
    RevenueQuote q;
    q.bid = b;
    q.gain_at_bid = curve.value_at(b);
    q.payment = myerson_payment(curve, b);
    if (mu) q.utility_at_mu = *mu * q.gain_at_bid - q.payment;
    return q;
}

// Empirical Lipschitz constant of the payment in the posted price: max
// finite-difference slope across adjacent candidate-price curves, over a
// set of probe bids. The pricing schedule consumes this estimate.
inline double estimate_lipschitz(const std::vector<QualityCurve>& curves,
                                 const std::vector<double>& prices,
                                 const std::vector<double>& bids) {
    if (curves.size() != prices.size() || curves.size() < 2)
        throw input_error("estimate_lipschitz: need >= 2 price-indexed curves");
    double L = 0.0;
    for (std::size_t i = 1; i < curves.size(); ++i) {
        double dp = prices[i] - prices[i - 1];
        if (!(dp > 0.0))
            throw input_error("estimate_lipschitz: prices must be ascending");
        for (double b : bids) {
            double d = std::abs(myerson_payment(curves[i], b) -
                                myerson_payment(curves[i - 1], b));
            L = std::max(L, d / dp);
        }
    }
    return L;
}

}  // namespace datamarket
